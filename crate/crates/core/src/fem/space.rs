use std::collections::HashMap;
use std::sync::Arc;

use super::basis::{LagrangeElement, ReferenceShape};
use super::mesh::{BoundaryFacet, BoundaryTag, Mesh};
use super::quadrature::QuadratureRule;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat3, Vec3, ZERO3, ZERO33};

/// Continuous tensor-product Lagrange space `Q^k` on a mesh, with `components`
/// interleaved per node: DoF of component `c` at node `n` is
/// `n * components + c`.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    element: LagrangeElement,
    components: usize,
    cell_nodes: Vec<usize>,
    node_coords: Vec<Vec3>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize, components: usize) -> Result<Self> {
        if degree == 0 || degree > 4 {
            return Err(Error::InvalidArgument(format!("polynomial degree {degree} not supported (1..=4)")));
        }
        if components == 0 {
            return Err(Error::InvalidArgument("a space needs at least one component".into()));
        }
        let element = LagrangeElement::new(mesh.dim(), degree);
        let (cell_nodes, node_coords) = match mesh.structured() {
            Some(_) => enumerate_lattice(&mesh, &element),
            None => enumerate_by_position(&mesh, &element),
        };
        Ok(Self { mesh, element, components, cell_nodes, node_coords })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn element(&self) -> &LagrangeElement {
        &self.element
    }

    pub fn degree(&self) -> usize {
        self.element.degree
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_nodes() * self.components
    }

    pub fn nodes_per_cell(&self) -> usize {
        self.element.n_nodes()
    }

    pub fn cell_nodes(&self, cell: usize) -> &[usize] {
        let n = self.nodes_per_cell();
        &self.cell_nodes[cell * n..(cell + 1) * n]
    }

    pub fn node_coords(&self) -> &[Vec3] {
        &self.node_coords
    }

    pub fn dof(&self, node: usize, component: usize) -> usize {
        node * self.components + component
    }

    /// Nodes lying on boundary facets with the given tag, sorted and unique.
    /// Shape data at one reference point of a cell.
    pub fn shape_at(&self, cell: usize, xi: Vec3, want_hessian: bool) -> Result<ShapeEval> {
        let reference = self.element().shape(xi);
        map_shapes(self.mesh(), cell, xi, &reference, want_hessian, None)
    }

    pub fn boundary_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut out = Vec::new();
        for f in self.mesh.facets().iter().filter(|f| f.tag == tag) {
            out.extend(self.facet_nodes(f));
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Nodes lying on one boundary facet.
    pub fn facet_nodes(&self, facet: &BoundaryFacet) -> Vec<usize> {
        let (axis, side) = (facet.axis(), facet.side());
        let m = self.element.nodes_per_axis();
        let end = if side == 1 { m - 1 } else { 0 };
        self.cell_nodes(facet.cell)
            .iter()
            .enumerate()
            .filter(|(local, _)| self.element.lattice(*local)[axis] == end)
            .map(|(_, &node)| node)
            .collect()
    }
}

fn enumerate_lattice(mesh: &Mesh, element: &LagrangeElement) -> (Vec<usize>, Vec<Vec3>) {
    let s = mesh.structured().expect("structured mesh");
    let k = element.degree;
    let dim = mesh.dim();
    let mut n = [1usize; 3];
    for a in 0..dim {
        n[a] = k * s.counts[a] + 1;
    }
    let mut coords = Vec::with_capacity(n[0] * n[1] * n[2]);
    for l in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let idx = [i, j, l];
                let mut x = ZERO3;
                for a in 0..dim {
                    x[a] = if idx[a] == n[a] - 1 {
                        // exact far face
                        s.origin[a] + s.spacing[a] * s.counts[a] as f64
                    } else {
                        s.origin[a] + s.spacing[a] * idx[a] as f64 / k as f64
                    };
                }
                coords.push(x);
            }
        }
    }
    // use the mesh's own far-face coordinates for consistency
    let (_, hi) = mesh.bounding_box();
    for x in coords.iter_mut() {
        for a in 0..dim {
            if (x[a] - hi[a]).abs() <= 1e-12 * s.spacing[a] {
                x[a] = hi[a];
            }
        }
    }
    let ncz = if dim == 3 { s.counts[2] } else { 1 };
    let per = element.n_nodes();
    let mut cell_nodes = Vec::with_capacity(mesh.n_cells() * per);
    for cz in 0..ncz {
        for cy in 0..s.counts[1] {
            for cx in 0..s.counts[0] {
                for local in 0..per {
                    let l = element.lattice(local);
                    let gi = k * cx + l[0];
                    let gj = k * cy + l[1];
                    let gl = if dim == 3 { k * cz + l[2] } else { 0 };
                    cell_nodes.push(gi + n[0] * (gj + n[1] * gl));
                }
            }
        }
    }
    (cell_nodes, coords)
}

fn enumerate_by_position(mesh: &Mesh, element: &LagrangeElement) -> (Vec<usize>, Vec<Vec3>) {
    let q = 1e-7 * mesh.min_cell_size() / element.degree as f64;
    let key =
        |x: Vec3| -> [i64; 3] { [(x[0] / q).round() as i64, (x[1] / q).round() as i64, (x[2] / q).round() as i64] };
    let mut map: HashMap<[i64; 3], usize> = HashMap::new();
    let mut coords: Vec<Vec3> = Vec::new();
    let per = element.n_nodes();
    let mut cell_nodes = Vec::with_capacity(mesh.n_cells() * per);
    let dim = mesh.dim();
    for cell in 0..mesh.n_cells() {
        for local in 0..per {
            let x = mesh.map_point(cell, element.reference_node(local));
            let k = key(x);
            let mut found = None;
            // look in neighbouring bins so that rounding cannot split a node
            'search: for dz in if dim == 3 { -1..=1 } else { 0..=0 } {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if let Some(&id) = map.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                            if linalg::dist_sq(coords[id], x) <= (2.0 * q) * (2.0 * q) {
                                found = Some(id);
                                break 'search;
                            }
                        }
                    }
                }
            }
            let id = found.unwrap_or_else(|| {
                let id = coords.len();
                coords.push(x);
                map.insert(k, id);
                id
            });
            cell_nodes.push(id);
        }
    }
    (cell_nodes, coords)
}

/// Shape functions mapped to one physical point.
#[derive(Debug, Clone)]
pub struct ShapeEval {
    pub values: Vec<f64>,
    pub grads: Vec<Vec3>,
    /// Physical Hessians; empty unless requested.
    pub hessians: Vec<Mat3>,
    /// `inv_jac[k][i] = d xi_k / d x_i`
    pub inv_jac: Mat3,
    pub det: f64,
}

fn map_shapes(
    mesh: &Mesh,
    cell: usize,
    xi: Vec3,
    reference: &ReferenceShape,
    want_hessian: bool,
    cached_jac: Option<&(Mat3, f64)>,
) -> Result<ShapeEval> {
    let dim = mesh.dim();
    let (inv_jac, det) = match cached_jac {
        Some(j) => *j,
        None => linalg::inverse(&mesh.jacobian(cell, xi), dim)
            .ok_or_else(|| Error::InvalidMesh(format!("degenerate Jacobian in cell {cell}")))?,
    };
    let n = reference.values.len();
    let mut grads = vec![ZERO3; n];
    for (g, gr) in grads.iter_mut().zip(&reference.grads) {
        *g = linalg::mat_t_vec(&inv_jac, *gr);
    }
    let mut hessians = Vec::new();
    if want_hessian {
        let map_h = if mesh.is_affine(cell) { None } else { Some(mesh.map_hessian(cell, xi)) };
        hessians.reserve(n);
        for s in 0..n {
            // reference Hessian corrected by the map curvature
            let mut href = reference.hessians[s];
            if let Some(mh) = &map_h {
                for k in 0..dim {
                    for l in 0..dim {
                        let mut c = 0.0;
                        for m in 0..dim {
                            c += grads[s][m] * mh[m][k][l];
                        }
                        href[k][l] -= c;
                    }
                }
            }
            let mut h = ZERO33;
            for i in 0..dim {
                for j in 0..dim {
                    let mut v = 0.0;
                    for k in 0..dim {
                        for l in 0..dim {
                            v += inv_jac[k][i] * inv_jac[l][j] * href[k][l];
                        }
                    }
                    h[i][j] = v;
                }
            }
            hessians.push(h);
        }
    }
    Ok(ShapeEval { values: reference.values.clone(), grads, hessians, inv_jac, det })
}

/// Shape data of one space on every quadrature point of a cell.
pub struct FeValues {
    rule: QuadratureRule,
    reference: Vec<ReferenceShape>,
    want_hessian: bool,
    points: Vec<ShapeEval>,
    cell: Option<usize>,
}

impl FeValues {
    pub fn new(element: &LagrangeElement, rule: QuadratureRule, want_hessian: bool) -> Self {
        let reference = rule.points.iter().map(|&xi| element.shape(xi)).collect();
        Self { rule, reference, want_hessian, points: Vec::new(), cell: None }
    }

    pub fn reinit(&mut self, mesh: &Mesh, cell: usize) -> Result<()> {
        if self.cell == Some(cell) {
            return Ok(());
        }
        let cached = if mesh.is_affine(cell) {
            Some(
                linalg::inverse(&mesh.jacobian(cell, ZERO3), mesh.dim())
                    .ok_or_else(|| Error::InvalidMesh(format!("degenerate Jacobian in cell {cell}")))?,
            )
        } else {
            None
        };
        self.points.clear();
        for (xi, r) in self.rule.points.iter().zip(&self.reference) {
            self.points.push(map_shapes(mesh, cell, *xi, r, self.want_hessian, cached.as_ref())?);
        }
        self.cell = Some(cell);
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.rule.points.len()
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn point(&self, q: usize) -> &ShapeEval {
        &self.points[q]
    }

    /// Quadrature weight times `|det J|`.
    pub fn jxw(&self, q: usize) -> f64 {
        self.rule.weights[q] * self.points[q].det.abs()
    }
}

/// Value, gradient and (optionally) Hessian of a scalar quantity at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarEval {
    pub value: f64,
    pub gradient: Vec3,
    pub hessian: Option<Mat3>,
}

/// Coefficient vector over an [`FeSpace`].
#[derive(Debug, Clone)]
pub struct Field {
    space: Arc<FeSpace>,
    coeffs: Vec<f64>,
}

impl Field {
    pub fn zeros(space: Arc<FeSpace>) -> Self {
        let n = space.n_dofs();
        Self { space, coeffs: vec![0.0; n] }
    }

    pub fn from_coeffs(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(Error::InvalidArgument(format!(
                "coefficient length {} does not match the space ({} DoFs)",
                coeffs.len(),
                space.n_dofs()
            )));
        }
        Ok(Self { space, coeffs })
    }

    /// Nodal interpolant; `f` returns one value per component.
    pub fn interpolate(space: Arc<FeSpace>, f: impl Fn(Vec3) -> Vec<f64>) -> Self {
        let nc = space.components();
        let mut coeffs = vec![0.0; space.n_dofs()];
        for (n, &x) in space.node_coords().iter().enumerate() {
            let v = f(x);
            coeffs[n * nc..(n + 1) * nc].copy_from_slice(&v[..nc]);
        }
        Self { space, coeffs }
    }

    pub fn interpolate_scalar(space: Arc<FeSpace>, f: impl Fn(Vec3) -> f64) -> Self {
        Self::interpolate(space, |x| vec![f(x)])
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Evaluate one component at a reference point of a cell, with the
    /// gradient and Hessian mapped to physical coordinates.
    pub fn evaluate(&self, component: usize, cell: usize, xi: Vec3, want_hessian: bool) -> Result<ScalarEval> {
        let mesh = self.space.mesh();
        let dim = mesh.dim();
        if (0..dim).any(|a| xi[a].abs() > 1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("reference point {xi:?} outside [-1, 1]^{dim}")));
        }
        if want_hessian && self.space.degree() < 2 && !mesh.is_affine(cell) {
            return Err(Error::Unsupported(
                "Hessian of a degree-1 field on a non-affine cell (curvature requires degree >= 2)".into(),
            ));
        }
        let reference = self.space.element().shape(xi);
        let s = map_shapes(mesh, cell, xi, &reference, want_hessian, None)?;
        Ok(self.combine(component, cell, &s, want_hessian))
    }

    /// Combine precomputed shape data with this field's coefficients.
    pub fn combine(&self, component: usize, cell: usize, s: &ShapeEval, want_hessian: bool) -> ScalarEval {
        let nc = self.space.components();
        let nodes = self.space.cell_nodes(cell);
        let mut value = 0.0;
        let mut gradient = ZERO3;
        let mut hessian = ZERO33;
        for (l, &node) in nodes.iter().enumerate() {
            let c = self.coeffs[node * nc + component];
            value += c * s.values[l];
            gradient = linalg::axpy(gradient, c, s.grads[l]);
            if want_hessian {
                let h = &s.hessians[l];
                for i in 0..3 {
                    for j in 0..3 {
                        hessian[i][j] += c * h[i][j];
                    }
                }
            }
        }
        ScalarEval { value, gradient, hessian: want_hessian.then_some(hessian) }
    }

    /// Value of a component only, using the absolute values of the nodal
    /// coefficients (used for unsigned distances).
    pub fn combine_abs_value(&self, component: usize, cell: usize, s: &ShapeEval) -> f64 {
        let nc = self.space.components();
        self.space
            .cell_nodes(cell)
            .iter()
            .zip(&s.values)
            .map(|(&node, v)| self.coeffs[node * nc + component].abs() * v)
            .sum()
    }
}

/// Metric tensors of the element map at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTensors {
    /// `G_ij = sum_k (d xi_k / d x_i)(d xi_k / d x_j)` [1/m^2]
    pub g_tensor: Mat3,
    /// `g_i = sum_k d xi_k / d x_i` [1/m]
    pub g_vector: Vec3,
}

impl MetricTensors {
    pub fn from_inverse_jacobian(inv_jac: &Mat3, dim: usize) -> Self {
        let mut g_tensor = ZERO33;
        let mut g_vector = ZERO3;
        for i in 0..dim {
            for k in 0..dim {
                g_vector[i] += inv_jac[k][i];
            }
            for j in 0..dim {
                let mut s = 0.0;
                for k in 0..dim {
                    s += inv_jac[k][i] * inv_jac[k][j];
                }
                g_tensor[i][j] = s;
            }
        }
        Self { g_tensor, g_vector }
    }

    /// `u . G u`
    pub fn quadratic(&self, u: Vec3) -> f64 {
        linalg::dot(u, linalg::mat_vec(&self.g_tensor, u))
    }

    /// `G : G`
    pub fn g_contract(&self) -> f64 {
        linalg::ddot(&self.g_tensor, &self.g_tensor)
    }

    /// `g . g`
    pub fn g_dot(&self) -> f64 {
        linalg::dot(self.g_vector, self.g_vector)
    }
}

/// Metric tensors of a cell at the given reference points.
pub fn compute_metric_tensors(mesh: &Mesh, cell: usize, points: &[Vec3]) -> Result<Vec<MetricTensors>> {
    points
        .iter()
        .map(|&xi| {
            let (inv, _) = linalg::inverse(&mesh.jacobian(cell, xi), mesh.dim())
                .ok_or_else(|| Error::InvalidMesh(format!("degenerate Jacobian in cell {cell}")))?;
            Ok(MetricTensors::from_inverse_jacobian(&inv, mesh.dim()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::{build_structured_mesh, BoxTags};
    use rand::{Rng, SeedableRng};

    fn unit_square(n: usize) -> Arc<Mesh> {
        Arc::new(build_structured_mesh(&[1.0, 1.0], &[n, n], BoxTags::channel()).unwrap())
    }

    fn distorted(mesh: &Mesh) -> Arc<Mesh> {
        let v: Vec<Vec3> = mesh
            .vertices()
            .iter()
            .map(|x| {
                let b = x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
                [x[0] + 0.3 * b, x[1] + 0.2 * b * (x[0] - 0.3), x[2]]
            })
            .collect();
        Arc::new(mesh.with_vertices(v).unwrap())
    }

    #[test]
    fn dof_counts() {
        let m = unit_square(3);
        assert_eq!(FeSpace::new(m.clone(), 1, 1).unwrap().n_dofs(), 16);
        assert_eq!(FeSpace::new(m.clone(), 2, 1).unwrap().n_dofs(), 49);
        assert_eq!(FeSpace::new(m.clone(), 2, 2).unwrap().n_dofs(), 98);
        let d = distorted(&m);
        assert_eq!(FeSpace::new(d, 2, 1).unwrap().n_nodes(), 49);
    }

    #[test]
    fn linear_field_gradient_is_exact() {
        let s = Arc::new(FeSpace::new(unit_square(4), 1, 1).unwrap());
        let f = Field::interpolate_scalar(s, |x| x[0]);
        for cell in 0..16 {
            let e = f.evaluate(0, cell, [0.3, -0.7, 0.0], false).unwrap();
            assert!((e.gradient[0] - 1.0).abs() < 1e-12 && e.gradient[1].abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_field_hessian() {
        let s = Arc::new(FeSpace::new(unit_square(3), 2, 1).unwrap());
        let f = Field::interpolate_scalar(s, |x| x[0] * x[0]);
        let e = f.evaluate(0, 4, [0.1, 0.2, 0.0], true).unwrap();
        let h = e.hessian.unwrap();
        assert!((h[0][0] - 2.0).abs() < 1e-10);
        assert!(h[0][1].abs() < 1e-10 && h[1][1].abs() < 1e-10);
    }

    #[test]
    fn hessian_on_distorted_q1_is_unsupported() {
        let d = distorted(&unit_square(3));
        let s = Arc::new(FeSpace::new(d, 1, 1).unwrap());
        let f = Field::zeros(s);
        assert!(matches!(f.evaluate(0, 0, ZERO3, true), Err(Error::Unsupported(_))));
    }

    /// Random Q2 field on a distorted mesh: gradient vs central differences of
    /// the physical-space evaluation.
    #[test]
    fn gradient_matches_finite_differences() {
        let d = distorted(&unit_square(3));
        let s = Arc::new(FeSpace::new(d.clone(), 2, 1).unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let coeffs: Vec<f64> = (0..s.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = Field::from_coeffs(s, coeffs).unwrap();
        let eval_at = |x: Vec3| {
            let (c, xi) = d.locate(x).unwrap();
            f.evaluate(0, c, xi, true).unwrap()
        };
        let h = 1e-6;
        for p in [[0.41, 0.37, 0.0], [0.62, 0.55, 0.0], [0.2, 0.8, 0.0]] {
            let e = eval_at(p);
            for a in 0..2 {
                let mut xp = p;
                let mut xm = p;
                xp[a] += h;
                xm[a] -= h;
                let fd = (eval_at(xp).value - eval_at(xm).value) / (2.0 * h);
                let rel = (fd - e.gradient[a]).abs() / e.gradient[a].abs().max(1e-3);
                assert!(rel <= 1e-6, "axis {a}: fd {fd} vs {}", e.gradient[a]);
                // Hessian rows vs differences of gradients
                let gd = (eval_at(xp).gradient[a] - eval_at(xm).gradient[a]) / (2.0 * h);
                let hv = e.hessian.unwrap()[a][a];
                assert!((gd - hv).abs() <= 1e-4 * hv.abs().max(1.0), "hessian {gd} vs {hv}");
            }
        }
    }

    #[test]
    fn patch_test_reproduces_polynomials() {
        for degree in 1..=3 {
            let d = distorted(&unit_square(2));
            let poly = move |x: Vec3| {
                let mut v = 0.0;
                for i in 0..=degree {
                    for j in 0..=degree {
                        v += (1.0 + i as f64 + 2.0 * j as f64) * x[0].powi(i as i32) * x[1].powi(j as i32);
                    }
                }
                v
            };
            // Q^r reproduces Q^r polynomials on affine cells
            let s = Arc::new(FeSpace::new(unit_square(2), degree, 1).unwrap());
            let f = Field::interpolate_scalar(s, poly);
            for cell in 0..4 {
                for xi in [[0.3, -0.2, 0.0], [-0.9, 0.6, 0.0]] {
                    let x = f.space().mesh().map_point(cell, xi);
                    assert!((f.evaluate(0, cell, xi, false).unwrap().value - poly(x)).abs() < 1e-10);
                }
            }
            // on distorted cells only total degree 1 is reproduced
            let s = Arc::new(FeSpace::new(d, degree, 1).unwrap());
            let lin = |x: Vec3| 1.0 + 2.0 * x[0] - 3.0 * x[1];
            let f = Field::interpolate_scalar(s, lin);
            let x = f.space().mesh().map_point(3, [0.2, 0.1, 0.0]);
            assert!((f.evaluate(0, 3, [0.2, 0.1, 0.0], false).unwrap().value - lin(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn partition_of_unity_at_quadrature_points() {
        let d = distorted(&unit_square(3));
        for degree in 1..=3 {
            let s = FeSpace::new(d.clone(), degree, 1).unwrap();
            let mut fv = FeValues::new(s.element(), QuadratureRule::gauss(degree + 2, 2), false);
            for cell in 0..d.n_cells() {
                fv.reinit(&d, cell).unwrap();
                for q in 0..fv.n_points() {
                    let sum: f64 = fv.point(q).values.iter().sum();
                    assert!((sum - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn metric_tensors_of_axis_aligned_cells() {
        let cube = build_structured_mesh(&[0.5, 0.5, 0.5], &[1, 1, 1], BoxTags::channel()).unwrap();
        let m = compute_metric_tensors(&cube, 0, &[ZERO3]).unwrap()[0];
        for i in 0..3 {
            assert!((m.g_tensor[i][i] - 16.0).abs() < 1e-12);
            assert!((m.g_vector[i] - 4.0).abs() < 1e-12);
        }
        let rect = build_structured_mesh(&[0.1, 0.2], &[1, 1], BoxTags::channel()).unwrap();
        let m = compute_metric_tensors(&rect, 0, &[ZERO3]).unwrap()[0];
        assert!((m.g_tensor[0][0] - 400.0).abs() < 1e-9);
        assert!((m.g_tensor[1][1] - 100.0).abs() < 1e-9);
        assert!(m.g_tensor[0][1].abs() < 1e-12);
    }

    /// G against finite differences of the inverse map on a distorted cell.
    #[test]
    fn metric_tensor_matches_inverse_map_differences() {
        let d = distorted(&unit_square(2));
        let cell = 3;
        let xi0 = [0.25, -0.4, 0.0];
        let x0 = d.map_point(cell, xi0);
        let m = compute_metric_tensors(&d, cell, &[xi0]).unwrap()[0];
        let h = 1e-6;
        let mut dxi = [[0.0; 3]; 3]; // dxi[k][i] = d xi_k / d x_i
        for i in 0..2 {
            let mut xp = x0;
            let mut xm = x0;
            xp[i] += h;
            xm[i] -= h;
            let ip = d.inverse_map(cell, xp).unwrap();
            let im = d.inverse_map(cell, xm).unwrap();
            for k in 0..2 {
                dxi[k][i] = (ip[k] - im[k]) / (2.0 * h);
            }
        }
        let fd = MetricTensors::from_inverse_jacobian(&dxi, 2);
        for i in 0..2 {
            for j in 0..2 {
                let rel = (fd.g_tensor[i][j] - m.g_tensor[i][j]).abs() / m.g_tensor[i][i].abs();
                assert!(rel < 1e-6);
            }
        }
    }
}
