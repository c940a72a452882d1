//! Quadrilateral / hexahedral meshes with multilinear cell maps from the
//! reference cell `[-1, 1]^dim`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::quadrature::QuadratureRule;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat3, Vec3, ZERO3, ZERO33};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Inflow,
    Outflow,
    Wall,
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryTag::Inflow => "inflow",
            BoundaryTag::Outflow => "outflow",
            BoundaryTag::Wall => "wall",
        })
    }
}

impl FromStr for BoundaryTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inflow" => Ok(BoundaryTag::Inflow),
            "outflow" => Ok(BoundaryTag::Outflow),
            "wall" => Ok(BoundaryTag::Wall),
            other => Err(Error::InvalidArgument(format!("unknown boundary tag '{other}'"))),
        }
    }
}

/// Tags for the faces of a box, ordered `x-, x+, y-, y+, z-, z+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxTags(pub [BoundaryTag; 6]);

impl BoxTags {
    pub fn all(tag: BoundaryTag) -> Self {
        Self([tag; 6])
    }

    /// Inflow on `x-`, outflow on `x+`, walls elsewhere.
    pub fn channel() -> Self {
        let mut t = [BoundaryTag::Wall; 6];
        t[0] = BoundaryTag::Inflow;
        t[1] = BoundaryTag::Outflow;
        Self(t)
    }
}

/// A boundary face of a cell. `face = 2 * axis + side`, where `side = 0` is
/// the reference face `xi_axis = -1` and `side = 1` is `xi_axis = +1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub cell: usize,
    pub face: usize,
    pub tag: BoundaryTag,
}

impl BoundaryFacet {
    pub fn axis(&self) -> usize {
        self.face / 2
    }

    pub fn side(&self) -> usize {
        self.face % 2
    }
}

/// Lattice description of an axis-aligned structured mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredInfo {
    pub origin: Vec3,
    pub spacing: Vec3,
    pub counts: [usize; 3],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Vec3>,
    cells: Vec<usize>,
    facets: Vec<BoundaryFacet>,
    structured: Option<StructuredInfo>,
    affine: Vec<bool>,
    sizes: Vec<f64>,
}

/// Physical-space quadrature point on a boundary face.
#[derive(Debug, Clone, Copy)]
pub struct FacePoint {
    pub xi: Vec3,
    pub normal: Vec3,
    /// Quadrature weight times the surface measure.
    pub weight: f64,
}

impl Mesh {
    /// Assemble a mesh from raw parts and validate it.
    pub fn from_parts(dim: usize, vertices: Vec<Vec3>, cells: Vec<usize>, facets: Vec<BoundaryFacet>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidMesh(format!("dimension {dim} not supported")));
        }
        let nv = 1 << dim;
        if !cells.len().is_multiple_of(nv) {
            return Err(Error::InvalidMesh("connectivity length is not a multiple of the cell size".into()));
        }
        if let Some(&bad) = cells.iter().find(|&&v| v >= vertices.len()) {
            return Err(Error::InvalidMesh(format!("vertex index {bad} out of range")));
        }
        let mut mesh = Self { dim, vertices, cells, facets, structured: None, affine: Vec::new(), sizes: Vec::new() };
        mesh.finish()?;
        mesh.validate_facets()?;
        Ok(mesh)
    }

    fn finish(&mut self) -> Result<()> {
        let n = self.n_cells();
        self.affine = (0..n).map(|c| self.compute_affine(c)).collect();
        self.sizes = (0..n).map(|c| self.compute_size(c)).collect();
        let rule = QuadratureRule::gauss(2, self.dim);
        for c in 0..n {
            let corners = (0..(1usize << self.dim)).map(|v| {
                let mut xi = ZERO3;
                for a in 0..self.dim {
                    xi[a] = if (v >> a) & 1 == 1 { 1.0 } else { -1.0 };
                }
                xi
            });
            for xi in rule.points.iter().copied().chain(corners) {
                let d = linalg::det(&self.jacobian(c, xi), self.dim);
                if !(d > 0.0) {
                    return Err(Error::InvalidMesh(format!("cell {c} has non-positive Jacobian determinant {d:.3e}")));
                }
            }
            if !(self.sizes[c] > 0.0) {
                return Err(Error::InvalidMesh(format!("cell {c} has zero diameter")));
            }
        }
        Ok(())
    }

    fn validate_facets(&self) -> Result<()> {
        let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
        for c in 0..self.n_cells() {
            for f in 0..2 * self.dim {
                *count.entry(self.face_key(c, f)).or_default() += 1;
            }
        }
        let mut tagged: HashMap<Vec<usize>, usize> = HashMap::new();
        for fc in &self.facets {
            if fc.cell >= self.n_cells() || fc.face >= 2 * self.dim {
                return Err(Error::InvalidMesh(format!("facet {fc:?} out of range")));
            }
            let key = self.face_key(fc.cell, fc.face);
            if count.get(&key) != Some(&1) {
                return Err(Error::InvalidMesh(format!(
                    "tagged facet (cell {}, face {}) is not on the boundary",
                    fc.cell, fc.face
                )));
            }
            *tagged.entry(key).or_default() += 1;
        }
        for (key, n) in &count {
            if *n == 1 {
                match tagged.get(key) {
                    Some(1) => {}
                    Some(k) => return Err(Error::InvalidMesh(format!("boundary face {key:?} carries {k} tags"))),
                    None => return Err(Error::InvalidMesh(format!("boundary face {key:?} is untagged"))),
                }
            }
        }
        Ok(())
    }

    fn face_key(&self, cell: usize, face: usize) -> Vec<usize> {
        let mut k: Vec<usize> = self.face_local_vertices(face).map(|l| self.cell_vertices(cell)[l]).collect();
        k.sort_unstable();
        k
    }

    /// Local vertex indices of a face.
    pub fn face_local_vertices(&self, face: usize) -> impl Iterator<Item = usize> {
        let axis = face / 2;
        let side = face % 2;
        (0..(1usize << self.dim)).filter(move |v| (v >> axis) & 1 == side)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() >> self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn facets(&self) -> &[BoundaryFacet] {
        &self.facets
    }

    pub fn structured(&self) -> Option<&StructuredInfo> {
        self.structured.as_ref()
    }

    /// Vertices of a cell in tensor order (`v = a + 2b + 4c` at corner `(a, b, c)`).
    pub fn cell_vertices(&self, cell: usize) -> &[usize] {
        let nv = 1 << self.dim;
        &self.cells[cell * nv..(cell + 1) * nv]
    }

    pub fn is_affine(&self, cell: usize) -> bool {
        self.affine[cell]
    }

    /// Longest edge of the cell, used as the mesh size `h_T`.
    pub fn cell_size(&self, cell: usize) -> f64 {
        self.sizes[cell]
    }

    pub fn max_cell_size(&self) -> f64 {
        self.sizes.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_cell_size(&self) -> f64 {
        self.sizes.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn facet_count(&self, tag: BoundaryTag) -> usize {
        self.facets.iter().filter(|f| f.tag == tag).count()
    }

    /// Axis-aligned bounding box of all vertices.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        (lo, hi)
    }

    fn compute_size(&self, cell: usize) -> f64 {
        let vs = self.cell_vertices(cell);
        let mut h = 0.0_f64;
        for v in 0..vs.len() {
            for a in 0..self.dim {
                if (v >> a) & 1 == 0 {
                    let w = v | (1 << a);
                    h = h.max(linalg::dist_sq(self.vertices[vs[v]], self.vertices[vs[w]]).sqrt());
                }
            }
        }
        h
    }

    fn compute_affine(&self, cell: usize) -> bool {
        // A multilinear map is affine iff all mixed coefficients vanish.
        let x = self.cell_coords(cell);
        let scale = self.compute_size(cell).max(f64::MIN_POSITIVE);
        let coeffs = self.multilinear_coefficients(&x);
        coeffs.iter().enumerate().filter(|(m, _)| m.count_ones() >= 2).all(|(_, c)| linalg::norm(*c) <= 1e-12 * scale)
    }

    pub fn cell_coords(&self, cell: usize) -> [Vec3; 8] {
        let mut x = [ZERO3; 8];
        for (i, &v) in self.cell_vertices(cell).iter().enumerate() {
            x[i] = self.vertices[v];
        }
        x
    }

    /// Coefficients of `x(xi) = sum_m c_m prod_{a in m} xi_a` indexed by
    /// the bit mask `m` of participating axes.
    fn multilinear_coefficients(&self, x: &[Vec3; 8]) -> [Vec3; 8] {
        let nv = 1usize << self.dim;
        let mut c = [ZERO3; 8];
        for (m, cm) in c.iter_mut().enumerate().take(nv) {
            for (v, xv) in x.iter().enumerate().take(nv) {
                // product over axes: for axis in m use sign(±1/2), else 1/2
                let mut w = 1.0;
                for a in 0..self.dim {
                    let s = if (v >> a) & 1 == 1 { 1.0 } else { -1.0 };
                    w *= if (m >> a) & 1 == 1 { 0.5 * s } else { 0.5 };
                }
                *cm = linalg::axpy(*cm, w, *xv);
            }
        }
        c
    }

    /// Physical point of a reference coordinate.
    pub fn map_point(&self, cell: usize, xi: Vec3) -> Vec3 {
        let x = self.cell_coords(cell);
        let mut p = ZERO3;
        for v in 0..(1usize << self.dim) {
            let mut w = 1.0;
            for a in 0..self.dim {
                w *= if (v >> a) & 1 == 1 { 0.5 * (1.0 + xi[a]) } else { 0.5 * (1.0 - xi[a]) };
            }
            p = linalg::axpy(p, w, x[v]);
        }
        p
    }

    /// `J[i][j] = d x_i / d xi_j`.
    pub fn jacobian(&self, cell: usize, xi: Vec3) -> Mat3 {
        let x = self.cell_coords(cell);
        let mut j = ZERO33;
        for v in 0..(1usize << self.dim) {
            for b in 0..self.dim {
                let mut w = 1.0;
                for a in 0..self.dim {
                    let bit = (v >> a) & 1 == 1;
                    w *= if a == b {
                        if bit {
                            0.5
                        } else {
                            -0.5
                        }
                    } else if bit {
                        0.5 * (1.0 + xi[a])
                    } else {
                        0.5 * (1.0 - xi[a])
                    };
                }
                for i in 0..self.dim {
                    j[i][b] += w * x[v][i];
                }
            }
        }
        j
    }

    /// Second derivatives of the map: `out[i][j][k] = d^2 x_i / d xi_j d xi_k`.
    pub fn map_hessian(&self, cell: usize, xi: Vec3) -> [Mat3; 3] {
        let mut out = [ZERO33; 3];
        if self.affine[cell] {
            return out;
        }
        let x = self.cell_coords(cell);
        for v in 0..(1usize << self.dim) {
            for b in 0..self.dim {
                for c in 0..self.dim {
                    if b == c {
                        continue;
                    }
                    let mut w = 1.0;
                    for a in 0..self.dim {
                        let bit = (v >> a) & 1 == 1;
                        w *= if a == b || a == c {
                            if bit {
                                0.5
                            } else {
                                -0.5
                            }
                        } else if bit {
                            0.5 * (1.0 + xi[a])
                        } else {
                            0.5 * (1.0 - xi[a])
                        };
                    }
                    for i in 0..self.dim {
                        out[i][b][c] += w * x[v][i];
                    }
                }
            }
        }
        out
    }

    /// Inverse map by Newton iteration. Returns the reference point even if
    /// it falls outside the reference cell.
    pub fn inverse_map(&self, cell: usize, x: Vec3) -> Option<Vec3> {
        let mut xi = ZERO3;
        for _ in 0..50 {
            let r = linalg::sub(self.map_point(cell, xi), x);
            let (jinv, _) = linalg::inverse(&self.jacobian(cell, xi), self.dim)?;
            let dxi = linalg::mat_vec(&jinv, r);
            for a in 0..self.dim {
                xi[a] -= dxi[a];
            }
            if linalg::norm(dxi) < 1e-14 {
                break;
            }
            if self.affine[cell] {
                // one Newton step is exact for affine maps
                let r = linalg::sub(self.map_point(cell, xi), x);
                if linalg::norm(r) <= 1e-13 * self.sizes[cell] {
                    break;
                }
            }
        }
        Some(xi)
    }

    /// Cell containing `x` together with its reference coordinates.
    pub fn locate(&self, x: Vec3) -> Option<(usize, Vec3)> {
        const TOL: f64 = 1e-10;
        if let Some(s) = &self.structured {
            let mut idx = [0usize; 3];
            for a in 0..self.dim {
                let t = (x[a] - s.origin[a]) / s.spacing[a];
                if t < -TOL || t > s.counts[a] as f64 + TOL {
                    return None;
                }
                idx[a] = (t.floor().max(0.0) as usize).min(s.counts[a] - 1);
            }
            let cell = idx[0] + s.counts[0] * (idx[1] + s.counts[1] * idx[2]);
            let mut xi = ZERO3;
            for a in 0..self.dim {
                let x0 = s.origin[a] + idx[a] as f64 * s.spacing[a];
                xi[a] = (2.0 * (x[a] - x0) / s.spacing[a] - 1.0).clamp(-1.0, 1.0);
            }
            return Some((cell, xi));
        }
        for cell in 0..self.n_cells() {
            let xs = self.cell_coords(cell);
            let nv = 1usize << self.dim;
            let inside_box = (0..self.dim).all(|a| {
                let lo = xs[..nv].iter().map(|p| p[a]).fold(f64::INFINITY, f64::min);
                let hi = xs[..nv].iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max);
                let pad = TOL * self.sizes[cell];
                x[a] >= lo - pad && x[a] <= hi + pad
            });
            if !inside_box {
                continue;
            }
            if let Some(xi) = self.inverse_map(cell, x) {
                if (0..self.dim).all(|a| xi[a].abs() <= 1.0 + 1e-9) {
                    let mut xi = xi;
                    for a in 0..self.dim {
                        xi[a] = xi[a].clamp(-1.0, 1.0);
                    }
                    return Some((cell, xi));
                }
            }
        }
        None
    }

    /// Quadrature points on a face of a cell using `n` Gauss points per
    /// tangential axis.
    pub fn face_quadrature(&self, cell: usize, face: usize, n: usize) -> Vec<FacePoint> {
        let axis = face / 2;
        let sign = if face % 2 == 1 { 1.0 } else { -1.0 };
        let sub = QuadratureRule::gauss(n, self.dim - 1);
        let tangential: Vec<usize> = (0..self.dim).filter(|&a| a != axis).collect();
        sub.points
            .iter()
            .zip(&sub.weights)
            .map(|(p, &w)| {
                let mut xi = ZERO3;
                xi[axis] = sign;
                for (k, &a) in tangential.iter().enumerate() {
                    xi[a] = p[k];
                }
                let jac = self.jacobian(cell, xi);
                let (jinv, det) = linalg::inverse(&jac, self.dim).expect("validated mesh");
                // J^{-T} e_axis
                let mut m = ZERO3;
                m[..self.dim].copy_from_slice(&jinv[axis][..self.dim]);
                let len = linalg::norm(m);
                FacePoint { xi, normal: linalg::scale(m, sign / len), weight: w * det.abs() * len }
            })
            .collect()
    }

    /// Replace vertex coordinates (e.g. to distort a structured mesh). The
    /// result is treated as unstructured.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::InvalidArgument("vertex count mismatch".into()));
        }
        let mut m = self.clone();
        m.vertices = vertices;
        m.structured = None;
        m.finish()?;
        Ok(m)
    }
}

/// Uniform axis-aligned mesh of the box `[0, extent_0] x ... ` with the given
/// number of subdivisions per axis.
pub fn build_structured_mesh(extent: &[f64], subdivisions: &[usize], tags: BoxTags) -> Result<Mesh> {
    build_structured_mesh_at(ZERO3, extent, subdivisions, tags)
}

pub fn build_structured_mesh_at(origin: Vec3, extent: &[f64], subdivisions: &[usize], tags: BoxTags) -> Result<Mesh> {
    let dim = extent.len();
    if !(2..=3).contains(&dim) || subdivisions.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "extent ({}) and subdivisions ({}) must both have 2 or 3 entries",
            extent.len(),
            subdivisions.len()
        )));
    }
    if let Some(a) = subdivisions.iter().position(|&n| n == 0) {
        return Err(Error::InvalidArgument(format!("zero subdivision count on axis {a}")));
    }
    if let Some(a) = extent.iter().position(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-positive extent on axis {a}")));
    }
    let mut counts = [1usize; 3];
    let mut spacing = [1.0; 3];
    for a in 0..dim {
        counts[a] = subdivisions[a];
        spacing[a] = extent[a] / subdivisions[a] as f64;
    }
    let nvx = counts[0] + 1;
    let nvy = counts[1] + 1;
    let nvz = if dim == 3 { counts[2] + 1 } else { 1 };
    let coord = |a: usize, i: usize| -> f64 {
        if i == counts[a] {
            origin[a] + extent[a]
        } else {
            origin[a] + i as f64 * spacing[a]
        }
    };
    let mut vertices = Vec::with_capacity(nvx * nvy * nvz);
    for k in 0..nvz {
        for j in 0..nvy {
            for i in 0..nvx {
                let z = if dim == 3 { coord(2, k) } else { 0.0 };
                vertices.push([coord(0, i), coord(1, j), z]);
            }
        }
    }
    let vid = |i: usize, j: usize, k: usize| i + nvx * (j + nvy * k);
    let ncz = if dim == 3 { counts[2] } else { 1 };
    let mut cells = Vec::with_capacity((counts[0] * counts[1] * ncz) << dim);
    let mut facets = Vec::new();
    for k in 0..ncz {
        for j in 0..counts[1] {
            for i in 0..counts[0] {
                let cell = i + counts[0] * (j + counts[1] * k);
                for v in 0..(1usize << dim) {
                    let (a, b, c) = (v & 1, (v >> 1) & 1, (v >> 2) & 1);
                    cells.push(vid(i + a, j + b, k + c));
                }
                let idx = [i, j, k];
                for a in 0..dim {
                    if idx[a] == 0 {
                        facets.push(BoundaryFacet { cell, face: 2 * a, tag: tags.0[2 * a] });
                    }
                    if idx[a] + 1 == counts[a] {
                        facets.push(BoundaryFacet { cell, face: 2 * a + 1, tag: tags.0[2 * a + 1] });
                    }
                }
            }
        }
    }
    let mut mesh = Mesh {
        dim,
        vertices,
        cells,
        facets,
        structured: Some(StructuredInfo { origin, spacing, counts }),
        affine: Vec::new(),
        sizes: Vec::new(),
    };
    mesh.finish()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_counts() {
        let m = build_structured_mesh(&[1.0, 1.0], &[2, 2], BoxTags::all(BoundaryTag::Wall)).unwrap();
        assert_eq!(m.n_cells(), 4);
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.facets().len(), 8);
        assert_eq!(m.facet_count(BoundaryTag::Wall), 8);
    }

    #[test]
    fn single_cube() {
        let m = build_structured_mesh(&[1.0, 1.0, 1.0], &[1, 1, 1], BoxTags::channel()).unwrap();
        assert_eq!(m.n_cells(), 1);
        assert_eq!(m.n_vertices(), 8);
        assert_eq!(m.facets().len(), 6);
    }

    #[test]
    fn channel_facet_tags() {
        let m = build_structured_mesh(&[0.03, 0.01], &[60, 20], BoxTags::channel()).unwrap();
        // combinatorial oracle: inflow/outflow faces carry ny facets, walls 2 nx
        let (nx, ny) = (60, 20);
        assert_eq!(m.facet_count(BoundaryTag::Inflow), ny);
        assert_eq!(m.facet_count(BoundaryTag::Outflow), ny);
        assert_eq!(m.facet_count(BoundaryTag::Wall), 2 * nx);
        for c in 0..m.n_cells() {
            assert!((m.cell_size(c) - 5e-4).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_subdivision_is_rejected() {
        let e = build_structured_mesh(&[1.0, 1.0], &[0, 2], BoxTags::channel()).unwrap_err();
        assert!(matches!(e, Error::InvalidArgument(_)));
    }

    #[test]
    fn inverted_cell_is_rejected() {
        let m = build_structured_mesh(&[1.0, 1.0], &[1, 1], BoxTags::channel()).unwrap();
        let mut v = m.vertices().to_vec();
        v.swap(0, 1);
        assert!(matches!(m.with_vertices(v), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn locate_roundtrip_structured_and_general() {
        let m = build_structured_mesh(&[2.0, 1.0], &[4, 3], BoxTags::channel()).unwrap();
        let p = [1.3, 0.41, 0.0];
        let (c, xi) = m.locate(p).unwrap();
        let q = m.map_point(c, xi);
        assert!(linalg::dist_sq(p, q) < 1e-24);
        let mut v = m.vertices().to_vec();
        for x in v.iter_mut() {
            x[0] += 0.05 * (3.0 * x[1]).sin() * x[0] * (2.0 - x[0]);
        }
        let d = m.with_vertices(v).unwrap();
        let (c, xi) = d.locate(p).unwrap();
        assert!(linalg::dist_sq(p, d.map_point(c, xi)) < 1e-20);
    }

    #[test]
    fn face_quadrature_measures_boundary() {
        let m = build_structured_mesh(&[2.0, 1.0, 0.5], &[2, 2, 1], BoxTags::channel()).unwrap();
        let mut area = HashMap::new();
        for f in m.facets() {
            let a: f64 = m.face_quadrature(f.cell, f.face, 2).iter().map(|p| p.weight).sum();
            *area.entry(f.tag).or_insert(0.0) += a;
        }
        assert!((area[&BoundaryTag::Inflow] - 0.5).abs() < 1e-14);
        assert!((area[&BoundaryTag::Outflow] - 0.5).abs() < 1e-14);
        // y faces: 2 x (2 * 0.5), z faces: 2 x (2 * 1)
        assert!((area[&BoundaryTag::Wall] - 6.0).abs() < 1e-13);
        let fp = m.face_quadrature(0, 0, 1)[0];
        assert!((fp.normal[0] + 1.0).abs() < 1e-15);
    }
}
