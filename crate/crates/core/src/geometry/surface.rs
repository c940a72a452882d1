use std::collections::{HashMap, HashSet};

use super::bvh::{Aabb, Bvh};
use super::closest::{closest_on_segment, closest_on_triangle, ClosestPoint, Feature};
use crate::error::{Error, Result};
use crate::linalg::{self, Vec3, ZERO3};

/// Immersed leaflet surface: a polyline in 2D or a triangulation in 3D,
/// moved from the reference configuration by `x = x_ref + c * g`.
///
/// Elements store vertex indices; in 2D only the first two entries of each
/// element are used. Element normals follow the vertex order: in 2D the
/// segment tangent rotated clockwise, in 3D the right-hand rule.
#[derive(Debug, Clone)]
pub struct ImmersedSurface {
    dim: usize,
    reference: Vec<Vec3>,
    elements: Vec<[usize; 3]>,
    opening: Vec<Vec3>,
    ref_curvature: Vec<f64>,
    reference_measure: Vec<f64>,
    reference_normals: Vec<Vec3>,
    boundary_edges: HashSet<(usize, usize)>,
    boundary_vertices: Vec<bool>,
    coefficient: f64,
    current: Vec<Vec3>,
    derived: Derived,
}

#[derive(Debug, Clone)]
struct Derived {
    element_normals: Vec<Vec3>,
    vertex_normals: Vec<Vec3>,
    edge_normals: HashMap<(usize, usize), Vec3>,
    measure: Vec<f64>,
    bvh: Bvh,
}

/// Closest point of the current configuration to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceProjection {
    pub element: usize,
    pub closest: ClosestPoint,
    pub signed_distance: f64,
    /// Closest point lies on the free boundary of the surface.
    pub on_boundary: bool,
}

/// Reference data carried to a point by the closest-point pullback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pullback {
    pub curvature: f64,
    pub opening: Vec3,
    pub distance: f64,
    /// The query point carried rigidly with its closest element back to the
    /// reference configuration.
    pub reference_point: Vec3,
    /// Closest point lies on the free boundary of the surface.
    pub on_boundary: bool,
}

impl ImmersedSurface {
    pub fn new(dim: usize, vertices: Vec<Vec3>, elements: Vec<[usize; 3]>, opening: Vec<Vec3>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::Geometry(format!("surface dimension must be 2 or 3, found {dim}")));
        }
        if opening.len() != vertices.len() {
            return Err(Error::Geometry(format!("{} opening vectors for {} vertices", opening.len(), vertices.len())));
        }
        if elements.is_empty() {
            return Err(Error::Geometry("surface has no elements".into()));
        }
        let nv = dim;
        for (e, el) in elements.iter().enumerate() {
            if el[..nv].iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Geometry(format!("element {e} references a missing vertex")));
            }
        }
        check_orientation(dim, &elements)?;
        let n = vertices.len();
        let (boundary_edges, boundary_vertices) = free_boundary(dim, n, &elements);
        let mut s = Self {
            dim,
            current: vertices.clone(),
            reference: vertices,
            elements,
            opening,
            ref_curvature: vec![0.0; n],
            reference_measure: Vec::new(),
            reference_normals: Vec::new(),
            boundary_edges,
            boundary_vertices,
            coefficient: 0.0,
            derived: Derived {
                element_normals: Vec::new(),
                vertex_normals: Vec::new(),
                edge_normals: HashMap::new(),
                measure: Vec::new(),
                bvh: Bvh::build(&[]),
            },
        };
        s.derived = s.derive(&s.current)?;
        s.reference_measure = s.derived.measure.clone();
        s.reference_normals = s.derived.element_normals.clone();
        Ok(s)
    }

    pub fn with_reference_curvature(mut self, curvature: Vec<f64>) -> Result<Self> {
        if curvature.len() != self.reference.len() {
            return Err(Error::Geometry("one reference curvature per vertex required".into()));
        }
        self.ref_curvature = curvature;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.reference.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.dim]
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn reference_vertices(&self) -> &[Vec3] {
        &self.reference
    }

    pub fn current_vertices(&self) -> &[Vec3] {
        &self.current
    }

    pub fn opening(&self) -> &[Vec3] {
        &self.opening
    }

    pub fn reference_curvature(&self) -> &[f64] {
        &self.ref_curvature
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn vertex_normals(&self) -> &[Vec3] {
        &self.derived.vertex_normals
    }

    pub fn element_normals(&self) -> &[Vec3] {
        &self.derived.element_normals
    }

    /// Length (2D) or area (3D) of an element in the current configuration.
    pub fn element_measure(&self, e: usize) -> f64 {
        self.derived.measure[e]
    }

    pub fn total_measure(&self) -> f64 {
        self.derived.measure.iter().sum()
    }

    pub fn reference_total_measure(&self) -> f64 {
        self.reference_measure.iter().sum()
    }

    /// Configuration at opening coefficient `c`.
    pub fn moved(&self, c: f64) -> Result<Self> {
        let mut s = self.clone();
        s.move_to(c)?;
        Ok(s)
    }

    pub fn move_to(&mut self, c: f64) -> Result<()> {
        if !c.is_finite() {
            return Err(Error::Geometry(format!("opening coefficient {c} is not finite")));
        }
        let current: Vec<Vec3> = if c == 0.0 {
            self.reference.clone()
        } else {
            self.reference.iter().zip(&self.opening).map(|(x, g)| linalg::axpy(*x, c, *g)).collect()
        };
        let derived = self.derive(&current)?;
        for e in 0..self.elements.len() {
            let flipped = linalg::dot(derived.element_normals[e], self.reference_normals[e]) <= 0.0;
            if derived.measure[e] <= 1e-12 * self.reference_measure[e] || flipped {
                return Err(Error::Geometry(format!(
                    "element {e} inverted at c = {c} (measure {:.3e})",
                    derived.measure[e]
                )));
            }
        }
        self.current = current;
        self.derived = derived;
        self.coefficient = c;
        Ok(())
    }

    fn derive(&self, x: &[Vec3]) -> Result<Derived> {
        let ne = self.elements.len();
        let mut element_normals = Vec::with_capacity(ne);
        let mut measure = Vec::with_capacity(ne);
        let mut vertex_normals = vec![ZERO3; x.len()];
        let mut edge_normals: HashMap<(usize, usize), Vec3> = HashMap::new();
        let mut boxes = Vec::with_capacity(ne);
        for (e, el) in self.elements.iter().enumerate() {
            let (n, m) = if self.dim == 2 {
                let t = linalg::sub(x[el[1]], x[el[0]]);
                let len = linalg::norm(t);
                ([t[1] / len, -t[0] / len, 0.0], len)
            } else {
                let cr = linalg::cross(linalg::sub(x[el[1]], x[el[0]]), linalg::sub(x[el[2]], x[el[0]]));
                let a = linalg::norm(cr);
                (linalg::scale(cr, 1.0 / a), 0.5 * a)
            };
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::Geometry(format!("element {e} is degenerate (measure {m:.3e})")));
            }
            element_normals.push(n);
            measure.push(m);
            let pts: Vec<Vec3> = el[..self.dim].iter().map(|&v| x[v]).collect();
            boxes.push(Aabb::from_points(&pts));
            if self.dim == 2 {
                for &v in &el[..2] {
                    vertex_normals[v] = linalg::add(vertex_normals[v], n);
                }
            } else {
                for k in 0..3 {
                    let v = el[k];
                    let a = linalg::sub(x[el[(k + 1) % 3]], x[v]);
                    let b = linalg::sub(x[el[(k + 2) % 3]], x[v]);
                    let cosang = (linalg::dot(a, b) / (linalg::norm(a) * linalg::norm(b))).clamp(-1.0, 1.0);
                    vertex_normals[v] = linalg::axpy(vertex_normals[v], cosang.acos(), n);
                    let key = edge_key(el[k], el[(k + 1) % 3]);
                    let en = edge_normals.entry(key).or_insert(ZERO3);
                    *en = linalg::add(*en, n);
                }
            }
        }
        for n in vertex_normals.iter_mut() {
            *n = linalg::normalized(*n, 1e-300).unwrap_or(ZERO3);
        }
        for n in edge_normals.values_mut() {
            *n = linalg::normalized(*n, 1e-300).unwrap_or(ZERO3);
        }
        Ok(Derived { element_normals, vertex_normals, edge_normals, measure, bvh: Bvh::build(&boxes) })
    }

    fn closest_in(&self, e: usize, p: Vec3) -> ClosestPoint {
        let el = &self.elements[e];
        let x = &self.current;
        if self.dim == 2 {
            closest_on_segment(p, x[el[0]], x[el[1]])
        } else {
            closest_on_triangle(p, x[el[0]], x[el[1]], x[el[2]])
        }
    }

    fn project_element(&self, e: usize, cp: ClosestPoint, p: Vec3) -> SurfaceProjection {
        let el = &self.elements[e];
        let (pseudo, on_boundary) = match cp.feature {
            Feature::Face => (self.derived.element_normals[e], false),
            Feature::Edge(..) if self.dim == 2 => (self.derived.element_normals[e], false),
            Feature::Edge(a, b) => {
                let key = edge_key(el[a], el[b]);
                let n = self.derived.edge_normals[&key];
                (n, self.is_boundary_edge(key))
            }
            Feature::Vertex(k) => {
                let v = el[k];
                (self.derived.vertex_normals[v], self.is_boundary_vertex(v))
            }
        };
        let d = cp.dist_sq.sqrt();
        let side = linalg::dot(linalg::sub(p, cp.point), pseudo);
        SurfaceProjection { element: e, closest: cp, signed_distance: if side < 0.0 { -d } else { d }, on_boundary }
    }

    fn is_boundary_edge(&self, key: (usize, usize)) -> bool {
        self.boundary_edges.contains(&key)
    }

    fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertices[v]
    }

    /// Vertices on the free boundary of the surface.
    pub fn boundary_vertices(&self) -> &[bool] {
        &self.boundary_vertices
    }

    /// Exact closest point via the BVH.
    pub fn project(&self, p: Vec3) -> SurfaceProjection {
        let (e, _) = self.derived.bvh.nearest(p, |e| self.closest_in(e, p).dist_sq).expect("surface has elements");
        self.project_element(e, self.closest_in(e, p), p)
    }

    /// Exhaustive scan with the same tie rule as [`Self::project`].
    pub fn project_brute_force(&self, p: Vec3) -> SurfaceProjection {
        let mut best = (0, self.closest_in(0, p));
        for e in 1..self.elements.len() {
            let c = self.closest_in(e, p);
            if c.dist_sq < best.1.dist_sq {
                best = (e, c);
            }
        }
        self.project_element(best.0, best.1, p)
    }

    /// Signed distance, positive on the side the normals point to.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.project(p).signed_distance
    }

    /// Reference curvature and opening field at the closest point of the
    /// current configuration, by barycentric transfer to the reference
    /// element.
    pub fn pullback(&self, p: Vec3, band_limit: f64) -> Result<Pullback> {
        let pr = self.project(p);
        let distance = pr.signed_distance.abs();
        if distance > band_limit {
            return Err(Error::OutOfBand { distance, limit: band_limit });
        }
        let el = &self.elements[pr.element];
        let mut curvature = 0.0;
        let mut opening = ZERO3;
        for k in 0..self.dim {
            let w = pr.closest.bary[k];
            curvature += w * self.ref_curvature[el[k]];
            opening = linalg::axpy(opening, w, self.opening[el[k]]);
        }
        let reference_point = if self.coefficient == 0.0 {
            p
        } else {
            let mut foot = ZERO3;
            for k in 0..self.dim {
                foot = linalg::axpy(foot, pr.closest.bary[k], self.reference[el[k]]);
            }
            let offset = linalg::sub(p, pr.closest.point);
            let (cur, refr) = (self.element_frame(el, &self.current), self.element_frame(el, &self.reference));
            let mut moved = foot;
            for k in 0..3 {
                moved = linalg::axpy(moved, linalg::dot(cur[k], offset), refr[k]);
            }
            moved
        };
        Ok(Pullback { curvature, opening, distance, reference_point, on_boundary: pr.on_boundary })
    }

    /// Orthonormal frame (tangent, normal, binormal) of an element.
    fn element_frame(&self, el: &[usize; 3], x: &[Vec3]) -> [Vec3; 3] {
        let t = linalg::normalized(linalg::sub(x[el[1]], x[el[0]]), 0.0).unwrap_or([1.0, 0.0, 0.0]);
        let n = if self.dim == 2 {
            [t[1], -t[0], 0.0]
        } else {
            let raw = linalg::cross(linalg::sub(x[el[1]], x[el[0]]), linalg::sub(x[el[2]], x[el[0]]));
            linalg::normalized(raw, 0.0).unwrap_or([0.0, 0.0, 1.0])
        };
        [t, n, linalg::cross(t, n)]
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Free-boundary edges (3D) and vertices: edges used by one triangle, polyline
/// endpoints.
fn free_boundary(dim: usize, n: usize, elements: &[[usize; 3]]) -> (HashSet<(usize, usize)>, Vec<bool>) {
    let mut vertices = vec![false; n];
    let mut edges = HashSet::new();
    if dim == 2 {
        let mut count = vec![0usize; n];
        for el in elements {
            count[el[0]] += 1;
            count[el[1]] += 1;
        }
        for (v, c) in count.into_iter().enumerate() {
            vertices[v] = c == 1;
        }
    } else {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for el in elements {
            for k in 0..3 {
                *count.entry(edge_key(el[k], el[(k + 1) % 3])).or_default() += 1;
            }
        }
        for (key, c) in count {
            if c == 1 {
                edges.insert(key);
                vertices[key.0] = true;
                vertices[key.1] = true;
            }
        }
    }
    (edges, vertices)
}

fn check_orientation(dim: usize, elements: &[[usize; 3]]) -> Result<()> {
    if dim == 2 {
        let mut starts = HashMap::new();
        let mut ends = HashMap::new();
        for (e, el) in elements.iter().enumerate() {
            if el[0] == el[1] {
                return Err(Error::Geometry(format!("segment {e} repeats a vertex")));
            }
            if starts.insert(el[0], e).is_some() || ends.insert(el[1], e).is_some() {
                return Err(Error::Geometry(format!("segment {e}: polyline is branched or inconsistently oriented")));
            }
        }
        return Ok(());
    }
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    let mut undirected: HashMap<(usize, usize), usize> = HashMap::new();
    for (e, el) in elements.iter().enumerate() {
        if el[0] == el[1] || el[1] == el[2] || el[0] == el[2] {
            return Err(Error::Geometry(format!("triangle {e} repeats a vertex")));
        }
        for k in 0..3 {
            let (a, b) = (el[k], el[(k + 1) % 3]);
            if directed.insert((a, b), e).is_some() {
                return Err(Error::Geometry(format!(
                    "triangle {e}: edge ({a}, {b}) traversed twice in the same direction (inconsistent orientation)"
                )));
            }
            let c = undirected.entry(edge_key(a, b)).or_default();
            *c += 1;
            if *c > 2 {
                return Err(Error::Geometry(format!("edge ({a}, {b}) is shared by more than two triangles")));
            }
        }
    }
    Ok(())
}
