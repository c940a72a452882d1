//! Exact closest points on segments and triangles.

use crate::linalg::{self, Vec3};

/// Part of a simplex that holds the closest point, in local vertex indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Vertex(usize),
    /// Local indices, ascending.
    Edge(usize, usize),
    Face,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub point: Vec3,
    pub dist_sq: f64,
    /// Barycentric weights of `point` on the simplex vertices (third is 0 for
    /// segments).
    pub bary: [f64; 3],
    pub feature: Feature,
}

pub fn closest_on_segment(p: Vec3, a: Vec3, b: Vec3) -> ClosestPoint {
    let ab = linalg::sub(b, a);
    let len2 = linalg::norm_sq(ab);
    let t = if len2 > 0.0 { linalg::dot(linalg::sub(p, a), ab) / len2 } else { 0.0 };
    let (bary, feature) = if t <= 0.0 {
        ([1.0, 0.0, 0.0], Feature::Vertex(0))
    } else if t >= 1.0 {
        ([0.0, 1.0, 0.0], Feature::Vertex(1))
    } else {
        ([1.0 - t, t, 0.0], Feature::Edge(0, 1))
    };
    let point = linalg::add(linalg::scale(a, bary[0]), linalg::scale(b, bary[1]));
    ClosestPoint { point, dist_sq: linalg::dist_sq(p, point), bary, feature }
}

/// Voronoi-region walk over vertices, edges and the face.
pub fn closest_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> ClosestPoint {
    let ab = linalg::sub(b, a);
    let ac = linalg::sub(c, a);
    let ap = linalg::sub(p, a);
    let d1 = linalg::dot(ab, ap);
    let d2 = linalg::dot(ac, ap);
    let make = |bary: [f64; 3], feature| {
        let point =
            linalg::add(linalg::add(linalg::scale(a, bary[0]), linalg::scale(b, bary[1])), linalg::scale(c, bary[2]));
        ClosestPoint { point, dist_sq: linalg::dist_sq(p, point), bary, feature }
    };
    if d1 <= 0.0 && d2 <= 0.0 {
        return make([1.0, 0.0, 0.0], Feature::Vertex(0));
    }
    let bp = linalg::sub(p, b);
    let d3 = linalg::dot(ab, bp);
    let d4 = linalg::dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return make([0.0, 1.0, 0.0], Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return make([1.0 - v, v, 0.0], Feature::Edge(0, 1));
    }
    let cp = linalg::sub(p, c);
    let d5 = linalg::dot(ab, cp);
    let d6 = linalg::dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return make([0.0, 0.0, 1.0], Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return make([1.0 - w, 0.0, w], Feature::Edge(0, 2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return make([0.0, 1.0 - w, w], Feature::Edge(1, 2));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    make([1.0 - v - w, v, w], Feature::Face)
}
