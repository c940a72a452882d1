use std::sync::Arc;

use rayon::prelude::*;

use super::surface::ImmersedSurface;
use crate::error::{Error, Result};
use crate::fem::{FeSpace, Field, ScalarEval, ShapeEval};
use crate::linalg::{self, Vec3};

/// Gradient norms below this are treated as degenerate.
pub const GRADIENT_TOLERANCE: f64 = 1e-8;

/// `(1 + cos(pi phi / eps)) / (2 eps)` inside the band, zero outside.
pub fn smeared_delta(phi: f64, epsilon: f64) -> f64 {
    if phi.abs() <= epsilon {
        (1.0 + (std::f64::consts::PI * phi / epsilon).cos()) / (2.0 * epsilon)
    } else {
        0.0
    }
}

/// Side of the surface: `+1` where `phi >= 0`.
pub fn side_sign(phi: f64) -> f64 {
    if phi >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Unit normal `grad phi / |grad phi|` and curvature
/// `lap phi / |grad phi| - grad phi . H grad phi / |grad phi|^3`.
pub fn normal_and_curvature(eval: &ScalarEval, dim: usize) -> Result<(Vec3, f64)> {
    let g = eval.gradient;
    let norm = linalg::norm(g);
    if !(norm >= GRADIENT_TOLERANCE) {
        return Err(Error::DegenerateGradient { norm });
    }
    let n = linalg::scale(g, 1.0 / norm);
    let curvature = match &eval.hessian {
        Some(h) => {
            let lap: f64 = (0..dim).map(|i| h[i][i]).sum();
            lap / norm - linalg::dot(g, linalg::mat_vec(h, g)) / (norm * norm * norm)
        }
        None => f64::NAN,
    };
    Ok((n, curvature))
}

/// Everything the coupled solvers need from the level set at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSetPoint {
    /// Interpolated signed distance.
    pub phi: f64,
    /// Distance fed to the smeared delta.
    pub distance: f64,
    pub delta: f64,
    pub normal: Vec3,
    pub curvature: f64,
}

/// Nodal signed distance to an immersed surface on a degree-`s` space.
#[derive(Debug, Clone)]
pub struct LevelSet {
    phi: Field,
    epsilon: f64,
    step: usize,
    /// Cells where the delta uses the interpolated unsigned distance.
    unsigned_cell: Vec<bool>,
}

/// Signed distance at every node of `space`, computed exactly through the
/// surface BVH. Errors when `s < 2`, since curvature needs second
/// derivatives.
pub fn build_level_set(surface: &ImmersedSurface, space: Arc<FeSpace>, epsilon: f64, step: usize) -> Result<LevelSet> {
    if space.degree() < 2 {
        return Err(Error::Config(format!("level-set degree {} too low: curvature requires s >= 2", space.degree())));
    }
    if space.components() != 1 {
        return Err(Error::InvalidArgument("level set needs a scalar space".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("band half-thickness {epsilon} must be positive")));
    }
    let projections: Vec<(f64, bool)> = space
        .node_coords()
        .par_iter()
        .map(|&x| {
            let p = surface.project(x);
            (p.signed_distance, p.on_boundary)
        })
        .collect();
    let values: Vec<f64> = projections.iter().map(|p| p.0).collect();
    // A sign change next to a node that sees the free edge of the surface is
    // the jump of the signed field across the surface's extension; there
    // the delta is taken from the unsigned distance.
    let unsigned_cell = (0..space.mesh().n_cells())
        .map(|cell| {
            let nodes = space.cell_nodes(cell);
            let pos = nodes.iter().any(|&n| values[n] > 0.0);
            let neg = nodes.iter().any(|&n| values[n] < 0.0);
            pos && neg && nodes.iter().any(|&n| projections[n].1)
        })
        .collect();
    Ok(LevelSet { phi: Field::from_coeffs(space, values)?, epsilon, step, unsigned_cell })
}

impl LevelSet {
    pub fn field(&self) -> &Field {
        &self.phi
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        self.phi.space()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn nodal_values(&self) -> &[f64] {
        self.phi.coeffs()
    }

    pub fn uses_unsigned_delta(&self, cell: usize) -> bool {
        self.unsigned_cell[cell]
    }

    /// Cells that can carry a nonzero delta: some nodal distance within
    /// `epsilon` plus one cell size.
    pub fn band_cells(&self) -> Vec<usize> {
        let space = self.space();
        let mesh = space.mesh();
        let v = self.phi.coeffs();
        (0..mesh.n_cells())
            .filter(|&c| {
                let m = space.cell_nodes(c).iter().map(|&n| v[n].abs()).fold(f64::INFINITY, f64::min);
                m <= self.epsilon + mesh.cell_size(c)
            })
            .collect()
    }

    /// Interpolated distance used by the delta at a point.
    pub fn delta_distance(&self, cell: usize, s: &ShapeEval, phi: f64) -> f64 {
        if self.unsigned_cell[cell] {
            self.phi.combine_abs_value(0, cell, s)
        } else {
            phi.abs()
        }
    }

    /// Full evaluation from precomputed shape data (Hessians required when
    /// `want_curvature`).
    pub fn evaluate_shapes(&self, cell: usize, s: &ShapeEval, want_curvature: bool) -> Result<LevelSetPoint> {
        let e = self.phi.combine(0, cell, s, want_curvature);
        let distance = self.delta_distance(cell, s, e.value);
        let (normal, curvature) = normal_and_curvature(&e, self.space().dim())?;
        Ok(LevelSetPoint { phi: e.value, distance, delta: smeared_delta(distance, self.epsilon), normal, curvature })
    }

    /// Extended normal and curvature at a reference point of a cell.
    pub fn extended_normal_curvature(&self, cell: usize, xi: Vec3) -> Result<(Vec3, f64)> {
        let e = self.phi.evaluate(0, cell, xi, true)?;
        normal_and_curvature(&e, self.space().dim())
    }

    pub fn value(&self, cell: usize, xi: Vec3) -> Result<f64> {
        Ok(self.phi.evaluate(0, cell, xi, false)?.value)
    }

    /// Side of a physical point; points outside the mesh are an error.
    pub fn side_at(&self, x: Vec3) -> Result<f64> {
        let (cell, xi) =
            self.space().mesh().locate(x).ok_or_else(|| Error::Geometry(format!("point {x:?} outside the mesh")))?;
        Ok(side_sign(self.value(cell, xi)?))
    }
}

/// Per-vertex reference curvature from a level set of the reference
/// configuration, evaluated at each vertex. A vertex whose gradient is
/// degenerate is re-evaluated slightly off the surface along its normal.
pub fn reference_curvature(surface: &ImmersedSurface, space: Arc<FeSpace>, epsilon: f64) -> Result<Vec<f64>> {
    let reference = if surface.coefficient() == 0.0 { surface.clone() } else { surface.moved(0.0)? };
    let ls = build_level_set(&reference, space.clone(), epsilon, 0)?;
    let mesh = space.mesh();
    let offset = 1e-3 * mesh.min_cell_size();
    reference
        .reference_vertices()
        .iter()
        .zip(reference.vertex_normals())
        .enumerate()
        .map(|(v, (&x, &n))| {
            let eval_at = |p: Vec3| -> Result<f64> {
                let (cell, xi) = mesh
                    .locate(p)
                    .ok_or_else(|| Error::Geometry(format!("surface vertex {v} at {p:?} lies outside the mesh")))?;
                Ok(ls.extended_normal_curvature(cell, xi)?.1)
            };
            match eval_at(x) {
                Err(Error::DegenerateGradient { .. }) => eval_at(linalg::axpy(x, offset, n)),
                r => r,
            }
        })
        .collect()
}
