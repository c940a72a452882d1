//! Helpers shared by the integration test targets.

use std::sync::Arc;

use riis_fsi::fem::{build_structured_mesh, BoxTags, FeSpace, FeValues, Field, QuadratureRule};
use riis_fsi::fluid::{flux_through_plane, FluidParams, FluidSolver, StepInput, SurfaceVelocity};
use riis_fsi::geometry::{build_level_set, shapes};

/// Relative L2 error of `u_x` against `exact(y)`, and of `u_y` against 0.
fn velocity_error(field: &Field, exact: impl Fn(f64) -> f64) -> f64 {
    let space = field.space();
    let mesh = space.mesh();
    let mut fv = FeValues::new(space.element(), QuadratureRule::gauss(4, 2), false);
    let (mut num, mut den) = (0.0, 0.0);
    for cell in 0..mesh.n_cells() {
        fv.reinit(mesh, cell).unwrap();
        for q in 0..fv.n_points() {
            let xi = fv.rule().points[q];
            let x = mesh.map_point(cell, xi);
            let ux = field.evaluate(0, cell, xi, false).unwrap().value;
            let uy = field.evaluate(1, cell, xi, false).unwrap().value;
            let e = exact(x[1]);
            num += ((ux - e).powi(2) + uy * uy) * fv.jxw(q);
            den += e * e * fv.jxw(q);
        }
    }
    (num / den).sqrt()
}

/// Relative L2 velocity error of steady channel flow on an `nx x ny`
/// mesh against the parabolic profile.
pub fn poiseuille(nx: usize, ny: usize) -> f64 {
    let (l, h, dp) = (0.03, 0.01, 0.1);
    let mesh = Arc::new(build_structured_mesh(&[l, h], &[nx, ny], BoxTags::channel()).unwrap());
    let params = FluidParams { epsilon: 1.5 * l / nx as f64 * 2.0, ..Default::default() };
    let solver = FluidSolver::new(mesh, params).unwrap();
    let mut state = solver.initial_state();
    let input = StepInput { dt: 1e4, p_in: dp, p_out: 0.0, level_set: None, surface_velocity: SurfaceVelocity::Zero };
    for _ in 0..3 {
        solver.advance(&mut state, &input).unwrap();
    }
    let mu = params.viscosity;
    velocity_error(&state.field(), |y| dp * y * (h - y) / (2.0 * mu * l))
}

/// Mean through-velocity past a closed membrane spanning the default
/// channel under a pressure drop `dp` [Pa].
pub fn leakage(dp: f64, resistance: f64) -> f64 {
    let (l, h) = (0.03, 0.01);
    let mesh = Arc::new(build_structured_mesh(&[l, h], &[60, 20], BoxTags::channel()).unwrap());
    let params = FluidParams { resistance, ..Default::default() };
    let solver = FluidSolver::new(mesh.clone(), params).unwrap();
    let ls_space = Arc::new(FeSpace::new(mesh, 2, 1).unwrap());
    let membrane = shapes::segment([0.0151, -0.002, 0.0], [0.0151, 0.012, 0.0], 20, [1.0, 0.0, 0.0]).unwrap();
    let ls = build_level_set(&membrane, ls_space, params.epsilon, 0).unwrap();
    let mut state = solver.initial_state();
    let input =
        StepInput { dt: 1e-2, p_in: dp, p_out: 0.0, level_set: Some(&ls), surface_velocity: SurfaceVelocity::Zero };
    for _ in 0..5 {
        solver.advance(&mut state, &input).unwrap();
    }
    flux_through_plane(&state.field(), 0, 0.0151).unwrap() / h
}
