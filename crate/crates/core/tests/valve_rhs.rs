//! Band-integral oracles for the lumped valve right-hand side.

use std::sync::Arc;

use riis_fsi::fem::{build_structured_mesh, build_structured_mesh_at, BoxTags, FeSpace, Field};
use riis_fsi::geometry::{build_level_set, shapes, ChannelValve, ImmersedSurface, LevelSet};
use riis_fsi::linalg::Mat3;
use riis_fsi::valve::{assemble_valve_rhs, BandQuadrature, FlowSampler, ForceModel, ValveParams};
use riis_fsi::{Error, Result};

/// `int_0^eps delta(phi) dphi` from the closed-form antiderivative.
fn half_band_mass(eps: f64) -> f64 {
    let anti = |x: f64| x / (2.0 * eps) + (std::f64::consts::PI * x / eps).sin() / (2.0 * std::f64::consts::PI);
    anti(eps) - anti(0.0)
}

/// Piecewise-constant pressure across the plane `x[axis] = at`, fluid at rest.
struct Jump {
    axis: usize,
    at: f64,
    minus: f64,
    plus: f64,
}

impl FlowSampler for Jump {
    fn sample(&self, _cell: usize, _xi: [f64; 3], x: [f64; 3]) -> Result<(f64, Mat3)> {
        Ok((if x[self.axis] > self.at { self.plus } else { self.minus }, [[0.0; 3]; 3]))
    }
}

struct Smooth(f64);

impl FlowSampler for Smooth {
    fn sample(&self, _cell: usize, _xi: [f64; 3], x: [f64; 3]) -> Result<(f64, Mat3)> {
        Ok((self.0 * (1.0 + (7.0 * x[0]).sin() * (3.0 * x[1]).cos()), [[0.0; 3]; 3]))
    }
}

/// Channel `[0, 1] x [0, 0.5]` with a straight membrane on the grid line
/// `x = 0.5`, extended past both walls so no node sees its ends.
fn membrane_2d(g: [f64; 3]) -> (ImmersedSurface, LevelSet) {
    let mesh = Arc::new(build_structured_mesh(&[1.0, 0.5], &[40, 20], BoxTags::channel()).unwrap());
    let space = Arc::new(FeSpace::new(mesh, 2, 1).unwrap());
    let surface = shapes::segment([0.5, -0.1, 0.0], [0.5, 0.6, 0.0], 14, g).unwrap();
    let ls = build_level_set(&surface, space, 0.05, 0).unwrap();
    (surface, ls)
}

#[test]
fn manufactured_pressure_jump_2d() {
    let (surface, ls) = membrane_2d([1.0, 0.0, 0.0]);
    let (minus, plus, rho) = (1300.0, 250.0, 2.0);
    let area = 0.5;
    for model in [ForceModel::PressureOnly, ForceModel::FullStress] {
        let params = ValveParams { surface_density: rho, elasticity: 0.0, force_model: model, ..Default::default() };
        let flow = Jump { axis: 0, at: 0.5, minus, plus };
        let b = assemble_valve_rhs(&flow, 3.5e-3, &ls, &surface, None, &params).unwrap();
        let m = half_band_mass(0.05);
        let f_expected = (minus * m - plus * m) * area;
        let rhs_expected = (minus - plus) / (2.0 * rho);
        assert!((b.f_fluid - f_expected).abs() <= 1e-6 * f_expected.abs(), "{b:?}");
        assert!((b.denom - rho * area).abs() <= 1e-6 * rho * area, "{b:?}");
        assert!((b.rhs - rhs_expected).abs() <= 1e-6 * rhs_expected.abs(), "{b:?}");
        assert_eq!(b.skipped_points, 0);
    }
}

#[test]
fn manufactured_pressure_jump_3d() {
    let mesh =
        Arc::new(build_structured_mesh_at([0.0, 0.0, -0.5], &[1.0, 1.0, 1.0], &[8, 8, 8], BoxTags::channel()).unwrap());
    let space = Arc::new(FeSpace::new(mesh, 2, 1).unwrap());
    let surface = shapes::square_patch([0.5, 0.5, 0.0], 1.6, 4, [0.0, 0.0, 1.0]).unwrap();
    let ls = build_level_set(&surface, space, 0.25, 0).unwrap();
    let params = ValveParams { elasticity: 0.0, force_model: ForceModel::PressureOnly, ..Default::default() };
    let b = assemble_valve_rhs(&Jump { axis: 2, at: 0.0, minus: 10.0, plus: -4.0 }, 0.0, &ls, &surface, None, &params)
        .unwrap();
    let expected = 14.0 / (2.0 * params.surface_density);
    assert!((b.rhs - expected).abs() <= 1e-6 * expected, "{b:?}");
}

#[test]
fn flat_membrane_with_reference_curvature() {
    let (surface, ls) = membrane_2d([1.0, 0.0, 0.0]);
    let h0 = 3.0;
    let surface = surface.with_reference_curvature(vec![h0; 15]).unwrap();
    let params = ValveParams { elasticity: 0.4, ..Default::default() };
    let b = assemble_valve_rhs(&Jump { axis: 0, at: 0.5, minus: 0.0, plus: 0.0 }, 0.0, &ls, &surface, None, &params)
        .unwrap();
    let area = 0.5 * 2.0 * half_band_mass(0.05);
    assert!((b.f_elastic - 0.4 * h0 * area).abs() <= 1e-6 * 0.4 * h0 * area, "{b:?}");
    let expected = 0.4 * h0 / params.surface_density;
    assert!((b.rhs - expected).abs() <= 1e-6 * expected, "{b:?}");
}

#[test]
fn uniform_pressure_at_reference_gives_zero() {
    let (surface, ls) = membrane_2d([1.0, 0.0, 0.0]);
    let params = ValveParams::default();
    let flow = Jump { axis: 0, at: 0.5, minus: 1e4, plus: 1e4 };
    let b = assemble_valve_rhs(&flow, 0.0, &ls, &surface, Some(&ls), &params).unwrap();
    assert_eq!(b.f_elastic, 0.0);
    assert!(b.f_fluid.abs() <= 1e-12 * 1e4, "{b:?}");
    assert!(b.rhs.abs() <= 1e-8, "{b:?}");
}

#[test]
fn orthogonal_opening_is_rejected() {
    let (surface, ls) = membrane_2d([0.0, 1.0, 0.0]);
    let err = assemble_valve_rhs(&Smooth(1.0), 0.0, &ls, &surface, None, &ValveParams::default()).unwrap_err();
    assert!(matches!(err, Error::DegenerateProjection { .. }), "{err}");
}

#[test]
fn pressure_force_is_linear_and_models_agree_at_rest() {
    let (surface, ls) = membrane_2d([1.0, 0.0, 0.0]);
    let pressure = ValveParams { force_model: ForceModel::PressureOnly, ..Default::default() };
    let full = ValveParams { force_model: ForceModel::FullStress, ..Default::default() };
    let one = assemble_valve_rhs(&Smooth(1.0), 0.0, &ls, &surface, None, &pressure).unwrap();
    let two = assemble_valve_rhs(&Smooth(2.0), 0.0, &ls, &surface, None, &pressure).unwrap();
    assert!((two.f_fluid - 2.0 * one.f_fluid).abs() <= 1e-12 * one.f_fluid.abs());
    let stress = assemble_valve_rhs(&Smooth(1.0), 3.5e-3, &ls, &surface, None, &full).unwrap();
    assert!((stress.f_fluid - one.f_fluid).abs() <= 1e-12 * one.f_fluid.abs());
}

#[test]
fn monolithic_field_sampler_matches_closure() {
    let (surface, ls) = membrane_2d([1.0, 0.0, 0.0]);
    let flow_space = Arc::new(FeSpace::new(ls.space().mesh().clone(), 1, 3).unwrap());
    // affine pressure is exact in Q1
    let field = Field::interpolate(flow_space, |x| vec![0.0, 0.0, 5.0 + 2.0 * x[0] - x[1]]);
    struct Affine;
    impl FlowSampler for Affine {
        fn sample(&self, _: usize, _: [f64; 3], x: [f64; 3]) -> Result<(f64, Mat3)> {
            Ok((5.0 + 2.0 * x[0] - x[1], [[0.0; 3]; 3]))
        }
    }
    let params = ValveParams { force_model: ForceModel::PressureOnly, ..Default::default() };
    let a = assemble_valve_rhs(&field, 0.0, &ls, &surface, None, &params).unwrap();
    let b = assemble_valve_rhs(&Affine, 0.0, &ls, &surface, None, &params).unwrap();
    assert!((a.f_fluid - b.f_fluid).abs() <= 1e-12 * b.f_fluid.abs().max(1e-12));
}

fn channel_valve_case(c: f64) -> (ImmersedSurface, LevelSet, LevelSet) {
    let v = ChannelValve::default();
    let mesh = Arc::new(build_structured_mesh(&[v.length, v.height], &[60, 20], BoxTags::channel()).unwrap());
    let space = Arc::new(FeSpace::new(mesh, 2, 1).unwrap());
    let reference = v.surface().unwrap();
    let reference_ls = build_level_set(&reference, space.clone(), 1e-3, 0).unwrap();
    let moved = reference.moved(c).unwrap();
    let ls = build_level_set(&moved, space, 1e-3, 0).unwrap();
    (moved, ls, reference_ls)
}

#[test]
fn elastic_force_restores_small_openings() {
    let params = ValveParams { elasticity: 1e3, ..Default::default() };
    let rest = Jump { axis: 0, at: 0.0, minus: 0.0, plus: 0.0 };
    let (s, ls, rls) = channel_valve_case(0.0);
    let b = assemble_valve_rhs(&rest, 0.0, &ls, &s, Some(&rls), &params).unwrap();
    assert_eq!(b.f_elastic, 0.0);
    assert_eq!(b.rhs, 0.0);
    for c in [0.01, 0.05] {
        let (s, ls, rls) = channel_valve_case(c);
        let b = assemble_valve_rhs(&rest, 0.0, &ls, &s, Some(&rls), &params).unwrap();
        assert!(b.f_elastic < 0.0, "c={c}: {b:?}");
        assert!(b.denom > 0.0);
    }
}

#[test]
fn rhs_is_pure_and_thread_independent() {
    let (s, ls, rls) = channel_valve_case(0.3);
    let params = ValveParams::default();
    let run = || assemble_valve_rhs(&Smooth(900.0), 3.5e-3, &ls, &s, Some(&rls), &params).unwrap();
    let a = run();
    let b = run();
    let c = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(run);
    for (x, y) in [(a, b), (a, c)] {
        assert_eq!(x.f_fluid.to_bits(), y.f_fluid.to_bits());
        assert_eq!(x.f_elastic.to_bits(), y.f_elastic.to_bits());
        assert_eq!(x.denom.to_bits(), y.denom.to_bits());
        assert_eq!(x.rhs.to_bits(), y.rhs.to_bits());
    }
}

#[test]
fn uniform_pressure_exerts_no_force_at_any_opening() {
    struct Uniform(f64);
    impl FlowSampler for Uniform {
        fn sample(&self, _: usize, _: [f64; 3], _: [f64; 3]) -> Result<(f64, Mat3)> {
            Ok((self.0, [[0.0; 3]; 3]))
        }
    }
    for c in [0.0, 0.3, 1.0] {
        let (s, ls, rls) = channel_valve_case(c);
        for model in [ForceModel::PressureOnly, ForceModel::FullStress] {
            let params = ValveParams { force_model: model, ..Default::default() };
            let b = assemble_valve_rhs(&Uniform(1.6e4), 3.5e-3, &ls, &s, Some(&rls), &params).unwrap();
            // scale: pressure times band width times leaflet length
            assert!(b.f_fluid.abs() <= 1e-12 * 1.6e4 * 2e-3 * 1e-2, "c={c} {model:?}: {b:?}");
        }
    }
}

#[test]
fn cached_field_integration_is_bitwise_identical() {
    let (s, ls, rls) = channel_valve_case(0.4);
    let mesh = ls.space().mesh().clone();
    let flow_space = Arc::new(FeSpace::new(mesh.clone(), 1, 3).unwrap());
    let field = Field::interpolate(flow_space, |x| vec![x[1] * (0.01 - x[1]), 3.0 * x[0], 900.0 * (40.0 * x[0]).sin()]);
    let params = ValveParams::default();
    let band = BandQuadrature::new(&ls, &s, Some(&rls)).unwrap();
    let plain = band.integrate(&field, 3.5e-3, &params).unwrap();
    for _ in 0..2 {
        let cached = band.integrate_field(&field, 3.5e-3, &params).unwrap();
        assert_eq!(cached.f_fluid.to_bits(), plain.f_fluid.to_bits());
        assert_eq!(cached.rhs.to_bits(), plain.rhs.to_bits());
    }
    // a field on another space bypasses the cache
    let other = Field::interpolate(Arc::new(FeSpace::new(mesh, 1, 3).unwrap()), |x| vec![0.0, 0.0, 2.0 * x[0]]);
    let expected = band.integrate(&other, 3.5e-3, &params).unwrap();
    let got = band.integrate_field(&other, 3.5e-3, &params).unwrap();
    assert_eq!(got.f_fluid.to_bits(), expected.f_fluid.to_bits());
}
