//! Acceptance criteria, one test per criterion. Each prints a single
//! `ACCEPTANCE <name>: PASS|FAIL ...` line before asserting. The line goes
//! to the stdout handle, which the test harness does not capture.

use std::io::Write;
use std::path::Path;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use riis_fsi::driver::{parse_config, RunReport, Simulation, SimulationConfig, MMHG};
use riis_fsi::fem::{
    build_structured_mesh, build_structured_mesh_at, BoxTags, FeSpace, FeValues, Mesh, QuadratureRule,
};
use riis_fsi::fluid::SurfaceVelocityMode;
use riis_fsi::geometry::{build_level_set, shapes, ImmersedSurface};
use riis_fsi::linalg::Mat3;
use riis_fsi::valve::{assemble_valve_rhs, rk4_advance, FlowSampler, ForceModel, ValveParams, ValveState};
use riis_fsi::Result;

mod common;

fn report(name: &str, pass: bool, detail: String) {
    let line = format!("ACCEPTANCE {name}: {} ({detail})\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(pass, "{name}: {detail}");
}

/// `∫ δ_ε dΩ` over the band cells of a level set.
fn delta_integral(surface: &ImmersedSurface, mesh: &Arc<Mesh>, epsilon: f64) -> f64 {
    let space = Arc::new(FeSpace::new(mesh.clone(), 2, 1).unwrap());
    let ls = build_level_set(surface, space.clone(), epsilon, 0).unwrap();
    let mut fv = FeValues::new(space.element(), QuadratureRule::gauss(4, mesh.dim()), false);
    let mut total = 0.0;
    for cell in ls.band_cells() {
        fv.reinit(mesh, cell).unwrap();
        for q in 0..fv.n_points() {
            let p = ls.evaluate_shapes(cell, fv.point(q), false).unwrap();
            total += p.delta * fv.jxw(q);
        }
    }
    total
}

#[test]
fn delta_normalization() {
    let start = Instant::now();
    // 2D: unit segment fully inside the domain
    let h = 1.0 / 200.0;
    let mesh =
        Arc::new(build_structured_mesh_at([0.4, 0.4, 0.0], &[1.2, 0.2], &[240, 40], BoxTags::channel()).unwrap());
    let seg = shapes::segment([0.5, 0.5 + 0.3 * h, 0.0], [1.5, 0.5 + 0.3 * h, 0.0], 50, [0.0; 3]).unwrap();
    let i2 = delta_integral(&seg, &mesh, 2.0 * h);
    let e2 = (i2 - 1.0).abs();
    // 3D: unit square spanning a duct cross-section
    let h3 = 1.0 / 16.0;
    let mesh3 = Arc::new(
        build_structured_mesh_at([0.0, 0.0, -0.25], &[1.0, 1.0, 0.5], &[16, 16, 8], BoxTags::channel()).unwrap(),
    );
    let patch = shapes::square_patch([0.5, 0.5, 0.2 * h3], 1.0, 4, [0.0; 3]).unwrap();
    let i3 = delta_integral(&patch, &mesh3, 2.0 * h3);
    let e3 = (i3 - 1.0).abs();
    let secs = start.elapsed().as_secs_f64();
    report(
        "delta_normalization",
        e2 <= 0.02 && e3 <= 0.02 && secs <= 1.0,
        format!("2D rel err {e2:.2e}, 3D rel err {e3:.2e}, limit 2e-2, {secs:.2} s"),
    );
}

/// Worst relative deviation of the extended curvature from `expected` over
/// quadrature points with `|phi| <= epsilon / 2`.
fn curvature_error(surface: &ImmersedSurface, mesh: &Arc<Mesh>, epsilon: f64, expected: f64) -> (f64, usize) {
    let space = Arc::new(FeSpace::new(mesh.clone(), 2, 1).unwrap());
    let ls = build_level_set(surface, space.clone(), epsilon, 0).unwrap();
    let mut fv = FeValues::new(space.element(), QuadratureRule::gauss(4, mesh.dim()), true);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for cell in ls.band_cells() {
        fv.reinit(mesh, cell).unwrap();
        for q in 0..fv.n_points() {
            let p = ls.evaluate_shapes(cell, fv.point(q), true).unwrap();
            if p.phi.abs() <= 0.5 * epsilon {
                worst = worst.max((p.curvature - expected).abs() / expected);
                count += 1;
            }
        }
    }
    (worst, count)
}

#[test]
fn curvature_oracle() {
    let start = Instant::now();
    let r = 0.5;
    let h = r / 32.0;
    let epsilon = 1.5 * h;
    // 2D: full circle
    let mesh =
        Arc::new(build_structured_mesh_at([-0.75, -0.75, 0.0], &[1.5, 1.5], &[96, 96], BoxTags::channel()).unwrap());
    let circle = shapes::circle([0.0; 3], r, 4096, [0.0; 3]).unwrap();
    let (e2, n2) = curvature_error(&circle, &mesh, epsilon, 1.0 / r);
    // 3D: a cube window around the +x pole of a finely triangulated cap
    let w = 0.3;
    let mesh3 = Arc::new(
        build_structured_mesh_at([r - 0.5 * w, -0.5 * w, -0.5 * w], &[w, w, w], &[19, 19, 19], BoxTags::channel())
            .unwrap(),
    );
    let cap = shapes::sphere_cap([0.0; 3], r, 0.6, 400).unwrap();
    let (e3, n3) = curvature_error(&cap, &mesh3, epsilon, 2.0 / r);
    let secs = start.elapsed().as_secs_f64();
    report(
        "curvature_oracle",
        e2 <= 0.05 && e3 <= 0.05 && n2 > 0 && n3 > 0 && secs <= 10.0,
        format!(
            "circle worst rel err {e2:.2e} over {n2} points, sphere {e3:.2e} over {n3} points, limit 5e-2, {secs:.2} s"
        ),
    );
}

#[test]
fn poiseuille() {
    let start = Instant::now();
    let e = common::poiseuille(30, 20);
    let secs = start.elapsed().as_secs_f64();
    report(
        "poiseuille",
        e <= 0.01 && secs <= 60.0,
        format!("relative L2 velocity error {e:.2e}, limit 1e-2, {secs:.2} s"),
    );
}

#[test]
fn leakage_law() {
    let start = Instant::now();
    let epsilon = riis_fsi::fluid::FluidParams::default().epsilon;
    let mut worst: f64 = 0.0;
    let mut ordered = true;
    for dp_mmhg in [5.0, 10.0, 20.0] {
        let dp = dp_mmhg * MMHG;
        let means: Vec<f64> = [1e3, 1e4]
            .iter()
            .map(|&r| {
                let mean = common::leakage(dp, r);
                worst = worst.max((mean - epsilon * dp / r).abs() / (epsilon * dp / r));
                mean
            })
            .collect();
        ordered &= means[0] > means[1];
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "leakage_law",
        worst <= 0.2 && ordered && secs <= 300.0,
        format!("worst rel deviation from eps dp / R {worst:.3}, limit 0.2, decreasing in R: {ordered}, {secs:.2} s"),
    );
}

#[test]
fn rk4_order() {
    let start = Instant::now();
    let (beta, t_end) = (2.0, 0.5);
    // rhs = 0, c(0) = 0, c'(0) = 1: c' = exp(-beta t), c = (1 - exp(-beta t)) / beta
    let errors: Vec<f64> = [4, 8, 16, 32, 64]
        .iter()
        .map(|&n| {
            let dt = t_end / n as f64;
            let mut s = ValveState { c: 0.0, cdot: 1.0, step: 0 };
            for _ in 0..n {
                s = rk4_advance(s, 0.0, beta, dt).unwrap();
            }
            let v = (-beta * t_end).exp();
            (s.cdot - v).abs().max((s.c - (1.0 - v) / beta).abs())
        })
        .collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let lowest = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let secs = start.elapsed().as_secs_f64();
    report(
        "rk4_order",
        lowest >= 3.9 && secs <= 1.0,
        format!("orders over 4 halvings {orders:.3?}, limit 3.9, {secs:.3} s"),
    );
}

/// Pressure `minus` below the plane `x[axis] = at`, `plus` above it, no flow.
struct Jump {
    axis: usize,
    at: f64,
    minus: f64,
    plus: f64,
}

impl FlowSampler for Jump {
    fn sample(&self, _: usize, _: [f64; 3], x: [f64; 3]) -> Result<(f64, Mat3)> {
        Ok((if x[self.axis] > self.at { self.plus } else { self.minus }, [[0.0; 3]; 3]))
    }
}

/// `int_0^eps delta(phi) dphi` of the cosine delta from its antiderivative.
fn half_band_mass(eps: f64) -> f64 {
    let anti = |x: f64| x / (2.0 * eps) + (std::f64::consts::PI * x / eps).sin() / (2.0 * std::f64::consts::PI);
    anti(eps) - anti(0.0)
}

#[test]
fn manufactured_valve_rhs() {
    let start = Instant::now();
    let (minus, plus, rho) = (1300.0, 250.0, 2.0);
    // 2D: membrane of length 0.5 on the line x = 0.5, opening along x;
    // 3D: unit patch in z = 0, opening along z; both extend past the walls
    let mesh2 = Arc::new(build_structured_mesh(&[1.0, 0.5], &[40, 20], BoxTags::channel()).unwrap());
    let mesh3 =
        Arc::new(build_structured_mesh_at([0.0, 0.0, -0.5], &[1.0, 1.0, 1.0], &[8, 8, 8], BoxTags::channel()).unwrap());
    let cases = [
        (mesh2, shapes::segment([0.5, -0.1, 0.0], [0.5, 0.6, 0.0], 14, [1.0, 0.0, 0.0]).unwrap(), 0.5, 0.05, 0, 0.5),
        (mesh3, shapes::square_patch([0.5, 0.5, 0.0], 1.6, 4, [0.0, 0.0, 1.0]).unwrap(), 1.0, 0.25, 2, 0.0),
    ];
    let mut worst: f64 = 0.0;
    for (mesh, surface, area, eps, axis, at) in cases {
        let ls = build_level_set(&surface, Arc::new(FeSpace::new(mesh, 2, 1).unwrap()), eps, 0).unwrap();
        for model in [ForceModel::PressureOnly, ForceModel::FullStress] {
            let params =
                ValveParams { surface_density: rho, elasticity: 0.0, force_model: model, ..Default::default() };
            let flow = Jump { axis, at, minus, plus };
            let b = assemble_valve_rhs(&flow, 3.5e-3, &ls, &surface, None, &params).unwrap();
            let f = (minus - plus) * half_band_mass(eps) * area;
            for (got, want) in [(b.f_fluid, f), (b.denom, rho * area), (b.rhs, (minus - plus) / (2.0 * rho))] {
                worst = worst.max((got - want).abs() / want.abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "manufactured_valve_rhs",
        worst <= 1e-6 && secs <= 10.0,
        format!("worst rel error of force, denominator and rhs {worst:.2e}, limit 1e-6, {secs:.2} s"),
    );
}

fn channel_config() -> SimulationConfig {
    parse_config(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/channel.toml"))).unwrap()
}

/// One channel run with, per step, the imposed jump `p_in - p_out` and the
/// transvalvular difference of plane-mean pressures, both in mmHg.
struct Trace {
    report: RunReport,
    imposed: Vec<f64>,
    transvalvular: Vec<f64>,
}

impl Trace {
    fn c(&self) -> impl Iterator<Item = f64> + '_ {
        self.report.rows.iter().map(|r| r.c)
    }

    fn first_at_least(&self, level: f64) -> Option<usize> {
        self.c().position(|c| c >= level)
    }

    fn time_to_full(&self) -> f64 {
        self.first_at_least(1.0).map_or(f64::INFINITY, |k| self.report.rows[k].t)
    }

    /// Peak transvalvular difference over the first `steps` steps.
    fn peak_transvalvular(&self, steps: usize) -> f64 {
        self.transvalvular[..steps].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn run_channel(mode: SurfaceVelocityMode, end: Option<f64>) -> Trace {
    let mut cfg = channel_config();
    cfg.coupling.surface_velocity = mode;
    if let Some(end) = end {
        cfg.time.end = end;
    }
    let (p_in, p_out) = cfg.waveforms().unwrap();
    let mut sim = Simulation::new(cfg).unwrap();
    let (mut imposed, mut transvalvular) = (Vec::new(), Vec::new());
    while !sim.is_finished() {
        let row = sim.step().unwrap();
        imposed.push((p_in.value(row.t) - p_out.value(row.t)) / MMHG);
        transvalvular.push(sim.transvalvular_pressure().unwrap() / MMHG);
    }
    Trace { report: sim.into_report(), imposed, transvalvular }
}

/// The configured channel scenario over its whole duration.
fn model_run() -> &'static Trace {
    static RUN: OnceLock<Trace> = OnceLock::new();
    RUN.get_or_init(|| run_channel(SurfaceVelocityMode::Model, None))
}

/// The same scenario with a zero surface velocity, up to past full opening.
fn quasi_static_run() -> &'static Trace {
    static RUN: OnceLock<Trace> = OnceLock::new();
    RUN.get_or_init(|| run_channel(SurfaceVelocityMode::Zero, Some(0.1)))
}

#[test]
fn opening_phases() {
    let run = model_run();
    let rows = &run.report.rows;
    let onset = run.first_at_least(0.01);
    let full = run.first_at_least(1.0);
    let (Some(onset), Some(full)) = (onset, full) else {
        return report("opening_phases", false, format!("onset {onset:?}, full opening {full:?}"));
    };
    let jump_at_onset = run.imposed[onset];
    let rising = rows[..=full].windows(2).all(|w| w[1].c >= w[0].c);
    let held = rows[full..].iter().take_while(|r| r.t <= 0.2 + 1e-12).all(|r| r.c == 1.0);
    let held_to = rows[full..].iter().find(|r| r.c < 1.0).map_or(rows.last().unwrap().t, |r| r.t);
    let duration = rows[full].t - rows[onset].t;
    report(
        "opening_phases",
        (2.5..=10.0).contains(&jump_at_onset) && rising && held && (0.02..=0.2).contains(&duration),
        format!(
            "c reaches 0.01 at t = {:.4} s with jump {jump_at_onset:.2} mmHg (band 2.5-10), rises monotonically: \
             {rising}, c = 1 at t = {:.4} s held until {held_to:.4} s, duration {:.1} ms (band 20-200)",
            rows[onset].t,
            rows[full].t,
            1e3 * duration
        ),
    );
}

#[test]
fn quasi_static_ordering() {
    let (model, zero) = (model_run(), quasi_static_run());
    let (t_model, t_zero) = (model.time_to_full(), zero.time_to_full());
    // early opening: until the coupled run reaches a quarter of its stroke,
    // the same steps in both runs
    let early = model.first_at_least(0.25).unwrap_or(0);
    let (p_model, p_zero) = (model.peak_transvalvular(early), zero.peak_transvalvular(early));
    report(
        "quasi_static_ordering",
        t_model.is_finite() && t_zero > t_model && early > 0 && p_zero > p_model,
        format!(
            "time to full opening {t_zero:.4} s with zero surface velocity vs {t_model:.4} s, peak transvalvular \
             difference up to t = {:.4} s {p_zero:.2} vs {p_model:.2} mmHg",
            early as f64 * model.report.rows[0].t
        ),
    );
}

#[test]
fn valve_model_cost() {
    let run = model_run();
    let fraction = run.report.valve_model_fraction();
    let mut per_step: Vec<f64> = run.report.timings.iter().map(|t| t.valve_model() / t.total()).collect();
    per_step.sort_by(f64::total_cmp);
    let median = per_step[per_step.len() / 2];
    let worst = *per_step.last().unwrap();
    let over = per_step.iter().filter(|&&f| f > 0.05).count();
    report(
        "valve_model_cost",
        fraction <= 0.05,
        format!(
            "valve model {:.2}% of wall time over {} steps, per step median {:.2}% max {:.2}%, {over} steps above 5%",
            100.0 * fraction,
            per_step.len(),
            100.0 * median,
            100.0 * worst
        ),
    );
}

#[test]
fn determinism() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let mut cfg = channel_config();
        cfg.time.end = 0.03;
        Simulation::new(cfg).unwrap().run_with_outputs(dir.path()).unwrap();
    }
    let read = |i: usize, name: &str| std::fs::read(dirs[i].path().join(name)).unwrap();
    let series = read(0, "timeseries.csv");
    let moved = !series.is_empty() && read(0, "events.csv") == read(1, "events.csv");
    let identical = series == read(1, "timeseries.csv");
    let rows = series.iter().filter(|&&b| b == b'\n').count() - 1;
    report(
        "determinism",
        identical && moved,
        format!("two runs of {rows} steps give byte-identical time series: {identical}"),
    );
}
