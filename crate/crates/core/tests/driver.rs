//! Time-loop invariants, file outputs and the command line.

use std::path::Path;
use std::process::Command;

use riis_fsi::driver::config::{parse_config, parse_config_str};
use riis_fsi::driver::output::{read_checkpoint, read_timeseries, StepRecord};
use riis_fsi::driver::{Simulation, SimulationConfig};
use riis_fsi::fluid::SurfaceVelocityMode;
use riis_fsi::valve::assemble_valve_rhs;

/// Coarse channel that starts opening within a few tens of steps.
fn small_config() -> SimulationConfig {
    parse_config_str(
        "[geometry]\ncells = [30, 10]\n[fluid]\nepsilon = 1.6e-3\n[valve]\nsurface_density = 100.0\n\
         [time]\ndt = 1e-3\nend = 0.03\n",
        Path::new("<test>"),
    )
    .unwrap()
}

fn bits(rows: &[StepRecord]) -> Vec<[u64; 12]> {
    rows.iter()
        .map(|r| {
            [
                r.t,
                r.c,
                r.cdot,
                r.orifice_area,
                r.flux,
                r.dp_probe,
                r.f_fluid,
                r.f_elastic,
                r.denom,
                r.rhs,
                r.iters as f64,
                r.res,
            ]
            .map(f64::to_bits)
        })
        .collect()
}

#[test]
fn closed_valve_without_forcing_keeps_the_fluid_at_rest() {
    let dir = tempfile::tempdir().unwrap();
    let waveform = dir.path().join("flat.csv");
    std::fs::write(&waveform, "t,p_in,p_out\n0,0,0\n1,0,0\n").unwrap();
    let mut cfg = small_config();
    cfg.waveform.csv = Some(waveform);
    cfg.coupling.c_max = 0.0;
    cfg.time.end = 0.005;
    let mut sim = Simulation::new(cfg).unwrap();
    sim.run_to_end().unwrap();
    assert!(sim.report().rows.iter().all(|r| r.c == 0.0 && r.cdot == 0.0));
    let worst = sim.fluid_state().field().coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert_eq!(worst, 0.0);
}

#[test]
fn snapshots_follow_the_cadence_and_the_series_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg.time.dt = 1e-4;
    cfg.time.end = 1e-2;
    cfg.output.snapshot_every = 10;
    let mut sim = Simulation::new(cfg).unwrap();
    sim.run_with_outputs(dir.path()).unwrap();
    let snapshots: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".vtk"))
        .collect();
    assert_eq!(snapshots.len(), 10, "{snapshots:?}");
    assert!(dir.path().join("step_000100.vtk").exists());
    let rows = read_timeseries(&dir.path().join("timeseries.csv")).unwrap();
    assert_eq!(rows.len(), 100);
    assert_eq!(bits(&rows), bits(&sim.report().rows));
    assert!(rows.windows(2).all(|w| w[1].t > w[0].t));
}

#[test]
fn resuming_a_checkpoint_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg.output.checkpoint_every = 15;
    let mut full = Simulation::new(cfg.clone()).unwrap();
    full.run_with_outputs(dir.path()).unwrap();
    let rows = &full.report().rows;
    assert!(rows.last().unwrap().c > 0.0, "the valve must move for this check");
    let ck = read_checkpoint(&dir.path().join("checkpoint_000015.bin")).unwrap();
    let mut resumed = Simulation::resume(cfg, &ck).unwrap();
    resumed.run_to_end().unwrap();
    assert_eq!(bits(&resumed.report().rows), bits(&rows[15..]));
}

#[test]
fn recorded_rhs_replays_from_the_previous_level() {
    let mut sim = Simulation::new(small_config()).unwrap();
    let mut moving = 0;
    while !sim.is_finished() {
        let params = *sim.valve_params();
        let replay = assemble_valve_rhs(
            &sim.fluid_state().field(),
            sim.config().fluid.viscosity,
            sim.level_set(),
            sim.surface(),
            sim.reference_level_set(),
            &params,
        )
        .unwrap();
        let row = sim.step().unwrap();
        assert_eq!(row.rhs.to_bits(), replay.rhs.to_bits(), "step {}", sim.step_index());
        assert_eq!(row.f_fluid.to_bits(), replay.f_fluid.to_bits());
        moving += usize::from(row.cdot != 0.0);
    }
    assert!(moving > 5);
}

#[test]
fn frozen_valve_makes_surface_velocity_modes_agree() {
    let run = |mode| {
        let mut cfg = small_config();
        cfg.coupling.c_max = 0.0;
        cfg.coupling.surface_velocity = mode;
        let mut sim = Simulation::new(cfg).unwrap();
        sim.run_to_end().unwrap();
        (bits(&sim.report().rows), sim.fluid_state().field().coeffs().to_vec())
    };
    let (rows, field) = run(SurfaceVelocityMode::Model);
    for mode in [SurfaceVelocityMode::Zero, SurfaceVelocityMode::Phidiff] {
        let (r, f) = run(mode);
        assert_eq!(r, rows, "{mode:?}");
        assert!(f.iter().zip(&field).all(|(a, b)| a.to_bits() == b.to_bits()), "{mode:?}");
    }
}

#[test]
fn root_smoke_steps() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/root_smoke.toml");
    let mut cfg = parse_config(Path::new(path)).unwrap();
    cfg.time.end = 2.0 * cfg.time.dt;
    let mut sim = Simulation::new(cfg).unwrap();
    sim.run_to_end().unwrap();
    let rows = &sim.report().rows;
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!((0.0..=1.0).contains(&r.c));
        assert!(r.denom > 0.0 && r.rhs.is_finite() && r.flux.is_finite() && r.res.is_finite(), "{r:?}");
    }
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_riis-fsi")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

#[test]
fn command_line_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();

    let out = cli(&["waveform", "--emit", &d("wave.csv")]);
    assert!(out.status.success());
    let wave = std::fs::read_to_string(d("wave.csv")).unwrap();
    assert!(wave.starts_with("t,p_in,p_out,jump\n"));

    std::fs::write(d("bad.toml"), "[fluid]\nepsilon = 1e-5\n").unwrap();
    assert_eq!(cli(&["validate", "--config", &d("bad.toml")]).status.code(), Some(2));
    assert_eq!(cli(&["run", "--config", &d("missing.toml")]).status.code(), Some(2));
    std::fs::write(d("typo.toml"), "[fluid]\nviscosityy = 1\n").unwrap();
    assert_eq!(cli(&["validate", "--config", &d("typo.toml")]).status.code(), Some(2));
    assert_eq!(cli(&["bogus"]).status.code(), Some(2));

    std::fs::write(
        d("run.toml"),
        "[geometry]\ncells = [30, 10]\n[fluid]\nepsilon = 1.6e-3\n[time]\ndt = 1e-3\nend = 2e-3\n",
    )
    .unwrap();
    let out = cli(&["run", "--config", &d("run.toml"), "--output", &d("out"), "--ugamma", "zero"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["timeseries.csv", "events.csv", "summary.toml"] {
        assert!(dir.path().join("out").join(file).exists(), "{file}");
    }
}
