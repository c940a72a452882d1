//! The weakly coupled time loop. Step `n` runs, in order: valve integrals
//! from level `n - 1`, the RK4 update of `c`, the surface move, the
//! level-set and band-quadrature rebuild, the surface velocity, and the
//! fluid assembly and solve.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::config::{ReferenceCurvature, SimulationConfig};
use super::output::{write_checkpoint, write_events, write_snapshot, Checkpoint, Event, StepRecord, TimeseriesWriter};
use super::waveform::Waveform;
use crate::error::{Error, Result};
use crate::fem::{FeSpace, Mesh};
use crate::fluid::{
    flux_through_plane, mean_pressure_on_plane, pressure_jump, FluidSolver, FluidState, StepInput, SurfaceVelocity,
    SurfaceVelocityMode,
};
use crate::geometry::{build_level_set, reference_curvature, ImmersedSurface, LevelSet};
use crate::valve::{clamp_and_report, rk4_advance, BandQuadrature, ValveParams, ValveRhsBreakdown, ValveState};

/// Wall-clock seconds spent in each phase of one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PhaseTimings {
    pub valve_rhs: f64,
    pub ode: f64,
    /// Surface move, level-set rebuild and the band quadrature of the
    /// moved surface (normals, curvature and delta weights at its points).
    pub geometry: f64,
    pub assembly: f64,
    pub solve: f64,
    /// Diagnostics and file output.
    pub output: f64,
}

impl PhaseTimings {
    /// Time spent on the lumped valve model.
    pub fn valve_model(&self) -> f64 {
        self.valve_rhs + self.ode
    }

    pub fn total(&self) -> f64 {
        self.valve_rhs + self.ode + self.geometry + self.assembly + self.solve + self.output
    }

    fn add(&mut self, o: &PhaseTimings) {
        self.valve_rhs += o.valve_rhs;
        self.ode += o.ode;
        self.geometry += o.geometry;
        self.assembly += o.assembly;
        self.solve += o.solve;
        self.output += o.output;
    }
}

/// Everything recorded over a run: one row and one timing per completed
/// step, and the stop events.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub rows: Vec<StepRecord>,
    pub timings: Vec<PhaseTimings>,
    pub events: Vec<Event>,
}

impl RunReport {
    pub fn total_timings(&self) -> PhaseTimings {
        let mut t = PhaseTimings::default();
        self.timings.iter().for_each(|s| t.add(s));
        t
    }

    /// Share of the wall time spent on the lumped valve model.
    pub fn valve_model_fraction(&self) -> f64 {
        let t = self.total_timings();
        t.valve_model() / t.total()
    }

    /// First time `c` reaches `level`.
    pub fn first_time_at_least(&self, level: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.c >= level).map(|r| r.t)
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    steps: usize,
    final_time: f64,
    final_c: f64,
    time_to_full_open: Option<f64>,
    valve_model_fraction: f64,
    wall_seconds: PhaseTimings,
    events: &'a [Event],
}

/// A run in progress.
pub struct Simulation {
    config: SimulationConfig,
    valve_params: ValveParams,
    solver: FluidSolver,
    level_set_space: Arc<FeSpace>,
    surface: ImmersedSurface,
    reference: Option<LevelSet>,
    level_set: LevelSet,
    /// Geometric half of the valve integrals; dropped whenever the surface
    /// moves.
    band: Option<BandQuadrature>,
    fluid: FluidState,
    valve: ValveState,
    p_in: Waveform,
    p_out: Waveform,
    step: usize,
    report: RunReport,
}

impl Simulation {
    pub fn new(config: SimulationConfig) -> Result<Self> {
        config.validate()?;
        let mesh: Arc<Mesh> = Arc::new(config.build_mesh()?);
        let mut solver = FluidSolver::new(mesh.clone(), config.fluid)?;
        solver.solver = config.solver;
        let level_set_space = Arc::new(FeSpace::new(mesh, config.coupling.level_set_degree, 1)?);
        let eps = config.fluid.epsilon;
        let mut surface = config.build_surface()?;
        let reference = match config.coupling.reference_curvature {
            ReferenceCurvature::Extended => Some(build_level_set(&surface, level_set_space.clone(), eps, 0)?),
            ReferenceCurvature::Vertex => {
                let h = reference_curvature(&surface, level_set_space.clone(), eps)?;
                surface = surface.with_reference_curvature(h)?;
                None
            }
        };
        let c0 = config.coupling.c;
        surface.move_to(c0)?;
        let level_set = build_level_set(&surface, level_set_space.clone(), eps, 0)?;
        let (p_in, p_out) = config.waveforms()?;
        let fluid = solver.initial_state();
        let mut sim = Self {
            valve_params: config.valve_params(),
            valve: ValveState { c: c0, cdot: config.coupling.cdot, step: 0 },
            config,
            solver,
            level_set_space,
            surface,
            reference,
            level_set,
            band: None,
            fluid,
            p_in,
            p_out,
            step: 0,
            report: RunReport::default(),
        };
        sim.rebuild_band()?;
        Ok(sim)
    }

    /// Continue from a checkpoint of a run with the same configuration.
    pub fn resume(config: SimulationConfig, checkpoint: &Checkpoint) -> Result<Self> {
        let mut sim = Self::new(config)?;
        let c = checkpoint.valve.c;
        if !(sim.config.coupling.c_min..=sim.config.coupling.c_max).contains(&c) {
            return Err(Error::State(format!("checkpoint opening {c} outside the configured stops")));
        }
        if checkpoint.fluid_history.len() != sim.config.fluid.bdf_order {
            return Err(Error::State(format!(
                "checkpoint holds {} fluid levels, BDF{} needs {}",
                checkpoint.fluid_history.len(),
                sim.config.fluid.bdf_order,
                sim.config.fluid.bdf_order
            )));
        }
        sim.fluid =
            FluidState::from_history(sim.solver.space().clone(), checkpoint.fluid_history.clone(), checkpoint.step)?;
        sim.surface.move_to(c)?;
        sim.level_set =
            build_level_set(&sim.surface, sim.level_set_space.clone(), sim.config.fluid.epsilon, checkpoint.step)?;
        sim.rebuild_band()?;
        sim.valve = checkpoint.valve;
        sim.step = checkpoint.step;
        Ok(sim)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint { step: self.step, valve: self.valve, fluid_history: self.fluid.history().to_vec() }
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn valve_params(&self) -> &ValveParams {
        &self.valve_params
    }

    pub fn fluid_solver(&self) -> &FluidSolver {
        &self.solver
    }

    /// Completed steps.
    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.time.dt
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.config.time.n_steps()
    }

    pub fn valve_state(&self) -> ValveState {
        self.valve
    }

    pub fn fluid_state(&self) -> &FluidState {
        &self.fluid
    }

    pub fn surface(&self) -> &ImmersedSurface {
        &self.surface
    }

    pub fn level_set(&self) -> &LevelSet {
        &self.level_set
    }

    pub fn reference_level_set(&self) -> Option<&LevelSet> {
        self.reference.as_ref()
    }

    pub fn report(&self) -> &RunReport {
        &self.report
    }

    pub fn into_report(self) -> RunReport {
        self.report
    }

    /// Valve integrals of the current (completed) level.
    pub fn valve_rhs(&mut self) -> Result<ValveRhsBreakdown> {
        if self.band.is_none() {
            self.rebuild_band()?;
        }
        let band = self.band.as_ref().expect("band built above");
        band.integrate_field(&self.fluid.field(), self.config.fluid.viscosity, &self.valve_params)
    }

    /// Difference of the plane-mean pressures upstream and downstream of
    /// the valve [Pa]; needs a structured mesh.
    pub fn transvalvular_pressure(&self) -> Result<f64> {
        let [up, down] = self.config.pressure_planes()?;
        let field = self.fluid.field();
        Ok(mean_pressure_on_plane(&field, 0, up)? - mean_pressure_on_plane(&field, 0, down)?)
    }

    /// Band quadrature of the current surface, with the flow shape data
    /// evaluated at its points.
    fn rebuild_band(&mut self) -> Result<()> {
        let band = BandQuadrature::new(&self.level_set, &self.surface, self.reference.as_ref())?;
        band.prepare_flow(self.fluid.space())?;
        self.band = Some(band);
        Ok(())
    }

    /// Advance one step; errors carry the step index and phase.
    pub fn step(&mut self) -> Result<StepRecord> {
        let n = self.step + 1;
        let at = |phase: &'static str| move |e: Error| Error::Step { step: n, phase, source: Box::new(e) };
        let dt = self.config.time.dt;
        let t = n as f64 * dt;
        let mut timing = PhaseTimings::default();

        let clock = Instant::now();
        let b = self.valve_rhs().map_err(at("valve integrals"))?;
        timing.valve_rhs = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let c_old = self.valve.c;
        let advanced = rk4_advance(self.valve, b.rhs, self.valve_params.damping, dt).map_err(at("valve update"))?;
        let (valve, stop) = clamp_and_report(advanced, self.config.coupling.c_min, self.config.coupling.c_max);
        if let Some(stop) = stop {
            if valve.c != c_old {
                log::info!("step {n}, t = {t:.4} s: {}", stop.describe());
                self.report.events.push(Event { step: n, t, stop });
            }
        }
        self.valve = valve;
        timing.ode = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let previous = if valve.c != c_old {
            self.surface.move_to(valve.c).map_err(at("surface move"))?;
            let rebuilt = build_level_set(&self.surface, self.level_set_space.clone(), self.config.fluid.epsilon, n)
                .map_err(at("level-set rebuild"))?;
            let previous = std::mem::replace(&mut self.level_set, rebuilt);
            self.rebuild_band().map_err(at("band quadrature"))?;
            Some(previous)
        } else {
            None
        };
        timing.geometry = clock.elapsed().as_secs_f64();

        let surface_velocity = match (&previous, self.config.coupling.surface_velocity) {
            (None, _) | (_, SurfaceVelocityMode::Zero) => SurfaceVelocity::Zero,
            (Some(_), SurfaceVelocityMode::Model) => {
                SurfaceVelocity::Model { c_new: valve.c, c_old, dt, surface: &self.surface }
            }
            (Some(prev), SurfaceVelocityMode::Phidiff) => SurfaceVelocity::Phidiff { previous: prev, dt },
        };
        let input = StepInput {
            dt,
            p_in: self.p_in.value(t),
            p_out: self.p_out.value(t),
            level_set: Some(&self.level_set),
            surface_velocity,
        };
        let clock = Instant::now();
        let (a, rhs) = self.solver.assemble_step(&self.fluid, &input).map_err(at("fluid assembly"))?;
        timing.assembly = clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        let stats = self.solver.solve_assembled(&mut self.fluid, &a, &rhs).map_err(at("fluid solve"))?;
        timing.solve = clock.elapsed().as_secs_f64();
        self.step = n;

        let clock = Instant::now();
        let field = self.fluid.field();
        let flux = if self.solver.mesh().structured().is_some() {
            flux_through_plane(&field, 0, self.config.flux_plane()).map_err(at("diagnostics"))?
        } else {
            f64::NAN
        };
        let row = StepRecord {
            t,
            c: valve.c,
            cdot: valve.cdot,
            orifice_area: self.config.orifice_area(valve.c),
            flux,
            dp_probe: pressure_jump(&field, &self.level_set).map_err(at("diagnostics"))?,
            f_fluid: b.f_fluid,
            f_elastic: b.f_elastic,
            denom: b.denom,
            rhs: b.rhs,
            iters: stats.iterations,
            res: stats.residual,
        };
        timing.output = clock.elapsed().as_secs_f64();
        log::debug!("step {n}: c = {:.6}, rhs = {:.4e}, iters = {}", row.c, row.rhs, row.iters);
        self.report.rows.push(row);
        self.report.timings.push(timing);
        Ok(row)
    }

    /// Run to the configured end time without writing files.
    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(())
    }

    /// Run to the end, writing `timeseries.csv`, `events.csv`,
    /// `summary.toml`, snapshots `step_{n:06}.vtk` and checkpoints
    /// `checkpoint_{n:06}.bin` into `dir`. On failure everything completed so
    /// far is flushed before the error is returned.
    pub fn run_with_outputs(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut series = TimeseriesWriter::create(&dir.join("timeseries.csv"))?;
        let snapshot_every = self.config.output.snapshot_every;
        let checkpoint_every = self.config.output.checkpoint_every;
        let result = (|| {
            while !self.is_finished() {
                let row = self.step()?;
                let clock = Instant::now();
                let n = self.step;
                let at = |e: Error| Error::Step { step: n, phase: "output", source: Box::new(e) };
                series.write(&row).map_err(at)?;
                if snapshot_every > 0 && n.is_multiple_of(snapshot_every) {
                    let path = dir.join(format!("step_{n:06}.vtk"));
                    write_snapshot(&path, &self.fluid.field(), &self.level_set).map_err(at)?;
                }
                if checkpoint_every > 0 && n.is_multiple_of(checkpoint_every) {
                    write_checkpoint(&dir.join(format!("checkpoint_{n:06}.bin")), &self.checkpoint()).map_err(at)?;
                }
                self.report.timings.last_mut().expect("step recorded").output += clock.elapsed().as_secs_f64();
            }
            Ok(())
        })();
        write_events(&dir.join("events.csv"), &self.report.events)?;
        self.write_summary(&dir.join("summary.toml"))?;
        result
    }

    fn write_summary(&self, path: &Path) -> Result<()> {
        let r = &self.report;
        let summary = Summary {
            steps: r.rows.len(),
            final_time: self.time(),
            final_c: self.valve.c,
            time_to_full_open: r.first_time_at_least(self.config.coupling.c_max),
            valve_model_fraction: if r.timings.is_empty() { 0.0 } else { r.valve_model_fraction() },
            wall_seconds: r.total_timings(),
            events: &r.events,
        };
        let text = toml::to_string(&summary).map_err(|e| Error::State(format!("summary serialisation: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Validate, run and write all outputs to the configured directory.
pub fn run_simulation(config: SimulationConfig) -> Result<RunReport> {
    let dir = config.output.directory.clone();
    let mut sim = Simulation::new(config)?;
    sim.run_with_outputs(&dir)?;
    Ok(sim.into_report())
}
