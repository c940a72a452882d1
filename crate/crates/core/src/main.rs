use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use riis_fsi::driver::config::parse_config;
use riis_fsi::driver::output::read_checkpoint;
use riis_fsi::driver::waveform::write_waveform_csv;
use riis_fsi::driver::{builtin_waveforms, Simulation};
use riis_fsi::fluid::SurfaceVelocityMode;
use riis_fsi::valve::ForceModel;
use riis_fsi::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "riis-fsi",
    version,
    about = "Valve opening with a lumped valve model coupled to penalised Navier-Stokes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write its outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the configured one.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Surface velocity in the penalty term: model, zero or phidiff.
        #[arg(long)]
        ugamma: Option<SurfaceVelocityMode>,
        /// Fluid force on the valve: full or pressure.
        #[arg(long)]
        force_model: Option<ForceModel>,
        /// Write a field snapshot every N steps (0 disables).
        #[arg(long)]
        snapshots: Option<usize>,
        /// Continue from a checkpoint written by a run of the same config.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Parse and validate a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the builtin pressure waveforms as `t,p_in,p_out,jump` CSV.
    Waveform {
        #[arg(long)]
        emit: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, e)) => {
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}

fn config_failure(e: Error) -> (u8, Error) {
    (EXIT_CONFIG, e)
}

fn run_failure(e: Error) -> (u8, Error) {
    (if e.is_config_error() { EXIT_CONFIG } else { EXIT_FAILURE }, e)
}

fn execute(command: Command) -> Result<(), (u8, Error)> {
    match command {
        Command::Run { config, output, ugamma, force_model, snapshots, resume } => {
            let mut cfg = parse_config(&config).map_err(config_failure)?;
            if let Some(dir) = output {
                cfg.output.directory = dir;
            }
            if let Some(mode) = ugamma {
                cfg.coupling.surface_velocity = mode;
            }
            if let Some(model) = force_model {
                cfg.valve.force_model = model;
            }
            if let Some(n) = snapshots {
                cfg.output.snapshot_every = n;
            }
            let dir = cfg.output.directory.clone();
            let mut sim = match resume {
                Some(path) => {
                    let ck = read_checkpoint(&path).map_err(config_failure)?;
                    Simulation::resume(cfg, &ck).map_err(run_failure)?
                }
                None => Simulation::new(cfg).map_err(run_failure)?,
            };
            log::info!("running {} steps into {}", sim.config().time.n_steps() - sim.step_index(), dir.display());
            sim.run_with_outputs(&dir).map_err(run_failure)?;
            let report = sim.report();
            log::info!(
                "done: c = {:.4} at t = {:.4} s, valve model {:.2}% of wall time",
                sim.valve_state().c,
                sim.time(),
                100.0 * report.valve_model_fraction()
            );
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = parse_config(&config).map_err(config_failure)?;
            println!(
                "{}: valid ({:?} geometry, {} steps of {} s)",
                config.display(),
                cfg.geometry.kind,
                cfg.time.n_steps(),
                cfg.time.dt
            );
            Ok(())
        }
        Command::Waveform { emit } => {
            let (p_in, p_out) = builtin_waveforms();
            write_waveform_csv(&emit, &p_in, &p_out).map_err(|e| (EXIT_FAILURE, e))
        }
    }
}
