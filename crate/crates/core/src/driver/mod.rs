//! Scenario set-up, the coupled time loop and run outputs.

pub mod config;
pub mod output;
pub mod simulation;
pub mod waveform;

pub use config::{parse_config, GeometryKind, ReferenceCurvature, SimulationConfig};
pub use output::{read_checkpoint, read_timeseries, write_checkpoint, Checkpoint, Event, StepRecord};
pub use simulation::{run_simulation, PhaseTimings, RunReport, Simulation};
pub use waveform::{builtin_waveforms, Waveform, MMHG};
