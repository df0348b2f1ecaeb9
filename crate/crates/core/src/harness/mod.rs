//! Experiment configuration, log files and the command implementations
//! behind the `mecaloc` binary.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod log;

pub use commands::{cmd_fuse, cmd_metrics, cmd_simulate, FuseArgs, SimulateArgs};
pub use config::ExperimentConfig;
pub use experiment::{FilterSettings, RowKind, TrajectoryRecord};
