//! Command-line frontend: scenario files, trace I/O, NS-2 conversion,
//! single runs and the experiment sweep.

pub mod commands;
pub mod config;
pub mod ns2;
pub mod scenario;
pub mod sweep;
pub mod tracefile;

pub use commands::{run, CliError, OUT_DIR_ENV};
pub use config::{ConfigError, DistanceFilter, LeaderSource, MobilityModel, ScenarioConfig};
pub use ns2::{export_ns2, parse_ns2, Ns2Error, Ns2ParseOptions};
pub use sweep::{run_sweep, SweepOutput};
pub use tracefile::{read_trace, write_trace, TraceFileError, TraceMeta};
