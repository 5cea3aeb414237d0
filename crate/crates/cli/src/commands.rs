//! Command-line surface of the `manet` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use manet_core::sim::Protocol;
use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::ns2::{export_ns2, parse_ns2, Ns2Error, Ns2ParseOptions};
use crate::scenario::{
    build_flows, generate_trace, routing_header, simulate, trace_meta, MobilityRow, RoutingRow,
    MOBILITY_HEADER,
};
use crate::sweep::run_sweep;
use crate::tracefile::{read_trace, write_trace, TraceFileError, TraceMeta};

/// Default output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "MANET_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Trace {
        path: PathBuf,
        source: TraceFileError,
    },
    #[error("{path}: {source}")]
    Ns2 { path: PathBuf, source: Ns2Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "manet",
    version,
    about = "Mobility traces, mobility metrics and MANET routing experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
struct Common {
    /// Scenario file of `key = value` lines.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $MANET_OUT_DIR, else the current directory).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a mobility trace.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Also write the NS-2 movement file.
        #[arg(long)]
        ns2: bool,
    },
    /// Compute link duration, relative speed and spatial dependence.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(required = true, value_name = "TRACE")]
        traces: Vec<PathBuf>,
    },
    /// Run one routing simulation.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Use this trace instead of generating one.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        #[arg(long)]
        protocol: Option<Protocol>,
    },
    /// Run the models × speeds × seeds grid and write CSV tables.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Skip the routing simulations.
        #[arg(long)]
        mobility_only: bool,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Convert a native trace to an NS-2 movement file.
    ExportNs2 {
        #[command(flatten)]
        common: Common,
        #[arg(value_name = "TRACE")]
        trace: PathBuf,
    },
    /// Convert an NS-2 movement file to a native trace.
    ImportNs2 {
        #[command(flatten)]
        common: Common,
        #[arg(value_name = "FILE")]
        file: PathBuf,
        #[arg(long)]
        sample_interval: Option<f64>,
        #[arg(long)]
        duration: Option<f64>,
    },
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(common: &Common) -> Result<ScenarioConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            ScenarioConfig::parse_str(&text)?
        }
        None => ScenarioConfig::default(),
    };
    for s in &common.set {
        config.apply_override(s)?;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(common: &Common) -> (PathBuf, bool) {
    match &common.out {
        Some(p) => (p.clone(), true),
        None => match std::env::var_os(OUT_DIR_ENV) {
            Some(p) if !p.is_empty() => (PathBuf::from(p), true),
            _ => (PathBuf::from("."), false),
        },
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_trace(path: &Path) -> Result<(manet_core::MobilityTrace, TraceMeta), CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_trace(&text).map_err(|source| CliError::Trace {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Run(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Run(e.to_string()))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "trace".to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn trace_file_name(config: &ScenarioConfig) -> String {
    format!(
        "{}-v{}-s{}.trace",
        config.model, config.max_speed, config.seed
    )
}

fn dispatch(
    command: Command,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    match command {
        Command::Generate { common, ns2 } => {
            let config = load_config(&common)?;
            let trace = generate_trace(&config).map_err(|e| CliError::Run(e.to_string()))?;
            let (dir, _) = out_dir(&common);
            let path = dir.join(trace_file_name(&config));
            write_file(&path, &write_trace(&trace, &trace_meta(&config)))?;
            let _ = writeln!(
                stdout,
                "nodes {} duration {} seed {} -> {}",
                trace.node_count,
                trace.duration,
                config.seed,
                path.display()
            );
            if ns2 {
                let ns2_path = path.with_extension("ns2");
                write_file(&ns2_path, &export_ns2(&trace))?;
                let _ = writeln!(stdout, "ns2 -> {}", ns2_path.display());
            }
            Ok(())
        }
        Command::Analyze { common, traces } => {
            let config = load_config(&common)?;
            let mut rows = Vec::with_capacity(traces.len());
            for p in &traces {
                let (trace, meta) = load_trace(p)?;
                let max_speed = meta.params.get("max_speed").and_then(|v| v.parse().ok());
                let row = MobilityRow::analyse(
                    p.display().to_string(),
                    meta.model.clone().unwrap_or_else(|| "NA".into()),
                    meta.seed,
                    max_speed,
                    config.hash(),
                    &trace,
                    &config,
                );
                rows.push(row.record());
            }
            let header: Vec<String> = MOBILITY_HEADER.iter().map(|s| s.to_string()).collect();
            let text = csv_text(&header, &rows)?;
            let _ = write!(stdout, "{text}");
            if let (dir, true) = out_dir(&common) {
                write_file(&dir.join("metrics.csv"), &text)?;
            }
            Ok(())
        }
        Command::Simulate {
            common,
            trace,
            protocol,
        } => {
            let mut config = load_config(&common)?;
            if let Some(p) = protocol {
                config.protocol = p;
            }
            let trace = match &trace {
                Some(path) => {
                    let (t, meta) = load_trace(path)?;
                    if let Some(m) = meta.model.as_deref().and_then(|m| m.parse().ok()) {
                        config.model = m;
                    }
                    if let Some(v) = meta.params.get("max_speed").and_then(|v| v.parse().ok()) {
                        config.max_speed = v;
                    }
                    t
                }
                None => generate_trace(&config).map_err(|e| CliError::Run(e.to_string()))?,
            };
            let flows = build_flows(&config, &trace).map_err(|e| CliError::Run(e.to_string()))?;
            let report = simulate(&config, &trace, &flows, config.protocol)
                .map_err(|e| CliError::Run(e.to_string()))?;
            let row = RoutingRow {
                protocol: config.protocol,
                model: config.model.to_string(),
                seed: config.seed,
                max_speed: config.max_speed,
                config_hash: config.hash(),
                report: Some(report),
                error: None,
            };
            let text = csv_text(&routing_header(), &[row.record()])?;
            let _ = write!(stdout, "{text}");
            if let (dir, true) = out_dir(&common) {
                write_file(&dir.join("simulation.csv"), &text)?;
            }
            Ok(())
        }
        Command::Sweep {
            common,
            mobility_only,
            jobs,
        } => {
            let config = load_config(&common)?;
            let (dir, _) = out_dir(&common);
            let output = match jobs {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| CliError::Run(e.to_string()))?
                    .install(|| run_sweep(&config, !mobility_only)),
                None => run_sweep(&config, !mobility_only),
            };
            output.write_tables(&config, &dir)?;
            let failed = output.mobility.iter().filter(|r| r.error.is_some()).count()
                + output.routing.iter().filter(|r| r.error.is_some()).count();
            let _ = writeln!(
                stdout,
                "{} mobility rows, {} routing rows, {failed} failed -> {}",
                output.mobility.len(),
                output.routing.len(),
                dir.display()
            );
            if failed > 0 {
                let _ = writeln!(
                    stderr,
                    "warning: {failed} cells failed; see the errors column"
                );
            }
            Ok(())
        }
        Command::ExportNs2 { common, trace } => {
            let _ = load_config(&common)?;
            let (t, _) = load_trace(&trace)?;
            let (dir, _) = out_dir(&common);
            let path = dir.join(format!("{}.ns2", stem(&trace)));
            write_file(&path, &export_ns2(&t))?;
            let _ = writeln!(stdout, "ns2 -> {}", path.display());
            Ok(())
        }
        Command::ImportNs2 {
            common,
            file,
            sample_interval,
            duration,
        } => {
            let _ = load_config(&common)?;
            let text = std::fs::read_to_string(&file).map_err(|source| CliError::Io {
                path: file.clone(),
                source,
            })?;
            let options = Ns2ParseOptions {
                sample_interval,
                duration,
                area: None,
            };
            let trace = parse_ns2(&text, options).map_err(|source| CliError::Ns2 {
                path: file.clone(),
                source,
            })?;
            let (dir, _) = out_dir(&common);
            let path = dir.join(format!("{}.trace", stem(&file)));
            write_file(&path, &write_trace(&trace, &TraceMeta::default()))?;
            let _ = writeln!(
                stdout,
                "nodes {} duration {} -> {}",
                trace.node_count,
                trace.duration,
                path.display()
            );
            Ok(())
        }
    }
}
