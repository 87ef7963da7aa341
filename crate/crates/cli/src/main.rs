//! `oppnet`: run experiment sweeps, validate specs, generate and inspect
//! contact traces.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 trace
//! error.

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oppnet_core::engine::ConfigError;
use oppnet_core::experiment::{self, parse_spec, ExperimentError, ExperimentSpec, RunOptions, Severity, TraceSource};
use oppnet_core::traces::{self, SyntheticConfig};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_TRACE: u8 = 3;

#[derive(Parser)]
#[command(name = "oppnet", version, about = "Opportunistic routing experiments over contact traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep point and seed of an experiment and write
    /// `results.csv` and `metadata.txt`.
    Run {
        #[arg(long, env = "OPPNET_SPEC")]
        spec: PathBuf,
        #[arg(long, env = "OPPNET_OUT")]
        out: PathBuf,
        /// Worker threads (default: available parallelism).
        #[arg(long, env = "OPPNET_JOBS")]
        jobs: Option<usize>,
        #[arg(long, env = "OPPNET_SEED_BASE", default_value_t = 0)]
        seed_base: u64,
        /// Suppress the per-run progress lines.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Report every problem in a spec without running it.
    Validate {
        #[arg(long, env = "OPPNET_SPEC")]
        spec: PathBuf,
    },
    /// Generate a synthetic trace from a JSON generator config.
    GenTrace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replaces the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print contact density, per-pair totals and a duration histogram.
    TraceStats {
        #[arg(long)]
        trace: PathBuf,
        /// List every pair's total contact time.
        #[arg(long)]
        pairs: bool,
    },
}

enum Failure {
    Io(String),
    Config(String),
    Trace(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        let (code, kind, msg) = match self {
            Failure::Io(m) => (EXIT_IO, "error", m),
            Failure::Config(m) => (EXIT_CONFIG, "config error", m),
            Failure::Trace(m) => (EXIT_TRACE, "trace error", m),
        };
        eprintln!("oppnet: {kind}: {msg}");
        ExitCode::from(code)
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => Failure::Config(c.to_string()),
            ExperimentError::Trace(t) => Failure::Trace(t),
        }
    }
}

fn config_err(path: &Path, e: ConfigError) -> Failure {
    Failure::Config(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load_spec(path: &Path) -> Result<ExperimentSpec, Failure> {
    parse_spec(&read(path)?).map_err(|e| config_err(path, e))
}

fn spec_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

/// Writes `files` into `out` through temporary names; on any failure the
/// directory is left without partial results.
fn write_outputs(out: &Path, files: &[(&str, &str)]) -> Result<(), Failure> {
    let io = |p: &Path, e: io::Error| Failure::Io(format!("{}: {e}", p.display()));
    fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let mut staged = Vec::new();
    let result = (|| {
        for (name, body) in files {
            let tmp = out.join(format!(".{name}.partial"));
            staged.push(tmp.clone());
            fs::write(&tmp, body).map_err(|e| io(&tmp, e))?;
        }
        for (name, _) in files {
            let tmp = out.join(format!(".{name}.partial"));
            let dst = out.join(name);
            fs::rename(&tmp, &dst).map_err(|e| io(&dst, e))?;
        }
        Ok(())
    })();
    if result.is_err() {
        for p in staged {
            let _ = fs::remove_file(p);
        }
        for (name, _) in files {
            let _ = fs::remove_file(out.join(name));
        }
    }
    result
}

fn run(spec_path: &Path, out: &Path, jobs: Option<usize>, seed_base: u64, quiet: bool) -> Result<(), Failure> {
    let spec = load_spec(spec_path)?;
    let progress: Option<experiment::Progress> = if quiet {
        None
    } else {
        Some(Box::new(|line: &str| eprintln!("{line}")))
    };
    let options = RunOptions {
        jobs,
        seed_base,
        progress,
    };
    let result = experiment::run_experiment(&spec, spec_dir(spec_path), &options);
    let output = match result {
        Ok(o) => o,
        Err(e) => {
            // a failed run never leaves stale results behind
            let _ = fs::remove_file(out.join("results.csv"));
            let _ = fs::remove_file(out.join("metadata.txt"));
            return Err(e.into());
        }
    };
    write_outputs(out, &[("results.csv", &output.csv), ("metadata.txt", &output.metadata)])?;
    eprintln!(
        "wrote {} rows from {} runs to {}",
        output.rows.len(),
        output.runs,
        out.join("results.csv").display()
    );
    Ok(())
}

fn validate(spec_path: &Path) -> Result<(), Failure> {
    let spec = load_spec(spec_path)?;
    let mut diagnostics = spec.diagnostics();
    if let TraceSource::File(p) = &spec.trace {
        let full = spec_dir(spec_path).join(p);
        let check = fs::File::open(&full)
            .map_err(|e| e.to_string())
            .and_then(|f| traces::parse_trace(BufReader::new(f)).map_err(|e| e.to_string()));
        if let Err(e) = check {
            diagnostics.push(experiment::Diagnostic {
                severity: Severity::Error,
                field: "trace.file".into(),
                message: format!("{}: {e}", full.display()),
            });
        }
    }
    let stdout = io::stdout();
    let mut w = stdout.lock();
    for d in &diagnostics {
        let _ = writeln!(w, "{d}");
    }
    let errors = diagnostics.iter().filter(|d| d.severity == Severity::Error).count();
    if errors > 0 {
        return Err(Failure::Config(format!("{} has {errors} error(s)", spec_path.display())));
    }
    Ok(())
}

fn gen_trace(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let mut cfg: SyntheticConfig = serde_json::from_str(&read(config)?).map_err(|e| {
        config_err(
            config,
            ConfigError::new(format!("line {} column {}", e.line(), e.column()), e.to_string()),
        )
    })?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let trace = traces::generate_synthetic(&cfg)
        .map_err(|e| config_err(config, ConfigError::new(e.field, e.reason)))?;
    let text = format!(
        "# synthetic trace: {} contacts, {} days, seed {}\n{}",
        trace.len(),
        cfg.days,
        cfg.seed,
        traces::serialize(&trace)
    );
    fs::write(out, text).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    eprintln!("wrote {} contacts to {}", trace.len(), out.display());
    Ok(())
}

fn trace_stats(path: &Path, pairs: bool) -> Result<(), Failure> {
    let file = fs::File::open(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let trace = traces::parse_trace(BufReader::new(file)).map_err(|e| Failure::Trace(format!("{}: {e}", path.display())))?;
    let stats = traces::trace_stats(&trace).map_err(|e| Failure::Trace(format!("{}: {e}", path.display())))?;
    print!("{stats}");
    if pairs {
        for ((a, b), total) in &stats.pair_totals {
            println!("pair {a} {b} {total}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            spec,
            out,
            jobs,
            seed_base,
            quiet,
        } => run(&spec, &out, jobs, seed_base, quiet),
        Command::Validate { spec } => validate(&spec),
        Command::GenTrace { config, out, seed } => gen_trace(&config, &out, seed),
        Command::TraceStats { trace, pairs } => trace_stats(&trace, pairs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
