//! `fiokit`: calibration, verification and boundedness experiments from the
//! command line.
//!
//! Exit codes: 0 success, 1 invariant failure, 2 usage or configuration
//! error, 3 I/O error.

use clap::{Args, Parser, Subcommand};
use fiokit::harness::{
    apply_symbol, bench, calibrate, load_symbol, norm_report, smooth_symbol, verify, write_bench, write_json, RunConfig,
    SuiteReport,
};
use fiokit::io::{read_field, write_field};
use fiokit::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fiokit", version, about = "Dyadic-parabolic decompositions and rough pseudodifferential operators")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Precedence: config file, then
/// `--set`, then the named flags.
#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set grid.size=64`.
    #[arg(long = "set", value_name = "PATH=VALUE", global = true)]
    set: Vec<String>,
    /// Samples per axis.
    #[arg(long, global = true)]
    size: Option<usize>,
    /// Number of frame directions.
    #[arg(long, global = true)]
    directions: Option<usize>,
    /// Littlewood–Paley margin.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check construction-level invariants.
    Calibrate,
    /// Run the full invariant suite.
    Verify,
    /// H^{s,p}_FIO and classical norms of a stored field.
    Norm {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        s: f64,
        /// Exponents; defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
    },
    /// Apply a symbol to a stored field.
    Apply {
        #[arg(long)]
        symbol: PathBuf,
        #[arg(long)]
        field: PathBuf,
        /// Output field file.
        #[arg(long)]
        output: PathBuf,
    },
    /// Split a symbol into its smooth and rough parts.
    Smooth {
        #[arg(long)]
        symbol: PathBuf,
        #[arg(long)]
        gamma: f64,
        /// Field to which both parts are applied.
        #[arg(long, requires_all = ["sharp_out", "flat_out"])]
        field: Option<PathBuf>,
        #[arg(long)]
        sharp_out: Option<PathBuf>,
        #[arg(long)]
        flat_out: Option<PathBuf>,
    },
    /// Sweep operator-norm ratios over a test family and write CSV and JSON.
    BenchBoundedness,
}

enum Failure {
    Invariant(String),
    Usage(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invariant(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invariant(m) | Failure::Usage(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Io { .. } | Error::Format { .. } => Failure::Io(msg),
            Error::Parameter(_) | Error::InvalidInput(_) | Error::Dimension(_) => Failure::Usage(msg),
            _ => Failure::Invariant(msg),
        }
    }
}

fn load_config(c: &Common) -> Result<RunConfig, Failure> {
    let mut overrides = c.set.clone();
    if let Some(n) = c.size {
        overrides.push(format!("grid.size={n}"));
    }
    if let Some(m) = c.directions {
        overrides.push(format!("frame.directions={m}"));
    }
    if let Some(e) = c.eps {
        overrides.push(format!("frame.eps={e}"));
    }
    if let Some(dir) = &c.out {
        overrides.push(format!("output.dir={}", serde_json::to_string(dir).expect("path serializes")));
    }
    RunConfig::load(c.config.as_deref(), &overrides).map_err(|e| match e {
        Error::Io { .. } => Failure::Io(e.to_string()),
        other => Failure::Usage(other.to_string()),
    })
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn emit_suite(report: &SuiteReport, dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    write_json(&dir.join(format!("{}.json", report.suite)), report)?;
    for c in &report.checks {
        eprintln!("{} {} measured={:e} tolerance={:e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.measured, c.tolerance);
    }
    print_json(report);
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure::Invariant(format!("{} failed: {}", report.suite, failed.join(", "))))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli.common)?;
    let dir = cfg.output.dir.clone();
    match cli.command {
        Command::Calibrate => emit_suite(&calibrate(&cfg)?, &dir),
        Command::Verify => emit_suite(&verify(&cfg)?, &dir),
        Command::Norm { field, s, p } => {
            let f = read_field(&field)?;
            let ps = if p.is_empty() { cfg.norms.p.clone() } else { p };
            print_json(&norm_report(&cfg, &f, s, &ps)?);
            Ok(())
        }
        Command::Apply { symbol, field, output } => {
            let f = read_field(&field)?;
            let a = load_symbol(&symbol, Some(*f.spec()), cfg.frame.eps)?;
            write_field(&output, &apply_symbol(&a, &f)?)?;
            print_json(&serde_json::json!({
                "provenance": cfg.provenance(),
                "output": output,
            }));
            Ok(())
        }
        Command::Smooth { symbol, gamma, field, sharp_out, flat_out } => {
            let f = field.as_deref().map(read_field).transpose()?;
            let grid = f.as_ref().map(|f| *f.spec()).or(cfg.grid.to_spec().ok());
            let a = load_symbol(&symbol, grid, cfg.frame.eps)?;
            let (report, parts) = smooth_symbol(&cfg, &a, gamma, f.as_ref())?;
            if let (Some((sharp, flat)), Some(sp), Some(fp)) = (parts, sharp_out, flat_out) {
                write_field(&sp, &sharp)?;
                write_field(&fp, &flat)?;
            }
            print_json(&report);
            Ok(())
        }
        Command::BenchBoundedness => {
            let outcome = bench(&cfg)?;
            let (csv, json) = write_bench(&dir, &outcome)?;
            let s = &outcome.summary;
            print_json(&serde_json::json!({
                "provenance": { "version": s.provenance.version, "config_hash": s.provenance.config_hash },
                "csv": csv,
                "json": json,
                "s_in": s.s_in,
                "s_out": s.s_out,
                "trends": s.trends,
                "sup_ratio": s.sup_ratio,
                "power_check": s.power_check,
                "bounded_trend": s.bounded_trend,
            }));
            if let Some(pc) = s.power_check {
                if !pc.consistent {
                    return Err(Failure::Invariant("probe exceeds the power-iteration norm".into()));
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
