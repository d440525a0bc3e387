//! Command-line driver for `tri-ident-core`: JSON run configs in, a report
//! envelope, a manifest and CSV/SVG tables out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::commands::Outcome;
use crate::config::RunConfig;
use crate::error::{CliError, EXIT_FAIL, EXIT_PASS, EXIT_USAGE};
use crate::output::{Envelope, Manifest, OutDir, MANIFEST_SCHEMA, REPORT_SCHEMA};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "TRI_IDENT_OUT";
pub const DEFAULT_OUT: &str = "tri-ident-out";

#[derive(Parser, Debug)]
#[command(name = "tri-ident", version, about = "Identification checks for triangular models via CDF intersections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// JSON run config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config and $TRI_IDENT_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assumption report for a pair of conditional CDFs.
    CheckAssumptions {
        #[command(flatten)]
        common: Common,
    },
    /// Optimal transport between two point sets.
    SolveTransport {
        #[command(flatten)]
        common: Common,
    },
    /// Orbits of the Brenier maps between two conditional CDFs.
    Iterate {
        #[command(flatten)]
        common: Common,
    },
    /// Simulates a triangular model and checks that the recovered map is constant on orbits.
    VerifyIdentification {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Recovers utility gradients in a hedonic market.
    Hedonic {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Rebuilds the Student-t versus Gaussian intersection figure.
    ReproduceFigure {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Assumption report for the uniform/shifted-uniform pair.
    Counterexample {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CheckAssumptions { .. } => "check-assumptions",
            Command::SolveTransport { .. } => "solve-transport",
            Command::Iterate { .. } => "iterate",
            Command::VerifyIdentification { .. } => "verify-identification",
            Command::Hedonic { .. } => "hedonic",
            Command::ReproduceFigure { .. } => "reproduce-figure",
            Command::Counterexample { .. } => "counterexample",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::CheckAssumptions { common }
            | Command::SolveTransport { common }
            | Command::Iterate { common }
            | Command::VerifyIdentification { common, .. }
            | Command::Hedonic { common, .. }
            | Command::ReproduceFigure { common, .. }
            | Command::Counterexample { common, .. } => common,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("tri-ident: {e}");
            e.exit_code()
        }
    }
}

fn effective_config(cmd: &Command) -> Result<RunConfig, CliError> {
    let common = cmd.common();
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    match cmd {
        Command::VerifyIdentification { n, .. } | Command::Hedonic { n, .. } if n.is_some() => cfg.n = *n,
        Command::ReproduceFigure { resolution: Some(r), .. } => cfg.resolution = Some(*r),
        Command::Counterexample { beta: Some(b), .. } => cfg.beta = Some(*b),
        _ => {}
    }
    cfg.require(cmd.name())?;
    Ok(cfg)
}

fn out_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.out {
        return p.clone();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUT),
    }
}

fn execute(cmd: &Command) -> Result<i32, CliError> {
    let name = cmd.name();
    let cfg = effective_config(cmd)?;
    let mut out = OutDir::create(&out_dir(cmd.common().out.as_deref(), &cfg))?;
    let Outcome { pass, summary, report } = match cmd {
        Command::CheckAssumptions { .. } => commands::check_assumptions(&cfg, &mut out)?,
        Command::SolveTransport { .. } => commands::solve_transport(&cfg, &mut out)?,
        Command::Iterate { .. } => commands::iterate(&cfg, &mut out)?,
        Command::VerifyIdentification { .. } => commands::verify_identification(&cfg, &mut out)?,
        Command::Hedonic { .. } => commands::hedonic(&cfg, &mut out)?,
        Command::ReproduceFigure { .. } => commands::reproduce_figure(&cfg, &mut out)?,
        Command::Counterexample { .. } => commands::counterexample(&cfg, &mut out)?,
    };
    let exit_code = if pass { EXIT_PASS } else { EXIT_FAIL };
    let envelope = Envelope {
        schema: REPORT_SCHEMA,
        command: name,
        verdict: if pass { "pass" } else { "fail" },
        exit_code,
        summary,
        report,
    };
    out.json("report.json", &envelope)?;
    let mut files = out.files().to_vec();
    files.push("manifest.json".into());
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        command: name,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        tolerances: json!({
            "run": cfg.tolerances,
            "orbit_success_fraction": commands::ORBIT_SUCCESS_FRACTION,
        }),
        config: &cfg,
        files,
    };
    out.json("manifest.json", &manifest)?;
    println!("{name}: {} ({})", envelope.verdict, out.root().join("report.json").display());
    Ok(exit_code)
}
