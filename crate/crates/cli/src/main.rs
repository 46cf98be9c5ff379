//! `wslab`: command-line front end of the laboratory.
//!
//! Exit codes: 0 when the computation passes its acceptance check, 1 when it
//! ran but failed, 2 on configuration or precondition errors.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::commands::{Outcome, ReportBody};
use crate::config::{read_config_file, Resolver};
use crate::error::{CliError, CliResult};
use crate::output::write_atomic;

#[derive(Parser)]
#[command(name = "wslab", version, about = "Numerical laboratory for bilinear wave-Schrodinger estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct Common {
    /// Spatial dimension (2 or 3).
    #[arg(long)]
    d: Option<String>,
    /// Time exponent q (a number >= 1 or `inf`).
    #[arg(long)]
    q: Option<String>,
    /// Space exponent r (a number >= 1 or `inf`).
    #[arg(long)]
    r: Option<String>,
    /// Seed for every random draw.
    #[arg(long)]
    seed: Option<String>,
    /// Output directory for report.json and any CSV/SVG files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Multiplier on the default periodic box size.
    #[arg(long)]
    grid_scale: Option<String>,
    /// Plain-text `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn flags(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("d", self.d.clone()),
            ("q", self.q.clone()),
            ("r", self.r.clone()),
            ("seed", self.seed.clone()),
            ("grid_scale", self.grid_scale.clone()),
        ]
    }
}

#[derive(Subcommand)]
enum Command {
    /// Exponent-region atlas over (1/r, 1/q) as CSV and SVG.
    Region {
        #[command(flatten)]
        common: Common,
        /// Lattice resolution per axis (at least 16) [default: 64].
        #[arg(long)]
        resolution: Option<String>,
    },
    /// Counterexample scaling sweep and log-log slope fit.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// transverse, nontransverse_equal or nontransverse_one [default: transverse].
        #[arg(long)]
        construction: Option<String>,
        /// Comma-separated scales N [default: 8,16,32].
        #[arg(long)]
        n_list: Option<String>,
        /// Also evaluate ||U V|| on Omega for N up to this value.
        #[arg(long)]
        vector_valued_up_to: Option<String>,
        /// Time step inside Omega [default: 1].
        #[arg(long)]
        dt: Option<String>,
        /// Spatial step inside Omega [default: 0.5].
        #[arg(long)]
        dx: Option<String>,
        /// Allowed distance between fitted and predicted slope [default: 0.5].
        #[arg(long)]
        tolerance: Option<String>,
    },
    /// Runs the default acceptance experiment of a theorem (1-6).
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        theorem: Option<String>,
        /// Comma-separated scales N.
        #[arg(long)]
        n_list: Option<String>,
        /// Comma-separated wave frequency centre.
        #[arg(long, allow_hyphen_values = true)]
        xi0: Option<String>,
        /// Comma-separated Schrodinger frequency centre.
        #[arg(long, allow_hyphen_values = true)]
        eta0: Option<String>,
    },
    /// Sampled checks of the structural phase conditions.
    Conditions {
        #[command(flatten)]
        common: Common,
        /// [default: 1,0]
        #[arg(long, allow_hyphen_values = true)]
        xi0: Option<String>,
        /// [default: 1,0]
        #[arg(long, allow_hyphen_values = true)]
        eta0: Option<String>,
        /// Pairs sampled for conditions (i)-(iv) [default: 1000].
        #[arg(long)]
        samples: Option<String>,
        /// Monte-Carlo points for the surface measure [default: 200000].
        #[arg(long)]
        mc_samples: Option<String>,
        /// Sampled (a, h) pairs for the surface measure [default: 32].
        #[arg(long)]
        pairs: Option<String>,
    },
    /// Randomised-sign average against the l2 norm of the coefficients.
    Khintchine {
        #[command(flatten)]
        common: Common,
        /// Number of standard normal coefficients [default: 64].
        #[arg(long)]
        n: Option<String>,
        /// Explicit comma-separated coefficients instead of random ones.
        #[arg(long, allow_hyphen_values = true)]
        coeffs: Option<String>,
        /// Sign draws [default: 10000].
        #[arg(long)]
        samples: Option<String>,
    },
    /// Mixed norms of one counterexample instance on its region Omega.
    Norm {
        #[command(flatten)]
        common: Common,
        /// transverse, nontransverse_equal or nontransverse_one [default: transverse].
        #[arg(long)]
        construction: Option<String>,
        /// Scale N [default: 8].
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        dt: Option<String>,
        #[arg(long)]
        dx: Option<String>,
    },
}

#[derive(Serialize)]
struct Report<'a> {
    schema: u32,
    #[serde(flatten)]
    body: &'a ReportBody,
    /// Excluded from the deterministic body.
    wall_time_s: f64,
}

type Runner = fn(Resolver) -> CliResult<Outcome>;

fn dispatch(command: Command) -> (Common, Vec<(&'static str, Option<String>)>, Runner) {
    match command {
        Command::Region { common, resolution } => (common, vec![("resolution", resolution)], commands::region),
        Command::Sweep {
            common,
            construction,
            n_list,
            vector_valued_up_to,
            dt,
            dx,
            tolerance,
        } => (
            common,
            vec![
                ("construction", construction),
                ("n_list", n_list),
                ("vector_valued_up_to", vector_valued_up_to),
                ("dt", dt),
                ("dx", dx),
                ("tolerance", tolerance),
            ],
            commands::sweep,
        ),
        Command::Verify {
            common,
            theorem,
            n_list,
            xi0,
            eta0,
        } => (
            common,
            vec![("theorem", theorem), ("n_list", n_list), ("xi0", xi0), ("eta0", eta0)],
            commands::verify_cmd,
        ),
        Command::Conditions {
            common,
            xi0,
            eta0,
            samples,
            mc_samples,
            pairs,
        } => (
            common,
            vec![
                ("xi0", xi0),
                ("eta0", eta0),
                ("samples", samples),
                ("mc_samples", mc_samples),
                ("pairs", pairs),
            ],
            commands::conditions,
        ),
        Command::Khintchine {
            common,
            n,
            coeffs,
            samples,
        } => (
            common,
            vec![("n", n), ("coeffs", coeffs), ("samples", samples)],
            commands::khintchine,
        ),
        Command::Norm {
            common,
            construction,
            n,
            dt,
            dx,
        } => (
            common,
            vec![("construction", construction), ("n", n), ("dt", dt), ("dx", dx)],
            commands::norm,
        ),
    }
}

fn run(cli: Cli) -> CliResult<bool> {
    let start = Instant::now();
    let (common, extra, runner) = dispatch(cli.command);
    let mut file = match &common.config {
        Some(path) => read_config_file(path)?,
        None => Default::default(),
    };
    let out = match (common.out.clone(), file.remove("out")) {
        (Some(p), _) => Some(p),
        (None, Some(p)) => Some(PathBuf::from(p)),
        (None, None) => None,
    };
    let mut flags = common.flags();
    flags.extend(extra);
    let outcome = runner(Resolver::new(file, flags))?;

    for line in &outcome.summary {
        println!("{line}");
    }
    let report = Report {
        schema: 1,
        body: &outcome.body,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out {
        for (name, bytes) in &outcome.files {
            write_atomic(&dir.join(name), bytes)?;
        }
        let mut json = serde_json::to_vec_pretty(&report)
            .map_err(|e| CliError::Config(format!("cannot serialize report: {e}")))?;
        json.push(b'\n');
        write_atomic(&dir.join("report.json"), &json)?;
    }
    println!(
        "{}: {} ({:.2} s)",
        outcome.body.command,
        if outcome.body.pass { "PASS" } else { "FAIL" },
        report.wall_time_s
    );
    Ok(outcome.body.pass)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
