mod commands;
mod failure;
mod sim;
mod spec;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mallitree::equations::Which;
use serde_json::Value;

use failure::{code, CmdResult, Failure};

/// Decorated-tree renormalization, tangent and dual equations, identity
/// checks and simulation, driven by one JSON spec file.
///
/// SPEC is a path or `preset:<name>` (she, she-additive, phi4-3, phi4-2,
/// phi6-2, kpz-like). Exit codes: 0 ok, 1 internal, 2 spec or
/// under-resolved grid, 3 not subcritical, 4 simplicity violated,
/// 5 verification failed, 6 numerical blow-up. The worker thread count is
/// read from MALLITREE_THREADS.
#[derive(Parser)]
#[command(name = "mallitree", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum WhichArg {
    Renorm,
    Tangent,
    Dual,
}

impl From<WhichArg> for Which {
    fn from(w: WhichArg) -> Self {
        match w {
            WhichArg::Renorm => Which::Renorm,
            WhichArg::Tangent => Which::Tangent,
            WhichArg::Dual => Which::Dual,
        }
    }
}

#[derive(clap::Args)]
struct Format {
    /// JSON output (default).
    #[arg(long, conflicts_with = "pretty")]
    json: bool,
    /// Human-readable output.
    #[arg(long)]
    pretty: bool,
}

#[derive(clap::Args)]
struct SimArgs {
    spec: String,
    /// Overrides `simulation.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for CSV fields and metrics.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// List trees below a cutoff with homogeneity, symmetry factor and
    /// non-vanishing flag.
    Trees {
        spec: String,
        /// Rational cutoff, may mention kappa; defaults to `verify.cutoff`.
        #[arg(long, allow_hyphen_values = true)]
        cutoff: Option<String>,
        /// List the dual family instead.
        #[arg(long)]
        dual: bool,
        #[command(flatten)]
        format: Format,
    },
    /// Renormalized, tangent or dual equation.
    Equations {
        spec: String,
        #[arg(long, value_enum, default_value = "renorm")]
        which: WhichArg,
        #[command(flatten)]
        format: Format,
    },
    /// Run the identity suite; exit 5 if any check fails.
    Verify {
        spec: String,
        /// Rational cutoff, may mention kappa; defaults to `verify.cutoff`.
        #[arg(long, allow_hyphen_values = true)]
        cutoff: Option<String>,
        /// Test hook: perturb every symmetry factor.
        #[arg(long, hide = true)]
        corrupt_symmetry: bool,
    },
    /// Solve the regularized equation for one noise sample.
    Simulate(SimArgs),
    /// Compare the tangent pairing with both dual solvers.
    CheckDuality(SimArgs),
    /// Finite-difference convergence of the tangent solution.
    CheckFrechet(SimArgs),
}

enum Output {
    Json(Value),
    Text(String),
}

fn run(cmd: Cmd) -> Result<Output, Failure> {
    let json = |r: CmdResult| r.map(Output::Json);
    match cmd {
        Cmd::Trees { spec, cutoff, dual, format } => {
            let l = spec::load(&spec)?;
            let c = spec::cutoff(cutoff.as_deref(), &l.spec)?;
            let r = commands::trees(&l, c, dual)?;
            Ok(if format.pretty { Output::Text(commands::trees_pretty(&r)) } else { Output::Json(r) })
        }
        Cmd::Equations { spec, which, format } => {
            let l = spec::load(&spec)?;
            let r = commands::equations(&l, which.into())?;
            Ok(if format.pretty { Output::Text(commands::equations_pretty(&r)) } else { Output::Json(r) })
        }
        Cmd::Verify { spec, cutoff, corrupt_symmetry } => {
            let l = spec::load(&spec)?;
            let c = spec::cutoff(cutoff.as_deref(), &l.spec)?;
            json(commands::verify(&l, c, corrupt_symmetry))
        }
        Cmd::Simulate(a) => json(sim::simulate(&spec::load(&a.spec)?, a.seed, a.out.as_deref())),
        Cmd::CheckDuality(a) => json(sim::check_duality_cmd(&spec::load(&a.spec)?, a.seed, a.out.as_deref())),
        Cmd::CheckFrechet(a) => json(sim::check_frechet_cmd(&spec::load(&a.spec)?, a.seed, a.out.as_deref())),
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("MALLITREE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Failure::new(code::SPEC, format!("MALLITREE_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::new(code::INTERNAL, format!("thread pool: {e}")))
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(s: &str) {
    let _ = std::io::stdout().lock().write_all(s.as_bytes());
}

fn print_json(v: &Value) {
    emit(&format!("{}\n", serde_json::to_string_pretty(v).expect("reports serialize")));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| run(cli.cmd));
    match result {
        Ok(Output::Json(v)) => {
            print_json(&v);
            ExitCode::SUCCESS
        }
        Ok(Output::Text(s)) => {
            emit(&s);
            ExitCode::SUCCESS
        }
        Err(f) => {
            if let Some(r) = &f.report {
                print_json(r);
            }
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
