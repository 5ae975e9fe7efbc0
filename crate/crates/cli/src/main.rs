mod config;
mod experiments;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{Config, Overrides};
use experiments::RunError;
use report::{write_outputs, Provenance, Report};

#[derive(Parser)]
#[command(name = "pblab", version, about = "Poisson bracket lower bounds for partitions of unity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bracket integral against the level-set crossing count
    CoareaCheck(Args),
    /// Essential-set bounds for one partition
    EssentialBound(Args),
    /// Bound for a pair of covers by discs of bounded area
    GenCoverBound(Args),
    /// Degree bound and its behavior under duplication
    DegreeBound(Args),
    /// Lattice partitions as the cell size shrinks
    SharpScaling(Args),
    /// Random division pairs and the survival experiment
    DivisionDemo(Args),
    /// The symplectic linear algebra constant
    LinalgConstant(Args),
    /// Search for partitions with small brackets
    Optimize(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Command {
    fn parts(&self) -> (&'static str, &Args) {
        match self {
            Command::CoareaCheck(a) => ("coarea-check", a),
            Command::EssentialBound(a) => ("essential-bound", a),
            Command::GenCoverBound(a) => ("gen-cover-bound", a),
            Command::DegreeBound(a) => ("degree-bound", a),
            Command::SharpScaling(a) => ("sharp-scaling", a),
            Command::DivisionDemo(a) => ("division-demo", a),
            Command::LinalgConstant(a) => ("linalg-constant", a),
            Command::Optimize(a) => ("optimize", a),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = cli.command.parts();
    match run(name, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(RunError::Config(msg)) => {
            eprintln!("pblab {name}: configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(RunError::Failed(msg)) => {
            eprintln!("pblab {name}: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(name: &str, args: &Args) -> Result<bool, RunError> {
    let mut cfg = Config::load(&args.config)?;
    if cfg.experiment != name {
        return Err(RunError::Config(format!("config is for experiment {:?}, not {name}", cfg.experiment)));
    }
    cfg.apply(&Overrides { seed: args.seed, resolution: args.resolution, out: args.out.clone() });
    if experiments::is_randomized(name) {
        cfg.require_seed()?;
    }
    let out = std::env::var_os("PBLAB_OUT")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let threads = args.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| RunError::Config(format!("thread pool: {e}")))?;

    let start = Instant::now();
    let artifacts = pool.install(|| experiments::run(name, &cfg))?;
    let wall = start.elapsed().as_secs_f64();

    let pass = artifacts.checks.iter().all(|c| c.pass);
    let report = Report {
        experiment: name.to_string(),
        provenance: Provenance {
            git_hash: env!("PBLAB_GIT_HASH"),
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            resolution: cfg.resolution()?,
        },
        inputs: cfg,
        checks: artifacts.checks.clone(),
        pass,
        results: artifacts.results.clone(),
    };
    write_outputs(&out, &report, &artifacts, wall).map_err(|e| RunError::Failed(format!("writing {}: {e}", out.display())))?;

    for c in &report.checks {
        println!("{} {}: lhs {:.6e} rhs {:.6e} tol {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.lhs, c.rhs, c.tolerance);
    }
    let passed = report.checks.iter().filter(|c| c.pass).count();
    println!("{passed} of {} checks passed in {wall:.1} s; outputs in {}", report.checks.len(), out.display());
    Ok(pass)
}
