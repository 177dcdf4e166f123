use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use proxsub::bench::{self, CheckOptions, ExperimentConfig, OpfConfig};

/// Benchmarks and checks for the extrapolated proximal subgradient solver.
#[derive(Parser)]
#[command(name = "proxsub", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compressed-sensing sweep over cases, seeds and solvers.
    CsRun {
        #[arg(long)]
        config: PathBuf,
    },
    /// Multi-start DC OPF with PV placement.
    OpfRun {
        #[arg(long)]
        config: PathBuf,
        /// Print the best plan as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run the invariant suite and print a pass/fail matrix.
    Check {
        /// Network directory to validate instead of the bundled data.
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corrupt one recorded objective to exercise the descent check.
        #[arg(long, hide = true)]
        inject_monotonicity_breaker: bool,
    },
    /// Write the CSV bundle of one standard compressed-sensing instance.
    Gen {
        #[arg(long)]
        case: u8,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> proxsub::Result<bool> {
    match cmd {
        Command::CsRun { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let res = bench::run_cs_sweep(&cfg)?;
            print!("{}", res.table());
            for r in res.runs.iter().filter(|r| !r.succeeded()) {
                eprintln!("case {} seed {} {}: {}", r.case, r.seed, r.solver.name(), r.message);
            }
            Ok(res.failures() == 0)
        }
        Command::OpfRun { config, json } => {
            let cfg = OpfConfig::load(&config)?;
            let res = bench::run_opf(&cfg)?;
            for r in res.runs.iter().filter(|r| !r.succeeded()) {
                eprintln!("start {} {}: {}", r.start, r.solver.name(), r.message);
            }
            match (&res.best_plan, json) {
                (Some(plan), true) => println!("{}", serde_json::to_string_pretty(plan)?),
                (Some(plan), false) => print!("{}\n{}", res.table(), plan.table()),
                (None, _) => print!("{}", res.table()),
            }
            Ok(res.failures() == 0)
        }
        Command::Check {
            network,
            seed,
            inject_monotonicity_breaker,
        } => {
            let rep = bench::run_checks(&CheckOptions {
                network_dir: network,
                inject_monotonicity_breaker,
                seed,
            });
            println!("{rep}");
            Ok(rep.all_passed())
        }
        Command::Gen { case, seed, out, gamma } => {
            let inst = bench::generate_bundle(case, seed, gamma, &out)?;
            println!(
                "case {case} seed {seed}: {}x{} {} matrix written to {}",
                inst.m(),
                inst.d(),
                inst.case.kind.name(),
                out.display()
            );
            Ok(true)
        }
    }
}
