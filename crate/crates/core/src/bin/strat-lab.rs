use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use strat_lab::catalog::{catalog, Model};
use strat_lab::models;
use strat_lab::scenario::{Scenario, TaskStatus};
use strat_lab::Error;

#[derive(Parser)]
#[command(name = "strat-lab", version, about = "Quantitative stratification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `output` in the scenario).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for intra-task parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the quadrature tolerance.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task in a scenario file.
    Run { config: PathBuf },
    /// Print the model catalog.
    ListModels,
    /// Check a scenario file and its model without running tasks.
    Validate { config: PathBuf },
}

fn load(cli: &Cli, path: &PathBuf) -> Result<Scenario, Error> {
    let mut s = Scenario::load(path)?;
    if let Some(seed) = cli.seed {
        s.set_seed(seed);
    }
    if let Some(t) = cli.tolerance {
        s.set_tolerance(t)?;
    }
    Ok(s)
}

fn run(cli: &Cli) -> Result<bool, Error> {
    match &cli.command {
        Command::ListModels => {
            for e in catalog() {
                println!("{:<36} {:<28} {}", e.pattern, e.example, e.summary);
            }
            Ok(true)
        }
        Command::Validate { config } => {
            let s = load(cli, config)?;
            let model = s.check()?;
            println!("model {} (dimension {})", model.id(), model.dim());
            println!("{} task(s), seed {}", s.tasks.len(), s.analysis.seed);
            if let Model::Map(map) = &model {
                let rep = models::validate(map, 200, s.analysis.seed)?;
                println!(
                    "unit norm {:.2e}, gradient mismatch {:.2e}, energy {:.6} (bound {:.6})",
                    rep.max_unit_norm_violation,
                    rep.max_gradient_mismatch,
                    rep.energy_unit_ball.value,
                    rep.energy_bound
                );
                if !rep.passed() {
                    println!("model validation FAILED");
                    return Ok(false);
                }
            }
            println!("ok");
            Ok(true)
        }
        Command::Run { config } => {
            let s = load(cli, config)?;
            let out = cli
                .out
                .clone()
                .or_else(|| s.output.clone())
                .unwrap_or_else(|| PathBuf::from("strat-lab-out"));
            let report = s.run(&out)?;
            for o in &report.outcomes {
                match &o.status {
                    TaskStatus::Passed => println!("task {} {}: passed", o.index, o.kind),
                    TaskStatus::Failed(r) => println!("task {} {}: FAILED {}", o.index, o.kind, r),
                }
            }
            println!("manifest {}", report.manifest.display());
            Ok(report.all_passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("strat-lab: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("strat-lab: {e}");
            ExitCode::from(2)
        }
    }
}
