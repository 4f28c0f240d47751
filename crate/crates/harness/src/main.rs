use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use congestion_bandit::graph::GraphSpec;
use congestion_bandit::oracle::battery;
use congestion_bandit::space::AgentSpace;
use congestion_bandit_harness::{load_config, parse_point, run_experiment, HarnessError, Result};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "congestion-bandit", version, about = "Bandit learning dynamics in congestion games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write per-seed CSVs plus summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the cross-check battery against the brute-force oracles.
    Validate,
    /// Print an agent's basis paths, prefix map and spanning constant.
    Spanner {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        agent: usize,
    },
    /// Split a flow point into paths with convex weights.
    Decompose {
        #[arg(long)]
        graph: PathBuf,
        /// JSON array, or a file containing one.
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = 0)]
        agent: usize,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn agent_space(graph: &Path, agent: usize) -> Result<AgentSpace> {
    let spec = GraphSpec::from_json(&read(graph)?)?;
    let (_, mut subs) = spec.agent_subgraphs()?;
    if agent >= subs.len() {
        return Err(HarnessError::Input(format!(
            "agent {agent} out of range ({} agents)",
            subs.len()
        )));
    }
    Ok(AgentSpace::network(subs.swap_remove(agent))?)
}

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

#[derive(Serialize)]
struct Atom {
    path: Vec<usize>,
    weight: f64,
}

#[derive(Serialize)]
struct Decomposition {
    atoms: Vec<Atom>,
    basis_coefficients: Vec<f64>,
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run { config, out } => {
            let resolved = load_config(&config)?;
            let summary = run_experiment(&resolved, out.as_deref())?;
            let dir = out.unwrap_or(resolved.config.out_dir);
            eprintln!(
                "{} of {} seeds completed; results in {}",
                summary.seeds.len() - summary.failed,
                summary.seeds.len(),
                dir.display()
            );
            Ok(summary.failed == 0)
        }
        Command::Validate => {
            let report = battery::run();
            print_json(&report)?;
            Ok(report.passed)
        }
        Command::Spanner { graph, agent } => {
            print_json(&agent_space(&graph, agent)?.spanner().report())?;
            Ok(true)
        }
        Command::Decompose { graph, point, agent } => {
            let space = agent_space(&graph, agent)?;
            let text = if Path::new(&point).is_file() {
                read(Path::new(&point))?
            } else {
                point
            };
            let x = parse_point(&text)?;
            let atoms = space
                .caratheodory(&x)?
                .into_iter()
                .map(|(p, w)| Atom {
                    path: p.resources().to_vec(),
                    weight: w,
                })
                .collect();
            let basis_coefficients = space.spanner().decompose(&x)?;
            print_json(&Decomposition {
                atoms,
                basis_coefficients,
            })?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
