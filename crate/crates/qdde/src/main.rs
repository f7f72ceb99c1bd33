use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qdde::commands::{self, Command};
use qdde::scenario::{parse_gate_sets, Scenario};
use qdde::CliError;

#[derive(Parser)]
#[command(name = "qdde", version, about = "Quantum drift-diffusion solver benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one scenario and write per-grid-point values plus ε.
    Solve(Common),
    /// ε, ε_c and ε_q across `n_x_list`.
    ErrorScan(Common),
    /// QFT or FABLE depth per gate set across `q_list`.
    DepthScan(Common),
    /// Per-subroutine pipeline depths for each of `cases`.
    GatesetScan(Common),
    /// Logical/physical qubits and STAR depth as a markdown table.
    ResourceTable(Common),
    /// ε_q across `shots_list` with the Hoeffding bound.
    ShotsScan(Common),
    /// Naive against low-rank state preparation depth in the TKET set.
    StateprepCompare(Common),
    /// Print the members of every gate set.
    Gatesets,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file; missing keys take the reference parameters.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated gate sets, overriding `gate_sets`.
    #[arg(long)]
    gateset: Option<String>,
    /// Output directory, overriding `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(c: &Common) -> Result<Scenario, CliError> {
    let mut sc = match &c.scenario {
        Some(p) => Scenario::from_file(p)?,
        None => Scenario::default(),
    };
    if let Some(s) = c.seed {
        sc.seed = s;
    }
    if let Some(g) = &c.gateset {
        sc.gate_sets = Some(parse_gate_sets(g).map_err(CliError::InvalidScenario)?);
    }
    if let Some(o) = &c.out {
        sc.out = Some(o.clone());
    }
    sc.validate()?;
    Ok(sc)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match &cli.command {
        Cmd::Solve(c) => (Command::Solve, c),
        Cmd::ErrorScan(c) => (Command::ErrorScan, c),
        Cmd::DepthScan(c) => (Command::DepthScan, c),
        Cmd::GatesetScan(c) => (Command::GatesetScan, c),
        Cmd::ResourceTable(c) => (Command::ResourceTable, c),
        Cmd::ShotsScan(c) => (Command::ShotsScan, c),
        Cmd::StateprepCompare(c) => (Command::StateprepCompare, c),
        Cmd::Gatesets => {
            print!("{}", commands::gate_set_catalog());
            return ExitCode::SUCCESS;
        }
    };
    let result = load(common).and_then(|sc| {
        let out = sc.out.clone().unwrap_or_else(|| PathBuf::from("."));
        commands::run(cmd, &sc, &out)
    });
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qdde: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
