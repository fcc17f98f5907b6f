//! Scenario-driven command line for constructing, simulating and verifying
//! resonance-channel drift in near-integrable two-degree-of-freedom
//! Hamiltonians.
//!
//! Exit codes: 0 success, 2 validation failure, 3 missing inputs,
//! 4 numeric failure.

mod commands;
mod jsonw;
mod scenario;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{
    run_construct, run_poincare, run_report, run_resonances, run_simulate, run_verify_drift,
    run_verify_gevrey, CmdError,
};
use scenario::Scenario;

#[derive(Parser)]
#[command(
    name = "resodrift",
    version,
    about = "Resonance-channel drift in near-integrable Hamiltonians: construct, simulate, verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Bundled scenario name (torus_example, elliptic_example) or a JSON file.
    #[arg(long)]
    scenario: String,
    /// Output directory for reports and tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario's perturbation strength.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Restrict to one resonance channel.
    #[arg(long)]
    channel: Option<usize>,
}

#[derive(Args)]
struct PoincareArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    /// Section coordinate index (0..3 in the scenario's chart).
    #[arg(long, default_value_t = 1)]
    coordinate: usize,
    /// Section value.
    #[arg(long, default_value_t = 0.0)]
    value: f64,
    /// Number of random seeds.
    #[arg(long, default_value_t = 8)]
    seeds: usize,
    /// Integration horizon per seed.
    #[arg(long, default_value_t = 2000.0)]
    t_max: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Build the integrable model and emit the condition/determinant summary.
    Construct(ScenarioArgs),
    /// Emit the resonance-channel table and the lattice gap table.
    Resonances(ScenarioArgs),
    /// Integrate one channel orbit and write the trajectory CSV.
    Simulate(ScenarioArgs),
    /// Verify the drift laws, conservation and chart consistency.
    VerifyDrift(ScenarioArgs),
    /// Verify the finite-order derivative-bound estimates.
    VerifyGevrey(ScenarioArgs),
    /// Collect Poincaré section crossings into a CSV point cloud.
    Poincare(PoincareArgs),
    /// Aggregate all verification outputs into one pass/fail table.
    Report {
        /// Directory holding the verification outputs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_scenario(args: &ScenarioArgs) -> Result<Scenario, CmdError> {
    let mut scenario = Scenario::load(&args.scenario).map_err(CmdError::Validation)?;
    if let Some(eps) = args.epsilon {
        scenario.epsilon = eps;
    }
    Ok(scenario)
}

fn run(cli: Cli) -> Result<(), CmdError> {
    match cli.command {
        Command::Construct(args) => {
            let scenario = load_scenario(&args)?;
            run_construct(&scenario, &commands::out_dir(&args.out))
        }
        Command::Resonances(args) => {
            let scenario = load_scenario(&args)?;
            run_resonances(&scenario, &commands::out_dir(&args.out))
        }
        Command::Simulate(args) => {
            let scenario = load_scenario(&args)?;
            run_simulate(&scenario, &commands::out_dir(&args.out), args.channel)
        }
        Command::VerifyDrift(args) => {
            let scenario = load_scenario(&args)?;
            run_verify_drift(&scenario, &commands::out_dir(&args.out), args.channel)
        }
        Command::VerifyGevrey(args) => {
            let scenario = load_scenario(&args)?;
            run_verify_gevrey(&scenario, &commands::out_dir(&args.out))
        }
        Command::Poincare(args) => {
            let scenario = load_scenario(&args.common)?;
            run_poincare(
                &scenario,
                &commands::out_dir(&args.common.out),
                args.coordinate,
                args.value,
                args.seeds,
                args.t_max,
            )
        }
        Command::Report { out } => run_report(&commands::out_dir(&out)),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {}", err.message());
        std::process::exit(err.exit_code());
    }
}
