use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sqg::experiment::{
    cmd_ineq_lab, cmd_ledger, cmd_simulate, cmd_sweep, cmd_verify_data, parse_overrides, ExitStatus,
    ExperimentConfig,
};

/// Dissipative SQG solver and verification harness.
///
/// Every command reads an optional config file of `key = value` lines and
/// then applies `--dotted.key value` overrides. Exit status: 0 pass,
/// 1 condition or bound failure, 2 blow-up, 3 configuration error.
#[derive(Parser)]
#[command(name = "sqg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file with `key = value` lines.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides such as `--recipe.delta 0.02` or `--sim.paired=true`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the smallness condition and the lower bounds of the data.
    VerifyData(Common),
    /// Integrate and write the trajectory table and checkpoint.
    Simulate {
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run every point of the `sweep.axis.*` grid.
    Sweep(Common),
    /// Empirical constants of the commutator and interpolation inequalities.
    IneqLab {
        /// kato_ponce, leibniz, gn, gn_grad, gn_dbeta or all.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        trials: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Re-check the energy ledger of a saved trajectory.
    Ledger {
        /// Defaults to `<output_dir>/trajectory.json`.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common, extra: Vec<(String, String)>) -> sqg::Result<ExperimentConfig> {
    let mut overrides = extra;
    overrides.extend(parse_overrides(&common.overrides)?);
    ExperimentConfig::load(common.config.as_deref(), &overrides)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::VerifyData(c) => load(c, vec![]).and_then(|cfg| cmd_verify_data(&cfg)),
        Command::Simulate { resume, common } => {
            load(common, vec![]).and_then(|cfg| cmd_simulate(&cfg, *resume))
        }
        Command::Sweep(c) => load(c, vec![]).and_then(|cfg| cmd_sweep(&cfg)),
        Command::IneqLab { kind, trials, common } => {
            let mut extra = Vec::new();
            if let Some(k) = kind {
                extra.push(("lab.kind".to_string(), k.clone()));
            }
            if let Some(t) = trials {
                extra.push(("lab.trials".to_string(), t.to_string()));
            }
            load(common, extra).and_then(|cfg| cmd_ineq_lab(&cfg))
        }
        Command::Ledger { trajectory, common } => {
            load(common, vec![]).and_then(|cfg| cmd_ledger(&cfg, trajectory.as_deref()))
        }
    };
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::from(outcome.status.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(ExitStatus::ConfigError.code() as u8)
        }
    }
}
