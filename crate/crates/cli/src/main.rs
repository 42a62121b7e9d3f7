use std::path::PathBuf;
use std::process::ExitCode;

use anova_rgs_cli::config::Command;
use anova_rgs_cli::{run_with_jobs, CliError, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "anova-rgs",
    version,
    about = "RKHS ANOVA meta-models with ridge group sparse estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, replacing `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed, replacing `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replicate-level parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    /// Dotted `key=value` override, applied before validation. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Sub {
    /// Fit a meta-model and write model.json, fit.csv and trace.csv.
    Fit(Common),
    /// Compute the rate-driven tuning table.
    Tune(Common),
    /// Write simulated datasets.
    Simulate(Common),
    /// Run a rate sweep over sample sizes.
    Sweep(Common),
    /// Run covering, Sudakov and concentration probes.
    Probe(Common),
}

fn execute(cli: Cli) -> Result<String, CliError> {
    let (cmd, c) = match cli.command {
        Sub::Fit(c) => (Command::Fit, c),
        Sub::Tune(c) => (Command::Tune, c),
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::Sweep(c) => (Command::Sweep, c),
        Sub::Probe(c) => (Command::Probe, c),
    };
    let mut overrides = vec![format!("command=\"{}\"", cmd.name())];
    if let Some(seed) = c.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(out) = &c.out {
        overrides.push(format!(
            "output_dir={}",
            toml::Value::String(out.display().to_string())
        ));
    }
    overrides.extend(c.overrides);
    let cfg = RunConfig::load(&c.config, &overrides)?;
    let outcome = run_with_jobs(&cfg, c.jobs)?;
    Ok(serde_json::to_string(&outcome).expect("outcome serializes"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
