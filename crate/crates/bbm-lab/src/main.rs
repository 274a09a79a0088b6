use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use bbm_lab::acceptance;
use bbm_lab::config::{ExperimentConfig, ExperimentKind, Overrides, OUTPUT_ROOT_ENV};
use bbm_lab::experiment::execute;
use bbm_lab::plan::plan;
use bbm_lab::report::{write_artifacts, REPORT_FILE};

#[derive(Parser)]
#[command(name = "bbm-lab", version, about = "BBM two-soliton collision experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the resolved plan as JSON.
    Plan(ExperimentArgs),
    /// Run one experiment and write its artifacts.
    Run(ExperimentArgs),
    /// Run a collision sweep over several speeds.
    Sweep(ExperimentArgs),
    /// Run the acceptance suite.
    Verify,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<ExperimentKind>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu0: Option<f64>,
    /// Comma-separated speeds for a sweep.
    #[arg(long, value_delimiter = ',')]
    mu0_list: Option<Vec<f64>>,
    /// Number of grid points.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    halfwidth: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    start_separation: Option<f64>,
    /// Output directory of this experiment.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root under which output directories are named when `--out` is absent.
    #[arg(long, env = OUTPUT_ROOT_ENV)]
    out_root: Option<PathBuf>,
    #[arg(long)]
    budget_seconds: Option<f64>,
}

impl ExperimentArgs {
    fn resolve(self, forced: Option<ExperimentKind>) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(p) => Overrides::from_file(p)?,
            None => Overrides::default(),
        };
        let cli = Overrides {
            kind: forced.or(self.kind),
            lambda: self.lambda,
            mu0: self.mu0,
            mu0_list: self.mu0_list,
            grid: self.grid,
            halfwidth: self.halfwidth,
            dt: self.dt,
            start_separation: self.start_separation,
            output_dir: self.out,
            budget_seconds: self.budget_seconds,
        };
        ExperimentConfig::resolve(file.merged(cli), self.out_root)
    }
}

fn run(cfg: ExperimentConfig) -> Result<ExitCode> {
    let plan = plan(&cfg)?;
    log::info!("expected cost {:.0} s", plan.expected_seconds);
    let artifacts = execute(&cfg, &plan)?;
    write_artifacts(&cfg, &plan, &artifacts)?;
    for c in &artifacts.report.checks {
        let tag = if c.passed { "ok  " } else { "FAIL" };
        println!("{tag} {} = {:.6e} (threshold {:.3e}{})", c.name, c.value, c.threshold, if c.hard { ", hard" } else { "" });
    }
    println!("wrote {}", cfg.output_dir.join(REPORT_FILE).display());
    let hard = artifacts.report.hard_failures();
    if hard.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        log::error!("{} hard invariant(s) failed", hard.len());
        Ok(ExitCode::from(2))
    }
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Plan(a) => {
            println!("{}", plan(&a.resolve(None)?)?.to_json()?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(a) => run(a.resolve(None)?),
        Command::Sweep(a) => run(a.resolve(Some(ExperimentKind::Sweep))?),
        Command::Verify => {
            let verdicts = acceptance::run_all(|v| println!("{}", v.line()));
            let failed = verdicts.iter().filter(|v| !v.passed).count();
            println!("{} of {} criteria passed", verdicts.len() - failed, verdicts.len());
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
