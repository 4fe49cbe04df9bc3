use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use synthmarket::commands::{self, Context};
use synthmarket::error::StageExt;
use synthmarket::{io, CliError, PipelineConfig};
use synthmarket_core::sim::DeskSim;

#[derive(Parser)]
#[command(name = "synthmarket", version, about = "Factor-based market generator pipeline")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON pipeline config, or a manifest written by an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for per-asset and per-scenario work.
    #[arg(long, env = "SYNTHMARKET_WORKERS")]
    workers: Option<usize>,
    /// Run directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit factors, cluster generators and residual laws.
    Fit(Common),
    /// Draw the scenario set from the fitted bundle.
    Generate(Common),
    /// Compare scenarios with the historical panels.
    Evaluate(Common),
    /// Sharpe profiles on bootstrap resamples and scenarios.
    Backtest(Common),
    /// Refit on a synthetic sample and check bands against the known truth.
    Regurgitate(Common),
    /// Coverage of a synthetic-sample estimator against sample size.
    Biaslab(Common),
    /// fit, generate, evaluate, backtest and regurgitate in order.
    Run(Common),
    /// Write the seeded desk dataset (factor + GARCH simulator) as CSV.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rows: Option<usize>,
    },
}

fn context(c: Common) -> Result<Context, CliError> {
    let config = PipelineConfig::load(&c.config)?.with_seed(c.seed);
    Context::new(config, c.out, c.workers)
}

fn run(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Fit(c) => commands::fit(&context(c)?).map(drop),
        Cmd::Generate(c) => commands::generate(&context(c)?).map(drop),
        Cmd::Evaluate(c) => commands::evaluate(&context(c)?).map(drop),
        Cmd::Backtest(c) => commands::backtest(&context(c)?).map(drop),
        Cmd::Regurgitate(c) => commands::regurgitate(&context(c)?).map(drop),
        Cmd::Biaslab(c) => commands::biaslab(&context(c)?).map(drop),
        Cmd::Run(c) => commands::run_all(&context(c)?).map(drop),
        Cmd::Simulate { out, seed, rows } => {
            let base = DeskSim::default();
            let sim = DeskSim { seed: seed.unwrap_or(base.seed), n: rows.unwrap_or(base.n), ..base };
            io::write_panel(&out, &sim.simulate().stage("simulate")?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
