use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use darepc::commands::{self, resolve_out, Exit, SimulateArgs, SweepArgs};
use darepc::{ExperimentConfig, RunContext};

#[derive(Parser)]
#[command(name = "darepc", version, about = "Learn perception contracts and verify closed-loop safety")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory; falls back to DAREPC_OUT, then `out`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Learn a contract over the full environment grid.
    Learn(Common),
    /// Run the refinement loop and validate its outcome.
    Verify(Common),
    /// Simulate one closed-loop run.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        env: Option<Vec<f64>>,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Violation rate per environment cell.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        n_per_cell: Option<usize>,
    },
}

fn context(c: &Common) -> Result<RunContext, ExitCode> {
    match ExperimentConfig::load(&c.config) {
        Ok(cfg) => Ok(RunContext::new(cfg, c.seed, resolve_out(c.out.as_deref()), c.jobs)),
        Err(e) => {
            eprintln!("error: {e:#}");
            Err(ExitCode::from(Exit::Config.code() as u8))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, run): (&Common, Box<dyn Fn(&RunContext) -> commands::Outcome>) = match &cli.cmd {
        Cmd::Learn(c) => (c, Box::new(commands::learn)),
        Cmd::Verify(c) => (c, Box::new(commands::verify)),
        Cmd::Simulate { common, x0, env, horizon } => {
            let args = SimulateArgs { x0: x0.clone(), env: env.clone(), horizon: *horizon };
            (common, Box::new(move |ctx| commands::simulate_one(ctx, &args)))
        }
        Cmd::Sweep { common, resolution, n_per_cell } => {
            let args = SweepArgs { resolution: *resolution, n_per_cell: *n_per_cell };
            (common, Box::new(move |ctx| commands::sweep(ctx, &args)))
        }
    };
    let ctx = match context(common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match run(&ctx) {
        Ok(exit) => ExitCode::from(exit.code() as u8),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.exit.code() as u8)
        }
    }
}
