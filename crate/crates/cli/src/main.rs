use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clustab_cli::{run, Command, Options};

#[derive(Parser)]
#[command(
    name = "clustab",
    version,
    about = "Stability-based selection of the number of clusters"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Select k by normalized stability; writes stability.json, curve.csv, curve.svg.
    Select(Common),
    /// Evaluate the selected k on the test split; writes evaluation.json.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Prior selection report [default: <out>/stability.json].
        #[arg(long)]
        stability: Option<PathBuf>,
    },
    /// Rank clusterer/classifier grids; writes leaderboard.json and leaderboard.csv.
    Gridsearch(Common),
    /// Silhouette and Davies-Bouldin sweeps on both splits; writes internal.csv.
    Internal(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, env = "CLUSTAB_WORKERS")]
    workers: Option<usize>,
    /// Overrides cv.base_seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn options(c: Common, stability: Option<PathBuf>) -> Options {
    Options {
        config: c.config,
        out: c.out,
        workers: c.workers,
        seed: c.seed,
        stability,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (cmd, opts) = match cli.command {
        Cmd::Select(c) => (Command::Select, options(c, None)),
        Cmd::Evaluate { common, stability } => (Command::Evaluate, options(common, stability)),
        Cmd::Gridsearch(c) => (Command::Gridsearch, options(c, None)),
        Cmd::Internal(c) => (Command::Internal, options(c, None)),
    };
    match run(cmd, &opts) {
        Ok(dir) => {
            eprintln!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.exit_code())
        }
    }
}
