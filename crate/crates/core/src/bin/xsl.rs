use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use xsl::experiment::{self, DirLock, ExperimentConfig, Paths};
use xsl::Error;

#[derive(Parser)]
#[command(name = "xsl", version, about = "Cross-situational word learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Built-in toy defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Global seed override.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write naming-event target tables for every age bin.
    Stats(Common),
    /// Generate world, pool, bin manifests and test sets.
    Generate(Common),
    /// Train the auditory stage and/or age bins.
    Train {
        #[command(flatten)]
        common: Common,
        /// `auditory` or an age-bin name; everything when omitted.
        #[arg(long)]
        bin: Option<String>,
    },
    /// Evaluate best checkpoints into metrics reports.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bin: Option<String>,
    },
    /// Tabulate vocabulary curves and score trajectories from reports.
    Curves(Common),
    /// Check hand-written gradients against finite differences.
    Gradcheck(Common),
    /// stats, generate, train, eval and curves in sequence.
    Run(Common),
}

fn setup(c: &Common) -> Result<(ExperimentConfig, Paths), Error> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    let out = c
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| Error::BadConfig("no output directory: pass --out or set out_dir".into()))?;
    Ok((cfg, Paths::new(out)))
}

fn locked<T>(paths: &Paths, f: impl FnOnce() -> Result<T, Error>) -> Result<T, Error> {
    let _lock = DirLock::acquire(Path::new(&paths.root))?;
    f()
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Stats(c) => {
            let (cfg, paths) = setup(&c)?;
            locked(&paths, || experiment::cmd_stats(&cfg, &paths)).map(drop)
        }
        Command::Generate(c) => {
            let (cfg, paths) = setup(&c)?;
            locked(&paths, || experiment::cmd_generate(&cfg, &paths)).map(|bins| {
                for b in bins {
                    eprintln!(
                        "{}: {} pairs, achieved {}/{}, deficit {}",
                        b.bin, b.pairs, b.achieved, b.target, b.deficit
                    );
                }
            })
        }
        Command::Train { common, bin } => {
            let (cfg, paths) = setup(&common)?;
            locked(&paths, || experiment::cmd_train(&cfg, &paths, bin.as_deref())).map(|runs| {
                for r in runs {
                    eprintln!("{}: {} examples, best epoch {}", r.bin, r.examples, r.best_epoch);
                }
            })
        }
        Command::Eval { common, bin } => {
            let (cfg, paths) = setup(&common)?;
            locked(&paths, || experiment::cmd_eval(&cfg, &paths, bin.as_deref())).map(|reports| {
                for r in reports {
                    eprintln!(
                        "{}: semtest {:.2}% lextest {:.2}% abx {:.2}%",
                        r.bin, r.semtest_mean_pct, r.lextest_pct, r.abx_error_pct
                    );
                }
            })
        }
        Command::Curves(c) => {
            let (cfg, paths) = setup(&c)?;
            locked(&paths, || experiment::cmd_curves(&cfg, &paths)).map(drop)
        }
        Command::Gradcheck(c) => {
            let (cfg, paths) = setup(&c)?;
            locked(&paths, || experiment::cmd_gradcheck(&cfg, &paths))
                .map(|r| eprintln!("max relative error {:.3e}", r.max_relative_error))
        }
        Command::Run(c) => {
            let (cfg, paths) = setup(&c)?;
            locked(&paths, || experiment::run_all(&cfg, &paths)).map(drop)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(experiment::exit_code(&e) as u8)
        }
    }
}
