use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ampcf::commands::{self, EvalSplit};
use ampcf::config::RunConfig;
use ampcf::Result;

#[derive(Parser)]
#[command(name = "ampcf", version, about = "Attentive multi-persona collaborative filtering")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "ampcf.toml")]
    config: PathBuf,

    /// Overrides `output_dir` from the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Validation,
    Test,
}

impl From<SplitArg> for EvalSplit {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Validation => EvalSplit::Validation,
            SplitArg::Test => EvalSplit::Test,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint plus loss history.
    Train {
        /// Single-threaded, bit-reproducible training.
        #[arg(long)]
        deterministic: bool,
        /// Gradient shards per minibatch (0 = one per core).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Leave-one-out HR/NDCG of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Taste-distribution distance of a checkpoint's recommendations.
    Tdd {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Taste space file to reuse or create.
        #[arg(long)]
        space: Option<PathBuf>,
        /// Also report the popularity ranking.
        #[arg(long)]
        popularity: bool,
    },
    /// Taste-space persona baseline: ranking and TDD reports.
    Aisp {
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Markdown explanation of one user's recommendations.
    Explain {
        /// External user id as it appears in the dataset.
        #[arg(long)]
        user: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        titles: Option<PathBuf>,
        #[arg(long)]
        list_size: Option<usize>,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg: RunConfig = commands::load_config(&cli.config)?;
    if let Some(dir) = cli.output_dir {
        cfg.output_dir = dir;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Train { deterministic, workers } => {
            let a = commands::cmd_train(&cfg, deterministic, workers)?;
            let best = &a.outcome.history[a.outcome.best_epoch.saturating_sub(1)];
            println!(
                "best epoch {}: val HR={} NDCG={}",
                a.outcome.best_epoch,
                best.val_hr.map_or("NA".into(), |v| format!("{v:.4}")),
                best.val_ndcg.map_or("NA".into(), |v| format!("{v:.4}")),
            );
            println!("checkpoint: {}", a.checkpoint.display());
        }
        Command::Eval { checkpoint, split } => {
            let r = commands::cmd_eval(&cfg, checkpoint.as_deref(), split.into())?;
            println!("HR@{k}={:.4} NDCG@{k}={:.4} users={}", r.hr_at_k, r.ndcg_at_k, r.per_user.len(), k = r.cutoff);
        }
        Command::Tdd {
            checkpoint,
            space,
            popularity,
        } => {
            let t = commands::cmd_tdd(&cfg, checkpoint.as_deref(), space.as_deref(), popularity)?;
            println!("amp: JS={:.4} Hellinger={:.4}", t.model.mean_js, t.model.mean_hellinger);
            if let Some(p) = t.popularity {
                println!("popularity: JS={:.4} Hellinger={:.4}", p.mean_js, p.mean_hellinger);
            }
        }
        Command::Aisp { space, split } => {
            let a = commands::cmd_aisp(&cfg, space.as_deref(), split.into())?;
            let r = &a.ranking;
            println!("HR@{k}={:.4} NDCG@{k}={:.4}", r.hr_at_k, r.ndcg_at_k, k = r.cutoff);
            println!("JS={:.4} Hellinger={:.4}", a.tdd.mean_js, a.tdd.mean_hellinger);
        }
        Command::Explain {
            user,
            checkpoint,
            titles,
            list_size,
            out,
        } => {
            let md = commands::cmd_explain(&cfg, checkpoint.as_deref(), &user, titles.as_deref(), list_size)?;
            match out {
                Some(path) => std::fs::write(&path, md).map_err(|e| ampcf::Error::io(&path, e))?,
                None => {
                    let _ = std::io::stdout().write_all(md.as_bytes());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
