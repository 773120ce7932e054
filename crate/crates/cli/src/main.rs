use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use poincare_persistence::representation::Variant;
use ppcli::{commands, CliError, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "ppoinc",
    version,
    about = "Persistence diagrams in the Poincare ball"
)]
struct Cli {
    /// Run config (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute diagrams for every configured filtration and write them out.
    Diagrams {
        /// Also write every point with its images under rho and phi.
        #[arg(long)]
        dump_phi: bool,
    },
    /// Train the configured representation variants.
    Train {
        /// Overrides `train.folds`.
        #[arg(long)]
        folds: Option<usize>,
        /// Overrides `train.epochs`.
        #[arg(long)]
        epochs: Option<usize>,
        /// Restrict to these variants (repeatable).
        #[arg(long, value_enum)]
        variant: Vec<VariantArg>,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        #[arg(long, hide = true)]
        corrupt_index: Option<usize>,
    },
    /// Check representation distances against diagram perturbations.
    Stability,
    /// Train the histogram baseline with and without essential bins.
    Baseline,
    /// Evaluate a saved checkpoint.
    Eval {
        /// Overrides `eval.checkpoint`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum VariantArg {
    Poinc,
    Hybrid,
    Eucl,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Poinc => Variant::Poinc,
            VariantArg::Hybrid => Variant::Hybrid,
            VariantArg::Eucl => Variant::Eucl,
        }
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(vec![format!("--jobs: {e}")]))?;
    }
    let path = cli
        .config
        .ok_or_else(|| CliError::Validation(vec!["--config is required".into()]))?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Command::Train {
        folds,
        epochs,
        variant,
    } = &cli.command
    {
        if let Some(f) = folds {
            cfg.train.folds = *f;
        }
        if let Some(e) = epochs {
            cfg.train.epochs = *e;
        }
        if !variant.is_empty() {
            cfg.model.variants = variant.iter().map(|&v| v.into()).collect();
        }
    }
    let ctx = commands::prepare(cfg, &cli.out)?;
    Ok(match cli.command {
        Command::Diagrams { dump_phi } => json(&commands::cmd_diagrams(&ctx, dump_phi)?),
        Command::Train { .. } => json(&commands::cmd_train(&ctx)?),
        Command::Gradcheck { corrupt_index } => {
            json(&commands::cmd_gradcheck(&ctx, corrupt_index)?)
        }
        Command::Stability => json(&commands::cmd_stability(&ctx)?),
        Command::Baseline => json(&commands::cmd_baseline(&ctx)?),
        Command::Eval { checkpoint } => json(&commands::cmd_eval(&ctx, checkpoint.as_deref())?),
    })
}

fn json<T: serde::Serialize>(report: &T) -> String {
    serde_json::to_string_pretty(report).expect("report serialises")
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            println!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
