use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use multisys_cli::{output_dir, resolve_config, run_all, run_stage, CliError, RunDir, Stage};

#[derive(Parser)]
#[command(name = "multisys", version, about = "Multi-system abnormality prediction pipeline")]
struct Args {
    /// Run config JSON; defaults to the built-in synthetic run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed (and the synthetic cohort seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Accept or overwrite artifacts produced by a different config.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a synthetic raw cohort.
    Simulate,
    /// Parse, filter and impute the raw cohort.
    Ingest,
    /// Derive system indices, prevalence and descriptive tables.
    Features,
    /// Stratified holdout split and CV folds.
    Split,
    /// Fit logistic regression, random forest and gradient boosting.
    Train,
    /// Validation and test metrics, ROC curves and cross-validation.
    Evaluate,
    /// SHAP attributions, importance ranking and partial dependence.
    Explain,
    /// Figures and the summary JSON.
    Report,
    /// Every stage in order.
    All,
}

fn stage(c: Command) -> Option<Stage> {
    Some(match c {
        Command::Simulate => Stage::Simulate,
        Command::Ingest => Stage::Ingest,
        Command::Features => Stage::Features,
        Command::Split => Stage::Split,
        Command::Train => Stage::Train,
        Command::Evaluate => Stage::Evaluate,
        Command::Explain => Stage::Explain,
        Command::Report => Stage::Report,
        Command::All => return None,
    })
}

fn run(args: &Args) -> Result<(), CliError> {
    let cfg = resolve_config(args.config.as_deref(), args.seed)?;
    let out = output_dir(&cfg, args.out.as_deref());
    let mut dir = RunDir::open(&out, cfg.hash()?, args.force)?;
    match stage(args.command) {
        Some(s) => run_stage(s, &cfg, &mut dir),
        None => {
            let summary = run_all(&cfg, &mut dir)?;
            let gb = summary.metrics.iter().find(|r| r.model == "gradient_boosting" && r.subset == "test");
            if let Some(r) = gb {
                log::info!("gradient boosting test AUC {:.4}", r.auc);
            }
            println!("{}", dir.path(multisys_cli::pipeline::SUMMARY).display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MULTISYS_LOG", "warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
