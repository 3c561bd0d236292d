use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use cascade_cli::{
    cmd_compare, cmd_eval, cmd_synth, cmd_train, exit_code, DatasetSource, Overrides, RunConfig,
    UsageError,
};
use cascade_core::cascade::RunOptions;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cascade",
    version,
    about = "Train and evaluate cascades of selective classifiers"
)]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// JSON run configuration; flags override its keys
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (synth) or directory (other commands)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Folds trained concurrently; results do not depend on it
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[arg(long, global = true)]
    stages: Option<usize>,
    #[arg(long, global = true)]
    threshold_factor: Option<f64>,
    /// Curve label used in reports
    #[arg(long, global = true)]
    label: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic patchset and its index
    Synth,
    /// Train a cascade (or the baseline with --stages 0) and report on it
    Train,
    /// Score a dataset with a saved model
    Eval {
        /// Model directory; defaults to <out>/model of the config
        #[arg(long)]
        model: Option<PathBuf>,
        /// Patchset to score instead of the config's dataset
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Merge reports into one FROC table and plot
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let shared = cli.shared;
    if shared.jobs == 0 {
        return Err(UsageError("--jobs must be at least 1".into()).into());
    }
    let opts = RunOptions { jobs: shared.jobs };
    let overrides = Overrides {
        seed: shared.seed,
        out: shared.out.clone(),
        stages: shared.stages,
        threshold_factor: shared.threshold_factor,
        label: shared.label.clone(),
    };
    match cli.command {
        Command::Synth => {
            let cfg = RunConfig::resolve(
                shared.config.as_deref(),
                &Overrides {
                    out: None,
                    ..overrides
                },
            )?;
            let DatasetSource::Synthetic(synth) = &cfg.dataset else {
                return Err(
                    UsageError("synth needs a synthetic dataset in the config".into()).into(),
                );
            };
            let out = shared
                .out
                .unwrap_or_else(|| cfg.out.join("candidates.pset"));
            let counts = cmd_synth(synth, &out)?;
            println!(
                "{}: {} nodules, {} non-nodules",
                out.display(),
                counts.nodules,
                counts.non_nodules
            );
        }
        Command::Train => {
            let cfg = RunConfig::resolve(shared.config.as_deref(), &overrides)?;
            let report = cmd_train(&cfg, opts)?;
            print_summary(&report);
            println!("artifacts in {}", cfg.out.display());
        }
        Command::Eval { model, data } => {
            // --out names the evaluation directory, not the run the model came from.
            let cfg = RunConfig::resolve(
                shared.config.as_deref(),
                &Overrides {
                    out: None,
                    ..overrides
                },
            )?;
            let model = model.unwrap_or_else(|| cfg.out.join("model"));
            let dataset = data.map(DatasetSource::Patchset).unwrap_or(cfg.dataset);
            let out = shared.out.unwrap_or_else(|| cfg.out.join("eval"));
            let report = cmd_eval(&model, &dataset, &out, shared.label, opts)?;
            print_summary(&report);
        }
        Command::Compare { reports } => {
            let out = shared.out.unwrap_or_else(|| PathBuf::from("compare"));
            let cmp = cmd_compare(&reports, &out)?;
            print!("{}", cmp.summary_csv());
        }
    }
    Ok(())
}

fn print_summary(r: &cascade_core::eval::RunReport) {
    println!(
        "{}: sensitivity {:.3} at 1 FP/scan, {:.3} at 4 FP/scan; {} positives rejected by stages",
        r.label, r.sensitivity_at_1, r.sensitivity_at_4, r.rejected_positives
    );
    if let Some(reason) = &r.stopped_early {
        println!("warning: {reason}");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
