use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cascade_core::cascade::{
    predict_all_with, train_baseline_with, train_cascade_with, CascadeModel, RunOptions,
};
use cascade_core::dataset::{
    index_path, save_patchset, CandidateSet, ClassCounts, SyntheticConfig,
};
use cascade_core::eval::{
    compare_runs, froc_csv, froc_svg, stage_table, Comparison, LabeledCurve, RunReport,
};
use log::{info, warn};
use serde::Serialize;

use crate::config::default_label;
use crate::{DatasetSource, RunConfig, UsageError};

pub struct TrainArtifacts {
    pub model: CascadeModel,
    pub report: RunReport,
}

fn json_bytes(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// The exact bytes written to `report.json`.
pub fn report_json(report: &RunReport) -> Result<Vec<u8>> {
    json_bytes(report)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn cmd_synth(cfg: &SyntheticConfig, out: &Path) -> Result<ClassCounts> {
    let set = cascade_core::dataset::generate_synthetic(cfg)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_patchset(&set, out).with_context(|| format!("writing {}", out.display()))?;
    info!("wrote {} and {}", out.display(), index_path(out).display());
    Ok(set.counts())
}

/// Trains on `data` and scores every candidate through its test fold.
/// `baseline` selects the baseline trainer, which ignores `n_stages`.
pub fn train_run(
    cfg: &RunConfig,
    data: &CandidateSet,
    opts: RunOptions,
    baseline: bool,
) -> Result<TrainArtifacts> {
    let run = if baseline {
        train_baseline_with(data, &cfg.cascade, opts)?
    } else {
        train_cascade_with(data, &cfg.cascade, opts)?
    };
    if let Some(reason) = &run.stopped_early {
        warn!("{reason}");
    }
    let records = predict_all_with(&run.model, data, opts)?;
    let label = cfg
        .label
        .clone()
        .unwrap_or_else(|| default_label(run.model.n_stages()));
    let mut report = RunReport::new(label, &run.model, records, data.n_scans())?;
    report.in_sample = true;
    report.warnings = run.warnings;
    report.stopped_early = run.stopped_early;
    Ok(TrainArtifacts {
        model: run.model,
        report,
    })
}

/// Writes `model/`, `report.json`, `stages.csv` and `froc.csv` under `cfg.out`.
pub fn cmd_train(cfg: &RunConfig, opts: RunOptions) -> Result<RunReport> {
    let data = cfg.dataset.load()?;
    let c = data.counts();
    info!(
        "training on {} candidates ({} nodules, {} non-nodules, {} scans)",
        data.len(),
        c.nodules,
        c.non_nodules,
        data.n_scans()
    );
    let artifacts = train_run(cfg, &data, opts, cfg.cascade.n_stages == 0)?;
    create_dir(&cfg.out)?;
    artifacts
        .model
        .save(cfg.out.join("model"))
        .with_context(|| format!("saving model under {}", cfg.out.display()))?;
    write_report(&cfg.out, &artifacts.report)?;
    write_text(
        &cfg.out.join("stages.csv"),
        &stage_table(&artifacts.report.stage_table),
    )?;
    Ok(artifacts.report)
}

fn write_report(out: &Path, report: &RunReport) -> Result<()> {
    let path = out.join("report.json");
    fs::write(&path, report_json(report)?)
        .with_context(|| format!("writing {}", path.display()))?;
    let curve = LabeledCurve {
        label: report.label.clone(),
        curve: report.froc.clone(),
    };
    write_text(&out.join("froc.csv"), &froc_csv(&[curve]))
}

/// Scores `data` with a saved model and builds its report.
pub fn evaluate(
    model: &CascadeModel,
    data: &CandidateSet,
    label: Option<String>,
    opts: RunOptions,
) -> Result<RunReport> {
    let records = predict_all_with(model, data, opts)?;
    let label = label.unwrap_or_else(|| default_label(model.n_stages()));
    let mut report = RunReport::new(label, model, records, data.n_scans())?;
    // Routing succeeded, so every candidate belongs to the model's own
    // cross-validated dataset and was scored out of fold.
    report.in_sample = true;
    Ok(report)
}

/// Writes `report.json` and `froc.csv` under `out`.
pub fn cmd_eval(
    model_dir: &Path,
    dataset: &DatasetSource,
    out: &Path,
    label: Option<String>,
    opts: RunOptions,
) -> Result<RunReport> {
    let model = CascadeModel::load(model_dir)
        .with_context(|| format!("loading model from {}", model_dir.display()))?;
    let data = dataset.load()?;
    let report = evaluate(&model, &data, label, opts)?;
    warn!("evaluating on the model's own cross-validated candidates");
    create_dir(out)?;
    write_report(out, &report)?;
    Ok(report)
}

/// Writes `froc.csv`, `froc.svg` and `summary.csv` under `out`.
pub fn cmd_compare(reports: &[PathBuf], out: &Path) -> Result<Comparison> {
    if reports.is_empty() {
        return Err(UsageError("compare needs at least one report".into()).into());
    }
    let loaded = reports
        .iter()
        .map(|p| {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_slice::<RunReport>(&bytes)
                .with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let cmp = compare_runs(&loaded)?;
    create_dir(out)?;
    write_text(&out.join("froc.csv"), &froc_csv(&cmp.curves))?;
    write_text(&out.join("froc.svg"), &froc_svg(&cmp.curves))?;
    write_text(&out.join("summary.csv"), &cmp.summary_csv())?;
    Ok(cmp)
}
