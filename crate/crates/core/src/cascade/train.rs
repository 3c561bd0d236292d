use std::collections::HashSet;

use log::{info, warn};
use rayon::prelude::*;

use super::stage::{network_seeds, training_partitions, FINAL_PURPOSE};
use super::{
    train_stage, CascadeConfig, CascadeModel, FoldModel, Lineage, NetId, NetRole, RunOptions,
    StageOutcome, StageStats,
};
use crate::dataset::{build_balanced, kfold_split_with, CandidateSet, FoldAssignment};
use crate::nn::{self, Network};
use crate::seed;
use crate::{Error, Result};

/// A trained final network, the lesion ids it trained on, and its warnings.
type FinalNet = (Network, Vec<String>, Vec<String>);

const SPLIT_PURPOSE: u64 = 3;

/// A trained cascade together with what happened while training it.
#[derive(Debug, Clone)]
pub struct CascadeRun {
    pub model: CascadeModel,
    pub warnings: Vec<String>,
    /// Set when the cascade stopped before `n_stages` because a stage could
    /// not be trained; the model holds the completed stages.
    pub stopped_early: Option<String>,
    pub lineage: Lineage,
}

pub fn train_cascade(data: &CandidateSet, cfg: &CascadeConfig) -> Result<CascadeRun> {
    train_cascade_with(data, cfg, RunOptions::default())
}

/// The baseline: no selective stages, only the balanced final classifier.
pub fn train_baseline(data: &CandidateSet, cfg: &CascadeConfig) -> Result<CascadeRun> {
    train_baseline_with(data, cfg, RunOptions::default())
}

pub fn train_baseline_with(
    data: &CandidateSet,
    cfg: &CascadeConfig,
    opts: RunOptions,
) -> Result<CascadeRun> {
    let cfg = CascadeConfig {
        n_stages: 0,
        ..cfg.clone()
    };
    train_cascade_with(data, &cfg, opts)
}

/// Splits `data` into folds, then for each of `n_stages` stages trains one
/// selective network per fold and filters that fold's partition of the pool.
/// Finally trains one balanced network per fold on the surviving pool.
/// Stages are sequential; folds within a stage run on `opts.jobs` threads.
pub fn train_cascade_with(
    data: &CandidateSet,
    cfg: &CascadeConfig,
    opts: RunOptions,
) -> Result<CascadeRun> {
    cfg.validate()?;
    let counts = data.counts();
    if counts.nodules == 0 || counts.non_nodules == 0 {
        return Err(Error::Training(format!(
            "dataset needs both classes, has {} nodules and {} non-nodules",
            counts.nodules, counts.non_nodules
        )));
    }
    let assignment = kfold_split_with(
        data,
        cfg.k,
        seed::derive(cfg.seed, &[SPLIT_PURPOSE]),
        cfg.split_level,
    )?;

    let mut pool = data.clone();
    let mut stages: Vec<Vec<super::SelectiveStage>> = vec![Vec::new(); cfg.k];
    let mut stage_table = Vec::new();
    let mut warnings = Vec::new();
    let mut lineage = Lineage::default();
    let mut stopped_early = None;

    for s in 0..cfg.n_stages {
        let c = pool.counts();
        if c.nodules == 0 || c.non_nodules == 0 {
            stopped_early = Some(format!(
                "pool exhausted before stage {}: {} nodules, {} non-nodules",
                s + 1,
                c.nodules,
                c.non_nodules
            ));
            break;
        }
        let results: Vec<Result<StageOutcome>> = opts.run(|| {
            (0..cfg.k)
                .into_par_iter()
                .map(|f| train_stage(&pool, &assignment, f, cfg, s))
                .collect()
        })?;
        let mut outcomes = Vec::with_capacity(cfg.k);
        let mut degenerate = None;
        for r in results {
            match r {
                Ok(o) => outcomes.push(o),
                Err(Error::Training(msg)) => {
                    degenerate.get_or_insert(msg);
                }
                Err(e) => return Err(e),
            }
        }
        if let Some(msg) = degenerate {
            warn!("stopping cascade early: {msg}");
            stopped_early = Some(format!("stage {} could not be trained: {msg}", s + 1));
            break;
        }
        let mut removed: HashSet<String> = HashSet::new();
        let mut rows = Vec::with_capacity(cfg.k);
        for (f, o) in outcomes.into_iter().enumerate() {
            let id = NetId {
                fold: f,
                role: NetRole::Stage(s),
            };
            lineage
                .trained_on
                .insert(id, o.trained_on.into_iter().collect());
            lineage.scored.extend(o.scored.into_iter().map(|l| (id, l)));
            removed.extend(o.removed.patches().iter().map(|p| p.lesion_id.clone()));
            warnings.extend(o.warnings);
            rows.push(o.stage.stats);
            stages[f].push(o.stage);
        }
        pool = pool.retain(|_, p| !removed.contains(&p.lesion_id));
        let row = StageStats::sum(&rows);
        info!(
            "stage {}: non-nodules {} -> {}, nodules {} -> {}",
            s + 1,
            row.n_non_nodule_before,
            row.n_non_nodule_after,
            row.n_nodule_before,
            row.n_nodule_after
        );
        stage_table.push(row);
    }

    let finals: Vec<Result<FinalNet>> = opts.run(|| {
        (0..cfg.k)
            .into_par_iter()
            .map(|f| train_final(&pool, &assignment, f, cfg))
            .collect()
    })?;
    let mut folds = Vec::with_capacity(cfg.k);
    for (f, (r, fold_stages)) in finals.into_iter().zip(stages).enumerate() {
        let (final_net, trained_on, w) = r?;
        lineage.trained_on.insert(
            NetId {
                fold: f,
                role: NetRole::Final,
            },
            trained_on.into_iter().collect(),
        );
        warnings.extend(w);
        folds.push(FoldModel {
            stages: fold_stages,
            final_net,
        });
    }
    Ok(CascadeRun {
        model: CascadeModel {
            config: cfg.clone(),
            assignment,
            folds,
            stage_table,
        },
        warnings,
        stopped_early,
        lineage,
    })
}

fn train_final(
    pool: &CandidateSet,
    assignment: &FoldAssignment,
    fold: usize,
    cfg: &CascadeConfig,
) -> Result<FinalNet> {
    let parts = assignment.partition(pool)?;
    let train_parts = training_partitions(&parts, fold);
    let (init_seed, train_seed, resample_seed) =
        network_seeds(cfg, FINAL_PURPOSE, fold, 0, cfg.final_train.seed);
    let resampled = build_balanced(
        &train_parts,
        cfg.final_oversample,
        &cfg.augment,
        resample_seed,
    )?;
    let warnings = resampled
        .warnings
        .iter()
        .map(|w| format!("fold {fold} final: {w}"))
        .collect();
    let training = resampled.set;
    let shape = pool
        .patch_shape()
        .ok_or_else(|| Error::Training("empty candidate pool".into()))?;
    let net = Network::new(shape, cfg.architecture.clone(), init_seed)?;
    let train_cfg = nn::TrainConfig {
        seed: train_seed,
        batch_size: cfg.final_train.batch_size.min(training.len().max(1)),
        ..cfg.final_train.clone()
    };
    let (net, _) = nn::train(&net, &training, &train_cfg).map_err(|e| match e {
        Error::Training(m) => Error::Training(format!("fold {fold} final classifier: {m}")),
        other => other,
    })?;
    let mut trained_on: Vec<String> = training
        .patches()
        .iter()
        .map(|p| p.root_lesion().to_string())
        .collect();
    trained_on.sort();
    trained_on.dedup();
    Ok((net, trained_on, warnings))
}
