use serde::{Deserialize, Serialize};

use super::{compute_threshold, CascadeConfig, SigmaPopulation};
use crate::dataset::{
    build_inverse_imbalanced_with, CandidateSet, FoldAssignment, Label, ShortFold,
};
use crate::nn::{self, Network};
use crate::seed;
use crate::{Error, Result};

/// Per-class candidate counts around one filtering step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub n_nodule_before: usize,
    pub n_nodule_after: usize,
    pub n_non_nodule_before: usize,
    pub n_non_nodule_after: usize,
    pub sigma: f64,
    pub threshold: f64,
}

impl StageStats {
    /// Sums counts across folds; `sigma` and `threshold` become fold means.
    pub fn sum(rows: &[StageStats]) -> StageStats {
        let mut out = StageStats::default();
        for r in rows {
            out.n_nodule_before += r.n_nodule_before;
            out.n_nodule_after += r.n_nodule_after;
            out.n_non_nodule_before += r.n_non_nodule_before;
            out.n_non_nodule_after += r.n_non_nodule_after;
            out.sigma += r.sigma;
            out.threshold += r.threshold;
        }
        if !rows.is_empty() {
            out.sigma /= rows.len() as f64;
            out.threshold /= rows.len() as f64;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectiveStage {
    pub net: Network,
    /// Frozen at training time; candidates scoring below it are rejected.
    pub threshold: f64,
    pub threshold_factor: f64,
    pub stats: StageStats,
}

/// Class-1 probability of every patch, in set order, with dropout off.
pub fn score_set(net: &Network, set: &CandidateSet) -> Result<Vec<f32>> {
    if let Some(shape) = set.patch_shape() {
        if shape != net.input_shape() {
            return Err(Error::Config(format!(
                "patches of shape {shape:?} do not fit network input {:?}",
                net.input_shape()
            )));
        }
    }
    set.patches()
        .iter()
        .map(|p| net.predict_one(p.pixels.data()))
        .collect()
}

/// Splits a set at `threshold`: scores `>= threshold` are kept.
pub fn filter_set(
    set: &CandidateSet,
    probs: &[f32],
    threshold: f64,
) -> Result<(CandidateSet, CandidateSet, StageStats)> {
    if probs.len() != set.len() {
        return Err(Error::Evaluation(format!(
            "{} scores for {} candidates",
            probs.len(),
            set.len()
        )));
    }
    let kept = set.retain(|i, _| probs[i] as f64 >= threshold);
    let removed = set.retain(|i, _| (probs[i] as f64) < threshold);
    let (before, after) = (set.counts(), kept.counts());
    let stats = StageStats {
        n_nodule_before: before.nodules,
        n_nodule_after: after.nodules,
        n_non_nodule_before: before.non_nodules,
        n_non_nodule_after: after.non_nodules,
        sigma: 0.0,
        threshold,
    };
    Ok((kept, removed, stats))
}

/// Everything one fold's stage produced.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub stage: SelectiveStage,
    /// Surviving candidates of the fold's test partition.
    pub kept: CandidateSet,
    pub removed: CandidateSet,
    pub loss_trace: Vec<f32>,
    pub warnings: Vec<String>,
    /// Root lesion ids of every patch the stage network trained on.
    pub trained_on: Vec<String>,
    /// Root lesion ids of every candidate the stage network scored, in order.
    pub scored: Vec<String>,
}

pub(crate) const STAGE_PURPOSE: u64 = 1;
pub(crate) const FINAL_PURPOSE: u64 = 2;

/// Seeds for `(init, train, resample)` of one network.
pub(crate) fn network_seeds(
    cfg: &CascadeConfig,
    purpose: u64,
    fold: usize,
    index: usize,
    train_seed: u64,
) -> (u64, u64, u64) {
    let base = seed::derive(cfg.seed, &[purpose, fold as u64, index as u64]);
    (
        seed::derive(base, &[0]),
        seed::derive(base, &[1, train_seed]),
        seed::derive(base, &[2]),
    )
}

pub(crate) fn training_partitions(parts: &[CandidateSet], fold: usize) -> Vec<CandidateSet> {
    parts
        .iter()
        .enumerate()
        .filter(|(f, _)| *f != fold)
        .map(|(_, p)| p.clone())
        .collect()
}

/// Trains stage `stage_index` for `fold` on the other folds of `pool`,
/// scores the fold's own partition, freezes its threshold and filters it.
///
/// A training fold holding fewer non-nodules than `per_fold_negatives`
/// contributes all of them, with a warning.
pub fn train_stage(
    pool: &CandidateSet,
    assignment: &FoldAssignment,
    fold: usize,
    cfg: &CascadeConfig,
    stage_index: usize,
) -> Result<StageOutcome> {
    if fold >= assignment.k {
        return Err(Error::Config(format!(
            "fold {fold} out of range for k = {}",
            assignment.k
        )));
    }
    let parts = assignment.partition(pool)?;
    let train_parts = training_partitions(&parts, fold);
    let available = CandidateSet::concat(&train_parts)?.counts();
    if available.nodules == 0 || available.non_nodules == 0 {
        return Err(Error::Training(format!(
            "fold {fold} stage {stage_index}: training partition has {} nodules and {} non-nodules",
            available.nodules, available.non_nodules
        )));
    }
    let mut warnings = Vec::new();
    let (init_seed, train_seed, resample_seed) =
        network_seeds(cfg, STAGE_PURPOSE, fold, stage_index, cfg.stage_train.seed);
    let resampled = build_inverse_imbalanced_with(
        &train_parts,
        cfg.per_fold_negatives,
        cfg.stage_oversample,
        &cfg.augment,
        resample_seed,
        ShortFold::TakeAll,
    )?;
    warnings.extend(
        resampled
            .warnings
            .iter()
            .map(|w| format!("fold {fold} stage {stage_index}: {w}")),
    );
    let training = resampled.set;

    let shape = pool
        .patch_shape()
        .ok_or_else(|| Error::Training("empty candidate pool".into()))?;
    let net = Network::new(shape, cfg.architecture.clone(), init_seed)?;
    let train_cfg = nn::TrainConfig {
        seed: train_seed,
        batch_size: cfg.stage_train.batch_size.min(training.len()),
        ..cfg.stage_train.clone()
    };
    let (net, loss_trace) = nn::train(&net, &training, &train_cfg)?;

    let test = &parts[fold];
    let probs = score_set(&net, test)?;
    let population: Vec<f32> = test
        .patches()
        .iter()
        .zip(&probs)
        .filter(|(p, _)| match cfg.sigma_population {
            SigmaPopulation::All => true,
            SigmaPopulation::Nodules => p.label == Label::Nodule,
            SigmaPopulation::NonNodules => p.label == Label::NonNodule,
        })
        .map(|(_, &s)| s)
        .collect();
    let (threshold, sigma) = if population.is_empty() {
        warnings.push(format!(
            "fold {fold} stage {stage_index}: no scores to estimate sigma from; threshold set to 0"
        ));
        (0.0, 0.0)
    } else {
        compute_threshold(&population, cfg.threshold_factor)?
    };
    let (kept, removed, mut stats) = filter_set(test, &probs, threshold)?;
    stats.sigma = sigma;

    let mut trained_on: Vec<String> = training
        .patches()
        .iter()
        .map(|p| p.root_lesion().to_string())
        .collect();
    trained_on.sort();
    trained_on.dedup();
    Ok(StageOutcome {
        stage: SelectiveStage {
            net,
            threshold,
            threshold_factor: cfg.threshold_factor,
            stats,
        },
        kept,
        removed,
        loss_trace,
        warnings,
        trained_on,
        scored: test
            .patches()
            .iter()
            .map(|p| p.root_lesion().to_string())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::patch::tests::patch;
    use crate::nn::LayerSpec;

    fn three() -> CandidateSet {
        CandidateSet::new(vec![
            patch("a", Label::NonNodule, 0.0),
            patch("b", Label::NonNodule, 0.0),
            patch("c", Label::Nodule, 0.0),
        ])
        .unwrap()
    }

    #[test]
    fn filter_boundaries() {
        let set = three();
        let (kept, removed, stats) = filter_set(&set, &[0.05, 0.1, 0.9], 0.1).unwrap();
        let ids: Vec<&str> = kept
            .patches()
            .iter()
            .map(|p| p.lesion_id.as_str())
            .collect();
        assert_eq!(ids, ["b", "c"]);
        assert_eq!(removed.len(), 1);
        assert_eq!(
            (
                stats.n_non_nodule_before,
                stats.n_non_nodule_after,
                stats.n_nodule_before,
                stats.n_nodule_after
            ),
            (2, 1, 1, 1)
        );

        let (kept, removed, _) = filter_set(&set, &[0.0, 0.5, 1.0], 0.0).unwrap();
        assert_eq!((kept.len(), removed.len()), (3, 0));
        let (kept, removed, _) = filter_set(&set, &[0.0, 0.5, 1.0], 1.01).unwrap();
        assert_eq!((kept.len(), removed.len()), (0, 3));
        assert!(matches!(
            filter_set(&set, &[0.5], 0.1),
            Err(Error::Evaluation(_))
        ));
    }

    #[test]
    fn scoring_with_zero_head_and_empty_set() {
        let layers = vec![
            LayerSpec::Flatten,
            LayerSpec::Dense { out_features: 2 },
            LayerSpec::Softmax,
        ];
        let mut net = Network::new([3, 4, 4], layers, 0).unwrap();
        for t in net.params_mut() {
            t.data_mut().fill(0.0);
        }
        assert_eq!(score_set(&net, &three()).unwrap(), vec![0.5; 3]);
        assert!(score_set(&net, &CandidateSet::default())
            .unwrap()
            .is_empty());

        let wrong = Network::new(
            [3, 2, 2],
            vec![
                LayerSpec::Flatten,
                LayerSpec::Dense { out_features: 2 },
                LayerSpec::Softmax,
            ],
            0,
        )
        .unwrap();
        assert!(matches!(score_set(&wrong, &three()), Err(Error::Config(_))));
    }

    #[test]
    fn stats_sum_over_folds() {
        let a = StageStats {
            n_nodule_before: 3,
            n_nodule_after: 2,
            n_non_nodule_before: 10,
            n_non_nodule_after: 4,
            sigma: 0.2,
            threshold: 0.05,
        };
        let s = StageStats::sum(&[a, a]);
        assert_eq!((s.n_nodule_before, s.n_non_nodule_after), (6, 8));
        assert!((s.sigma - 0.2).abs() < 1e-12);
    }
}
