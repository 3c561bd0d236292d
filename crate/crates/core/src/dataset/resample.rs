//! Majority-class subsampling, minority-class oversampling by augmentation,
//! and the two training-set recipes built from them.

use rand::seq::index;
use rand::Rng as _;

use super::{augment_patch, AugmentParams, CandidateSet, Label};
use crate::seed;
use crate::{Error, Result};

/// A resampled training set plus any non-fatal problems met while building it.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub set: CandidateSet,
    pub warnings: Vec<String>,
}

/// Keeps `n` patches of `label`, chosen uniformly without replacement; the
/// other class and the relative order of survivors are untouched.
pub fn subsample(set: &CandidateSet, label: Label, n: usize, seed: u64) -> Result<CandidateSet> {
    let members: Vec<usize> = set
        .patches()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.label == label)
        .map(|(i, _)| i)
        .collect();
    if n > members.len() {
        return Err(Error::Sampling(format!(
            "cannot subsample {n} {label} patches from {}",
            members.len()
        )));
    }
    let mut keep = vec![true; set.len()];
    if n < members.len() {
        members.iter().for_each(|&i| keep[i] = false);
        for pick in index::sample(&mut seed::rng(seed), members.len(), n) {
            keep[members[pick]] = true;
        }
    }
    Ok(set.retain(|i, _| keep[i]))
}

/// Each patch of `label` is followed by `factor - 1` randomly rotated and
/// scaled copies, so that class grows by exactly `factor`.
pub fn oversample_augment(
    set: &CandidateSet,
    label: Label,
    factor: usize,
    params: &AugmentParams,
    seed: u64,
) -> Result<CandidateSet> {
    if factor == 0 {
        return Err(Error::Config(
            "oversampling factor must be at least 1".into(),
        ));
    }
    params.validate()?;
    if factor == 1 {
        return Ok(set.clone());
    }
    let mut rng = seed::rng(seed);
    let draw = |rng: &mut seed::Rng, (lo, hi): (f64, f64)| {
        if lo < hi {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    };
    let mut out = Vec::with_capacity(set.len() + set.counts().of(label) * (factor - 1));
    for p in set.patches() {
        out.push(p.clone());
        if p.label != label {
            continue;
        }
        for copy in 1..factor {
            let angle = draw(&mut rng, params.angle_range);
            let scale = draw(&mut rng, params.scale_range);
            let mut aug = augment_patch(p, angle, scale)?;
            aug.lesion_id = format!("{}~{copy}", p.lesion_id);
            out.push(aug.into());
        }
    }
    CandidateSet::from_shared(out)
}

fn all_of(folds: &[CandidateSet], label: Label) -> Result<CandidateSet> {
    let parts: Vec<CandidateSet> = folds.iter().map(|f| f.of_label(label)).collect();
    CandidateSet::concat(&parts)
}

/// What [`build_inverse_imbalanced_with`] does with a training fold that holds
/// fewer non-nodules than requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShortFold {
    /// Sampling error.
    Fail,
    /// Use all of that fold's non-nodules and record a warning.
    TakeAll,
}

/// Training set for a selective stage: `per_fold_negatives` non-nodules drawn
/// from every training fold, and all training nodules oversampled by
/// `oversample_factor`. Nodules are meant to outnumber non-nodules; when they
/// do not, a warning is recorded. A fold that is short of non-nodules is an error.
pub fn build_inverse_imbalanced(
    train_folds: &[CandidateSet],
    per_fold_negatives: usize,
    oversample_factor: usize,
    params: &AugmentParams,
    seed: u64,
) -> Result<Resampled> {
    build_inverse_imbalanced_with(
        train_folds,
        per_fold_negatives,
        oversample_factor,
        params,
        seed,
        ShortFold::Fail,
    )
}

pub fn build_inverse_imbalanced_with(
    train_folds: &[CandidateSet],
    per_fold_negatives: usize,
    oversample_factor: usize,
    params: &AugmentParams,
    seed: u64,
    short: ShortFold,
) -> Result<Resampled> {
    if train_folds.is_empty() {
        return Err(Error::Config("no training folds".into()));
    }
    let mut warnings = Vec::new();
    let mut negatives = Vec::with_capacity(train_folds.len());
    for (i, fold) in train_folds.iter().enumerate() {
        let neg = fold.of_label(Label::NonNodule);
        let n = if short == ShortFold::TakeAll && neg.len() < per_fold_negatives {
            warnings.push(format!(
                "training fold {i} has only {} non-nodules; using all of them instead of {per_fold_negatives}",
                neg.len()
            ));
            neg.len()
        } else {
            per_fold_negatives
        };
        let picked = subsample(
            &neg,
            Label::NonNodule,
            n,
            seed::derive(seed, &[1, i as u64]),
        )
        .map_err(|e| Error::Sampling(format!("training fold {i}: {e}")))?;
        negatives.push(picked);
    }
    let nodules = oversample_augment(
        &all_of(train_folds, Label::Nodule)?,
        Label::Nodule,
        oversample_factor,
        params,
        seed::derive(seed, &[2]),
    )?;
    let mut parts = vec![nodules];
    parts.extend(negatives);
    let set = CandidateSet::concat(&parts)?;
    let c = set.counts();
    if c.nodules <= c.non_nodules {
        warnings.push(format!(
            "inverse-imbalanced set is not inverted: {} nodules vs {} non-nodules",
            c.nodules, c.non_nodules
        ));
    }
    Ok(Resampled { set, warnings })
}

/// Balanced training set: all training nodules oversampled by
/// `oversample_factor`, non-nodules subsampled to the same count. With too
/// few non-nodules, all of them are used and a warning is recorded.
pub fn build_balanced(
    train_folds: &[CandidateSet],
    oversample_factor: usize,
    params: &AugmentParams,
    seed: u64,
) -> Result<Resampled> {
    if train_folds.is_empty() {
        return Err(Error::Config("no training folds".into()));
    }
    let nodules = oversample_augment(
        &all_of(train_folds, Label::Nodule)?,
        Label::Nodule,
        oversample_factor,
        params,
        seed::derive(seed, &[2]),
    )?;
    let target = nodules.len();
    let negatives = all_of(train_folds, Label::NonNodule)?;
    let mut warnings = Vec::new();
    let negatives = if negatives.len() >= target {
        subsample(
            &negatives,
            Label::NonNodule,
            target,
            seed::derive(seed, &[1]),
        )?
    } else {
        warnings.push(format!(
            "only {} non-nodules available to balance {target} nodules",
            negatives.len()
        ));
        negatives
    };
    let set = CandidateSet::concat([&nodules, &negatives])?;
    Ok(Resampled { set, warnings })
}
