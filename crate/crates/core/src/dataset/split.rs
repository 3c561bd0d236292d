use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{CandidateSet, Label, Patch};
use crate::seed;
use crate::{Error, Result};

/// Granularity of the cross-validation split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLevel {
    /// Stratified per class: fold sizes differ by at most one within each class.
    #[default]
    Lesion,
    /// Whole scans go to one fold; folds are balanced greedily on nodules,
    /// then on total lesions.
    Scan,
}

/// Maps every original lesion to the fold in which it is test data.
/// Augmented patches follow their source lesion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_for(&self, patch: &Patch) -> Option<usize> {
        self.fold_of.get(patch.root_lesion()).copied()
    }

    /// Splits a set into its `k` test partitions, preserving order.
    pub fn partition(&self, set: &CandidateSet) -> Result<Vec<CandidateSet>> {
        let mut folds = Vec::with_capacity(set.len());
        for p in set.patches() {
            let f = self
                .fold_for(p)
                .ok_or_else(|| Error::Routing(format!("lesion {} has no fold", p.lesion_id)))?;
            folds.push(f);
        }
        Ok((0..self.k)
            .map(|f| set.retain(|i, _| folds[i] == f))
            .collect())
    }
}

pub fn kfold_split(set: &CandidateSet, k: usize, seed: u64) -> Result<FoldAssignment> {
    kfold_split_with(set, k, seed, SplitLevel::Lesion)
}

pub fn kfold_split_with(
    set: &CandidateSet,
    k: usize,
    seed: u64,
    level: SplitLevel,
) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Split(format!("k = {k}; need at least 2 folds")));
    }
    let originals: Vec<&Patch> = set
        .patches()
        .iter()
        .map(|p| p.as_ref())
        .filter(|p| !p.is_augmented())
        .collect();
    for label in [Label::Nodule, Label::NonNodule] {
        let n = originals.iter().filter(|p| p.label == label).count();
        if n < k {
            return Err(Error::Split(format!(
                "{n} {label} lesions cannot fill {k} folds"
            )));
        }
    }
    let mut rng = seed::rng(seed);
    let mut fold_of = BTreeMap::new();
    match level {
        SplitLevel::Lesion => {
            // The second class continues where the first one stopped so that
            // total fold sizes also stay within one of each other.
            let mut offset = 0;
            for label in [Label::Nodule, Label::NonNodule] {
                let mut ids: Vec<&str> = originals
                    .iter()
                    .filter(|p| p.label == label)
                    .map(|p| p.lesion_id.as_str())
                    .collect();
                ids.shuffle(&mut rng);
                for (i, id) in ids.iter().enumerate() {
                    fold_of.insert(id.to_string(), (offset + i) % k);
                }
                offset = (offset + ids.len()) % k;
            }
        }
        SplitLevel::Scan => {
            let mut by_scan: BTreeMap<&str, Vec<&Patch>> = BTreeMap::new();
            for p in &originals {
                by_scan.entry(p.scan_id.as_str()).or_default().push(p);
            }
            if by_scan.len() < k {
                return Err(Error::Split(format!(
                    "{} scans cannot fill {k} folds",
                    by_scan.len()
                )));
            }
            let mut scans: Vec<(&str, Vec<&Patch>)> = by_scan.into_iter().collect();
            scans.shuffle(&mut rng);
            let nodules = |ps: &[&Patch]| ps.iter().filter(|p| p.label == Label::Nodule).count();
            scans.sort_by_key(|(_, ps)| std::cmp::Reverse(nodules(ps)));
            let mut load: Vec<(usize, usize)> = vec![(0, 0); k];
            for (_, ps) in &scans {
                let f = (0..k).min_by_key(|&f| (load[f], f)).expect("k >= 2");
                load[f].0 += nodules(ps);
                load[f].1 += ps.len();
                for p in ps {
                    fold_of.insert(p.lesion_id.clone(), f);
                }
            }
        }
    }
    Ok(FoldAssignment { k, fold_of })
}
