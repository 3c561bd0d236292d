use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::nn::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NonNodule = 0,
    Nodule = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Label::NonNodule),
            1 => Ok(Label::Nodule),
            _ => Err(Error::Data(format!("label {v} is not 0 or 1"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::NonNodule => "non-nodule",
            Label::Nodule => "nodule",
        })
    }
}

/// One candidate lesion: a `[C, H, W]` block of consecutive slices with
/// intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub pixels: Tensor,
    pub label: Label,
    pub scan_id: String,
    pub lesion_id: String,
    /// Set iff this patch is an augmented copy of another lesion.
    pub augmented_from: Option<String>,
}

impl Patch {
    /// The original lesion this patch derives from (itself when not augmented).
    pub fn root_lesion(&self) -> &str {
        self.augmented_from.as_deref().unwrap_or(&self.lesion_id)
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented_from.is_some()
    }

    fn shape(&self) -> Result<[usize; 3]> {
        self.pixels
            .shape()
            .try_into()
            .map_err(|_| Error::Data(format!("patch {} is not a [C,H,W] block", self.lesion_id)))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub nodules: usize,
    pub non_nodules: usize,
}

impl ClassCounts {
    pub fn of(&self, label: Label) -> usize {
        match label {
            Label::Nodule => self.nodules,
            Label::NonNodule => self.non_nodules,
        }
    }

    pub fn total(&self) -> usize {
        self.nodules + self.non_nodules
    }

    fn add(&mut self, label: Label) {
        match label {
            Label::Nodule => self.nodules += 1,
            Label::NonNodule => self.non_nodules += 1,
        }
    }
}

/// An ordered, immutable collection of patches. Patches are shared, so
/// subsetting and concatenating never copies pixel data.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSet {
    patches: Vec<Arc<Patch>>,
    counts: ClassCounts,
    shape: Option<[usize; 3]>,
}

impl CandidateSet {
    pub fn new(patches: Vec<Patch>) -> Result<Self> {
        Self::from_shared(patches.into_iter().map(Arc::new).collect())
    }

    /// Checks uniform patch shape and unique lesion ids among original patches.
    pub fn from_shared(patches: Vec<Arc<Patch>>) -> Result<Self> {
        let mut counts = ClassCounts::default();
        let mut shape = None;
        let mut seen = HashSet::new();
        for p in &patches {
            let s = p.shape()?;
            match shape {
                None => shape = Some(s),
                Some(prev) if prev != s => {
                    return Err(Error::Data(format!(
                        "patch {} has shape {s:?}, set uses {prev:?}",
                        p.lesion_id
                    )))
                }
                _ => {}
            }
            if !p.is_augmented() && !seen.insert(p.lesion_id.as_str()) {
                return Err(Error::Data(format!("duplicate lesion id {}", p.lesion_id)));
            }
            counts.add(p.label);
        }
        Ok(CandidateSet {
            patches,
            counts,
            shape,
        })
    }

    /// Subset that keeps the patches selected by `keep`, in order.
    pub fn retain(&self, mut keep: impl FnMut(usize, &Patch) -> bool) -> CandidateSet {
        let mut counts = ClassCounts::default();
        let patches: Vec<Arc<Patch>> = self
            .patches
            .iter()
            .enumerate()
            .filter(|(i, p)| keep(*i, p))
            .map(|(_, p)| {
                counts.add(p.label);
                Arc::clone(p)
            })
            .collect();
        let shape = if patches.is_empty() { None } else { self.shape };
        CandidateSet {
            patches,
            counts,
            shape,
        }
    }

    pub fn concat<'a>(sets: impl IntoIterator<Item = &'a CandidateSet>) -> Result<CandidateSet> {
        let patches = sets
            .into_iter()
            .flat_map(|s| s.patches.iter().cloned())
            .collect();
        Self::from_shared(patches)
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patches(&self) -> &[Arc<Patch>] {
        &self.patches
    }

    pub fn counts(&self) -> ClassCounts {
        self.counts
    }

    /// `[C, H, W]` of every patch, or `None` for an empty set.
    pub fn patch_shape(&self) -> Option<[usize; 3]> {
        self.shape
    }

    pub fn of_label(&self, label: Label) -> CandidateSet {
        self.retain(|_, p| p.label == label)
    }

    pub fn scan_ids(&self) -> BTreeSet<&str> {
        self.patches.iter().map(|p| p.scan_id.as_str()).collect()
    }

    pub fn n_scans(&self) -> usize {
        self.scan_ids().len()
    }

    /// Recounts labels from scratch; always equal to [`CandidateSet::counts`].
    pub fn recount(&self) -> ClassCounts {
        let mut c = ClassCounts::default();
        self.patches.iter().for_each(|p| c.add(p.label));
        c
    }
}
