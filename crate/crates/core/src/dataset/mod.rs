//! Candidate patches and everything that moves them around: the patchset
//! file format, k-fold splitting, resampling with augmentation, and the
//! synthetic dataset generator.

mod augment;
mod format;
pub(crate) mod patch;
mod resample;
mod split;
mod synthetic;

pub use augment::{augment_patch, AugmentParams};
pub use format::{index_path, load_patchset, save_patchset, PSET_MAGIC, PSET_VERSION};
pub use patch::{CandidateSet, ClassCounts, Label, Patch};
pub use resample::{
    build_balanced, build_inverse_imbalanced, build_inverse_imbalanced_with, oversample_augment,
    subsample, Resampled, ShortFold,
};
pub use split::{kfold_split, kfold_split_with, FoldAssignment, SplitLevel};
pub use synthetic::{generate_synthetic, SyntheticConfig};
