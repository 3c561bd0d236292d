//! Cascades of selective classifiers.
//!
//! Each stage is a network trained on an inverse-imbalanced set (nodules
//! oversampled, non-nodules subsampled), so it passes nearly every nodule and
//! confidently rejects obvious non-nodules. Candidates scoring below
//! `threshold_factor × σ` of the stage's probability distribution are dropped
//! from the pool. A final network trained on a balanced set drawn from the
//! surviving pool produces the probabilities.
//!
//! Everything is cross-validated: for fold `f`, networks train on the other
//! folds and only ever score fold `f`.

mod config;
mod lineage;
mod model;
mod predict;
mod stage;
mod threshold;
mod train;

pub use config::{CascadeConfig, RunOptions, SigmaPopulation};
pub use lineage::{audit_fold_hygiene, HygieneAudit, Lineage, NetId, NetRole};
pub use model::{CascadeModel, FoldModel, MANIFEST_FILE};
pub use predict::{predict_all, predict_all_traced, predict_all_with, ScoreRecord};
pub use stage::{filter_set, score_set, train_stage, SelectiveStage, StageOutcome, StageStats};
pub use threshold::{compute_threshold, population_std, threshold_from_sigma};
pub use train::{
    train_baseline, train_baseline_with, train_cascade, train_cascade_with, CascadeRun,
};
