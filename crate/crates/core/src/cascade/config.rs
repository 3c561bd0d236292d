use serde::{Deserialize, Serialize};

use crate::dataset::{AugmentParams, SplitLevel};
use crate::nn::{LayerSpec, TrainConfig};
use crate::{Error, Result};

/// Which scores define σ for a stage threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaPopulation {
    /// Every candidate the stage scores; needs no labels.
    #[default]
    All,
    NonNodules,
    Nodules,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeConfig {
    pub n_stages: usize,
    pub threshold_factor: f64,
    pub sigma_population: SigmaPopulation,
    /// Non-nodules drawn from each training fold for a stage's training set.
    pub per_fold_negatives: usize,
    pub stage_oversample: usize,
    pub final_oversample: usize,
    pub k: usize,
    pub split_level: SplitLevel,
    pub augment: AugmentParams,
    pub architecture: Vec<LayerSpec>,
    pub stage_train: TrainConfig,
    pub final_train: TrainConfig,
    /// Master seed; fold, stage and purpose indices are mixed into it.
    pub seed: u64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            n_stages: 4,
            threshold_factor: 0.25,
            sigma_population: SigmaPopulation::All,
            per_fold_negatives: 200,
            stage_oversample: 9,
            final_oversample: 10,
            k: 10,
            split_level: SplitLevel::Lesion,
            augment: AugmentParams::default(),
            architecture: LayerSpec::reference_architecture(0.5),
            stage_train: TrainConfig::default(),
            final_train: TrainConfig::default(),
            seed: 0,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_factor >= 0.0 && self.threshold_factor.is_finite()) {
            return Err(Error::Config(format!(
                "threshold_factor {} must be >= 0",
                self.threshold_factor
            )));
        }
        if self.per_fold_negatives == 0 || self.stage_oversample == 0 || self.final_oversample == 0
        {
            return Err(Error::Config(
                "per_fold_negatives and oversampling factors must be positive".into(),
            ));
        }
        if self.k < 2 {
            return Err(Error::Config(format!(
                "k = {} folds; need at least 2",
                self.k
            )));
        }
        self.augment.validate()?;
        self.stage_train.validate()?;
        self.final_train.validate()?;
        Ok(())
    }
}

/// Execution knobs that never change results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Folds processed concurrently.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { jobs: 1 }
    }
}

impl RunOptions {
    pub(crate) fn run<T: Send>(&self, work: impl FnOnce() -> T + Send) -> Result<T> {
        if self.jobs <= 1 {
            return Ok(work());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| {
                Error::Config(format!("cannot start {} worker threads: {e}", self.jobs))
            })?;
        Ok(pool.install(work))
    }
}
