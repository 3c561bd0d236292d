use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cascade_core::cascade::CascadeConfig;
use cascade_core::dataset::{generate_synthetic, load_patchset, CandidateSet, SyntheticConfig};
use cascade_core::nn::{LayerSpec, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Generated in memory on every run.
    Synthetic(SyntheticConfig),
    /// A patchset file with its index sidecar next to it.
    Patchset(PathBuf),
}

impl DatasetSource {
    pub fn load(&self) -> Result<CandidateSet> {
        match self {
            DatasetSource::Synthetic(cfg) => Ok(generate_synthetic(cfg)?),
            DatasetSource::Patchset(path) => {
                load_patchset(path).with_context(|| format!("loading patchset {}", path.display()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Curve label in reports; derived from the stage count when absent.
    #[serde(default)]
    pub label: Option<String>,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub cascade: CascadeConfig,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("run")
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            label: None,
            dataset: DatasetSource::Synthetic(SyntheticConfig::default()),
            cascade: CascadeConfig::default(),
            out: default_out(),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub stages: Option<usize>,
    pub threshold_factor: Option<f64>,
    pub label: Option<String>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let cfg = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Reads `path` if given, otherwise starts from the defaults.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
        let mut cfg = match path {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        cfg.cascade.validate()?;
        if let DatasetSource::Synthetic(s) = &cfg.dataset {
            s.validate()?;
        }
        Ok(cfg)
    }

    /// `--seed` reseeds both the synthetic generator and the cascade.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.cascade.seed = seed;
            if let DatasetSource::Synthetic(s) = &mut self.dataset {
                s.seed = seed;
            }
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(n) = o.stages {
            self.cascade.n_stages = n;
        }
        if let Some(f) = o.threshold_factor {
            self.cascade.threshold_factor = f;
        }
        if let Some(label) = &o.label {
            self.label = Some(label.clone());
        }
    }

    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| default_label(self.cascade.n_stages))
    }
}

pub(crate) fn default_label(n_stages: usize) -> String {
    match n_stages {
        0 => "baseline".into(),
        n => format!("cascade-{n}"),
    }
}

/// Desk-scale run: 50 scans of 16-pixel patches, 2 nodules and 800
/// non-nodules per scan, the compact network and a shortened schedule.
/// Per-fold non-nodule draws are scaled down with the nodule count.
pub fn acceptance_preset(seed: u64, n_stages: usize) -> RunConfig {
    let train = TrainConfig {
        learning_rate: 0.2,
        epochs: 15,
        batch_size: 32,
        dropout_rate: 0.0,
        seed: 0,
        shuffle: true,
    };
    RunConfig {
        label: None,
        dataset: DatasetSource::Synthetic(SyntheticConfig {
            patch_size: 16,
            seed,
            ..SyntheticConfig::default()
        }),
        cascade: CascadeConfig {
            n_stages,
            per_fold_negatives: 40,
            architecture: LayerSpec::compact_architecture(0.0),
            stage_train: train.clone(),
            final_train: train,
            seed,
            ..CascadeConfig::default()
        },
        out: default_out(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_win() {
        let mut cfg = acceptance_preset(1, 5);
        cfg.apply(&Overrides {
            seed: Some(9),
            stages: Some(2),
            threshold_factor: Some(0.5),
            out: Some("elsewhere".into()),
            label: None,
        });
        assert_eq!(cfg.cascade.seed, 9);
        assert_eq!(cfg.cascade.n_stages, 2);
        assert_eq!(cfg.cascade.threshold_factor, 0.5);
        assert_eq!(cfg.out, PathBuf::from("elsewhere"));
        match &cfg.dataset {
            DatasetSource::Synthetic(s) => assert_eq!(s.seed, 9),
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.label(), "cascade-2");
    }

    #[test]
    fn json_round_trip_and_single_source() {
        let cfg = acceptance_preset(3, 0);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        assert_eq!(cfg.label(), "baseline");
        let both = r#"{"dataset": {"patchset": "a.pset", "synthetic": {}}}"#;
        assert!(serde_json::from_str::<RunConfig>(both).is_err());
        let minimal: RunConfig =
            serde_json::from_str(r#"{"dataset": {"patchset": "a.pset"}}"#).unwrap();
        assert_eq!(minimal.cascade, CascadeConfig::default());
    }
}
