//! On-disk layout: `fold_<i>/stage_<j>.csnn`, `fold_<i>/final.csnn` and
//! `manifest.json`. The manifest is the only source of thresholds.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CascadeConfig, SelectiveStage, StageStats};
use crate::dataset::FoldAssignment;
use crate::nn::{decode_network, encode_network, Network};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_FORMAT: &str = "selective-cascade";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FoldModel {
    pub stages: Vec<SelectiveStage>,
    pub final_net: Network,
}

/// Per-fold stages plus final networks, and the fold assignment that routes
/// every candidate to the fold whose networks never trained on it.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    pub config: CascadeConfig,
    pub assignment: FoldAssignment,
    pub folds: Vec<FoldModel>,
    /// Counts per stage summed over folds.
    pub stage_table: Vec<StageStats>,
}

#[derive(Serialize, Deserialize)]
struct StageEntry {
    file: String,
    threshold: f64,
    threshold_factor: f64,
    stats: StageStats,
}

#[derive(Serialize, Deserialize)]
struct FoldEntry {
    stages: Vec<StageEntry>,
    final_file: String,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    k: usize,
    n_stages: usize,
    config: CascadeConfig,
    stage_table: Vec<StageStats>,
    folds: Vec<FoldEntry>,
    fold_assignment: FoldAssignment,
}

impl CascadeModel {
    /// Number of selective stages (the same in every fold).
    pub fn n_stages(&self) -> usize {
        self.folds.first().map_or(0, |f| f.stages.len())
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut folds = Vec::with_capacity(self.folds.len());
        for (i, fold) in self.folds.iter().enumerate() {
            let rel = format!("fold_{i}");
            fs::create_dir_all(dir.join(&rel))?;
            let mut stages = Vec::with_capacity(fold.stages.len());
            for (j, stage) in fold.stages.iter().enumerate() {
                let file = format!("{rel}/stage_{j}.csnn");
                fs::write(dir.join(&file), encode_network(&stage.net))?;
                stages.push(StageEntry {
                    file,
                    threshold: stage.threshold,
                    threshold_factor: stage.threshold_factor,
                    stats: stage.stats,
                });
            }
            let final_file = format!("{rel}/final.csnn");
            fs::write(dir.join(&final_file), encode_network(&fold.final_net))?;
            folds.push(FoldEntry { stages, final_file });
        }
        let manifest = Manifest {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            k: self.folds.len(),
            n_stages: self.n_stages(),
            config: self.config.clone(),
            stage_table: self.stage_table.clone(),
            folds,
            fold_assignment: self.assignment.clone(),
        };
        let mut json = serde_json::to_vec_pretty(&manifest)?;
        json.push(b'\n');
        fs::write(dir.join(MANIFEST_FILE), json)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<CascadeModel> {
        let dir = dir.as_ref();
        let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
        if manifest.format != MANIFEST_FORMAT || manifest.version != MANIFEST_VERSION {
            return Err(Error::Data(format!(
                "unsupported model manifest {} v{}",
                manifest.format, manifest.version
            )));
        }
        if manifest.folds.len() != manifest.k || manifest.fold_assignment.k != manifest.k {
            return Err(Error::Data("manifest fold count is inconsistent".into()));
        }
        let read_net = |file: &str| -> Result<Network> {
            decode_network(&fs::read(dir.join(file))?).map_err(|e| match e {
                Error::Format { offset, message } => Error::Format {
                    offset,
                    message: format!("{file}: {message}"),
                },
                other => other,
            })
        };
        let mut folds = Vec::with_capacity(manifest.k);
        for entry in &manifest.folds {
            if entry.stages.len() != manifest.n_stages {
                return Err(Error::Data("folds disagree on the number of stages".into()));
            }
            let stages = entry
                .stages
                .iter()
                .map(|s| {
                    Ok(SelectiveStage {
                        net: read_net(&s.file)?,
                        threshold: s.threshold,
                        threshold_factor: s.threshold_factor,
                        stats: s.stats,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            folds.push(FoldModel {
                stages,
                final_net: read_net(&entry.final_file)?,
            });
        }
        Ok(CascadeModel {
            config: manifest.config,
            assignment: manifest.fold_assignment,
            folds,
            stage_table: manifest.stage_table,
        })
    }
}
