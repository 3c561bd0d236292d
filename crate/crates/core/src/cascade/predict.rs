use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CascadeModel, NetId, NetRole, RunOptions};
use crate::dataset::{CandidateSet, Label};
use crate::{Error, Result};

/// One scoring event: the network and the root lesion it scored.
pub type ScoreEvent = (NetId, String);

/// Final verdict for one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub lesion_id: String,
    pub scan_id: String,
    pub label: Label,
    /// Final-network class-1 probability, or exactly 0 when rejected.
    pub score: f32,
    /// Index of the stage that rejected the candidate.
    pub rejected_at: Option<usize>,
}

pub fn predict_all(model: &CascadeModel, data: &CandidateSet) -> Result<Vec<ScoreRecord>> {
    predict_all_with(model, data, RunOptions::default())
}

pub fn predict_all_with(
    model: &CascadeModel,
    data: &CandidateSet,
    opts: RunOptions,
) -> Result<Vec<ScoreRecord>> {
    predict_all_traced(model, data, opts).map(|(records, _)| records)
}

/// Routes each candidate to its test fold, runs it through that fold's stages
/// with the frozen thresholds and, if it survives, the final network.
/// Also returns `(network, root lesion)` for every score computed.
pub fn predict_all_traced(
    model: &CascadeModel,
    data: &CandidateSet,
    opts: RunOptions,
) -> Result<(Vec<ScoreRecord>, Vec<ScoreEvent>)> {
    let k = model.folds.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, p) in data.patches().iter().enumerate() {
        match model.assignment.fold_for(p) {
            Some(f) if f < k => members[f].push(i),
            _ => {
                return Err(Error::Routing(format!(
                    "lesion {} is not covered by the fold assignment",
                    p.lesion_id
                )))
            }
        }
    }
    type FoldResult = Result<(Vec<(usize, f32, Option<usize>)>, Vec<ScoreEvent>)>;
    let per_fold: Vec<FoldResult> = opts.run(|| {
        members
            .par_iter()
            .enumerate()
            .map(|(f, idx)| {
                let fold = &model.folds[f];
                let mut events = Vec::new();
                let mut out = Vec::with_capacity(idx.len());
                for &i in idx {
                    let p = &data.patches()[i];
                    let mut rejected = None;
                    for (j, stage) in fold.stages.iter().enumerate() {
                        events.push((
                            NetId {
                                fold: f,
                                role: NetRole::Stage(j),
                            },
                            p.root_lesion().to_string(),
                        ));
                        if (stage.net.predict_one(p.pixels.data())? as f64) < stage.threshold {
                            rejected = Some(j);
                            break;
                        }
                    }
                    let score = match rejected {
                        Some(_) => 0.0,
                        None => {
                            events.push((
                                NetId {
                                    fold: f,
                                    role: NetRole::Final,
                                },
                                p.root_lesion().to_string(),
                            ));
                            fold.final_net.predict_one(p.pixels.data())?
                        }
                    };
                    out.push((i, score, rejected));
                }
                Ok((out, events))
            })
            .collect()
    })?;
    let mut slots: Vec<Option<(f32, Option<usize>)>> = vec![None; data.len()];
    let mut events = Vec::new();
    for r in per_fold {
        let (scored, ev) = r?;
        for (i, score, rejected) in scored {
            slots[i] = Some((score, rejected));
        }
        events.extend(ev);
    }
    let records = data
        .patches()
        .iter()
        .zip(slots)
        .map(|(p, slot)| {
            let (score, rejected_at) = slot.expect("every candidate routed");
            ScoreRecord {
                lesion_id: p.lesion_id.clone(),
                scan_id: p.scan_id.clone(),
                label: p.label,
                score,
                rejected_at,
            }
        })
        .collect();
    Ok((records, events))
}
