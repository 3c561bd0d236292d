use serde::{Deserialize, Serialize};

use crate::cascade::ScoreRecord;
use crate::dataset::Label;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrocPoint {
    /// Records scoring at least this much (and not rejected) are positive.
    pub threshold: f32,
    pub tp: usize,
    pub fp: usize,
    pub sensitivity: f64,
    pub fp_per_scan: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrocCurve {
    /// Ascending in `fp_per_scan` and `sensitivity`.
    pub points: Vec<FrocPoint>,
    pub n_scans: usize,
    pub n_positives: usize,
}

/// Sweeps the threshold over every distinct score of a non-rejected record,
/// from high to low. Rejected records are negative at every threshold.
pub fn froc(records: &[ScoreRecord], n_scans: usize) -> Result<FrocCurve> {
    if n_scans == 0 {
        return Err(Error::Evaluation("FROC needs at least one scan".into()));
    }
    let n_positives = records.iter().filter(|r| r.label == Label::Nodule).count();
    if n_positives == 0 {
        return Err(Error::Evaluation(
            "FROC needs at least one positive record".into(),
        ));
    }
    let mut live: Vec<(f32, bool)> = Vec::with_capacity(records.len());
    for r in records.iter().filter(|r| r.rejected_at.is_none()) {
        if r.score.is_nan() {
            return Err(Error::Evaluation(format!(
                "record {} has a NaN score",
                r.lesion_id
            )));
        }
        live.push((r.score, r.label == Label::Nodule));
    }
    live.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < live.len() {
        let threshold = live[i].0;
        while i < live.len() && live[i].0 == threshold {
            if live[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(FrocPoint {
            threshold,
            tp,
            fp,
            sensitivity: tp as f64 / n_positives as f64,
            fp_per_scan: fp as f64 / n_scans as f64,
        });
    }
    Ok(FrocCurve {
        points,
        n_scans,
        n_positives,
    })
}

/// Step-function lookup: the best sensitivity reached without exceeding
/// `fp_per_scan`, or 0 if no point qualifies.
pub fn sensitivity_at(curve: &FrocCurve, fp_per_scan: f64) -> f64 {
    curve
        .points
        .iter()
        .filter(|p| p.fp_per_scan <= fp_per_scan)
        .map(|p| p.sensitivity)
        .fold(0.0, f64::max)
}
