//! Brute-force FROC: try every observed score as a threshold, count
//! predicted positives directly, keep the first threshold giving each
//! (tp, fp) pair.

#![allow(dead_code)]

use cascade_core::cascade::ScoreRecord;
use cascade_core::dataset::Label;
use rand::Rng;

pub fn brute_force(records: &[ScoreRecord], n_scans: usize) -> Vec<(f32, usize, usize, f64, f64)> {
    let n_positives = records.iter().filter(|r| r.label == Label::Nodule).count();
    let mut thresholds: Vec<f32> = records.iter().map(|r| r.score).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut seen = Vec::new();
    let mut points = Vec::new();
    for t in thresholds {
        let mut tp = 0;
        let mut fp = 0;
        for r in records {
            if r.rejected_at.is_none() && r.score >= t {
                if r.label == Label::Nodule {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        if tp + fp == 0 || seen.contains(&(tp, fp)) {
            continue;
        }
        seen.push((tp, fp));
        points.push((
            t,
            tp,
            fp,
            tp as f64 / n_positives as f64,
            fp as f64 / n_scans as f64,
        ));
    }
    points.sort_by_key(|p| (p.2, p.1));
    points
}

/// Up to `max_records` records over up to `max_scans` scans, with at least
/// one positive. Scores come from a coarse grid so ties are common, and some
/// records are rejected with score 0.
pub fn random_records(
    rng: &mut impl Rng,
    max_records: usize,
    max_scans: usize,
) -> (Vec<ScoreRecord>, usize) {
    let n_scans = rng.gen_range(1..=max_scans);
    let n = rng.gen_range(1..=max_records);
    let grid = rng.gen_range(2..=50) as f32;
    let mut records: Vec<ScoreRecord> = (0..n)
        .map(|i| {
            let rejected = rng.gen_bool(0.15);
            ScoreRecord {
                lesion_id: format!("l{i}"),
                scan_id: format!("s{}", rng.gen_range(0..n_scans)),
                label: if rng.gen_bool(0.3) {
                    Label::Nodule
                } else {
                    Label::NonNodule
                },
                score: if rejected {
                    0.0
                } else {
                    (rng.gen_range(0.0..=grid)).floor() / grid
                },
                rejected_at: rejected.then(|| rng.gen_range(0..5)),
            }
        })
        .collect();
    records[0].label = Label::Nodule;
    (records, n_scans)
}
