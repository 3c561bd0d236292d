use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{froc, sensitivity_at, FrocCurve};
use crate::cascade::{CascadeConfig, CascadeModel, ScoreRecord, StageStats};
use crate::dataset::Label;
use crate::{Error, Result};

/// Everything needed to redraw and compare a run without the model or data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub baseline: bool,
    pub config: CascadeConfig,
    pub stage_table: Vec<StageStats>,
    pub n_scans: usize,
    pub froc: FrocCurve,
    pub sensitivity_at_1: f64,
    pub sensitivity_at_4: f64,
    pub rejected_positives: usize,
    pub rejected_negatives: usize,
    /// Sensitivity lookup rule between operating points.
    pub interpolation: String,
    /// How records from different folds are combined into one curve.
    pub averaging: String,
    pub in_sample: bool,
    pub stopped_early: Option<String>,
    pub warnings: Vec<String>,
    pub records: Vec<ScoreRecord>,
}

impl RunReport {
    pub fn new(
        label: impl Into<String>,
        model: &CascadeModel,
        records: Vec<ScoreRecord>,
        n_scans: usize,
    ) -> Result<RunReport> {
        let curve = froc(&records, n_scans)?;
        let rejected = |label| {
            records
                .iter()
                .filter(|r| r.label == label && r.rejected_at.is_some())
                .count()
        };
        Ok(RunReport {
            label: label.into(),
            baseline: model.n_stages() == 0,
            config: model.config.clone(),
            stage_table: model.stage_table.clone(),
            n_scans,
            sensitivity_at_1: sensitivity_at(&curve, 1.0),
            sensitivity_at_4: sensitivity_at(&curve, 4.0),
            froc: curve,
            rejected_positives: rejected(Label::Nodule),
            rejected_negatives: rejected(Label::NonNodule),
            interpolation: "step".into(),
            averaging: "pooled".into(),
            in_sample: false,
            stopped_early: None,
            warnings: Vec::new(),
            records,
        })
    }

    /// Recomputes the curve and summary numbers from the stored records and
    /// reports the first field that disagrees.
    pub fn verify(&self) -> Result<()> {
        let curve = froc(&self.records, self.n_scans)?;
        let mismatch = |what: &str| {
            Err(Error::Evaluation(format!(
                "report {}: stored {what} disagrees with its records",
                self.label
            )))
        };
        if curve != self.froc {
            return mismatch("FROC curve");
        }
        if sensitivity_at(&curve, 1.0) != self.sensitivity_at_1
            || sensitivity_at(&curve, 4.0) != self.sensitivity_at_4
        {
            return mismatch("operating-point sensitivity");
        }
        let rejected = |label| {
            self.records
                .iter()
                .filter(|r| r.label == label && r.rejected_at.is_some())
                .count()
        };
        if rejected(Label::Nodule) != self.rejected_positives
            || rejected(Label::NonNodule) != self.rejected_negatives
        {
            return mismatch("rejection count");
        }
        Ok(())
    }
}

/// Per-stage counts as CSV, one row per stage.
pub fn stage_table(stats: &[StageStats]) -> String {
    let mut out = String::from(
        "stage,non_nodules_before,non_nodules_after,nodules_before,nodules_after,sigma,threshold\n",
    );
    for (i, s) in stats.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            i + 1,
            s.n_non_nodule_before,
            s.n_non_nodule_after,
            s.n_nodule_before,
            s.n_nodule_after,
            s.sigma,
            s.threshold
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCurve {
    pub label: String,
    pub curve: FrocCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub n_stages: usize,
    pub sensitivity_at_1: f64,
    pub sensitivity_at_4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub curves: Vec<LabeledCurve>,
    pub summary: Vec<SummaryRow>,
}

impl Comparison {
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("label,n_stages,sensitivity_at_1,sensitivity_at_4\n");
        for r in &self.summary {
            out.push_str(&format!(
                "{},{},{},{}\n",
                csv_field(&r.label),
                r.n_stages,
                r.sensitivity_at_1,
                r.sensitivity_at_4
            ));
        }
        out
    }
}

/// Merges report curves in input order. Repeated labels get a `#n` suffix.
pub fn compare_runs(reports: &[RunReport]) -> Result<Comparison> {
    if reports.is_empty() {
        return Err(Error::Evaluation("nothing to compare".into()));
    }
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let mut curves = Vec::with_capacity(reports.len());
    let mut summary = Vec::with_capacity(reports.len());
    for r in reports {
        let n = seen.entry(r.label.as_str()).or_insert(0);
        *n += 1;
        let label = if *n == 1 {
            r.label.clone()
        } else {
            format!("{}#{n}", r.label)
        };
        curves.push(LabeledCurve {
            label: label.clone(),
            curve: r.froc.clone(),
        });
        summary.push(SummaryRow {
            label,
            n_stages: r.stage_table.len(),
            sensitivity_at_1: r.sensitivity_at_1,
            sensitivity_at_4: r.sensitivity_at_4,
        });
    }
    Ok(Comparison { curves, summary })
}

/// `label,threshold,tp,fp,sensitivity,fp_per_scan`, curves one after another.
pub fn froc_csv(curves: &[LabeledCurve]) -> String {
    let mut out = String::from("label,threshold,tp,fp,sensitivity,fp_per_scan\n");
    for c in curves {
        let label = csv_field(&c.label);
        for p in &c.curve.points {
            out.push_str(&format!(
                "{label},{},{},{},{},{}\n",
                p.threshold, p.tp, p.fp, p.sensitivity, p.fp_per_scan
            ));
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::FrocPoint;

    fn report(label: &str, stages: usize) -> RunReport {
        let curve = FrocCurve {
            points: vec![FrocPoint {
                threshold: 0.5,
                tp: 1,
                fp: 1,
                sensitivity: 0.5,
                fp_per_scan: 1.0,
            }],
            n_scans: 1,
            n_positives: 2,
        };
        RunReport {
            label: label.into(),
            baseline: stages == 0,
            config: CascadeConfig::default(),
            stage_table: vec![StageStats::default(); stages],
            n_scans: 1,
            sensitivity_at_1: 0.5,
            sensitivity_at_4: 0.5,
            froc: curve,
            rejected_positives: 0,
            rejected_negatives: 0,
            interpolation: "step".into(),
            averaging: "pooled".into(),
            in_sample: false,
            stopped_early: None,
            warnings: vec![],
            records: vec![],
        }
    }

    #[test]
    fn empty_stage_table_is_header_only() {
        assert_eq!(stage_table(&[]).lines().count(), 1);
    }

    #[test]
    fn stage_table_rows() {
        let row = StageStats {
            n_nodule_before: 1348,
            n_nodule_after: 1344,
            n_non_nodule_before: 551_062,
            n_non_nodule_after: 188_966,
            sigma: 0.4,
            threshold: 0.1,
        };
        let text = stage_table(&[row]);
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "1,551062,188966,1348,1344,0.4,0.1"
        );
    }

    #[test]
    fn single_report_passes_through() {
        let r = report("base", 0);
        let c = compare_runs(std::slice::from_ref(&r)).unwrap();
        assert_eq!(c.curves.len(), 1);
        assert_eq!(c.curves[0].curve, r.froc);
        assert_eq!(c.summary[0].label, "base");
    }

    #[test]
    fn duplicate_labels_are_made_distinct() {
        let r = report("run", 2);
        let c = compare_runs(&[r.clone(), r]).unwrap();
        assert_eq!(c.curves[0].curve, c.curves[1].curve);
        assert_eq!(c.curves[0].label, "run");
        assert_eq!(c.curves[1].label, "run#2");
        assert_eq!(c.summary_csv().lines().count(), 3);
    }

    #[test]
    fn csv_layout() {
        let c = compare_runs(&[report("a,b", 1)]).unwrap();
        let text = froc_csv(&c.curves);
        assert_eq!(
            text,
            "label,threshold,tp,fp,sensitivity,fp_per_scan\n\"a,b\",0.5,1,1,0.5,1\n"
        );
        assert!(compare_runs(&[]).is_err());
    }
}
