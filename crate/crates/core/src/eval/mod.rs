//! FROC analysis, score histograms, stage tables and run reports.

mod froc;
mod histogram;
mod report;
mod svg;

pub use froc::{froc, sensitivity_at, FrocCurve, FrocPoint};
pub use histogram::{histogram, Histogram};
pub use report::{
    compare_runs, froc_csv, stage_table, Comparison, LabeledCurve, RunReport, SummaryRow,
};
pub use svg::froc_svg;
