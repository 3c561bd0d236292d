use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` ascending edges from 0 to 1.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Uniform bins over [0, 1]; the last bin includes 1.
pub fn histogram(scores: &[f32], n_bins: usize) -> Result<Histogram> {
    if n_bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let mut counts = vec![0; n_bins];
    for &s in scores {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Data(format!("score {s} lies outside [0, 1]")));
        }
        let bin = ((s as f64 * n_bins as f64) as usize).min(n_bins - 1);
        counts[bin] += 1;
    }
    let bin_edges = (0..=n_bins).map(|i| i as f64 / n_bins as f64).collect();
    Ok(Histogram { bin_edges, counts })
}
