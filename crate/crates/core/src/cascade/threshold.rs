use crate::{Error, Result};

/// Population standard deviation, accumulated in `f64`.
pub fn population_std(values: &[f32]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Evaluation(
            "standard deviation of an empty sample".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = values
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    Ok(var.sqrt())
}

/// `factor × sigma`, clamped to a valid probability.
pub fn threshold_from_sigma(sigma: f64, factor: f64) -> f64 {
    (factor * sigma).clamp(0.0, 1.0)
}

/// Rejection cutoff for a stage: `factor` times the population standard
/// deviation of the stage's output probabilities. Returns `(threshold, sigma)`.
pub fn compute_threshold(probs: &[f32], factor: f64) -> Result<(f64, f64)> {
    if !(factor >= 0.0 && factor.is_finite()) {
        return Err(Error::Config(format!(
            "threshold factor {factor} must be >= 0"
        )));
    }
    let sigma = population_std(probs)?;
    Ok((threshold_from_sigma(sigma, factor), sigma))
}
