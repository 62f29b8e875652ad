//! False-discovery control and bootstrap summaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::quantile_sorted;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BhResult {
    pub rejected: Vec<bool>,
    /// `k q / m` for the largest passing rank `k`, 0 when nothing passes.
    pub threshold: f64,
    pub count: usize,
}

/// Benjamini-Hochberg step-up procedure at level `fdr`.
pub fn bh_correct(p_values: &[f64], fdr: f64) -> Result<BhResult> {
    if !(0.0 < fdr && fdr < 1.0) {
        return Err(Error::InvalidArgument(format!("fdr must lie in (0, 1), got {fdr}")));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::OutOfRange(format!("p-value {p}")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let k = (1..=m).rev().find(|&k| p_values[order[k - 1]] <= k as f64 * fdr / m as f64).unwrap_or(0);
    let mut rejected = vec![false; m];
    for &i in &order[..k] {
        rejected[i] = true;
    }
    let threshold = if k == 0 { 0.0 } else { k as f64 * fdr / m as f64 };
    Ok(BhResult { rejected, threshold, count: k })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub resamples: usize,
    /// Mean of the resampled means.
    pub mean: f64,
    /// Standard deviation of the resampled means.
    pub std: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

/// `b` resamples with replacement, each the size of `errors`.
pub fn bootstrap_eval(errors: &[f64], b: usize, seed: u64) -> Result<BootstrapSummary> {
    if errors.is_empty() {
        return Err(Error::InvalidArgument("bootstrap needs at least one error".into()));
    }
    if b == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one resample".into()));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFiniteInput("errors"));
    }
    let n = errors.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> =
        (0..b).map(|_| (0..n).map(|_| errors[rng.random_range(0..n)]).sum::<f64>() / n as f64).collect();
    let mean = means.iter().sum::<f64>() / b as f64;
    let std = if b > 1 { (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1) as f64).sqrt() } else { 0.0 };
    means.sort_by(f64::total_cmp);
    Ok(BootstrapSummary {
        resamples: b,
        mean,
        std,
        q025: quantile_sorted(&means, 0.025),
        q50: quantile_sorted(&means, 0.5),
        q975: quantile_sorted(&means, 0.975),
    })
}
