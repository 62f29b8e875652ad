//! Error metrics between influence matrices and the sociometric quantities
//! derived from a single matrix (confidence, persuasiveness, reversion).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{
    left_stationary, ExpertiseVector, InfluenceMatrix, SimplexVector, STATIONARY_MAX_ITER, STATIONARY_TOL,
};
use crate::session::TeamSession;

pub const KL_EPS: f64 = 1e-9;

fn same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.nrows() });
    }
    Ok(())
}

/// `(1/n) ||M - Mhat||_F^2` on raw matrices.
pub fn mse_raw(m: &DMatrix<f64>, m_hat: &DMatrix<f64>) -> Result<f64> {
    same_shape(m, m_hat)?;
    Ok((m - m_hat).norm_squared() / m.nrows() as f64)
}

pub fn mse(m: &InfluenceMatrix, m_hat: &InfluenceMatrix) -> Result<f64> {
    mse_raw(m.as_matrix(), m_hat.as_matrix())
}

/// Row-averaged KL divergence `(1/n) sum_i sum_j M_ij log(M_ij / max(Mhat_ij, eps))`
/// with `0 log 0 = 0`.
pub fn kl_raw(m: &DMatrix<f64>, m_hat: &DMatrix<f64>, eps: f64) -> Result<f64> {
    same_shape(m, m_hat)?;
    let total: f64 =
        m.iter().zip(m_hat.iter()).filter(|(p, _)| **p > 0.0).map(|(p, q)| p * (p / q.max(eps)).ln()).sum();
    Ok(total / m.nrows() as f64)
}

pub fn kl(m: &InfluenceMatrix, m_hat: &InfluenceMatrix, eps: f64) -> Result<f64> {
    kl_raw(m.as_matrix(), m_hat.as_matrix(), eps)
}

/// Self-appraisal `M_ii`.
pub fn confidence(m: &InfluenceMatrix) -> Vec<f64> {
    m.diagonal().to_vec()
}

/// `p_i = (1/(n-1)) sum_{j != i} M_ji`.
pub fn local_persuasiveness(m: &InfluenceMatrix) -> Vec<f64> {
    let n = m.n();
    let denom = (n - 1) as f64;
    (0..n).map(|i| (0..n).filter(|&j| j != i).map(|j| m.get(j, i)).sum::<f64>() / denom).collect()
}

/// Zero-diagonal relative appraisal matrix `C = diag((M - D) 1)^-1 (M - D)`.
pub fn relative_appraisal(m: &InfluenceMatrix) -> Result<InfluenceMatrix> {
    let n = m.n();
    let mut c = m.as_matrix().clone();
    for i in 0..n {
        c[(i, i)] = 0.0;
        let off: f64 = c.row(i).sum();
        if off <= 0.0 {
            return Err(Error::IsolatedRater(i));
        }
        c.row_mut(i).unscale_mut(off);
    }
    Ok(InfluenceMatrix::from_trusted(c))
}

/// Stationary distribution of the relative appraisal matrix.
pub fn global_persuasiveness(m: &InfluenceMatrix) -> Result<SimplexVector> {
    left_stationary(&relative_appraisal(m)?, STATIONARY_TOL, STATIONARY_MAX_ITER)
}

/// `D_i = sum_j (M_ij - 1/n)^2`.
pub fn mean_reversion(m: &InfluenceMatrix) -> Vec<f64> {
    let n = m.n();
    let u = 1.0 / n as f64;
    (0..n).map(|i| (0..n).map(|j| (m.get(i, j) - u).powi(2)).sum()).collect()
}

/// Cumulative individual correct-answer rate per member at the end of each
/// round. Members who have not answered yet get expertise 0.
pub fn expertise_series(session: &TeamSession) -> Vec<ExpertiseVector> {
    let n = session.n();
    let mut correct = vec![0usize; n];
    let mut answered = vec![0usize; n];
    session
        .rounds
        .iter()
        .map(|round| {
            for a in round.questions.iter().flat_map(|q| &q.answers) {
                answered[a.member] += 1;
                correct[a.member] += usize::from(a.correct);
            }
            let rates =
                (0..n).map(|i| if answered[i] == 0 { 0.0 } else { correct[i] as f64 / answered[i] as f64 }).collect();
            ExpertiseVector::new(rates).expect("rates lie in [0, 1]")
        })
        .collect()
}

/// One named scalar for one (team, round).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub team: String,
    pub round: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let count = sorted.len();
        let mean = if count == 0 { f64::NAN } else { sorted.iter().sum::<f64>() / count as f64 };
        Self {
            count,
            mean,
            median: quantile_sorted(&sorted, 0.5),
            q25: quantile_sorted(&sorted, 0.25),
            q75: quantile_sorted(&sorted, 0.75),
            min: sorted.first().copied().unwrap_or(f64::NAN),
            max: sorted.last().copied().unwrap_or(f64::NAN),
        }
    }
}

/// Per-team, per-round metric values with aggregate summaries.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricReport {
    pub records: Vec<MetricRecord>,
}

impl MetricReport {
    pub fn push(&mut self, team: &str, round: usize, metric: &str, value: f64) {
        self.records.push(MetricRecord { team: team.to_string(), round, metric: metric.to_string(), value });
    }

    pub fn aggregates(&self) -> BTreeMap<String, Aggregate> {
        let mut by_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in &self.records {
            by_metric.entry(r.metric.clone()).or_default().push(r.value);
        }
        by_metric.into_iter().map(|(k, v)| (k, Aggregate::of(&v))).collect()
    }

    /// CSV with columns `team,round,metric,value`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["team", "round", "metric", "value"])?;
        for r in &self.records {
            wtr.write_record([r.team.clone(), r.round.to_string(), r.metric.clone(), r.value.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "records": self.records,
            "aggregates": self.aggregates(),
        })
    }
}
