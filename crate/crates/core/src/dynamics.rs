//! Cognitive dynamical models of influence-matrix evolution.
//!
//! Each model is a map `M' = T(M, y)` on row-stochastic matrices driven by
//! the members' expertise:
//!
//! * **D** (differentiation): `M' = (1 - tau) M + tau 1 ybar^T`.
//! * **DR** (differentiation + reversion): low performers spread their
//!   weights uniformly, `M'_ij = (1 - tau) M_ij + tau (x_i x_j + (1 - x_i) / n)`
//!   with `x = ybar`.
//! * **DRP** (DR on perceived expertise): the same update with `x = yhat`,
//!   expertise reweighted by each member's self-weight.
//!
//! Expertise arguments are plain nonnegative weight slices; both D and DR
//! normalize them, and DRP is invariant to their overall scale.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ExpertiseVector, InfluenceMatrix, SelfWeightVector, SimplexVector};

pub const DEFAULT_TAU: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    D,
    DR,
    DRP,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::D, ModelKind::DR, ModelKind::DRP];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::D => "D",
            ModelKind::DR => "DR",
            ModelKind::DRP => "DRP",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "D" => Ok(ModelKind::D),
            "DR" => Ok(ModelKind::DR),
            "DRP" => Ok(ModelKind::DRP),
            other => Err(Error::InvalidArgument(format!("unknown model {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    tau: f64,
    model: ModelKind,
}

impl DynamicsConfig {
    pub fn new(tau: f64, model: ModelKind) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self { tau, model })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self { tau: DEFAULT_TAU, model: ModelKind::DRP }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tau must lie in (0, 1), got {tau}")))
    }
}

fn check_weights(y: &[f64], n: usize) -> Result<()> {
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if let Some(x) = y.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::OutOfRange(format!("expertise weight {x}")));
    }
    Ok(())
}

/// `ybar = y / (1^T y)`.
pub fn normalize_expertise(y: &[f64]) -> Result<SimplexVector> {
    check_weights(y, y.len())?;
    let total: f64 = y.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroExpertise);
    }
    Ok(SimplexVector::from_trusted(y.iter().map(|v| v / total).collect()))
}

/// `yhat = diag(m_d) y / (m_d^T y)`.
pub fn perceived_expertise(y: &[f64], m_d: &[f64]) -> Result<SimplexVector> {
    check_weights(y, m_d.len())?;
    let weighted: Vec<f64> = m_d.iter().zip(y).map(|(m, v)| m * v).collect();
    let total: f64 = weighted.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegeneratePerception);
    }
    Ok(SimplexVector::from_trusted(weighted.into_iter().map(|w| w / total).collect()))
}

fn check_dims(m: &InfluenceMatrix, x: &[f64]) -> Result<()> {
    if m.n() != x.len() {
        return Err(Error::DimensionMismatch { expected: m.n(), found: x.len() });
    }
    Ok(())
}

/// D model step.
pub fn step_d(m: &InfluenceMatrix, y_bar: &SimplexVector, tau: f64) -> Result<InfluenceMatrix> {
    check_tau(tau)?;
    check_dims(m, y_bar)?;
    let n = m.n();
    let src = m.as_matrix();
    let out = DMatrix::from_fn(n, n, |i, j| (1.0 - tau) * src[(i, j)] + tau * y_bar[j]);
    Ok(InfluenceMatrix::from_trusted(out))
}

/// The shared DR/DRP update `(1 - tau) M_ij + tau (x_i x_j + (1 - x_i) / n)`.
pub fn reversion_step(m: &InfluenceMatrix, x: &SimplexVector, tau: f64) -> Result<InfluenceMatrix> {
    check_tau(tau)?;
    check_dims(m, x)?;
    let n = m.n();
    let inv_n = 1.0 / n as f64;
    let src = m.as_matrix();
    let out = DMatrix::from_fn(n, n, |i, j| (1.0 - tau) * src[(i, j)] + tau * (x[i] * x[j] + (1.0 - x[i]) * inv_n));
    Ok(InfluenceMatrix::from_trusted(out))
}

/// DR model step on normalized expertise.
pub fn step_dr(m: &InfluenceMatrix, y_bar: &SimplexVector, tau: f64) -> Result<InfluenceMatrix> {
    reversion_step(m, y_bar, tau)
}

/// DRP model step on raw expertise `y`.
///
/// Requires some member with both a positive self-weight and positive
/// expertise; otherwise perceived expertise is undefined.
pub fn step_drp(m: &InfluenceMatrix, y: &[f64], tau: f64) -> Result<InfluenceMatrix> {
    check_dims(m, y)?;
    let y_hat = perceived_expertise(y, &m.diagonal())?;
    reversion_step(m, &y_hat, tau)
}

/// One step of the configured model.
pub fn step(config: &DynamicsConfig, m: &InfluenceMatrix, y: &[f64]) -> Result<InfluenceMatrix> {
    match config.model {
        ModelKind::D => step_d(m, &normalize_expertise(y)?, config.tau),
        ModelKind::DR => step_dr(m, &normalize_expertise(y)?, config.tau),
        ModelKind::DRP => step_drp(m, y, config.tau),
    }
}

/// Predicts rounds `2..=T` from the reported matrix and expertise of the
/// previous round: `Mhat(t+1) = T(M(t), y(t))`.
pub fn forecast_single_round(
    truth: &[(InfluenceMatrix, ExpertiseVector)],
    config: &DynamicsConfig,
) -> Result<Vec<InfluenceMatrix>> {
    if truth.len() < 2 {
        return Err(Error::InvalidArgument("single-round forecast needs at least two rounds".into()));
    }
    truth[..truth.len() - 1].iter().map(|(m, y)| step(config, m, y)).collect()
}

/// Chains predictions from the first reported matrix only:
/// `Mhat(2) = T(M(1), y(1))`, `Mhat(t+1) = T(Mhat(t), y(t))`.
/// Returns one prediction per expertise vector.
pub fn forecast_multi_round(
    m1: &InfluenceMatrix,
    expertise: &[ExpertiseVector],
    config: &DynamicsConfig,
) -> Result<Vec<InfluenceMatrix>> {
    if expertise.is_empty() {
        return Err(Error::InvalidArgument("multi-round forecast needs expertise for round 1".into()));
    }
    let mut out: Vec<InfluenceMatrix> = Vec::with_capacity(expertise.len());
    for y in expertise {
        let prev = out.last().unwrap_or(m1);
        let next = step(config, prev, y)?;
        out.push(next);
    }
    Ok(out)
}

/// Closed DRP recursion on the self-weights alone:
/// `m_d' = (1 - tau) m_d + tau (yhat o yhat + (1 - yhat) / n)`.
///
/// Returns `steps + 1` vectors starting with `m_d`. The arithmetic matches
/// the diagonal of [`step_drp`] entry for entry.
pub fn self_weight_trajectory(
    m_d: &SelfWeightVector,
    y: &[f64],
    tau: f64,
    steps: usize,
) -> Result<Vec<SelfWeightVector>> {
    check_tau(tau)?;
    let n = m_d.len();
    let inv_n = 1.0 / n as f64;
    let mut traj = vec![m_d.clone()];
    for _ in 0..steps {
        let cur = traj.last().expect("nonempty");
        let y_hat = perceived_expertise(y, cur)?;
        let next =
            (0..n).map(|i| (1.0 - tau) * cur[i] + tau * (y_hat[i] * y_hat[i] + (1.0 - y_hat[i]) * inv_n)).collect();
        traj.push(SelfWeightVector::from_trusted(next));
    }
    Ok(traj)
}
