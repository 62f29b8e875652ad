//! Comparison predictors for influence-matrix forecasting.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{InfluenceMatrix, SimplexVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    Random,
    First,
    SBT,
    Uniform,
    Average,
    Reflected,
    Constant,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 7] = [
        BaselineKind::Random,
        BaselineKind::First,
        BaselineKind::SBT,
        BaselineKind::Uniform,
        BaselineKind::Average,
        BaselineKind::Reflected,
        BaselineKind::Constant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Random => "Random",
            BaselineKind::First => "First",
            BaselineKind::SBT => "SBT",
            BaselineKind::Uniform => "Uniform",
            BaselineKind::Average => "Average",
            BaselineKind::Reflected => "Reflected",
            BaselineKind::Constant => "Constant",
        }
    }
}

/// How SBT output is turned into a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SbtMode {
    /// Rows rescaled to sum 1; all-zero rows become uniform.
    #[default]
    Renormalized,
    /// The raw two-hop average, generally sub-stochastic.
    Raw,
}

pub fn predict_constant(m_prev: &InfluenceMatrix) -> InfluenceMatrix {
    m_prev.clone()
}

pub fn predict_first(m_first: &InfluenceMatrix) -> InfluenceMatrix {
    m_first.clone()
}

pub fn predict_uniform(n: usize) -> InfluenceMatrix {
    InfluenceMatrix::uniform(n)
}

/// Each row drawn from the flat Dirichlet distribution (normalized Exp(1)
/// draws), deterministic in `seed`.
pub fn predict_random(n: usize, seed: u64) -> InfluenceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        for (j, d) in draws.into_iter().enumerate() {
            m[(i, j)] = d / total;
        }
    }
    InfluenceMatrix::from_trusted(m)
}

/// Entrywise mean of `history`.
pub fn predict_average(history: &[InfluenceMatrix]) -> Result<InfluenceMatrix> {
    let first = history.first().ok_or(Error::EmptyHistory)?;
    let n = first.n();
    let mut sum = DMatrix::zeros(n, n);
    for m in history {
        if m.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.n() });
        }
        sum += m.as_matrix();
    }
    Ok(InfluenceMatrix::from_trusted(sum / history.len() as f64))
}

/// Reflected appraisal update:
/// `M'_ii = M_ii + M_ii (1 - M_ii) g_i`, `M'_ij = M_ij - M_ii M_ij g_i`
/// with `g_i = ybar_i - sum_k M_ik ybar_k`.
pub fn step_reflected(m: &InfluenceMatrix, y_bar: &SimplexVector) -> Result<InfluenceMatrix> {
    let n = m.n();
    if y_bar.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y_bar.len() });
    }
    let src = m.as_matrix();
    let mut out = src.clone();
    for i in 0..n {
        let observed: f64 = (0..n).map(|k| src[(i, k)] * y_bar[k]).sum();
        let gap = y_bar[i] - observed;
        let self_w = src[(i, i)];
        for j in 0..n {
            out[(i, j)] =
                if i == j { self_w + self_w * (1.0 - self_w) * gap } else { src[(i, j)] - self_w * src[(i, j)] * gap };
        }
    }
    Ok(InfluenceMatrix::from_trusted(out))
}

/// Raw generalized structural-balance update,
/// `raw_ij = (1 / (n - 2)) sum_{k != i, j} M_ik M_kj`.
pub fn step_sbt_raw(m: &InfluenceMatrix) -> Result<DMatrix<f64>> {
    let n = m.n();
    if n < 3 {
        return Err(Error::TeamTooSmall(n));
    }
    let src = m.as_matrix();
    let scale = 1.0 / (n - 2) as f64;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        scale * (0..n).filter(|&k| k != i && k != j).map(|k| src[(i, k)] * src[(k, j)]).sum::<f64>()
    }))
}

/// SBT prediction with rows renormalized; an all-zero row becomes uniform.
pub fn step_sbt(m: &InfluenceMatrix) -> Result<InfluenceMatrix> {
    let mut raw = step_sbt_raw(m)?;
    let n = raw.nrows();
    for i in 0..n {
        let sum: f64 = raw.row(i).sum();
        if sum > 0.0 {
            raw.row_mut(i).unscale_mut(sum);
        } else {
            raw.row_mut(i).fill(1.0 / n as f64);
        }
    }
    Ok(InfluenceMatrix::from_trusted(raw))
}

/// Inputs a baseline may draw on when predicting round `t + 1`.
#[derive(Debug, Clone, Copy)]
pub struct BaselineContext<'a> {
    /// Reported matrices for rounds `1..=t`, oldest first.
    pub history: &'a [InfluenceMatrix],
    /// Normalized expertise at round `t`, if known.
    pub y_bar: Option<&'a SimplexVector>,
    pub seed: u64,
    pub sbt_mode: SbtMode,
}

/// Dispatches a baseline prediction. Returns `Ok(None)` when the baseline
/// cannot be evaluated with the given inputs (Reflected without expertise);
/// such rounds are reported as missing.
pub fn predict(kind: BaselineKind, ctx: &BaselineContext<'_>) -> Result<Option<DMatrix<f64>>> {
    let last = ctx.history.last().ok_or(Error::EmptyHistory)?;
    let n = last.n();
    let m = match kind {
        BaselineKind::Random => predict_random(n, ctx.seed).into_matrix(),
        BaselineKind::First => predict_first(&ctx.history[0]).into_matrix(),
        BaselineKind::SBT => match ctx.sbt_mode {
            SbtMode::Renormalized => step_sbt(last)?.into_matrix(),
            SbtMode::Raw => step_sbt_raw(last)?,
        },
        BaselineKind::Uniform => predict_uniform(n).into_matrix(),
        BaselineKind::Average => predict_average(ctx.history)?.into_matrix(),
        BaselineKind::Reflected => match ctx.y_bar {
            Some(y) => step_reflected(last, y)?.into_matrix(),
            None => return Ok(None),
        },
        BaselineKind::Constant => predict_constant(last).into_matrix(),
    };
    Ok(Some(m))
}
