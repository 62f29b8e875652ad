//! Convex estimators for influence matrices.

mod linear;
mod softmax;
mod solver;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use linear::{
    feature_importance, fit_linear, fit_linear_samples, linear_samples, predict_linear, project_rows, LinearSample,
    LinearWeights,
};
pub use softmax::{
    fit_softmax, fit_softmax_samples, predict_softmax, predict_softmax_matrix, softmax_loss_and_grad, softmax_samples,
    SoftmaxSample, SoftmaxWeights,
};

use crate::error::{Error, Result};
use crate::ingest::{FeatureBundle, FeatureKind};
use crate::matrix::InfluenceMatrix;

/// How the linear model's row-stochastic constraints are applied in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintMode {
    /// Every predicted matrix.
    #[default]
    PerSample,
    /// Only the mean prediction over the dataset.
    Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Iteration cap per penalty stage.
    pub max_iter: usize,
    /// Relative gradient-mapping tolerance.
    pub tol: f64,
    /// Constraint penalty weights, one solver stage each (linear model).
    pub penalty_schedule: Vec<f64>,
    pub constraint_mode: ConstraintMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            tol: 1e-7,
            penalty_schedule: vec![1.0, 10.0, 100.0, 1000.0],
            constraint_mode: ConstraintMode::PerSample,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.penalty_schedule.is_empty() || self.penalty_schedule.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidArgument("penalty schedule needs positive weights".into()));
        }
        Ok(())
    }
}

/// Objective values of one solver stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    /// Constraint penalty weight (0 when unused).
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Starting value, then one entry per iteration.
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub feature: String,
    pub l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub final_objective: f64,
    pub iterations: usize,
    /// Largest negativity or row-sum deviation of the raw training
    /// predictions, before projection.
    pub max_constraint_violation: f64,
    pub feature_l1: Vec<FeatureNorm>,
    pub converged: bool,
    pub stages: Vec<StageTrace>,
}

impl FitReport {
    /// Every stage's trace is nonincreasing.
    pub fn traces_monotone(&self) -> bool {
        self.stages.iter().all(|s| s.objective.windows(2).all(|w| w[1] <= w[0]))
    }
}

/// Row-major matrix with explicit shape, for JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<f64>>,
}

impl From<&DMatrix<f64>> for TaggedMatrix {
    fn from(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect(),
        }
    }
}

impl TryFrom<TaggedMatrix> for DMatrix<f64> {
    type Error = Error;

    fn try_from(t: TaggedMatrix) -> Result<Self> {
        if t.data.len() != t.rows || t.data.iter().any(|r| r.len() != t.cols) {
            return Err(Error::Schema(format!("matrix data does not match shape {}x{}", t.rows, t.cols)));
        }
        Ok(DMatrix::from_fn(t.rows, t.cols, |i, j| t.data[i][j]))
    }
}

/// Seeded shuffle of the distinct team ids; the first
/// `round(holdout * teams)` (at least one, at most all but one) are held out.
/// Returns `(train, holdout)` item indices.
pub fn split_by_team(team_ids: &[String], holdout: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0 < holdout && holdout < 1.0) {
        return Err(Error::InvalidArgument(format!("holdout fraction must lie in (0, 1), got {holdout}")));
    }
    let mut teams: Vec<&String> = team_ids.iter().collect();
    teams.sort();
    teams.dedup();
    if teams.len() < 2 {
        return Err(Error::InvalidArgument("need at least two teams to split".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    teams.shuffle(&mut rng);
    let k = ((holdout * teams.len() as f64).round() as usize).clamp(1, teams.len() - 1);
    let held: std::collections::HashSet<&String> = teams[..k].iter().copied().collect();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, t) in team_ids.iter().enumerate() {
        if held.contains(t) {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    Ok((train, test))
}

/// Default lambda grid: `1e-4, 1e-3, 1e-2, 1e-1, 1`.
pub fn default_lambda_grid() -> Vec<f64> {
    vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Linear,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaSelection {
    pub best: f64,
    /// `(lambda, validation MSE)`; failed fits are omitted.
    pub scores: Vec<(f64, f64)>,
}

/// Picks the grid value with the lowest validation MSE on a team-level split
/// of `train`. Ties go to the larger lambda.
pub fn select_lambda(
    train: &[(FeatureBundle, InfluenceMatrix)],
    kinds: &[FeatureKind],
    estimator: EstimatorKind,
    grid: &[f64],
    validation: f64,
    seed: u64,
    config: &SolverConfig,
) -> Result<LambdaSelection> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    let ids: Vec<String> = train.iter().map(|(b, _)| b.team_id.clone()).collect();
    let (fit_idx, val_idx) = split_by_team(&ids, validation, seed)?;
    let fit: Vec<_> = fit_idx.iter().map(|&i| train[i].clone()).collect();
    let val: Vec<_> = val_idx.iter().map(|&i| &train[i]).collect();
    let mut scores = Vec::new();
    for &lambda in grid {
        let preds: Result<Vec<InfluenceMatrix>> = match estimator {
            EstimatorKind::Linear => fit_linear(&fit, kinds, lambda, config)
                .and_then(|(w, _)| val.iter().map(|(b, _)| predict_linear(&w, b)).collect()),
            EstimatorKind::Softmax => fit_softmax(&fit, kinds, lambda, config)
                .and_then(|(w, _)| val.iter().map(|(b, _)| predict_softmax_matrix(&w, b)).collect()),
        };
        let Ok(preds) = preds else { continue };
        let mut total = 0.0;
        for (p, (_, m)) in preds.iter().zip(&val) {
            total += crate::metrics::mse(m, p)?;
        }
        scores.push((lambda, total / val.len() as f64));
    }
    let best = scores
        .iter()
        .fold(None::<(f64, f64)>, |acc, &(l, s)| match acc {
            Some((_, bs)) if s > bs => acc,
            _ => Some((l, s)),
        })
        .ok_or(Error::SolverNoConvergence(0))?
        .0;
    Ok(LambdaSelection { best, scores })
}
