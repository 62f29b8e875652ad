//! Constrained linear model `M ~ sum_k X_k W_k^T + B`.
//!
//! Training minimizes the squared Frobenius error over all samples plus an
//! l1 penalty on every parameter. Nonnegativity and unit row sums enter as a
//! smooth quadratic penalty whose weight is raised stage by stage; each
//! prediction is projected onto the row-stochastic set afterwards.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::solver::mfista;
use super::{ConstraintMode, FeatureNorm, FitReport, SolverConfig, StageTrace, TaggedMatrix};
use crate::error::{Error, Result};
use crate::ingest::{FeatureBundle, FeatureKind};
use crate::matrix::{project_to_simplex, InfluenceMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSample {
    /// `X_k`, each `n x p_k`.
    pub features: Vec<DMatrix<f64>>,
    pub target: InfluenceMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LinearWeightsRepr", try_from = "LinearWeightsRepr")]
pub struct LinearWeights {
    pub kinds: Vec<FeatureKind>,
    /// `W_k`, each `n x p_k`.
    pub weights: Vec<DMatrix<f64>>,
    pub bias: DMatrix<f64>,
    pub lambda: f64,
}

#[derive(Serialize, Deserialize)]
struct LinearWeightsRepr {
    kinds: Vec<FeatureKind>,
    weights: Vec<TaggedMatrix>,
    bias: TaggedMatrix,
    lambda: f64,
}

impl From<LinearWeights> for LinearWeightsRepr {
    fn from(w: LinearWeights) -> Self {
        Self {
            kinds: w.kinds,
            weights: w.weights.iter().map(TaggedMatrix::from).collect(),
            bias: TaggedMatrix::from(&w.bias),
            lambda: w.lambda,
        }
    }
}

impl TryFrom<LinearWeightsRepr> for LinearWeights {
    type Error = Error;

    fn try_from(r: LinearWeightsRepr) -> Result<Self> {
        if r.kinds.len() != r.weights.len() {
            return Err(Error::Schema("one weight matrix per feature kind expected".into()));
        }
        let weights = r.weights.into_iter().map(DMatrix::try_from).collect::<Result<Vec<_>>>()?;
        Ok(Self { kinds: r.kinds, weights, bias: DMatrix::try_from(r.bias)?, lambda: r.lambda })
    }
}

impl LinearWeights {
    pub fn n(&self) -> usize {
        self.bias.nrows()
    }

    fn pack(&self) -> DVector<f64> {
        let mut data = Vec::new();
        for w in &self.weights {
            data.extend_from_slice(w.as_slice());
        }
        data.extend_from_slice(self.bias.as_slice());
        DVector::from_vec(data)
    }

    fn unpack(&self, x: &DVector<f64>) -> Self {
        let mut off = 0;
        let mut take = |r: usize, c: usize| {
            let m = DMatrix::from_column_slice(r, c, &x.as_slice()[off..off + r * c]);
            off += r * c;
            m
        };
        let weights = self.weights.iter().map(|w| take(w.nrows(), w.ncols())).collect();
        let bias = take(self.bias.nrows(), self.bias.ncols());
        Self { kinds: self.kinds.clone(), weights, bias, lambda: self.lambda }
    }

    pub fn zeros(kinds: &[FeatureKind], n: usize, dims: &[usize], lambda: f64) -> Self {
        Self {
            kinds: kinds.to_vec(),
            weights: dims.iter().map(|&p| DMatrix::zeros(n, p)).collect(),
            bias: DMatrix::zeros(n, n),
            lambda,
        }
    }

    /// `sum_k X_k W_k^T + B` before projection.
    pub fn raw_prediction(&self, features: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        if features.len() != self.weights.len() {
            return Err(Error::DimensionMismatch { expected: self.weights.len(), found: features.len() });
        }
        let n = self.n();
        let mut p = self.bias.clone();
        for (x, w) in features.iter().zip(&self.weights) {
            if x.nrows() != n {
                return Err(Error::DimensionMismatch { expected: n, found: x.nrows() });
            }
            if x.ncols() != w.ncols() {
                return Err(Error::DimensionMismatch { expected: w.ncols(), found: x.ncols() });
            }
            p += x * w.transpose();
        }
        Ok(p)
    }

    pub fn predict_features(&self, features: &[DMatrix<f64>]) -> Result<InfluenceMatrix> {
        Ok(project_rows(&self.raw_prediction(features)?))
    }
}

/// Euclidean projection of each row onto the simplex.
pub fn project_rows(raw: &DMatrix<f64>) -> InfluenceMatrix {
    let n = raw.nrows();
    let mut out = DMatrix::zeros(n, raw.ncols());
    for i in 0..n {
        let row: Vec<f64> = raw.row(i).iter().copied().collect();
        for (j, v) in project_to_simplex(&row).into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    InfluenceMatrix::from_trusted(out)
}

pub fn predict_linear(weights: &LinearWeights, bundle: &FeatureBundle) -> Result<InfluenceMatrix> {
    weights.predict_features(&bundle.features(&weights.kinds)?)
}

/// Extracts `kinds` from each bundle.
pub fn linear_samples(
    dataset: &[(FeatureBundle, InfluenceMatrix)],
    kinds: &[FeatureKind],
) -> Result<Vec<LinearSample>> {
    dataset.iter().map(|(b, m)| Ok(LinearSample { features: b.features(kinds)?, target: m.clone() })).collect()
}

pub fn fit_linear(
    dataset: &[(FeatureBundle, InfluenceMatrix)],
    kinds: &[FeatureKind],
    lambda: f64,
    config: &SolverConfig,
) -> Result<(LinearWeights, FitReport)> {
    let samples = linear_samples(dataset, kinds)?;
    fit_linear_samples(&samples, kinds, lambda, config, None)
}

fn check_samples(samples: &[LinearSample], kinds: &[FeatureKind]) -> Result<(usize, Vec<usize>)> {
    let first = samples.first().ok_or_else(|| Error::InvalidArgument("empty dataset".into()))?;
    let n = first.target.n();
    if first.features.len() != kinds.len() {
        return Err(Error::DimensionMismatch { expected: kinds.len(), found: first.features.len() });
    }
    let dims: Vec<usize> = first.features.iter().map(|x| x.ncols()).collect();
    for s in samples {
        if s.target.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: s.target.n() });
        }
        if s.features.len() != dims.len() {
            return Err(Error::DimensionMismatch { expected: dims.len(), found: s.features.len() });
        }
        for (x, &p) in s.features.iter().zip(&dims) {
            if x.nrows() != n || x.ncols() != p {
                return Err(Error::DimensionMismatch { expected: n * p, found: x.nrows() * x.ncols() });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput("features"));
            }
        }
    }
    Ok((n, dims))
}

/// Squared error plus `rho` times the constraint penalty, and its gradient.
fn smooth_objective(
    template: &LinearWeights,
    samples: &[LinearSample],
    rho: f64,
    mode: ConstraintMode,
    x: &DVector<f64>,
) -> (f64, DVector<f64>) {
    let w = template.unpack(x);
    let n = w.n();
    let s_count = samples.len() as f64;
    let preds: Vec<DMatrix<f64>> =
        samples.iter().map(|s| w.raw_prediction(&s.features).expect("checked dims")).collect();

    let mut value = 0.0;
    // d value / d P_s for each sample
    let mut dp: Vec<DMatrix<f64>> = Vec::with_capacity(samples.len());
    for (s, p) in samples.iter().zip(&preds) {
        let r = p - s.target.as_matrix();
        value += r.norm_squared();
        dp.push(2.0 * r);
    }
    let penalty_grad = |p: &DMatrix<f64>| -> (f64, DMatrix<f64>) {
        let hinge = p.map(|v| v.min(0.0));
        let dev: Vec<f64> = (0..n).map(|i| p.row(i).sum() - 1.0).collect();
        let val = hinge.norm_squared() + dev.iter().map(|d| d * d).sum::<f64>();
        let grad = DMatrix::from_fn(n, n, |i, j| 2.0 * (hinge[(i, j)] + dev[i]));
        (val, grad)
    };
    match mode {
        ConstraintMode::PerSample => {
            for (g, p) in dp.iter_mut().zip(&preds) {
                let (v, pg) = penalty_grad(p);
                value += rho * v;
                *g += rho * pg;
            }
        }
        ConstraintMode::Aggregate => {
            let mean = preds.iter().fold(DMatrix::zeros(n, n), |a, p| a + p) / s_count;
            let (v, pg) = penalty_grad(&mean);
            value += rho * v;
            let share = pg * (rho / s_count);
            for g in dp.iter_mut() {
                *g += &share;
            }
        }
    }

    let mut grad = LinearWeights::zeros(&w.kinds, n, &w.weights.iter().map(|m| m.ncols()).collect::<Vec<_>>(), 0.0);
    for (s, g) in samples.iter().zip(&dp) {
        for (gw, x) in grad.weights.iter_mut().zip(&s.features) {
            *gw += g.transpose() * x;
        }
        grad.bias += g;
    }
    (value, grad.pack())
}

fn max_violation(w: &LinearWeights, samples: &[LinearSample], mode: ConstraintMode) -> f64 {
    let viol = |p: &DMatrix<f64>| {
        let neg = p.iter().fold(0.0f64, |a, &v| a.max(-v));
        let rows = (0..p.nrows()).fold(0.0f64, |a, i| a.max((p.row(i).sum() - 1.0).abs()));
        neg.max(rows)
    };
    let preds = samples.iter().map(|s| w.raw_prediction(&s.features).expect("checked dims"));
    match mode {
        ConstraintMode::PerSample => preds.fold(0.0, |a, p| a.max(viol(&p))),
        ConstraintMode::Aggregate => {
            let n = w.n();
            let mean = preds.fold(DMatrix::zeros(n, n), |a, p| a + p) / samples.len() as f64;
            viol(&mean)
        }
    }
}

/// Fits from explicit samples, optionally warm-started.
pub fn fit_linear_samples(
    samples: &[LinearSample],
    kinds: &[FeatureKind],
    lambda: f64,
    config: &SolverConfig,
    init: Option<&LinearWeights>,
) -> Result<(LinearWeights, FitReport)> {
    config.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {lambda}")));
    }
    let (n, dims) = check_samples(samples, kinds)?;
    let template = LinearWeights::zeros(kinds, n, &dims, lambda);
    let mut x = match init {
        Some(w) => {
            let same_shape = w.n() == n
                && w.weights.len() == dims.len()
                && w.weights.iter().zip(&dims).all(|(m, &p)| m.shape() == (n, p));
            if !same_shape {
                return Err(Error::DimensionMismatch { expected: template.pack().len(), found: w.pack().len() });
            }
            w.pack()
        }
        None => template.pack(),
    };

    // one tolerance reference for every stage; warm starts have tiny gradients
    let rho0 = config.penalty_schedule[0];
    let scale = smooth_objective(&template, samples, rho0, config.constraint_mode, &template.pack()).1.amax();
    let mut stages = Vec::with_capacity(config.penalty_schedule.len());
    let mut lip = 1.0;
    let mut total = 0;
    let mut objective = f64::NAN;
    let mut converged = true;
    for &rho in &config.penalty_schedule {
        let out = mfista(
            x,
            |v| smooth_objective(&template, samples, rho, config.constraint_mode, v),
            lambda,
            config.max_iter,
            config.tol,
            lip,
            Some(scale),
        );
        x = out.x;
        lip = out.lipschitz;
        total += out.iterations;
        objective = *out.trace.last().expect("trace starts with the initial value");
        converged = out.converged;
        stages.push(StageTrace { rho, iterations: out.iterations, converged: out.converged, objective: out.trace });
    }
    if !converged {
        return Err(Error::SolverNoConvergence(total));
    }
    let weights = template.unpack(&x);
    let feature_l1 = feature_importance(&weights);
    let report = FitReport {
        final_objective: objective,
        iterations: total,
        max_constraint_violation: max_violation(&weights, samples, config.constraint_mode),
        feature_l1,
        converged,
        stages,
    };
    Ok((weights, report))
}

pub(crate) fn l1_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

/// l1 norm of each `W_k`, then of `B` under the key `bias`.
pub fn feature_importance(weights: &LinearWeights) -> Vec<FeatureNorm> {
    let mut out: Vec<FeatureNorm> = weights
        .kinds
        .iter()
        .zip(&weights.weights)
        .map(|(k, w)| FeatureNorm { feature: k.name().to_string(), l1: l1_norm(w) })
        .collect();
    out.push(FeatureNorm { feature: "bias".into(), l1: l1_norm(&weights.bias) });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stochastic(rng: &mut ChaCha8Rng, n: usize) -> InfluenceMatrix {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random::<f64>() + 0.05).collect()).collect();
        InfluenceMatrix::from_allocations(&rows).unwrap()
    }

    #[test]
    fn uniform_targets_give_uniform_bias() {
        let samples: Vec<LinearSample> =
            (0..5).map(|_| LinearSample { features: vec![], target: InfluenceMatrix::uniform(4) }).collect();
        let (w, report) = fit_linear_samples(&samples, &[], 0.0, &SolverConfig::default(), None).unwrap();
        assert!((&w.bias - DMatrix::from_element(4, 4, 0.25)).amax() < 1e-6);
        let pred = w.predict_features(&[]).unwrap();
        assert!((pred.as_matrix() - InfluenceMatrix::uniform(4).as_matrix()).amax() < 1e-12);
        assert!(report.converged);
    }

    #[test]
    fn identity_map_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<LinearSample> = (0..40)
            .map(|_| {
                let m = random_stochastic(&mut rng, 4);
                LinearSample { features: vec![m.as_matrix().clone()], target: m }
            })
            .collect();
        let (w, report) =
            fit_linear_samples(&samples, &[FeatureKind::Previous], 1e-6, &SolverConfig::default(), None).unwrap();
        let mse: f64 = samples
            .iter()
            .map(|s| crate::metrics::mse(&s.target, &w.predict_features(&s.features).unwrap()).unwrap())
            .sum::<f64>()
            / samples.len() as f64;
        assert!(mse <= 1e-4, "mse {mse}");
        for stage in &report.stages {
            assert!(stage.objective.windows(2).all(|p| p[1] <= p[0]));
        }
    }

    #[test]
    fn projection_cases() {
        let raw = DMatrix::from_row_slice(1, 4, &[0.5, 0.5, 0.5, -0.5]);
        let p = project_rows(&raw);
        for j in 0..3 {
            assert_abs_diff_eq!(p.get(0, j), 1.0 / 3.0, epsilon = 1e-15);
        }
        assert_eq!(p.get(0, 3), 0.0);
        let m = InfluenceMatrix::from_rows(&[vec![0.2, 0.8], vec![0.5, 0.5]]).unwrap();
        assert_eq!(&project_rows(m.as_matrix()), &m);
    }

    #[test]
    fn importance_is_l1() {
        let w = LinearWeights {
            kinds: vec![FeatureKind::Previous],
            weights: vec![DMatrix::from_row_slice(2, 2, &[0.1, -0.2, 0.3, 0.0])],
            bias: DMatrix::zeros(2, 2),
            lambda: 0.0,
        };
        let imp = feature_importance(&w);
        assert_abs_diff_eq!(imp[0].l1, 0.6, epsilon = 1e-15);
        assert_eq!(imp[1].l1, 0.0);
        let zero_bias = w.bias.clone();
        assert_eq!(l1_norm(&zero_bias), 0.0);
    }

    #[test]
    fn weights_round_trip_json() {
        let w = LinearWeights {
            kinds: vec![FeatureKind::Embedding],
            weights: vec![DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])],
            bias: DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.0, 1.0]),
            lambda: 0.01,
        };
        let s = serde_json::to_string(&w).unwrap();
        assert!(s.contains("\"rows\":2"));
        let back: LinearWeights = serde_json::from_str(&s).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn dimension_mismatch_detected() {
        let w = LinearWeights {
            kinds: vec![FeatureKind::Previous],
            weights: vec![DMatrix::zeros(2, 2)],
            bias: DMatrix::zeros(2, 2),
            lambda: 0.0,
        };
        assert!(matches!(w.predict_features(&[]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(w.predict_features(&[DMatrix::zeros(2, 3)]), Err(Error::DimensionMismatch { .. })));
    }
}
