//! Row-wise softmax model `q = softmax(W^T x + b)` trained on cross-entropy.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linear::l1_norm;
use super::solver::mfista;
use super::{FeatureNorm, FitReport, SolverConfig, StageTrace, TaggedMatrix};
use crate::error::{Error, Result};
use crate::ingest::{FeatureBundle, FeatureKind};
use crate::matrix::{InfluenceMatrix, SimplexVector};

/// One appraisal row and its feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxSample {
    pub x: DVector<f64>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SoftmaxRepr", try_from = "SoftmaxRepr")]
pub struct SoftmaxWeights {
    pub kinds: Vec<FeatureKind>,
    /// `p x n`.
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lambda: f64,
}

#[derive(Serialize, Deserialize)]
struct SoftmaxRepr {
    kinds: Vec<FeatureKind>,
    w: TaggedMatrix,
    b: Vec<f64>,
    lambda: f64,
}

impl From<SoftmaxWeights> for SoftmaxRepr {
    fn from(s: SoftmaxWeights) -> Self {
        Self { kinds: s.kinds, w: TaggedMatrix::from(&s.w), b: s.b.iter().copied().collect(), lambda: s.lambda }
    }
}

impl TryFrom<SoftmaxRepr> for SoftmaxWeights {
    type Error = Error;

    fn try_from(r: SoftmaxRepr) -> Result<Self> {
        let w = DMatrix::try_from(r.w)?;
        if w.ncols() != r.b.len() {
            return Err(Error::DimensionMismatch { expected: w.ncols(), found: r.b.len() });
        }
        Ok(Self { kinds: r.kinds, w, b: DVector::from_vec(r.b), lambda: r.lambda })
    }
}

fn softmax(o: &DVector<f64>) -> DVector<f64> {
    let m = o.max();
    let e = o.map(|v| (v - m).exp());
    let s = e.sum();
    e / s
}

impl SoftmaxWeights {
    pub fn zeros(kinds: &[FeatureKind], p: usize, n: usize, lambda: f64) -> Self {
        Self { kinds: kinds.to_vec(), w: DMatrix::zeros(p, n), b: DVector::zeros(n), lambda }
    }

    pub fn logits(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.w.nrows() {
            return Err(Error::DimensionMismatch { expected: self.w.nrows(), found: x.len() });
        }
        Ok(self.w.tr_mul(x) + &self.b)
    }

    fn pack(&self) -> DVector<f64> {
        let mut v = self.w.as_slice().to_vec();
        v.extend(self.b.iter());
        DVector::from_vec(v)
    }

    fn unpack(&self, v: &DVector<f64>) -> Self {
        let (p, n) = self.w.shape();
        Self {
            kinds: self.kinds.clone(),
            w: DMatrix::from_column_slice(p, n, &v.as_slice()[..p * n]),
            b: DVector::from_column_slice(&v.as_slice()[p * n..]),
            lambda: self.lambda,
        }
    }
}

pub fn predict_softmax(weights: &SoftmaxWeights, rows: &[DVector<f64>]) -> Result<Vec<SimplexVector>> {
    rows.iter()
        .map(|x| Ok(SimplexVector::from_trusted(softmax(&weights.logits(x)?).iter().copied().collect())))
        .collect()
}

/// Stacks the per-row predictions for one bundle.
pub fn predict_softmax_matrix(weights: &SoftmaxWeights, bundle: &FeatureBundle) -> Result<InfluenceMatrix> {
    let rows = predict_softmax(weights, &bundle.row_features(&weights.kinds)?)?;
    let n = bundle.n;
    if rows.first().map(|r| r.len()) != Some(n) {
        return Err(Error::DimensionMismatch { expected: n, found: weights.b.len() });
    }
    Ok(InfluenceMatrix::from_trusted(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
}

/// One sample per appraisal row of every target.
pub fn softmax_samples(
    dataset: &[(FeatureBundle, InfluenceMatrix)],
    kinds: &[FeatureKind],
) -> Result<Vec<SoftmaxSample>> {
    let mut out = Vec::new();
    for (bundle, m) in dataset {
        for (i, x) in bundle.row_features(kinds)?.into_iter().enumerate() {
            out.push(SoftmaxSample { x, target: m.row(i) });
        }
    }
    Ok(out)
}

/// Cross-entropy summed over samples, with gradients `(dW, db)`.
pub fn softmax_loss_and_grad(
    weights: &SoftmaxWeights,
    samples: &[SoftmaxSample],
) -> Result<(f64, DMatrix<f64>, DVector<f64>)> {
    let (p, n) = weights.w.shape();
    let mut loss = 0.0;
    let mut gw = DMatrix::zeros(p, n);
    let mut gb = DVector::zeros(n);
    for s in samples {
        if s.target.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: s.target.len() });
        }
        let o = weights.logits(&s.x)?;
        let m = o.max();
        let lse = m + o.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        let sigma = o.map(|v| (v - lse).exp());
        let mut diff = sigma;
        let mut mass = 0.0;
        for (j, &t) in s.target.iter().enumerate() {
            loss -= t * (o[j] - lse);
            mass += t;
        }
        // gradient of -sum_j t_j log softmax_j is mass * sigma - t
        diff *= mass;
        for (j, &t) in s.target.iter().enumerate() {
            diff[j] -= t;
        }
        gw.ger(1.0, &s.x, &diff, 1.0);
        gb += &diff;
    }
    Ok((loss, gw, gb))
}

pub fn fit_softmax(
    dataset: &[(FeatureBundle, InfluenceMatrix)],
    kinds: &[FeatureKind],
    lambda: f64,
    config: &SolverConfig,
) -> Result<(SoftmaxWeights, FitReport)> {
    let samples = softmax_samples(dataset, kinds)?;
    fit_softmax_samples(&samples, kinds, lambda, config)
}

pub fn fit_softmax_samples(
    samples: &[SoftmaxSample],
    kinds: &[FeatureKind],
    lambda: f64,
    config: &SolverConfig,
) -> Result<(SoftmaxWeights, FitReport)> {
    config.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {lambda}")));
    }
    let first = samples.first().ok_or_else(|| Error::InvalidArgument("empty dataset".into()))?;
    let (p, n) = (first.x.len(), first.target.len());
    for s in samples {
        if s.x.len() != p {
            return Err(Error::DimensionMismatch { expected: p, found: s.x.len() });
        }
        if s.target.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: s.target.len() });
        }
        if s.x.iter().chain(&s.target).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("samples"));
        }
    }
    let template = SoftmaxWeights::zeros(kinds, p, n, lambda);
    let out = mfista(
        template.pack(),
        |v| {
            let (loss, gw, gb) = softmax_loss_and_grad(&template.unpack(v), samples).expect("checked dims");
            (loss, pack_grad(&gw, &gb))
        },
        lambda,
        config.max_iter,
        config.tol,
        1.0,
        None,
    );
    if !out.converged {
        return Err(Error::SolverNoConvergence(out.iterations));
    }
    let weights = template.unpack(&out.x);
    let objective = *out.trace.last().expect("nonempty trace");
    let report = FitReport {
        final_objective: objective,
        iterations: out.iterations,
        max_constraint_violation: 0.0,
        feature_l1: vec![
            FeatureNorm { feature: "weights".into(), l1: l1_norm(&weights.w) },
            FeatureNorm { feature: "bias".into(), l1: weights.b.iter().map(|v| v.abs()).sum() },
        ],
        converged: true,
        stages: vec![StageTrace { rho: 0.0, iterations: out.iterations, converged: true, objective: out.trace }],
    };
    Ok((weights, report))
}

fn pack_grad(gw: &DMatrix<f64>, gb: &DVector<f64>) -> DVector<f64> {
    let mut v = gw.as_slice().to_vec();
    v.extend(gb.iter());
    DVector::from_vec(v)
}
