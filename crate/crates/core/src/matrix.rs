//! Domain types for influence matrices and the vectors that live next to them.
//!
//! All types are immutable once constructed. Constructors validate their
//! invariants, so any value of these types can be passed around without
//! re-checking.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum tolerance used throughout the crate.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Power-iteration defaults for stationary vectors.
pub const STATIONARY_TOL: f64 = 1e-10;
pub const STATIONARY_MAX_ITER: usize = 10_000;

/// A nonnegative row-stochastic n x n matrix. Entry (i, j) is the influence
/// rater i accords to member j.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix(DMatrix<f64>);

impl InfluenceMatrix {
    /// Validates and wraps `matrix`, see [`validate_row_stochastic`].
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        validate_row_stochastic(matrix, ROW_SUM_TOL)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_matrix(rows)?)
    }

    /// Normalizes raw allocations (e.g. 100 chips per rater) by their row sums.
    pub fn from_allocations(rows: &[Vec<f64>]) -> Result<Self> {
        let mut m = rows_to_matrix(rows)?;
        check_square_finite(&m)?;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] < 0.0 {
                    return Err(Error::NegativeEntry { row: i, col: j, value: m[(i, j)] });
                }
            }
            let sum: f64 = m.row(i).sum();
            if sum <= 0.0 {
                return Err(Error::RowSumViolation { row: i, sum, tol: ROW_SUM_TOL });
            }
            m.row_mut(i).unscale_mut(sum);
        }
        Self::new(m)
    }

    pub fn uniform(n: usize) -> Self {
        Self(DMatrix::from_element(n, n, 1.0 / n as f64))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Every row equal to `row`.
    pub fn rank_one(row: &SimplexVector) -> Self {
        let n = row.len();
        Self(DMatrix::from_fn(n, n, |_, j| row[j]))
    }

    /// Wraps a matrix the caller has already shown to be row-stochastic.
    /// Rows are renormalized only if their sums drifted by more than 1e-12.
    pub(crate) fn from_trusted(mut m: DMatrix<f64>) -> Self {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] < 0.0 {
                    m[(i, j)] = 0.0;
                }
            }
            let sum: f64 = m.row(i).sum();
            if (sum - 1.0).abs() > 1e-12 && sum > 0.0 {
                m.row_mut(i).unscale_mut(sum);
            }
        }
        Self(m)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.row(i)).collect()
    }

    /// Self-weights M_ii.
    pub fn diagonal(&self) -> SelfWeightVector {
        SelfWeightVector(self.0.diagonal().iter().copied().collect())
    }

    pub fn max_row_sum_deviation(&self) -> f64 {
        (0..self.n()).map(|i| (self.0.row(i).sum() - 1.0).abs()).fold(0.0, f64::max)
    }
}

impl Serialize for InfluenceMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for InfluenceMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        InfluenceMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch { expected: ncols, found: bad.len() });
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn check_square_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Accepts `matrix` as an [`InfluenceMatrix`] when every entry is
/// nonnegative and every row sums to 1 within `tol`. Accepted rows are
/// renormalized to sum 1 up to rounding; entries in `[-tol, 0)` are clamped
/// to 0.
pub fn validate_row_stochastic(mut matrix: DMatrix<f64>, tol: f64) -> Result<InfluenceMatrix> {
    check_square_finite(&matrix)?;
    let n = matrix.nrows();
    for i in 0..n {
        for j in 0..n {
            let v = matrix[(i, j)];
            if v < -tol {
                return Err(Error::NegativeEntry { row: i, col: j, value: v });
            }
            if v < 0.0 {
                matrix[(i, j)] = 0.0;
            }
        }
        let sum: f64 = matrix.row(i).sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::RowSumViolation { row: i, sum, tol });
        }
        // rows already exact up to rounding are left alone so the map is idempotent
        if (sum - 1.0).abs() > 4.0 * n as f64 * f64::EPSILON {
            matrix.row_mut(i).unscale_mut(sum);
        }
    }
    Ok(InfluenceMatrix(matrix))
}

macro_rules! vector_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl $name {
            pub fn to_vec(&self) -> Vec<f64> {
                self.0.clone()
            }

            pub fn to_dvector(&self) -> DVector<f64> {
                DVector::from_column_slice(&self.0)
            }
        }
    };
}

vector_newtype!(
    /// Nonnegative n-vector summing to 1.
    SimplexVector
);
vector_newtype!(
    /// Per-member cumulative correct-answer rates, each in [0, 1].
    ExpertiseVector
);
vector_newtype!(
    /// Diagonal of an influence matrix, each in [0, 1].
    SelfWeightVector
);

impl SimplexVector {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() || v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::NotOnSimplex(format!("{v:?}")));
        }
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::NotOnSimplex(format!("sum {sum}")));
        }
        Ok(Self(v.into_iter().map(|x| x / sum).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub(crate) fn from_trusted(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl ExpertiseVector {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::OutOfRange(format!("expertise {x} not in [0, 1]")));
        }
        Ok(Self(v))
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }
}

impl SelfWeightVector {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::OutOfRange(format!("self-weight {x} not in [0, 1]")));
        }
        Ok(Self(v))
    }

    pub(crate) fn from_trusted(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Weighted directed interaction network with an exactly zero diagonal.
/// Response networks are nonnegative; sentiment and emotion networks may
/// carry signed weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityNetwork(DMatrix<f64>);

impl ConnectivityNetwork {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&matrix)?;
        if let Some(i) = (0..matrix.nrows()).find(|&i| matrix[(i, i)] != 0.0) {
            return Err(Error::Validation(format!("self-loop at {i}")));
        }
        Ok(Self(matrix))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub(crate) fn from_trusted(matrix: DMatrix<f64>) -> Self {
        Self(matrix)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Row sums (total outgoing weight per sender).
    pub fn out_degree(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.0.row(i).sum()).collect()
    }
}

/// Outcome of a stationary-vector computation, kept even when it failed to
/// converge so callers can inspect the last iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryResult {
    pub distribution: SimplexVector,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration for the left stationary vector of `p`, started from the
/// uniform distribution. Iterates the lazy chain (P + I) / 2, which has the
/// same stationary vectors as P but no periodicity. The residual is always
/// measured on P: `||pi P - pi||_1`.
pub fn left_stationary_report(p: &InfluenceMatrix, tol: f64, max_iter: usize) -> StationaryResult {
    let n = p.n();
    let m = p.as_matrix();
    let mut pi = DVector::from_element(n, 1.0 / n as f64);
    let residual_of = |pi: &DVector<f64>| -> (DVector<f64>, f64) {
        let next = m.tr_mul(pi);
        let r = (&next - pi).abs().sum();
        (next, r)
    };
    let (mut next, mut residual) = residual_of(&pi);
    let mut iterations = 0;
    while residual >= tol && iterations < max_iter {
        pi = (&pi + &next) * 0.5;
        let s = pi.sum();
        pi.unscale_mut(s);
        (next, residual) = residual_of(&pi);
        iterations += 1;
    }
    StationaryResult {
        distribution: SimplexVector::from_trusted(pi.iter().map(|x| x.max(0.0)).collect()),
        residual,
        iterations,
        converged: residual < tol,
    }
}

/// Left stationary distribution of `p`, or [`Error::NoConvergence`].
pub fn left_stationary(p: &InfluenceMatrix, tol: f64, max_iter: usize) -> Result<SimplexVector> {
    let r = left_stationary_report(p, tol, max_iter);
    if r.converged {
        Ok(r.distribution)
    } else {
        Err(Error::NoConvergence { iterations: r.iterations, residual: r.residual })
    }
}

/// Euclidean projection of `v` onto the probability simplex (sort-based).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}
