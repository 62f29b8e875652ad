#![allow(dead_code)]

use influence_core::InfluenceMatrix;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Row-stochastic `n x n` matrices; `floor` bounds raw weights from below
/// so `floor > 0` gives strictly positive matrices.
pub fn stochastic(n: usize, floor: f64) -> impl Strategy<Value = InfluenceMatrix> {
    prop::collection::vec(floor..1.0f64, n * n).prop_map(move |w| {
        let mut m = DMatrix::from_row_slice(n, n, &w);
        for i in 0..n {
            let s = m.row(i).sum();
            if s > 0.0 {
                m.row_mut(i).unscale_mut(s);
            } else {
                m.row_mut(i).fill(1.0 / n as f64);
            }
        }
        InfluenceMatrix::new(m).unwrap()
    })
}

/// Expertise in `[0, 1]^n` with at least one entry bounded away from 0.
pub fn expertise(n: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(0.0..=1.0f64, n), 0..n).prop_map(|(mut y, k)| {
        y[k] = y[k].max(0.05);
        y
    })
}

pub fn max_abs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Stationary distribution from the dense system `(P^T - I) pi = 0` with
/// one equation replaced by `1^T pi = 1`, solved by LU.
pub fn stationary_oracle(p: &DMatrix<f64>) -> Vec<f64> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    let mut b = nalgebra::DVector::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    b[n - 1] = 1.0;
    a.lu().solve(&b).expect("primitive chain has a unique stationary vector").iter().copied().collect()
}
