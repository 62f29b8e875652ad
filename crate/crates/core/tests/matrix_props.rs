mod common;

use common::{stationary_oracle, stochastic};
use influence_core::matrix::{left_stationary, left_stationary_report, validate_row_stochastic, ROW_SUM_TOL};
use influence_core::InfluenceMatrix;
use nalgebra::DMatrix;
use proptest::prelude::*;

proptest! {
    #[test]
    fn validation_is_idempotent(m in stochastic(4, 0.0), noise in prop::collection::vec(-1e-10..1e-10f64, 16)) {
        let perturbed = m.as_matrix() + DMatrix::from_row_slice(4, 4, &noise);
        if let Ok(once) = validate_row_stochastic(perturbed, ROW_SUM_TOL) {
            let twice = validate_row_stochastic(once.as_matrix().clone(), ROW_SUM_TOL).unwrap();
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn stationary_output_on_simplex(m in stochastic(5, 0.0), cap in 0usize..50) {
        let r = left_stationary_report(&m, 1e-14, cap);
        prop_assert!(r.distribution.iter().all(|x| *x >= 0.0));
        prop_assert!((r.distribution.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stationary_matches_dense_solve(m in stochastic(4, 0.01)) {
        let pi = left_stationary(&m, 1e-12, 100_000).unwrap();
        let oracle = stationary_oracle(m.as_matrix());
        for (a, b) in pi.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-6, "{:?} vs {:?}", pi, oracle);
        }
    }
}

#[test]
fn rejects_outside_tolerance() {
    let m = DMatrix::from_row_slice(2, 2, &[0.5, 0.5 + 1e-6, 0.5, 0.5]);
    assert!(validate_row_stochastic(m, ROW_SUM_TOL).is_err());
    assert!(InfluenceMatrix::from_rows(&[vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
}
