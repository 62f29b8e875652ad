mod common;

use common::{expertise, max_abs, stochastic};
use influence_core::dynamics::{
    normalize_expertise, self_weight_trajectory, step_d, step_drp, DynamicsConfig, ModelKind,
};
use influence_core::{InfluenceMatrix, SelfWeightVector};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn check_stochastic(m: &InfluenceMatrix) -> Result<(), TestCaseError> {
    let raw = m.as_matrix();
    prop_assert!(raw.iter().all(|x| *x >= -1e-15));
    for i in 0..raw.nrows() {
        prop_assert!((raw.row(i).sum() - 1.0).abs() <= 1e-12);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn models_preserve_row_stochasticity(
        m in stochastic(4, 0.0),
        y in expertise(4),
        tau in 0.01..0.99f64,
        model in prop::sample::select(ModelKind::ALL.to_vec()),
    ) {
        let cfg = DynamicsConfig::new(tau, model).unwrap();
        let mut cur = m;
        for _ in 0..50 {
            cur = influence_core::dynamics::step(&cfg, &cur, &y).unwrap();
            check_stochastic(&cur)?;
        }
    }

    #[test]
    fn drp_diagonal_follows_self_weight_recursion(m in stochastic(4, 0.0), y in expertise(4), tau in 0.05..0.95f64) {
        let traj = self_weight_trajectory(&m.diagonal(), &y, tau, 30).unwrap();
        let mut cur = m;
        for expected in &traj[1..] {
            cur = step_drp(&cur, &y, tau).unwrap();
            for (a, b) in cur.diagonal().iter().zip(expected.iter()) {
                prop_assert!((a - b).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn d_model_closed_form(m in stochastic(4, 0.0), y in expertise(4), tau in 0.05..0.95f64) {
        let y_bar = normalize_expertise(&y).unwrap();
        let target = DMatrix::from_fn(4, 4, |_, j| y_bar[j]);
        let mut cur = m.clone();
        for t in 2..=30 {
            cur = step_d(&cur, &y_bar, tau).unwrap();
            let decay = (1.0 - tau).powi(t - 1);
            let closed = m.as_matrix() * decay + &target * (1.0 - decay);
            prop_assert!(max_abs(cur.as_matrix(), &closed) <= 1e-12);
        }
    }

    #[test]
    fn lyapunov_decreases_under_uniform_expertise(m in stochastic(4, 0.0), c in 0.1..2.0f64) {
        let y = vec![c; 4];
        let lyap = |m: &InfluenceMatrix| m.diagonal().iter().map(|d| d - 0.25).fold(f64::NEG_INFINITY, f64::max);
        let mut cur = m;
        // the decrease is guaranteed once the self-weights sum to at least 1
        let mut warmup = 0;
        while cur.diagonal().iter().sum::<f64>() < 1.0 && warmup < 5000 {
            cur = step_drp(&cur, &y, 0.4).unwrap();
            warmup += 1;
        }
        prop_assume!(cur.diagonal().iter().sum::<f64>() >= 1.0);
        for _ in 0..500 {
            let before = lyap(&cur);
            if before.abs() <= 1e-12 {
                break;
            }
            cur = step_drp(&cur, &y, 0.4).unwrap();
            prop_assert!(lyap(&cur) < before, "{} -> {}", before, lyap(&cur));
        }
    }
}

#[test]
fn self_weight_recursion_rejects_bad_tau() {
    let md = SelfWeightVector::new(vec![0.5, 0.5]).unwrap();
    assert!(self_weight_trajectory(&md, &[1.0, 1.0], 1.0, 3).is_err());
}
