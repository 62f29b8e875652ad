//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any
//! failure. Runs single-threaded.
//!
//! Set `INFLUENCE_DATASET` to a directory of session documents to run the
//! dataset replay; it is skipped otherwise.

use std::time::{Duration, Instant};

use influence_cli::commands::fit;
use influence_cli::config::RunConfig;
use influence_core::analytics::{bh_correct, granger, vif};
use influence_core::dynamics::{step, DynamicsConfig, ModelKind};
use influence_core::estimate::{
    fit_linear_samples, fit_softmax_samples, softmax_loss_and_grad, LinearSample, SoftmaxSample, SoftmaxWeights,
    SolverConfig,
};
use influence_core::evaluation::{
    collect_examples, forecast_errors, holdout_evaluation, summarize_errors, ForecastMode, ForecastOptions,
    HoldoutConfig, TeamSeries,
};
use influence_core::ingest::{FeatureKind, Lexicons, NetworkSettings};
use influence_core::metrics::{global_persuasiveness, kl, mean_reversion, mse, KL_EPS};
use influence_core::synthetic::{
    constant_session, dynamics_session, identity_map_session, lagged_pair, random_positive_stochastic,
    random_stochastic, white_noise, SessionShape,
};
use influence_core::{InfluenceMatrix, TeamSession};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> (Verdict, Duration) {
    let start = Instant::now();
    let v = f();
    let took = start.elapsed();
    let v = match (v, limit) {
        (Verdict::Pass(d), Some(l)) if took >= l => Verdict::Fail(format!("{d}; runtime {took:.2?} over {l:?}")),
        (v, _) => v,
    };
    (v, took)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn positive_expertise(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| 0.05 + 0.95 * r.random::<f64>()).collect()
}

const MODELS: [ModelKind; 3] = [ModelKind::D, ModelKind::DR, ModelKind::DRP];

fn stochasticity() -> Verdict {
    let mut r = rng(1);
    let (mut min_entry, mut max_dev) = (f64::INFINITY, 0.0f64);
    for _ in 0..1000 {
        let start = random_stochastic(&mut r, 4);
        let y = positive_expertise(&mut r, 4);
        for tau in [0.1, 0.4, 0.9] {
            for model in MODELS {
                let cfg = DynamicsConfig::new(tau, model).unwrap();
                let mut m = start.clone();
                for _ in 0..50 {
                    m = match step(&cfg, &m, &y) {
                        Ok(next) => next,
                        Err(e) => return Verdict::Fail(format!("{} tau {tau}: {e}", model.name())),
                    };
                    let a = m.as_matrix();
                    min_entry = min_entry.min(a.min());
                    for i in 0..4 {
                        max_dev = max_dev.max((a.row(i).sum() - 1.0).abs());
                    }
                }
            }
        }
    }
    verdict(
        min_entry >= -1e-15 && max_dev <= 1e-12,
        format!("min entry {min_entry:e}, max row-sum deviation {max_dev:e}"),
    )
}

fn uniform_equilibrium() -> Verdict {
    let mut r = rng(2);
    let target = DMatrix::from_element(4, 4, 0.25);
    let lyap = |m: &InfluenceMatrix| m.diagonal().iter().map(|d| d - 0.25).fold(f64::NEG_INFINITY, f64::max);
    let (mut worst_steps, mut lyap_checked, mut lyap_bad) = (0usize, 0usize, 0usize);
    for c in [0.3, 1.0, 2.0] {
        let y = vec![c; 4];
        let cfg = DynamicsConfig::new(0.4, ModelKind::DRP).unwrap();
        for _ in 0..200 {
            let mut m = random_stochastic(&mut r, 4);
            let mut steps = 0;
            let mut active = false;
            while (m.as_matrix() - &target).norm() >= 1e-6 {
                if steps == 5000 {
                    return Verdict::Fail(format!("c {c}: start not within 1e-6 of J/4 after 5000 steps"));
                }
                active |= m.diagonal().iter().sum::<f64>() >= 1.0;
                let before = lyap(&m);
                m = step(&cfg, &m, &y).unwrap();
                steps += 1;
                if active {
                    lyap_checked += 1;
                    lyap_bad += usize::from(lyap(&m) > before);
                }
            }
            worst_steps = worst_steps.max(steps);
        }
    }
    verdict(
        lyap_bad == 0,
        format!("all 600 starts within 1e-6 by step {worst_steps}; Lyapunov increases {lyap_bad} of {lyap_checked} checked steps"),
    )
}

fn d_closed_form() -> Verdict {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m0 = random_stochastic(&mut r, 4);
        let y = positive_expertise(&mut r, 4);
        let tau = 0.05 + 0.9 * r.random::<f64>();
        let total: f64 = y.iter().sum();
        let rank_one = DMatrix::from_fn(4, 4, |_, j| y[j] / total);
        let cfg = DynamicsConfig::new(tau, ModelKind::D).unwrap();
        let mut m = m0.clone();
        for t in 1..=60 {
            m = step(&cfg, &m, &y).unwrap();
            let decay = (1.0 - tau).powi(t);
            let closed = m0.as_matrix() * decay + &rank_one * (1.0 - decay);
            worst = worst.max((m.as_matrix() - closed).amax());
        }
    }
    verdict(worst <= 1e-12, format!("max deviation {worst:e} over 100 instances x 60 steps"))
}

fn metric_identities() -> Verdict {
    let u = InfluenceMatrix::uniform(4);
    let i = InfluenceMatrix::identity(4);
    let mse_ui = mse(&u, &i).unwrap();
    let kl_iu = kl(&i, &u, KL_EPS).unwrap();
    let mut r = rng(4);
    let mut worst_self = 0.0f64;
    for _ in 0..100 {
        let m = random_stochastic(&mut r, 4);
        worst_self = worst_self.max(kl(&m, &m, KL_EPS).unwrap().abs());
    }
    let rev = mean_reversion(&i);
    let ok =
        mse_ui == 0.75 && (kl_iu - 4f64.ln()).abs() <= 1e-12 && worst_self == 0.0 && rev.iter().all(|&v| v == 0.75);
    verdict(
        ok,
        format!("mse {mse_ui}, kl {kl_iu} (ln 4 = {}), max |kl(M,M)| {worst_self}, reversion {rev:?}", 4f64.ln()),
    )
}

/// Stationary vector of the off-diagonal-normalized chain by a dense solve.
fn stationary_by_solve(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let c = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { m[(i, j)] / (1.0 - m[(i, i)]) });
    let mut a = c.transpose() - DMatrix::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    a.lu().solve(&b).expect("irreducible chain")
}

fn stationary_oracle() -> Verdict {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let m = random_positive_stochastic(&mut r, 4, 0.1);
        let got = match global_persuasiveness(&m) {
            Ok(g) => g,
            Err(e) => return Verdict::Fail(e.to_string()),
        };
        let want = stationary_by_solve(m.as_matrix());
        for k in 0..4 {
            worst = worst.max((got[k] - want[k]).abs());
        }
    }
    verdict(worst <= 1e-6, format!("max deviation {worst:e} over 500 matrices"))
}

fn random_softmax_point(r: &mut ChaCha8Rng) -> (SoftmaxWeights, Vec<SoftmaxSample>) {
    let (p, n) = (6, 4);
    let mut w = SoftmaxWeights::zeros(&[], p, n, 0.0);
    w.w = DMatrix::from_vec(p, n, white_noise(r, p * n));
    w.b = DVector::from_vec(white_noise(r, n));
    let samples = (0..8)
        .map(|_| SoftmaxSample { x: DVector::from_vec(white_noise(r, p)), target: random_stochastic(r, n).row(0) })
        .collect();
    (w, samples)
}

fn estimators() -> Verdict {
    // finite-difference check of the softmax gradient
    let mut r = rng(6);
    let h = 1e-5;
    let mut worst_grad = 0.0f64;
    for _ in 0..20 {
        let (w, samples) = random_softmax_point(&mut r);
        let (_, gw, gb) = softmax_loss_and_grad(&w, &samples).unwrap();
        let loss = |w: &SoftmaxWeights| softmax_loss_and_grad(w, &samples).unwrap().0;
        let mut fd_w = DMatrix::zeros(gw.nrows(), gw.ncols());
        for idx in 0..gw.len() {
            let (mut plus, mut minus) = (w.clone(), w.clone());
            plus.w[idx] += h;
            minus.w[idx] -= h;
            fd_w[idx] = (loss(&plus) - loss(&minus)) / (2.0 * h);
        }
        let mut fd_b = DVector::zeros(gb.len());
        for k in 0..gb.len() {
            let (mut plus, mut minus) = (w.clone(), w.clone());
            plus.b[k] += h;
            minus.b[k] -= h;
            fd_b[k] = (loss(&plus) - loss(&minus)) / (2.0 * h);
        }
        let diff = (&gw - &fd_w).amax().max((&gb - &fd_b).amax());
        let scale = fd_w.amax().max(fd_b.amax());
        worst_grad = worst_grad.max(diff / scale);
    }

    // objective traces of both estimators on one random corpus
    let mut r = rng(7);
    let mut linear_samples = Vec::new();
    let mut soft_samples = Vec::new();
    for _ in 0..30 {
        let prev = random_stochastic(&mut r, 4);
        let next = random_stochastic(&mut r, 4);
        linear_samples.push(LinearSample { features: vec![prev.as_matrix().clone()], target: next.clone() });
        for i in 0..4 {
            soft_samples.push(SoftmaxSample { x: DVector::from_vec(prev.row(i)), target: next.row(i) });
        }
    }
    let kinds = [FeatureKind::Previous];
    let solver = SolverConfig::default();
    let linear = fit_linear_samples(&linear_samples, &kinds, 1e-3, &solver, None);
    let soft = fit_softmax_samples(&soft_samples, &kinds, 1e-3, &solver);
    let traces = match (&linear, &soft) {
        (Ok((_, a)), Ok((_, b))) => a.traces_monotone() && b.traces_monotone(),
        _ => false,
    };
    let fit_note = match (&linear, &soft) {
        (Err(e), _) | (_, Err(e)) => format!("fit failed: {e}"),
        _ => "fits converged".into(),
    };

    // held-out recovery of the identity map
    let mut r = rng(8);
    let shape = SessionShape { rounds: 6, ..SessionShape::default() };
    let sessions: Vec<_> = (0..20).map(|i| identity_map_session(&mut r, &format!("t{i:02}"), &shape, 0.01)).collect();
    let examples =
        collect_examples(&sessions, &kinds, &NetworkSettings::default(), &Lexicons::default(), None).unwrap();
    let cfg = HoldoutConfig {
        features: kinds.to_vec(),
        lambda: Some(1e-4),
        softmax: false,
        bootstrap: 200,
        ..HoldoutConfig::default()
    };
    let (lin, uni) = match holdout_evaluation(&examples, &cfg) {
        Ok(rep) => (
            rep.summary("Linear", "mse").map_or(f64::NAN, |s| s.mean),
            rep.summary("Uniform", "mse").map_or(f64::NAN, |s| s.mean),
        ),
        Err(e) => return Verdict::Fail(format!("holdout: {e}")),
    };
    verdict(
        worst_grad < 1e-5 && traces && lin < 0.1 * uni,
        format!("gradient rel. error {worst_grad:e}; traces monotone {traces} ({fit_note}); held-out linear {lin:.3e} vs uniform {uni:.3e}"),
    )
}

fn single_round_means(sessions: &[TeamSession]) -> Vec<(String, f64)> {
    let mut records = Vec::new();
    for s in sessions {
        records.extend(forecast_errors(&TeamSeries::from_session(s), &ForecastOptions::default()).unwrap().records);
    }
    summarize_errors(&records)
        .into_iter()
        .filter(|s| s.round == 0 && s.mode == ForecastMode::Single)
        .map(|s| (s.predictor, s.mse))
        .collect()
}

const BASELINES: [&str; 7] = ["Uniform", "Random", "Constant", "First", "Average", "Reflected", "SBT"];

fn forecast_consistency() -> Verdict {
    let cfg = DynamicsConfig::new(0.4, ModelKind::DRP).unwrap();
    let mut r = rng(9);
    let drp_sessions: Vec<_> =
        (0..12).map(|i| dynamics_session(&mut r, &format!("d{i}"), &SessionShape::default(), &cfg).unwrap()).collect();
    let summary = single_round_means(&drp_sessions);
    let get = |s: &[(String, f64)], p: &str| s.iter().find(|(n, _)| n == p).map_or(f64::NAN, |x| x.1);
    let drp = get(&summary, "DRP");
    let best_baseline = BASELINES.iter().map(|b| get(&summary, b)).fold(f64::INFINITY, f64::min);
    let const_sessions: Vec<_> =
        (0..6).map(|i| constant_session(&mut r, &format!("c{i}"), &SessionShape::default())).collect();
    let constant = get(&single_round_means(&const_sessions), "Constant");
    verdict(
        drp < 1e-12 && BASELINES.iter().all(|b| get(&summary, b) > drp) && constant == 0.0,
        format!("DRP {drp:e}, best baseline {best_baseline:.3e}, Constant on constant sessions {constant}"),
    )
}

fn analytics_calibration() -> Verdict {
    let mut r = rng(10);
    let trials = 1000;
    let null_rejections = (0..trials)
        .filter(|_| {
            let (x, y) = (white_noise(&mut r, 50), white_noise(&mut r, 50));
            granger(&x, &y, 1).unwrap().p_value < 0.05
        })
        .count();
    let size = null_rejections as f64 / trials as f64;
    let detections = (0..trials)
        .filter(|_| {
            let (x, y) = lagged_pair(&mut r, 50, 0.9, 1.0);
            granger(&x, &y, 1).unwrap().p_value < 0.05
        })
        .count();
    let power = detections as f64 / trials as f64;
    let bh = bh_correct(&[0.01, 0.02, 0.04, 0.5], 0.05).unwrap();
    // two regressors with sample correlation exactly 0.9
    let a = white_noise(&mut r, 200);
    let b = white_noise(&mut r, 200);
    let center = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        DVector::from_iterator(v.len(), v.iter().map(|x| x - m))
    };
    let u = center(&a).normalize();
    let mut z = center(&b);
    z -= &u * u.dot(&z);
    let z = z.normalize();
    let v = &u * 0.9 + &z * (1.0 - 0.81f64).sqrt();
    let x = DMatrix::from_columns(&[u, v]);
    let vifs = vif(&x).unwrap();
    let ok = (0.03..=0.07).contains(&size)
        && power >= 0.95
        && bh.count == 2
        && bh.rejected == [true, true, false, false]
        && vifs.iter().all(|f| (f - 5.263).abs() <= 1e-3);
    verdict(ok, format!("null rejection {size:.3}, power {power:.3}, BH rejects {}, VIF {:.4?}", bh.count, vifs))
}

fn dataset_replay() -> Verdict {
    let Some(dir) = std::env::var_os("INFLUENCE_DATASET") else {
        return Verdict::Skip("INFLUENCE_DATASET not set".into());
    };
    let mut cfg = RunConfig::default();
    cfg.data.sessions_dir = Some(dir.into());
    match fit::evaluate(&cfg) {
        Ok((rep, _)) => {
            let uni = rep.summary("Uniform", "mse").map_or(f64::NAN, |s| s.mean);
            let con = rep.summary("Constant", "mse").map_or(f64::NAN, |s| s.mean);
            verdict(
                (uni - 0.0110).abs() <= 0.0005 && (con - 0.0073).abs() <= 0.0005,
                format!("uniform {uni:.4} (0.0110), constant {con:.4} (0.0073)"),
            )
        }
        Err(e) => Verdict::Fail(format!("{e:#}")),
    }
}

type Criterion = (&'static str, Option<u64>, fn() -> Verdict);

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    rayon::ThreadPoolBuilder::new().num_threads(1).build_global().expect("first pool");
    let total = Instant::now();
    let suite: [Criterion; 9] = [
        ("1 row-stochasticity of D/DR/DRP", Some(5), stochasticity),
        ("2 DRP uniform equilibrium and Lyapunov decrease", Some(10), uniform_equilibrium),
        ("3 D-model closed form", None, d_closed_form),
        ("4 metric identities", None, metric_identities),
        ("5 stationary-vector oracle", None, stationary_oracle),
        ("6 estimator correctness", Some(60), estimators),
        ("7 forecast self-consistency", None, forecast_consistency),
        ("8 analytics calibration", None, analytics_calibration),
        ("9 dataset replay", None, dataset_replay),
    ];
    let mut failed = 0;
    for (name, limit, f) in suite {
        let (v, took) = timed(limit.map(Duration::from_secs), f);
        let (tag, detail) = match v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {name} ({took:.2?}): {detail}");
    }
    let took = total.elapsed();
    let ok = took < Duration::from_secs(180);
    failed += usize::from(!ok);
    println!("[{}] 10 suite runtime single-threaded ({took:.2?}): limit 180s", if ok { "PASS" } else { "FAIL" });
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
