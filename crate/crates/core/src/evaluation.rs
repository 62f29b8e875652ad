//! Forecast error tables and the hold-out evaluation protocol.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{bootstrap_eval, BootstrapSummary};
use crate::baselines::{self, BaselineContext, BaselineKind, SbtMode};
use crate::dynamics::{normalize_expertise, step, DynamicsConfig, ModelKind};
use crate::error::{Error, Result};
use crate::estimate::{
    default_lambda_grid, feature_importance, fit_linear, fit_softmax, predict_linear, predict_softmax_matrix,
    select_lambda, split_by_team, EstimatorKind, FeatureNorm, FitReport, LinearWeights, SoftmaxWeights, SolverConfig,
};
use crate::ingest::{assemble_features, EmbeddingStore, FeatureBundle, FeatureKind, Lexicons, NetworkSettings};
use crate::matrix::{ExpertiseVector, InfluenceMatrix};
use crate::metrics::{expertise_series, kl_raw, mse_raw, KL_EPS};
use crate::session::TeamSession;

/// Stable seed from a root seed and labels (task name, team id, ...).
pub fn derive_seed(root: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("32-byte digest"))
}

/// Reported matrices of one team with the expertise of the same rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct TeamSeries {
    pub team_id: String,
    /// 1-based round numbers that carry a report.
    pub rounds: Vec<usize>,
    pub matrices: Vec<InfluenceMatrix>,
    pub expertise: Vec<ExpertiseVector>,
}

impl TeamSeries {
    pub fn from_session(session: &TeamSession) -> Self {
        let ys = expertise_series(session);
        let mut out =
            TeamSeries { team_id: session.team_id.clone(), rounds: vec![], matrices: vec![], expertise: vec![] };
        for (r, (round, y)) in session.rounds.iter().zip(ys).enumerate() {
            if let Some(m) = &round.influence {
                out.rounds.push(r + 1);
                out.matrices.push(m.clone());
                out.expertise.push(y);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecastMode {
    Single,
    Multi,
}

impl ForecastMode {
    pub fn name(self) -> &'static str {
        match self {
            ForecastMode::Single => "single",
            ForecastMode::Multi => "multi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Predictor {
    Model(ModelKind),
    Baseline(BaselineKind),
    Linear,
    Softmax,
}

impl Predictor {
    pub fn name(self) -> &'static str {
        match self {
            Predictor::Model(m) => m.name(),
            Predictor::Baseline(b) => b.name(),
            Predictor::Linear => "Linear",
            Predictor::Softmax => "Softmax",
        }
    }

    /// Dynamics models followed by the baselines.
    pub fn forecasters() -> Vec<Predictor> {
        ModelKind::ALL
            .iter()
            .map(|&m| Predictor::Model(m))
            .chain(BaselineKind::ALL.iter().map(|&b| Predictor::Baseline(b)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub team: String,
    /// Round being predicted.
    pub round: usize,
    pub predictor: String,
    pub mode: ForecastMode,
    pub mse: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedPrediction {
    pub team: String,
    pub round: usize,
    pub predictor: String,
    pub mode: ForecastMode,
    pub reason: String,
}

/// A formed prediction, kept for plotting and inspection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub team: String,
    pub round: usize,
    pub predictor: String,
    pub mode: ForecastMode,
    pub matrix: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ForecastOutput {
    pub records: Vec<ErrorRecord>,
    pub skipped: Vec<SkippedPrediction>,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastOptions {
    pub tau: f64,
    pub sbt_mode: SbtMode,
    pub kl_eps: f64,
    /// Root seed for the Random baseline.
    pub seed: u64,
}

impl Default for ForecastOptions {
    fn default() -> Self {
        Self { tau: crate::dynamics::DEFAULT_TAU, sbt_mode: SbtMode::default(), kl_eps: KL_EPS, seed: 0 }
    }
}

fn predict_next(
    predictor: Predictor,
    history: &[InfluenceMatrix],
    y: &ExpertiseVector,
    opts: &ForecastOptions,
    seed: u64,
) -> Result<Option<DMatrix<f64>>> {
    let last = history.last().ok_or(Error::EmptyHistory)?;
    match predictor {
        Predictor::Model(kind) => {
            let cfg = DynamicsConfig::new(opts.tau, kind)?;
            Ok(Some(step(&cfg, last, y)?.into_matrix()))
        }
        Predictor::Baseline(kind) => {
            let y_bar = normalize_expertise(y).ok();
            let ctx = BaselineContext { history, y_bar: y_bar.as_ref(), seed, sbt_mode: opts.sbt_mode };
            baselines::predict(kind, &ctx)
        }
        Predictor::Linear | Predictor::Softmax => {
            Err(Error::InvalidArgument("fitted estimators are evaluated by holdout_evaluation".into()))
        }
    }
}

/// Single- and multi-round errors of every dynamics model and baseline on
/// one team. Predictions that cannot be formed are listed in `skipped`.
pub fn forecast_errors(series: &TeamSeries, opts: &ForecastOptions) -> Result<ForecastOutput> {
    let mut out = ForecastOutput::default();
    if series.len() < 2 {
        return Ok(out);
    }
    for predictor in Predictor::forecasters() {
        for mode in [ForecastMode::Single, ForecastMode::Multi] {
            // chained predictions in multi mode replace the truth after round 1
            let mut chain: Vec<InfluenceMatrix> = vec![series.matrices[0].clone()];
            let mut broken: Option<String> = None;
            for t in 0..series.len() - 1 {
                let target_round = series.rounds[t + 1];
                let skip = |reason: String| SkippedPrediction {
                    team: series.team_id.clone(),
                    round: target_round,
                    predictor: predictor.name().into(),
                    mode,
                    reason,
                };
                if let Some(reason) = &broken {
                    out.skipped.push(skip(format!("chain broken: {reason}")));
                    continue;
                }
                let seed = derive_seed(opts.seed, &["random", &series.team_id, &target_round.to_string(), mode.name()]);
                let history: &[InfluenceMatrix] = match mode {
                    ForecastMode::Single => &series.matrices[..=t],
                    ForecastMode::Multi => &chain,
                };
                let pred = match predict_next(predictor, history, &series.expertise[t], opts, seed) {
                    Ok(Some(p)) => p,
                    other => {
                        let reason = match other {
                            Err(e) => e.to_string(),
                            _ => "inputs unavailable".to_string(),
                        };
                        if mode == ForecastMode::Multi {
                            broken = Some(reason.clone());
                        }
                        out.skipped.push(skip(reason));
                        continue;
                    }
                };
                let truth = series.matrices[t + 1].as_matrix();
                out.records.push(ErrorRecord {
                    team: series.team_id.clone(),
                    round: target_round,
                    predictor: predictor.name().into(),
                    mode,
                    mse: mse_raw(truth, &pred)?,
                    kl: kl_raw(truth, &pred, opts.kl_eps)?,
                });
                out.predictions.push(Prediction {
                    team: series.team_id.clone(),
                    round: target_round,
                    predictor: predictor.name().into(),
                    mode,
                    matrix: pred.clone(),
                });
                if mode == ForecastMode::Multi {
                    // chain through the row-stochastic set; raw SBT output is renormalized here
                    chain.push(crate::estimate::project_rows(&pred));
                }
            }
        }
    }
    Ok(out)
}

/// Mean error per (predictor, mode, round) and overall (round 0).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSummary {
    pub predictor: String,
    pub mode: ForecastMode,
    /// 0 for the all-rounds aggregate.
    pub round: usize,
    pub count: usize,
    pub mse: f64,
    pub kl: f64,
}

pub fn summarize_errors(records: &[ErrorRecord]) -> Vec<ErrorSummary> {
    let mut acc: BTreeMap<(String, ForecastMode, usize), (usize, f64, f64)> = BTreeMap::new();
    for r in records {
        for round in [0, r.round] {
            let e = acc.entry((r.predictor.clone(), r.mode, round)).or_default();
            e.0 += 1;
            e.1 += r.mse;
            e.2 += r.kl;
        }
    }
    acc.into_iter()
        .map(|((predictor, mode, round), (c, m, k))| ErrorSummary {
            predictor,
            mode,
            round,
            count: c,
            mse: m / c as f64,
            kl: k / c as f64,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoldoutConfig {
    pub holdout: f64,
    pub split_seed: u64,
    pub bootstrap: usize,
    pub bootstrap_seed: u64,
    pub features: Vec<FeatureKind>,
    /// Fixed lambda; `None` selects from `lambda_grid`.
    pub lambda: Option<f64>,
    pub lambda_grid: Vec<f64>,
    /// Validation share of the training teams for lambda selection.
    pub validation: f64,
    pub softmax: bool,
    pub solver: SolverConfig,
    pub tau: f64,
    pub sbt_mode: SbtMode,
    pub random_seed: u64,
}

impl Default for HoldoutConfig {
    fn default() -> Self {
        Self {
            holdout: 0.2,
            split_seed: 0,
            bootstrap: 1000,
            bootstrap_seed: 0,
            features: vec![FeatureKind::Previous, FeatureKind::Expertise, FeatureKind::Response],
            lambda: None,
            lambda_grid: default_lambda_grid(),
            validation: 0.2,
            softmax: true,
            solver: SolverConfig::default(),
            tau: crate::dynamics::DEFAULT_TAU,
            sbt_mode: SbtMode::default(),
            random_seed: 0,
        }
    }
}

/// One usable (team, round) with its features and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub bundle: FeatureBundle,
    pub target: InfluenceMatrix,
    /// Reports of earlier rounds, oldest first.
    pub history: Vec<InfluenceMatrix>,
    /// Expertise at the previous round.
    pub prev_expertise: ExpertiseVector,
}

/// Rounds `t >= 2` that have a report, a report at `t - 1` and every
/// requested feature.
pub fn collect_examples(
    sessions: &[TeamSession],
    kinds: &[FeatureKind],
    settings: &NetworkSettings,
    lexicons: &Lexicons,
    embeddings: Option<&EmbeddingStore>,
) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for s in sessions {
        let ys = expertise_series(s);
        for t in 2..=s.rounds.len() {
            let (Some(target), Some(_)) = (&s.rounds[t - 1].influence, &s.rounds[t - 2].influence) else {
                continue;
            };
            let bundle = assemble_features(s, t, settings, lexicons, embeddings)?;
            if !kinds.iter().all(|&k| bundle.has(k)) {
                continue;
            }
            let history = s.rounds[..t - 1].iter().filter_map(|r| r.influence.clone()).collect();
            out.push(Example { bundle, target: target.clone(), history, prev_expertise: ys[t - 2].clone() });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoldoutRecord {
    pub team: String,
    pub round: usize,
    pub predictor: String,
    pub mse: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictorSummary {
    pub predictor: String,
    pub metric: String,
    pub summary: BootstrapSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedLinear {
    pub lambda: f64,
    pub weights: LinearWeights,
    pub report: FitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedSoftmax {
    pub lambda: f64,
    pub weights: SoftmaxWeights,
    pub report: FitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoldoutReport {
    pub train_teams: Vec<String>,
    pub test_teams: Vec<String>,
    pub linear: Option<FittedLinear>,
    pub softmax: Option<FittedSoftmax>,
    pub importance: Vec<FeatureNorm>,
    pub records: Vec<HoldoutRecord>,
    pub summaries: Vec<PredictorSummary>,
    /// Estimators that could not be fitted, with the reason.
    pub failures: Vec<(String, String)>,
}

impl HoldoutReport {
    pub fn summary(&self, predictor: &str, metric: &str) -> Option<&BootstrapSummary> {
        self.summaries.iter().find(|s| s.predictor == predictor && s.metric == metric).map(|s| &s.summary)
    }
}

fn team_names(examples: &[Example], idx: &[usize]) -> Vec<String> {
    let mut v: Vec<String> = idx.iter().map(|&i| examples[i].bundle.team_id.clone()).collect();
    v.sort();
    v.dedup();
    v
}

/// Team-level split, estimator fits on the training share, and bootstrap
/// summaries of every predictor's errors on the held-out rounds.
pub fn holdout_evaluation(examples: &[Example], cfg: &HoldoutConfig) -> Result<HoldoutReport> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("no usable rounds for evaluation".into()));
    }
    let ids: Vec<String> = examples.iter().map(|e| e.bundle.team_id.clone()).collect();
    let (train_idx, test_idx) = split_by_team(&ids, cfg.holdout, cfg.split_seed)?;
    let train: Vec<(FeatureBundle, InfluenceMatrix)> =
        train_idx.iter().map(|&i| (examples[i].bundle.clone(), examples[i].target.clone())).collect();
    let kinds = &cfg.features;
    let mut failures = Vec::new();

    let choose = |est: EstimatorKind| -> Result<f64> {
        match cfg.lambda {
            Some(l) => Ok(l),
            None => {
                Ok(select_lambda(&train, kinds, est, &cfg.lambda_grid, cfg.validation, cfg.split_seed, &cfg.solver)?
                    .best)
            }
        }
    };
    let linear = choose(EstimatorKind::Linear).and_then(|lambda| {
        fit_linear(&train, kinds, lambda, &cfg.solver).map(|(weights, report)| FittedLinear { lambda, weights, report })
    });
    let linear = match linear {
        Ok(f) => Some(f),
        Err(e) => {
            failures.push(("Linear".to_string(), e.to_string()));
            None
        }
    };
    let softmax = if cfg.softmax {
        match choose(EstimatorKind::Softmax).and_then(|lambda| {
            fit_softmax(&train, kinds, lambda, &cfg.solver).map(|(weights, report)| FittedSoftmax {
                lambda,
                weights,
                report,
            })
        }) {
            Ok(f) => Some(f),
            Err(e) => {
                failures.push(("Softmax".to_string(), e.to_string()));
                None
            }
        }
    } else {
        None
    };

    let opts = ForecastOptions { tau: cfg.tau, sbt_mode: cfg.sbt_mode, kl_eps: KL_EPS, seed: cfg.random_seed };
    let mut records = Vec::new();
    for &i in &test_idx {
        let ex = &examples[i];
        let truth = ex.target.as_matrix();
        let mut push = |name: &str, pred: &DMatrix<f64>| -> Result<()> {
            records.push(HoldoutRecord {
                team: ex.bundle.team_id.clone(),
                round: ex.bundle.round,
                predictor: name.to_string(),
                mse: mse_raw(truth, pred)?,
                kl: kl_raw(truth, pred, KL_EPS)?,
            });
            Ok(())
        };
        for p in Predictor::forecasters() {
            let seed = derive_seed(cfg.random_seed, &["random", &ex.bundle.team_id, &ex.bundle.round.to_string()]);
            if let Ok(Some(pred)) = predict_next(p, &ex.history, &ex.prev_expertise, &opts, seed) {
                push(p.name(), &pred)?;
            }
        }
        if let Some(f) = &linear {
            push("Linear", predict_linear(&f.weights, &ex.bundle)?.as_matrix())?;
        }
        if let Some(f) = &softmax {
            push("Softmax", predict_softmax_matrix(&f.weights, &ex.bundle)?.as_matrix())?;
        }
    }

    let mut by_predictor: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in &records {
        let e = by_predictor.entry(&r.predictor).or_default();
        e.0.push(r.mse);
        e.1.push(r.kl);
    }
    let mut summaries = Vec::new();
    for (name, (mses, kls)) in &by_predictor {
        for (metric, vals) in [("mse", mses), ("kl", kls)] {
            let seed = derive_seed(cfg.bootstrap_seed, &["bootstrap", name, metric]);
            summaries.push(PredictorSummary {
                predictor: name.to_string(),
                metric: metric.into(),
                summary: bootstrap_eval(vals, cfg.bootstrap, seed)?,
            });
        }
    }
    let importance = linear.as_ref().map(|f| feature_importance(&f.weights)).unwrap_or_default();
    Ok(HoldoutReport {
        train_teams: team_names(examples, &train_idx),
        test_teams: team_names(examples, &test_idx),
        linear,
        softmax,
        importance,
        records,
        summaries,
        failures,
    })
}
