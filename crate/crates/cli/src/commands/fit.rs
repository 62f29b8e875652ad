//! Team-level hold-out fit of the estimators with bootstrap summaries.

use anyhow::bail;
use influence_core::evaluation::{collect_examples, holdout_evaluation, HoldoutReport};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::inputs::{load_embeddings, load_lexicons, load_sessions, Failure};
use crate::output::{num, OutputDir, Table};

#[derive(Serialize)]
struct FitSummary<'a> {
    train_teams: &'a [String],
    test_teams: &'a [String],
    linear_lambda: Option<f64>,
    softmax_lambda: Option<f64>,
    linear_report: Option<&'a influence_core::estimate::FitReport>,
    softmax_report: Option<&'a influence_core::estimate::FitReport>,
    failures: &'a [(String, String)],
}

pub fn evaluate(cfg: &RunConfig) -> anyhow::Result<(HoldoutReport, Vec<Failure>)> {
    let (sessions, mut failures) = load_sessions(cfg)?;
    if sessions.len() < 2 {
        bail!("fit needs at least two teams, found {}", sessions.len());
    }
    let lexicons = load_lexicons(cfg)?;
    let embeddings = load_embeddings(cfg)?;
    let settings = cfg.network.settings()?;
    let kinds = &cfg.fit.features;
    let per_team: Vec<_> = sessions
        .par_iter()
        .map(|s| {
            (
                s.team_id.clone(),
                collect_examples(std::slice::from_ref(s), kinds, &settings, &lexicons, embeddings.as_ref()),
            )
        })
        .collect();
    let mut examples = Vec::new();
    for (team, r) in per_team {
        match r {
            Ok(ex) => examples.extend(ex),
            Err(e) => failures.push(Failure::new(team, e)),
        }
    }
    let report = holdout_evaluation(&examples, &cfg.holdout())?;
    failures.extend(report.failures.iter().map(|(est, e)| Failure::new(format!("estimator:{est}"), e)));
    Ok((report, failures))
}

pub fn run(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Vec<Failure>> {
    let (report, failures) = evaluate(cfg)?;

    let mut split = Table::new(["team", "set"]);
    for t in &report.train_teams {
        split.push(vec![t.clone(), "train".into()]);
    }
    for t in &report.test_teams {
        split.push(vec![t.clone(), "test".into()]);
    }
    out.csv("split.csv", &split)?;

    let mut errors = Table::new(["team", "round", "predictor", "metric", "value"]);
    for r in &report.records {
        for (metric, v) in [("mse", r.mse), ("kl", r.kl)] {
            errors.push(vec![r.team.clone(), r.round.to_string(), r.predictor.clone(), metric.into(), num(v)]);
        }
    }
    out.csv("holdout_errors.csv", &errors)?;

    let mut boot = Table::new(["predictor", "metric", "resamples", "mean", "std", "q025", "q50", "q975"]);
    for s in &report.summaries {
        let b = &s.summary;
        boot.push(vec![
            s.predictor.clone(),
            s.metric.clone(),
            b.resamples.to_string(),
            num(b.mean),
            num(b.std),
            num(b.q025),
            num(b.q50),
            num(b.q975),
        ]);
    }
    out.csv("bootstrap.csv", &boot)?;

    let mut importance = Table::new(["rank", "feature", "l1"]);
    let mut ranked = report.importance.clone();
    ranked.sort_by(|a, b| b.l1.total_cmp(&a.l1));
    for (i, f) in ranked.iter().enumerate() {
        importance.push(vec![(i + 1).to_string(), f.feature.clone(), num(f.l1)]);
    }
    out.csv("importance.csv", &importance)?;

    if let Some(l) = &report.linear {
        out.json("linear_weights.json", &l.weights)?;
    }
    if let Some(s) = &report.softmax {
        out.json("softmax_weights.json", &s.weights)?;
    }
    out.json(
        "fit_report.json",
        &FitSummary {
            train_teams: &report.train_teams,
            test_teams: &report.test_teams,
            linear_lambda: report.linear.as_ref().map(|l| l.lambda),
            softmax_lambda: report.softmax.as_ref().map(|s| s.lambda),
            linear_report: report.linear.as_ref().map(|l| &l.report),
            softmax_report: report.softmax.as_ref().map(|s| &s.report),
            failures: &report.failures,
        },
    )?;
    Ok(failures)
}
