//! Single- and multi-round forecast errors of the models and baselines.

use influence_core::evaluation::{forecast_errors, summarize_errors, ForecastOptions, ForecastOutput, TeamSeries};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::inputs::{load_sessions, Failure};
use crate::output::{num, OutputDir, Table};

pub fn run(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Vec<Failure>> {
    let (sessions, mut failures) = load_sessions(cfg)?;
    let opts = ForecastOptions {
        tau: cfg.forecast.tau,
        sbt_mode: cfg.forecast.sbt_mode,
        kl_eps: cfg.forecast.kl_eps,
        seed: cfg.seeds().random_baseline,
    };
    let per_team: Vec<_> = sessions
        .par_iter()
        .map(|s| (s.team_id.clone(), forecast_errors(&TeamSeries::from_session(s), &opts)))
        .collect();

    let mut merged = ForecastOutput::default();
    for (team, result) in per_team {
        match result {
            Ok(o) => {
                merged.records.extend(o.records);
                merged.skipped.extend(o.skipped);
                merged.predictions.extend(o.predictions);
            }
            Err(e) => failures.push(Failure::new(team, e)),
        }
    }

    let mut errors = Table::new(["team", "round", "predictor", "mode", "metric", "value"]);
    for r in &merged.records {
        for (metric, v) in [("mse", r.mse), ("kl", r.kl)] {
            errors.push(vec![
                r.team.clone(),
                r.round.to_string(),
                r.predictor.clone(),
                r.mode.name().into(),
                metric.into(),
                num(v),
            ]);
        }
    }
    out.csv("errors.csv", &errors)?;

    let mut summary = Table::new(["predictor", "mode", "round", "count", "metric", "value"]);
    for s in summarize_errors(&merged.records) {
        let round = if s.round == 0 { "all".to_string() } else { s.round.to_string() };
        for (metric, v) in [("mse", s.mse), ("kl", s.kl)] {
            summary.push(vec![
                s.predictor.clone(),
                s.mode.name().into(),
                round.clone(),
                s.count.to_string(),
                metric.into(),
                num(v),
            ]);
        }
    }
    out.csv("summary.csv", &summary)?;

    let width = merged.predictions.iter().map(|p| p.matrix.ncols()).max().unwrap_or(0);
    let mut preds = Table::matrix(["team", "round", "predictor", "mode"], width);
    for p in &merged.predictions {
        preds.push_matrix(&[p.team.clone(), p.round.to_string(), p.predictor.clone(), p.mode.name().into()], &p.matrix);
    }
    out.csv("predictions.csv", &preds)?;

    let mut skipped = Table::new(["team", "round", "predictor", "mode", "reason"]);
    for s in &merged.skipped {
        skipped.push(vec![
            s.team.clone(),
            s.round.to_string(),
            s.predictor.clone(),
            s.mode.name().into(),
            s.reason.clone(),
        ]);
    }
    out.csv("skipped.csv", &skipped)?;
    Ok(failures)
}
