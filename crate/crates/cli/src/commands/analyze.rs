//! Correlation, regression and Granger reports over members.

use influence_core::analytics::{
    causal_summary, ols, pearson, session_triples, vif, with_intercept, LagView, SeriesKind, TimeSeriesTriple,
};
use influence_core::ingest::{build_network, Lexicons, NetworkSettings, NetworkWeight};
use influence_core::metrics::{
    confidence, expertise_series, global_persuasiveness, local_persuasiveness, mean_reversion,
};
use influence_core::TeamSession;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::inputs::{load_lexicons, load_sessions, Failure};
use crate::output::{num, OutputDir, Table};

/// One member at the team's last reported round.
#[derive(Debug, Clone)]
struct Individual {
    team: String,
    member: String,
    expertise: f64,
    confidence: f64,
    local: f64,
    global: f64,
    reversion: f64,
    team_performance: f64,
    response_out: f64,
    sentiment_out: Option<f64>,
}

struct TeamAnalysis {
    individuals: Vec<Individual>,
    triples: Vec<TimeSeriesTriple>,
}

fn analyze_team(
    s: &TeamSession,
    settings: &NetworkSettings,
    lexicons: &Lexicons,
) -> influence_core::Result<TeamAnalysis> {
    let triples = session_triples(s)?;
    let Some(last) = s.rounds.iter().rposition(|r| r.influence.is_some()) else {
        return Ok(TeamAnalysis { individuals: vec![], triples });
    };
    let m = s.rounds[last].influence.as_ref().expect("located above");
    let y = expertise_series(s).swap_remove(last);
    let n = s.n();
    let conf = confidence(m);
    let local = local_persuasiveness(m);
    let global = global_persuasiveness(m)?;
    let reversion = mean_reversion(m);
    let messages = s.messages_upto(last + 1);
    let response = build_network(&messages, n, &settings.window, NetworkWeight::Response { gamma: settings.gamma })?;
    let sentiment = lexicons
        .sentiment
        .as_ref()
        .map(|lex| build_network(&messages, n, &settings.window, NetworkWeight::Sentiment(lex)))
        .transpose()?;
    let team_performance = y.iter().sum::<f64>() / n as f64;
    let individuals = (0..n)
        .map(|i| Individual {
            team: s.team_id.clone(),
            member: s.member_ids[i].clone(),
            expertise: y[i],
            confidence: conf[i],
            local: local[i],
            global: global[i],
            reversion: reversion[i],
            team_performance,
            response_out: response.out_degree()[i],
            sentiment_out: sentiment.as_ref().map(|a| a.out_degree()[i]),
        })
        .collect();
    Ok(TeamAnalysis { individuals, triples })
}

fn column(people: &[Individual], name: &str) -> Vec<f64> {
    people
        .iter()
        .map(|p| match name {
            "expertise" => p.expertise,
            "confidence" => p.confidence,
            "local_persuasiveness" => p.local,
            "global_persuasiveness" => p.global,
            "mean_reversion" => p.reversion,
            "team_performance" => p.team_performance,
            "response_out_degree" => p.response_out,
            "sentiment_out_degree" => p.sentiment_out.unwrap_or(f64::NAN),
            other => unreachable!("unknown column {other}"),
        })
        .collect()
}

const PEARSON_PAIRS: [(&str, &str); 5] = [
    ("expertise", "local_persuasiveness"),
    ("expertise", "global_persuasiveness"),
    ("expertise", "confidence"),
    ("confidence", "local_persuasiveness"),
    ("expertise", "mean_reversion"),
];

fn regression_models(with_sentiment: bool) -> Vec<(&'static str, &'static str, Vec<&'static str>)> {
    let mut full = vec!["expertise", "confidence", "response_out_degree"];
    if with_sentiment {
        full.push("sentiment_out_degree");
    }
    vec![
        ("reversion", "mean_reversion", vec!["expertise"]),
        ("reversion", "mean_reversion", vec!["expertise", "team_performance"]),
        ("persuasiveness", "local_persuasiveness", vec!["expertise"]),
        ("persuasiveness", "local_persuasiveness", vec!["confidence"]),
        ("persuasiveness", "local_persuasiveness", vec!["expertise", "confidence"]),
        ("persuasiveness", "local_persuasiveness", full),
    ]
}

fn ols_rows(table: &mut Table, people: &[Individual], name: &str, model: usize, response: &str, terms: &[&str]) {
    let x = DMatrix::from_fn(people.len(), terms.len(), |r, c| column(people, terms[c])[r]);
    let y = column(people, response);
    let label = format!("{name}{}", model + 1);
    let fit = match ols(&with_intercept(&x), &y) {
        Ok(f) => f,
        Err(e) => {
            let mut row = vec![label, response.into(), String::new()];
            row.extend(std::iter::repeat_n(String::new(), 9));
            row.push(e.to_string());
            table.push(row);
            return;
        }
    };
    let vifs = if terms.len() >= 2 { vif(&x).ok() } else { None };
    for (k, term) in std::iter::once("intercept").chain(terms.iter().copied()).enumerate() {
        let v = match (&vifs, k) {
            (_, 0) => String::new(),
            (Some(v), k) => num(v[k - 1]),
            (None, _) if terms.len() == 1 => "1".into(),
            (None, _) => "rank-deficient".into(),
        };
        table.push(vec![
            label.clone(),
            response.into(),
            term.into(),
            num(fit.coefficients[k]),
            num(fit.std_errors[k]),
            num(fit.t_values[k]),
            num(fit.p_values[k]),
            v,
            fit.n_obs.to_string(),
            num(fit.r_squared),
            num(fit.log_likelihood),
            num(fit.aic),
            num(fit.bic),
            "ok".into(),
        ]);
    }
}

pub fn run(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Vec<Failure>> {
    let (sessions, mut failures) = load_sessions(cfg)?;
    let lexicons = load_lexicons(cfg)?;
    let settings = cfg.network.settings()?;
    let per_team: Vec<_> =
        sessions.par_iter().map(|s| (s.team_id.clone(), analyze_team(s, &settings, &lexicons))).collect();
    let mut people = Vec::new();
    let mut triples = Vec::new();
    for (team, r) in per_team {
        match r {
            Ok(a) => {
                people.extend(a.individuals);
                triples.extend(a.triples);
            }
            Err(e) => failures.push(Failure::new(team, e)),
        }
    }

    let mut ind = Table::new([
        "team",
        "member",
        "expertise",
        "confidence",
        "local_persuasiveness",
        "global_persuasiveness",
        "mean_reversion",
        "team_performance",
        "response_out_degree",
        "sentiment_out_degree",
    ]);
    for p in &people {
        ind.push(vec![
            p.team.clone(),
            p.member.clone(),
            num(p.expertise),
            num(p.confidence),
            num(p.local),
            num(p.global),
            num(p.reversion),
            num(p.team_performance),
            num(p.response_out),
            p.sentiment_out.map(num).unwrap_or_default(),
        ]);
    }
    out.csv("individuals.csv", &ind)?;

    let mut corr = Table::new(["x", "y", "n", "r", "p_value", "df", "low_power", "status"]);
    for (a, b) in PEARSON_PAIRS {
        let row = match pearson(&column(&people, a), &column(&people, b)) {
            Ok(t) => vec![num(t.statistic), num(t.p_value), num(t.df), t.low_power.to_string(), "ok".into()],
            Err(e) => vec![String::new(), String::new(), String::new(), String::new(), e.to_string()],
        };
        corr.push([a.to_string(), b.to_string(), people.len().to_string()].into_iter().chain(row).collect());
    }
    out.csv("pearson.csv", &corr)?;

    let mut reg = Table::new([
        "model",
        "response",
        "term",
        "coefficient",
        "std_error",
        "t_value",
        "p_value",
        "vif",
        "n_obs",
        "r_squared",
        "log_likelihood",
        "aic",
        "bic",
        "status",
    ]);
    let mut counters = std::collections::BTreeMap::new();
    for (name, response, terms) in regression_models(lexicons.sentiment.is_some()) {
        let k = counters.entry(name).or_insert(0usize);
        ols_rows(&mut reg, &people, name, *k, response, &terms);
        *k += 1;
    }
    out.csv("ols.csv", &reg)?;

    // Granger needs five reported rounds per member
    let (long, short): (Vec<_>, Vec<_>) = triples.into_iter().partition(|t| t.expertise.len() >= 5);
    let causal = causal_summary(&long, cfg.analyze.fdr)?;
    let mut meta = Table::new([
        "fdr",
        "bh_threshold",
        "total_tests",
        "degenerate_skipped",
        "too_short_skipped",
        "low_power",
        "short_series_members",
    ]);
    meta.push(vec![
        num(causal.fdr),
        num(causal.threshold),
        causal.total_tests.to_string(),
        causal.skipped.to_string(),
        causal.too_short.to_string(),
        causal.low_power.to_string(),
        short.len().to_string(),
    ]);
    out.csv("causal_meta.csv", &meta)?;

    let mut pairs = Table::new([
        "cause",
        "effect",
        "lag1_tests",
        "lag1_significant",
        "lag1_proportion",
        "lag2_tests",
        "lag2_significant",
        "lag2_proportion",
        "members_tested",
        "upto2_significant",
        "upto2_proportion",
        "bh_threshold",
    ]);
    for p in &causal.pairs {
        pairs.push(vec![
            p.cause.name().into(),
            p.effect.name().into(),
            p.lag1_tests.to_string(),
            p.lag1_significant.to_string(),
            num(p.lag1_proportion),
            p.lag2_tests.to_string(),
            p.lag2_significant.to_string(),
            num(p.lag2_proportion),
            p.members_tested.to_string(),
            p.upto2_significant.to_string(),
            num(p.upto2_proportion),
            num(causal.threshold),
        ]);
    }
    out.csv("causal_pairs.csv", &pairs)?;

    let mut heat = Table::new(["view", "cause", "effect", "proportion"]);
    for (view, label) in [(LagView::Lag1, "lag1"), (LagView::Lag2, "lag2"), (LagView::UpTo2, "upto2")] {
        let h = causal.heatmap(view);
        for (i, c) in SeriesKind::ALL.iter().enumerate() {
            for (j, e) in SeriesKind::ALL.iter().enumerate() {
                if i != j {
                    heat.push(vec![label.into(), c.name().into(), e.name().into(), num(h[i][j])]);
                }
            }
        }
    }
    out.csv("causal_heatmap.csv", &heat)?;

    let mut tests =
        Table::new(["member", "cause", "effect", "lag", "f_statistic", "p_value", "df2", "low_power", "rejected"]);
    for t in &causal.tests {
        tests.push(vec![
            t.label.clone(),
            t.cause.name().into(),
            t.effect.name().into(),
            t.lag.to_string(),
            num(t.statistic),
            num(t.p_value),
            num(t.df2),
            t.low_power.to_string(),
            t.rejected.to_string(),
        ]);
    }
    out.csv("granger_tests.csv", &tests)?;
    Ok(failures)
}
