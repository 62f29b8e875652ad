//! Correlation, regression, Granger causality, multiple testing and
//! bootstrap summaries.

mod granger;
mod multiple;
mod regression;

use serde::Serialize;

pub use granger::{
    causal_summary, granger, CausalSummary, GrangerRecord, LagView, PairSummary, SeriesKind, TimeSeriesTriple,
    LOW_POWER_DF,
};
pub use multiple::{bh_correct, bootstrap_eval, BhResult, BootstrapSummary};
pub use regression::{ols, pearson, vif, with_intercept, OlsFit};

use crate::matrix::ConnectivityNetwork;
use crate::metrics::{confidence, expertise_series, global_persuasiveness};
use crate::session::TeamSession;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub label: String,
    pub statistic: f64,
    pub p_value: f64,
    pub df: f64,
    /// Denominator degrees of freedom for F tests.
    pub df2: Option<f64>,
    pub low_power: bool,
}

/// Per-member expertise, confidence and global persuasiveness over the
/// rounds that carry an influence report.
pub fn session_triples(session: &TeamSession) -> Result<Vec<TimeSeriesTriple>> {
    let n = session.n();
    let expertise = expertise_series(session);
    let mut triples: Vec<TimeSeriesTriple> = session
        .member_ids
        .iter()
        .map(|m| TimeSeriesTriple {
            label: format!("{}/{m}", session.team_id),
            expertise: vec![],
            confidence: vec![],
            persuasiveness: vec![],
        })
        .collect();
    for (round, y) in session.rounds.iter().zip(&expertise) {
        let Some(m) = &round.influence else { continue };
        let conf = confidence(m);
        let pers = global_persuasiveness(m)?;
        for i in 0..n {
            triples[i].expertise.push(y[i]);
            triples[i].confidence.push(conf[i]);
            triples[i].persuasiveness.push(pers[i]);
        }
    }
    Ok(triples)
}

/// Total edge weight of a network, used as a per-round interaction scalar.
pub fn network_volume(a: &ConnectivityNetwork) -> f64 {
    a.as_matrix().sum()
}
