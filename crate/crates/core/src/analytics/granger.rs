//! Granger causality F-tests and the pooled causal summary.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::multiple::bh_correct;
use super::regression::ols;
use super::TestResult;
use crate::error::{Error, Result};

/// Results with fewer residual degrees of freedom are flagged low-power.
pub const LOW_POWER_DF: f64 = 5.0;

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

fn lagged_design(x: Option<&[f64]>, y: &[f64], lag: usize) -> DMatrix<f64> {
    let rows = y.len() - lag;
    let cols = 1 + lag + if x.is_some() { lag } else { 0 };
    DMatrix::from_fn(rows, cols, |r, c| {
        let t = r + lag;
        match c {
            0 => 1.0,
            c if c <= lag => y[t - c],
            c => x.expect("augmented columns")[t - (c - lag)],
        }
    })
}

/// Does `x` help predict `y` beyond `y`'s own `lag` lags?
///
/// Needs `len >= 3 lag + 2` so the unrestricted model keeps at least one
/// residual degree of freedom.
pub fn granger(x: &[f64], y: &[f64], lag: usize) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), found: x.len() });
    }
    if lag == 0 {
        return Err(Error::InvalidArgument("lag must be at least 1".into()));
    }
    let n = y.len();
    if n < 3 * lag + 2 {
        return Err(Error::SeriesTooShort { len: n, lag });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("series"));
    }
    if is_constant(x) {
        return Err(Error::DegenerateSeries("cause series is constant".into()));
    }
    if is_constant(y) {
        return Err(Error::DegenerateSeries("effect series is constant".into()));
    }
    let target = &y[lag..];
    let restricted = ols(&lagged_design(None, y, lag), target).map_err(degenerate)?;
    let unrestricted = ols(&lagged_design(Some(x), y, lag), target).map_err(degenerate)?;
    let df1 = lag as f64;
    let df2 = unrestricted.df_resid as f64;
    let (rss_r, rss_u) = (restricted.rss, unrestricted.rss);
    if rss_r <= f64::EPSILON * target.iter().map(|v| v * v).sum::<f64>() {
        return Err(Error::DegenerateSeries("effect series is perfectly autoregressive".into()));
    }
    let (statistic, p_value) = if rss_u <= 1e-14 * rss_r {
        (f64::INFINITY, 0.0)
    } else {
        let f = ((rss_r - rss_u).max(0.0) / df1) / (rss_u / df2);
        let dist = FisherSnedecor::new(df1, df2).expect("positive df");
        (f, dist.sf(f).clamp(0.0, 1.0))
    };
    Ok(TestResult {
        label: format!("granger lag {lag}"),
        statistic,
        p_value,
        df: df1,
        df2: Some(df2),
        low_power: df2 < LOW_POWER_DF,
    })
}

fn degenerate(e: Error) -> Error {
    match e {
        Error::RankDeficient => Error::DegenerateSeries("collinear lag design".into()),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Expertise,
    Confidence,
    Persuasiveness,
}

impl SeriesKind {
    pub const ALL: [SeriesKind; 3] = [SeriesKind::Expertise, SeriesKind::Confidence, SeriesKind::Persuasiveness];

    pub fn name(self) -> &'static str {
        match self {
            SeriesKind::Expertise => "expertise",
            SeriesKind::Confidence => "confidence",
            SeriesKind::Persuasiveness => "persuasiveness",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// One member's three series over rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesTriple {
    pub label: String,
    pub expertise: Vec<f64>,
    pub confidence: Vec<f64>,
    pub persuasiveness: Vec<f64>,
}

impl TimeSeriesTriple {
    pub fn series(&self, kind: SeriesKind) -> &[f64] {
        match kind {
            SeriesKind::Expertise => &self.expertise,
            SeriesKind::Confidence => &self.confidence,
            SeriesKind::Persuasiveness => &self.persuasiveness,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.expertise.len();
        if self.confidence.len() != n || self.persuasiveness.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.confidence.len().min(self.persuasiveness.len()),
            });
        }
        if n < 5 {
            return Err(Error::SeriesTooShort { len: n, lag: 2 });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSummary {
    pub cause: SeriesKind,
    pub effect: SeriesKind,
    pub lag1_tests: usize,
    pub lag1_significant: usize,
    pub lag1_proportion: f64,
    pub lag2_tests: usize,
    pub lag2_significant: usize,
    pub lag2_proportion: f64,
    /// Members tested at some lag.
    pub members_tested: usize,
    /// Members significant at lag 1 or lag 2.
    pub upto2_significant: usize,
    pub upto2_proportion: f64,
}

/// One pooled test and its BH decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrangerRecord {
    pub label: String,
    pub cause: SeriesKind,
    pub effect: SeriesKind,
    pub lag: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub df2: f64,
    pub low_power: bool,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CausalSummary {
    pub fdr: f64,
    /// BH threshold over the pooled p-values.
    pub threshold: f64,
    pub total_tests: usize,
    /// Tests skipped because a series was degenerate.
    pub skipped: usize,
    /// Tests skipped because the series was too short for the lag.
    pub too_short: usize,
    pub low_power: usize,
    /// Sorted by descending lag-1 proportion.
    pub pairs: Vec<PairSummary>,
    /// Every test that ran, in member, pair, lag order.
    pub tests: Vec<GrangerRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagView {
    Lag1,
    Lag2,
    UpTo2,
}

impl CausalSummary {
    /// `[cause][effect]` proportions in `SeriesKind::ALL` order; the
    /// diagonal is NaN.
    pub fn heatmap(&self, view: LagView) -> [[f64; 3]; 3] {
        let mut out = [[f64::NAN; 3]; 3];
        for p in &self.pairs {
            out[p.cause.index()][p.effect.index()] = match view {
                LagView::Lag1 => p.lag1_proportion,
                LagView::Lag2 => p.lag2_proportion,
                LagView::UpTo2 => p.upto2_proportion,
            };
        }
        out
    }

    pub fn pair(&self, cause: SeriesKind, effect: SeriesKind) -> Option<&PairSummary> {
        self.pairs.iter().find(|p| p.cause == cause && p.effect == effect)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Granger tests for all six directed pairs at lags 1 and 2 for every
/// member, with BH applied to the pooled p-values.
pub fn causal_summary(triples: &[TimeSeriesTriple], fdr: f64) -> Result<CausalSummary> {
    if !(0.0 < fdr && fdr < 1.0) {
        return Err(Error::InvalidArgument(format!("fdr must lie in (0, 1), got {fdr}")));
    }
    struct Test {
        pair: usize,
        member: usize,
        lag: usize,
        p: f64,
        result: TestResult,
    }
    let pairs: Vec<(SeriesKind, SeriesKind)> = SeriesKind::ALL
        .iter()
        .flat_map(|&c| SeriesKind::ALL.iter().filter(move |&&e| e != c).map(move |&e| (c, e)))
        .collect();
    let mut tests = Vec::new();
    let mut skipped = 0;
    let mut too_short = 0;
    let mut low_power = 0;
    for (member, t) in triples.iter().enumerate() {
        t.validate()?;
        for (pi, &(c, e)) in pairs.iter().enumerate() {
            for lag in [1, 2] {
                match granger(t.series(c), t.series(e), lag) {
                    Ok(r) => {
                        low_power += usize::from(r.low_power);
                        tests.push(Test { pair: pi, member, lag, p: r.p_value, result: r });
                    }
                    Err(Error::DegenerateSeries(_)) => skipped += 1,
                    Err(Error::SeriesTooShort { .. }) => too_short += 1,
                    Err(other) => return Err(other),
                }
            }
        }
    }
    let p: Vec<f64> = tests.iter().map(|t| t.p).collect();
    let bh = bh_correct(&p, fdr)?;

    let mut summaries: Vec<PairSummary> = pairs
        .iter()
        .enumerate()
        .map(|(pi, &(cause, effect))| {
            let mine: Vec<(&Test, bool)> =
                tests.iter().zip(&bh.rejected).filter(|(t, _)| t.pair == pi).map(|(t, &r)| (t, r)).collect();
            let count = |lag: usize| mine.iter().filter(|(t, _)| t.lag == lag).count();
            let sig = |lag: usize| mine.iter().filter(|(t, r)| t.lag == lag && *r).count();
            let mut members: Vec<usize> = mine.iter().map(|(t, _)| t.member).collect();
            members.dedup();
            let mut sig_members: Vec<usize> = mine.iter().filter(|(_, r)| *r).map(|(t, _)| t.member).collect();
            sig_members.dedup();
            PairSummary {
                cause,
                effect,
                lag1_tests: count(1),
                lag1_significant: sig(1),
                lag1_proportion: ratio(sig(1), count(1)),
                lag2_tests: count(2),
                lag2_significant: sig(2),
                lag2_proportion: ratio(sig(2), count(2)),
                members_tested: members.len(),
                upto2_significant: sig_members.len(),
                upto2_proportion: ratio(sig_members.len(), members.len()),
            }
        })
        .collect();
    summaries.sort_by(|a, b| b.lag1_proportion.total_cmp(&a.lag1_proportion));
    let records = tests
        .iter()
        .zip(&bh.rejected)
        .map(|(t, &rejected)| GrangerRecord {
            label: triples[t.member].label.clone(),
            cause: pairs[t.pair].0,
            effect: pairs[t.pair].1,
            lag: t.lag,
            statistic: t.result.statistic,
            p_value: t.p,
            df2: t.result.df2.unwrap_or(f64::NAN),
            low_power: t.result.low_power,
            rejected,
        })
        .collect();
    Ok(CausalSummary {
        fdr,
        threshold: bh.threshold,
        total_tests: tests.len(),
        skipped,
        too_short,
        low_power,
        pairs: summaries,
        tests: records,
    })
}
