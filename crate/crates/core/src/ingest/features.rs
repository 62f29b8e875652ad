//! Per-(team, round) feature bundles.
//!
//! The bundle for round `t` sees influence reports of rounds `< t` and
//! messages and answers of rounds `<= t`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::embeddings::EmbeddingStore;
use super::lexicon::{EmotionAxis, Lexicon};
use super::network::{build_network, NetworkWeight, ResponseWindow, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::matrix::{ConnectivityNetwork, ExpertiseVector, InfluenceMatrix};
use crate::metrics::expertise_series;
use crate::session::TeamSession;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Previous,
    First,
    Average,
    /// `1 y^T`: every row is the expertise vector.
    Expertise,
    Response,
    Sentiment,
    Emotion,
    /// `n x d` content embedding.
    Embedding,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 8] = [
        FeatureKind::Previous,
        FeatureKind::First,
        FeatureKind::Average,
        FeatureKind::Expertise,
        FeatureKind::Response,
        FeatureKind::Sentiment,
        FeatureKind::Emotion,
        FeatureKind::Embedding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Previous => "previous",
            FeatureKind::First => "first",
            FeatureKind::Average => "average",
            FeatureKind::Expertise => "expertise",
            FeatureKind::Response => "response",
            FeatureKind::Sentiment => "sentiment",
            FeatureKind::Emotion => "emotion",
            FeatureKind::Embedding => "embedding",
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkSettings {
    pub window: ResponseWindow,
    pub gamma: f64,
    pub emotion_axis: EmotionAxis,
}

impl Default for NetworkSettings {
    fn default() -> Self {
        Self { window: ResponseWindow::default(), gamma: DEFAULT_GAMMA, emotion_axis: EmotionAxis::default() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lexicons {
    pub sentiment: Option<Lexicon>,
    pub emotion: Option<Lexicon>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub team_id: String,
    pub round: usize,
    pub n: usize,
    pub previous: Option<InfluenceMatrix>,
    pub first: Option<InfluenceMatrix>,
    pub average: Option<InfluenceMatrix>,
    pub expertise: ExpertiseVector,
    pub response: ConnectivityNetwork,
    pub sentiment: Option<ConnectivityNetwork>,
    pub emotion: Option<ConnectivityNetwork>,
    pub embedding: Option<DMatrix<f64>>,
}

impl FeatureBundle {
    pub fn has(&self, kind: FeatureKind) -> bool {
        match kind {
            FeatureKind::Previous => self.previous.is_some(),
            FeatureKind::First => self.first.is_some(),
            FeatureKind::Average => self.average.is_some(),
            FeatureKind::Expertise | FeatureKind::Response => true,
            FeatureKind::Sentiment => self.sentiment.is_some(),
            FeatureKind::Emotion => self.emotion.is_some(),
            FeatureKind::Embedding => self.embedding.is_some(),
        }
    }

    pub fn feature(&self, kind: FeatureKind) -> Result<DMatrix<f64>> {
        let missing = || Error::MissingFeature(format!("{kind} for team {} round {}", self.team_id, self.round));
        Ok(match kind {
            FeatureKind::Previous => self.previous.as_ref().ok_or_else(missing)?.as_matrix().clone(),
            FeatureKind::First => self.first.as_ref().ok_or_else(missing)?.as_matrix().clone(),
            FeatureKind::Average => self.average.as_ref().ok_or_else(missing)?.as_matrix().clone(),
            FeatureKind::Expertise => {
                let y = self.expertise.to_dvector();
                DMatrix::from_fn(self.n, self.n, |_, j| y[j])
            }
            FeatureKind::Response => self.response.as_matrix().clone(),
            FeatureKind::Sentiment => self.sentiment.as_ref().ok_or_else(missing)?.as_matrix().clone(),
            FeatureKind::Emotion => self.emotion.as_ref().ok_or_else(missing)?.as_matrix().clone(),
            FeatureKind::Embedding => self.embedding.clone().ok_or_else(missing)?,
        })
    }

    pub fn features(&self, kinds: &[FeatureKind]) -> Result<Vec<DMatrix<f64>>> {
        kinds.iter().map(|&k| self.feature(k)).collect()
    }

    /// Row `i` of every requested feature, concatenated, for each member.
    pub fn row_features(&self, kinds: &[FeatureKind]) -> Result<Vec<DVector<f64>>> {
        let mats = self.features(kinds)?;
        let width: usize = mats.iter().map(|m| m.ncols()).sum();
        Ok((0..self.n)
            .map(|i| {
                let mut v = DVector::zeros(width);
                let mut off = 0;
                for m in &mats {
                    for c in 0..m.ncols() {
                        v[off + c] = m[(i, c)];
                    }
                    off += m.ncols();
                }
                v
            })
            .collect())
    }
}

/// Builds the bundle for 1-based round `upto_round`.
pub fn assemble_features(
    session: &TeamSession,
    upto_round: usize,
    settings: &NetworkSettings,
    lexicons: &Lexicons,
    embeddings: Option<&EmbeddingStore>,
) -> Result<FeatureBundle> {
    if upto_round == 0 || upto_round > session.rounds.len() {
        return Err(Error::InvalidArgument(format!("round {upto_round} outside 1..={}", session.rounds.len())));
    }
    let n = session.n();
    let t = upto_round;
    let prior: Vec<&InfluenceMatrix> = session.rounds[..t - 1].iter().filter_map(|r| r.influence.as_ref()).collect();
    let previous = if t >= 2 { session.rounds[t - 2].influence.clone() } else { None };
    let first = prior.first().map(|m| (*m).clone());
    let average = if prior.is_empty() {
        None
    } else {
        let sum = prior.iter().fold(DMatrix::zeros(n, n), |acc, m| acc + m.as_matrix());
        Some(InfluenceMatrix::from_trusted(sum / prior.len() as f64))
    };

    let truncated = session.truncated(t);
    let expertise = expertise_series(&truncated).pop().expect("at least one round");
    let messages = truncated.messages_upto(t);
    let window = &settings.window;
    let response = build_network(&messages, n, window, NetworkWeight::Response { gamma: settings.gamma })?;
    let sentiment = lexicons
        .sentiment
        .as_ref()
        .map(|lex| build_network(&messages, n, window, NetworkWeight::Sentiment(lex)))
        .transpose()?;
    let emotion = lexicons
        .emotion
        .as_ref()
        .map(|lex| build_network(&messages, n, window, NetworkWeight::Emotion(lex, settings.emotion_axis)))
        .transpose()?;
    let embedding = embeddings.and_then(|e| e.matrix(&session.team_id, t, &session.member_ids));

    Ok(FeatureBundle {
        team_id: session.team_id.clone(),
        round: t,
        n,
        previous,
        first,
        average,
        expertise,
        response,
        sentiment,
        emotion,
        embedding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{Answer, Message, Question, Round};

    fn session() -> TeamSession {
        let m1 = InfluenceMatrix::from_rows(&[vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        let m2 = InfluenceMatrix::from_rows(&[vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap();
        let round = |m: Option<InfluenceMatrix>, t0: f64, correct: bool| Round {
            questions: vec![Question {
                answers: vec![
                    Answer { member: 0, answer: None, correct },
                    Answer { member: 1, answer: None, correct: !correct },
                ],
            }],
            messages: vec![
                Message { sender: 0, time: t0, text: "a".into() },
                Message { sender: 1, time: t0 + 2.0, text: "b".into() },
            ],
            influence: m,
        };
        TeamSession {
            team_id: "t".into(),
            member_ids: vec!["a".into(), "b".into()],
            rounds: vec![
                round(Some(m1), 0.0, true),
                round(Some(m2), 100.0, true),
                round(Some(InfluenceMatrix::identity(2)), 200.0, false),
                round(None, 300.0, false),
            ],
        }
    }

    #[test]
    fn previous_missing_at_round_one() {
        let b = assemble_features(&session(), 1, &NetworkSettings::default(), &Lexicons::default(), None).unwrap();
        assert!(matches!(b.feature(FeatureKind::Previous), Err(Error::MissingFeature(_))));
        assert!(matches!(b.feature(FeatureKind::Sentiment), Err(Error::MissingFeature(_))));
        assert!(b.feature(FeatureKind::Response).is_ok());
    }

    #[test]
    fn previous_first_average() {
        let s = session();
        let b = assemble_features(&s, 2, &NetworkSettings::default(), &Lexicons::default(), None).unwrap();
        assert_eq!(b.previous.as_ref(), s.rounds[0].influence.as_ref());
        let b = assemble_features(&s, 3, &NetworkSettings::default(), &Lexicons::default(), None).unwrap();
        assert_eq!(b.previous.as_ref(), s.rounds[1].influence.as_ref());
        assert_eq!(b.first.as_ref(), s.rounds[0].influence.as_ref());
        let avg = b.average.unwrap();
        assert!((avg.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((avg.get(1, 1) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn networks_ignore_later_rounds() {
        let s = session();
        let settings = NetworkSettings::default();
        let full = assemble_features(&s, 3, &settings, &Lexicons::default(), None).unwrap();
        let mut altered = s.clone();
        altered.rounds[3].messages.push(Message { sender: 0, time: 303.0, text: "late".into() });
        altered.rounds[3].influence = Some(InfluenceMatrix::uniform(2));
        let again = assemble_features(&altered, 3, &settings, &Lexicons::default(), None).unwrap();
        assert_eq!(full, again);
        // three rounds, one response each
        assert!((full.response.get(0, 1) - 3.0 * (-0.2f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn expertise_is_cumulative_and_row_features_concatenate() {
        let b = assemble_features(&session(), 3, &NetworkSettings::default(), &Lexicons::default(), None).unwrap();
        assert_eq!(b.expertise.to_vec(), vec![2.0 / 3.0, 1.0 / 3.0]);
        let rows = b.row_features(&[FeatureKind::Previous, FeatureKind::Expertise]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].as_slice(), &[0.2, 0.8, 2.0 / 3.0, 1.0 / 3.0]);
    }
}
