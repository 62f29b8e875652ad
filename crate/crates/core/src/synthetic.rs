//! Seeded generators for synthetic sessions and time series.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analytics::TimeSeriesTriple;
use crate::dynamics::{step, DynamicsConfig};
use crate::error::Result;
use crate::estimate::project_rows;
use crate::matrix::InfluenceMatrix;
use crate::metrics::expertise_series;
use crate::session::{Answer, Message, Question, Round, TeamSession};

/// Seconds between the starts of consecutive rounds' chats.
pub const ROUND_SPACING: f64 = 600.0;

const VOCAB: [&str; 12] =
    ["yes", "no", "maybe", "agree", "great", "wrong", "think", "answer", "sure", "good", "bad", "ok"];

/// Row-stochastic matrix with flat-Dirichlet rows.
pub fn random_stochastic<R: Rng>(rng: &mut R, n: usize) -> InfluenceMatrix {
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        for (j, d) in draws.into_iter().enumerate() {
            m[(i, j)] = d / total;
        }
    }
    InfluenceMatrix::from_trusted(m)
}

/// Like [`random_stochastic`] but every entry is at least `floor / n`.
pub fn random_positive_stochastic<R: Rng>(rng: &mut R, n: usize, floor: f64) -> InfluenceMatrix {
    let base = random_stochastic(rng, n).into_matrix();
    InfluenceMatrix::from_trusted(base * (1.0 - floor) + DMatrix::from_element(n, n, floor / n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionShape {
    pub members: usize,
    pub rounds: usize,
    pub questions_per_round: usize,
    pub messages_per_round: usize,
}

impl Default for SessionShape {
    fn default() -> Self {
        Self { members: 4, rounds: 5, questions_per_round: 10, messages_per_round: 20 }
    }
}

fn member_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("m{i}")).collect()
}

/// Answers with per-member success probabilities drawn once per session.
fn questions<R: Rng>(rng: &mut R, skill: &[f64], count: usize) -> Vec<Question> {
    (0..count)
        .map(|_| Question {
            answers: skill
                .iter()
                .enumerate()
                .map(|(member, &p)| Answer { member, answer: None, correct: rng.random::<f64>() < p })
                .collect(),
        })
        .collect()
}

/// Time-sorted chat inside `[start, start + 300)`.
fn chat<R: Rng>(rng: &mut R, n: usize, count: usize, start: f64) -> Vec<Message> {
    let mut times: Vec<f64> = (0..count).map(|_| start + 300.0 * rng.random::<f64>()).collect();
    times.sort_by(f64::total_cmp);
    times
        .into_iter()
        .map(|time| {
            let words = rng.random_range(1..5);
            let text = (0..words).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect::<Vec<_>>().join(" ");
            Message { sender: rng.random_range(0..n), time, text }
        })
        .collect()
}

/// Session with random answers and chat but no reports yet.
fn skeleton<R: Rng>(rng: &mut R, team_id: &str, shape: &SessionShape) -> TeamSession {
    let n = shape.members;
    // skills keep every member's expected rate away from zero
    let skill: Vec<f64> = (0..n).map(|_| 0.2 + 0.7 * rng.random::<f64>()).collect();
    let rounds = (0..shape.rounds)
        .map(|r| Round {
            questions: questions(rng, &skill, shape.questions_per_round),
            messages: chat(rng, n, shape.messages_per_round, r as f64 * ROUND_SPACING),
            influence: None,
        })
        .collect();
    TeamSession { team_id: team_id.into(), member_ids: member_ids(n), rounds }
}

/// Reports follow `M(t+1) = T(M(t), y(t))` from a random strictly positive
/// start, with `y(t)` the session's own cumulative expertise.
pub fn dynamics_session<R: Rng>(
    rng: &mut R,
    team_id: &str,
    shape: &SessionShape,
    config: &DynamicsConfig,
) -> Result<TeamSession> {
    let mut s = skeleton(rng, team_id, shape);
    let ys = expertise_series(&s);
    let mut m = random_positive_stochastic(rng, shape.members, 0.2);
    for (t, y) in ys.iter().enumerate() {
        s.rounds[t].influence = Some(m.clone());
        m = step(config, &m, y)?;
    }
    Ok(s)
}

/// Every round reports the same random matrix.
pub fn constant_session<R: Rng>(rng: &mut R, team_id: &str, shape: &SessionShape) -> TeamSession {
    let mut s = skeleton(rng, team_id, shape);
    let m = random_positive_stochastic(rng, shape.members, 0.2);
    for r in &mut s.rounds {
        r.influence = Some(m.clone());
    }
    s
}

/// `M(t) = M(t-1) + noise`, projected back onto the row-stochastic set;
/// `noise = 0` makes the previous matrix an exact predictor.
pub fn identity_map_session<R: Rng>(rng: &mut R, team_id: &str, shape: &SessionShape, noise: f64) -> TeamSession {
    let mut s = skeleton(rng, team_id, shape);
    let n = shape.members;
    let mut m = random_stochastic(rng, n);
    for r in &mut s.rounds {
        r.influence = Some(m.clone());
        if noise > 0.0 {
            let e = DMatrix::from_fn(n, n, |_, _| {
                let z: f64 = StandardNormal.sample(rng);
                noise * z
            });
            m = project_rows(&(m.as_matrix() + e));
        }
    }
    s
}

/// Series pair with `y_t = coef x_{t-1} + noise e_t`, `x` standard normal.
pub fn lagged_pair<R: Rng>(rng: &mut R, len: usize, coef: f64, noise: f64) -> (Vec<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    let mut y = vec![0.0; len];
    for t in 0..len {
        let e: f64 = StandardNormal.sample(rng);
        y[t] = noise * e + if t > 0 { coef * x[t - 1] } else { 0.0 };
    }
    (x, y)
}

pub fn white_noise<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Members whose confidence follows their expertise one round later;
/// persuasiveness is independent noise.
pub fn expertise_drives_confidence<R: Rng>(rng: &mut R, members: usize, len: usize) -> Vec<TimeSeriesTriple> {
    (0..members)
        .map(|i| {
            let (expertise, confidence) = lagged_pair(rng, len, 0.9, 0.1);
            TimeSeriesTriple { label: format!("m{i}"), expertise, confidence, persuasiveness: white_noise(rng, len) }
        })
        .collect()
}

/// Three mutually independent white-noise series per member.
pub fn noise_population<R: Rng>(rng: &mut R, members: usize, len: usize) -> Vec<TimeSeriesTriple> {
    (0..members)
        .map(|i| TimeSeriesTriple {
            label: format!("m{i}"),
            expertise: white_noise(rng, len),
            confidence: white_noise(rng, len),
            persuasiveness: white_noise(rng, len),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ModelKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_are_seeded() {
        let shape = SessionShape::default();
        let a = dynamics_session(&mut ChaCha8Rng::seed_from_u64(1), "t", &shape, &DynamicsConfig::default()).unwrap();
        let b = dynamics_session(&mut ChaCha8Rng::seed_from_u64(1), "t", &shape, &DynamicsConfig::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.rounds.iter().all(|r| r.influence.is_some()));
        assert!(a.rounds.iter().all(|r| r.messages.windows(2).all(|w| w[0].time <= w[1].time)));
    }

    #[test]
    fn dynamics_session_follows_model() {
        let shape = SessionShape { rounds: 3, ..SessionShape::default() };
        let cfg = DynamicsConfig::new(0.4, ModelKind::DR).unwrap();
        let s = dynamics_session(&mut ChaCha8Rng::seed_from_u64(4), "t", &shape, &cfg).unwrap();
        let ys = expertise_series(&s);
        let m1 = s.rounds[0].influence.as_ref().unwrap();
        let m2 = step(&cfg, m1, &ys[0]).unwrap();
        assert_eq!(s.rounds[1].influence.as_ref().unwrap(), &m2);
    }

    #[test]
    fn identity_session_repeats_without_noise() {
        let s = identity_map_session(&mut ChaCha8Rng::seed_from_u64(2), "t", &SessionShape::default(), 0.0);
        let first = s.rounds[0].influence.clone();
        assert!(s.rounds.iter().all(|r| r.influence == first));
    }
}
