//! Connectivity networks from chat timing and content.
//!
//! A message `q` responds to `p` when it comes from someone else and
//! arrives strictly later, with the gap inside `[t1, t2]`. Edge `(i, j)`
//! sums `weight(p, q)` over such pairs with `p` sent by `i` and `q` by `j`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lexicon::{score_text, EmotionAxis, Lexicon};
use crate::error::{Error, Result};
use crate::matrix::ConnectivityNetwork;
use crate::session::Message;

/// Decay rate per second for response weights.
pub const DEFAULT_GAMMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseWindow {
    t1: f64,
    t2: f64,
}

impl ResponseWindow {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if !(t1.is_finite() && t2.is_finite() && 0.0 <= t1 && t1 <= t2) {
            return Err(Error::InvalidArgument(format!("response window [{t1}, {t2}]")));
        }
        Ok(Self { t1, t2 })
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn t2(&self) -> f64 {
        self.t2
    }

    fn admits(&self, gap: f64) -> bool {
        gap > 0.0 && self.t1 <= gap && gap <= self.t2
    }
}

impl Default for ResponseWindow {
    fn default() -> Self {
        Self { t1: 0.0, t2: 30.0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum NetworkWeight<'a> {
    /// `exp(-gamma |p.time - q.time|)`
    Response { gamma: f64 },
    /// Lexicon score of the response text.
    Sentiment(&'a Lexicon),
    /// Lexicon score of the response text on one affect axis.
    Emotion(&'a Lexicon, EmotionAxis),
}

/// Responses to `m` among `all`.
pub fn response_set<'a>(m: &Message, all: &'a [Message], window: &ResponseWindow) -> Vec<&'a Message> {
    all.iter().filter(|r| r.sender != m.sender && window.admits(r.time - m.time)).collect()
}

/// Builds the `n x n` network over `messages`; an empty log gives the zero
/// matrix.
pub fn build_network(
    messages: &[Message],
    n: usize,
    window: &ResponseWindow,
    weight: NetworkWeight<'_>,
) -> Result<ConnectivityNetwork> {
    if let NetworkWeight::Response { gamma } = weight {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
    }
    if let Some(m) = messages.iter().find(|m| m.sender >= n) {
        return Err(Error::Validation(format!("sender {} outside team of {n}", m.sender)));
    }
    let mut sorted: Vec<&Message> = messages.iter().collect();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));

    let mut a = DMatrix::zeros(n, n);
    for (idx, p) in sorted.iter().enumerate() {
        for q in &sorted[idx + 1..] {
            let gap = q.time - p.time;
            if gap > window.t2 {
                break;
            }
            if q.sender == p.sender || !window.admits(gap) {
                continue;
            }
            let w = match weight {
                NetworkWeight::Response { gamma } => (-gamma * gap.abs()).exp(),
                NetworkWeight::Sentiment(lex) => score_text(&q.text, lex, EmotionAxis::Valence),
                NetworkWeight::Emotion(lex, axis) => score_text(&q.text, lex, axis),
            };
            a[(p.sender, q.sender)] += w;
        }
    }
    Ok(ConnectivityNetwork::from_trusted(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn msg(sender: usize, time: f64, text: &str) -> Message {
        Message { sender, time, text: text.into() }
    }

    #[test]
    fn response_set_cases() {
        let w = ResponseWindow::new(1.0, 30.0).unwrap();
        let m = msg(0, 0.0, "");
        let all = vec![m.clone(), msg(1, 5.0, "")];
        assert_eq!(response_set(&m, &all, &w).len(), 1);
        let all = vec![m.clone(), msg(0, 5.0, "")];
        assert!(response_set(&m, &all, &w).is_empty());
        let all = vec![m.clone(), msg(1, 40.0, "")];
        assert!(response_set(&m, &all, &w).is_empty());
    }

    #[test]
    fn single_pair_decay() {
        let w = ResponseWindow::default();
        let net = build_network(&[msg(0, 10.0, ""), msg(2, 12.0, "")], 3, &w, NetworkWeight::Response { gamma: 0.5 })
            .unwrap();
        assert_abs_diff_eq!(net.get(0, 2), (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(net.get(0, 2), 0.367879, epsilon = 1e-6);
        assert_eq!(net.as_matrix().sum(), net.get(0, 2));
    }

    #[test]
    fn simultaneous_messages_are_not_responses() {
        let w = ResponseWindow::default();
        let net =
            build_network(&[msg(0, 3.0, ""), msg(1, 3.0, "")], 2, &w, NetworkWeight::Response { gamma: 0.1 }).unwrap();
        assert_eq!(net, ConnectivityNetwork::zeros(2));
    }

    #[test]
    fn sentiment_weight_is_response_score() {
        let lex = Lexicon::from_csv_reader("nice,0.5\n".as_bytes()).unwrap();
        let w = ResponseWindow::default();
        let net =
            build_network(&[msg(0, 0.0, "hello"), msg(1, 4.0, "nice one")], 2, &w, NetworkWeight::Sentiment(&lex))
                .unwrap();
        assert_eq!(net.get(0, 1), 0.5);
        assert_eq!(net.get(1, 0), 0.0);
    }

    #[test]
    fn empty_log_and_bad_gamma() {
        let w = ResponseWindow::default();
        assert_eq!(
            build_network(&[], 4, &w, NetworkWeight::Response { gamma: 0.1 }).unwrap(),
            ConnectivityNetwork::zeros(4)
        );
        assert!(build_network(&[], 4, &w, NetworkWeight::Response { gamma: 0.0 }).is_err());
        assert!(ResponseWindow::new(5.0, 1.0).is_err());
    }
}
