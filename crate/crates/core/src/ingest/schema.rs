//! JSON session documents.
//!
//! ```json
//! {
//!   "team_id": "t01",
//!   "members": ["a", "b", "c", "d"],
//!   "rounds": [{
//!     "questions": [{"a": {"answer": "x", "correct": true}, "b": {"answer": "y", "correct": false}}],
//!     "messages": [{"sender": "a", "time_s": 3.5, "text": "I think x"}],
//!     "influence_report": [[40, 20, 20, 20], [25, 25, 25, 25], [10, 30, 30, 30], [0, 50, 0, 50]]
//!   }]
//! }
//! ```
//!
//! Influence reports are chip allocations (or already-normalized rows) in
//! member order and are normalized by their row sums.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::InfluenceMatrix;
use crate::session::{Answer, Message, Question, Round, TeamSession};

#[derive(Deserialize, Serialize)]
struct RawSession {
    team_id: String,
    members: Vec<String>,
    rounds: Vec<RawRound>,
}

#[derive(Deserialize, Serialize)]
struct RawRound {
    #[serde(default)]
    questions: Vec<BTreeMap<String, RawAnswer>>,
    #[serde(default)]
    messages: Vec<RawMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    influence_report: Option<Vec<Vec<f64>>>,
}

#[derive(Deserialize, Serialize)]
struct RawAnswer {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    answer: Option<serde_json::Value>,
    correct: bool,
}

#[derive(Deserialize, Serialize)]
struct RawMessage {
    sender: String,
    time_s: f64,
    #[serde(default)]
    text: String,
}

pub fn parse_session(input: &str) -> Result<TeamSession> {
    let raw: RawSession = serde_json::from_str(input).map_err(|e| Error::Schema(e.to_string()))?;
    convert(raw)
}

pub fn parse_session_file(path: &Path) -> Result<TeamSession> {
    let text = std::fs::read_to_string(path)?;
    parse_session(&text).map_err(|e| match e {
        Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Inverse of [`parse_session`]; reports are written as normalized rows.
pub fn session_to_json(session: &TeamSession) -> String {
    let id = |i: usize| session.member_ids[i].clone();
    let raw = RawSession {
        team_id: session.team_id.clone(),
        members: session.member_ids.clone(),
        rounds: session
            .rounds
            .iter()
            .map(|r| RawRound {
                questions: r
                    .questions
                    .iter()
                    .map(|q| {
                        q.answers
                            .iter()
                            .map(|a| {
                                let answer = a.answer.clone().map(serde_json::Value::String);
                                (id(a.member), RawAnswer { answer, correct: a.correct })
                            })
                            .collect()
                    })
                    .collect(),
                messages: r
                    .messages
                    .iter()
                    .map(|m| RawMessage { sender: id(m.sender), time_s: m.time, text: m.text.clone() })
                    .collect(),
                influence_report: r.influence.as_ref().map(|m| m.rows()),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("plain data serializes")
}

/// Parses every `*.json` file in `dir`, sorted by file name.
pub fn load_sessions_dir(dir: &Path) -> Result<Vec<TeamSession>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| parse_session_file(p)).collect()
}

fn convert(raw: RawSession) -> Result<TeamSession> {
    let n = raw.members.len();
    if n < 2 {
        return Err(Error::Validation(format!("team {} has {n} members", raw.team_id)));
    }
    let mut seen = HashSet::new();
    for m in &raw.members {
        if !seen.insert(m.as_str()) {
            return Err(Error::Validation(format!("duplicate member id {m}")));
        }
    }
    let index = |id: &str| -> Result<usize> {
        raw.members.iter().position(|m| m == id).ok_or_else(|| Error::Validation(format!("unknown member id {id}")))
    };

    let mut rounds = Vec::with_capacity(raw.rounds.len());
    for (r, rr) in raw.rounds.iter().enumerate() {
        let round_no = r + 1;
        let mut questions = Vec::with_capacity(rr.questions.len());
        for q in &rr.questions {
            let mut answers = Vec::with_capacity(q.len());
            for (member, a) in q {
                answers.push(Answer {
                    member: index(member)?,
                    answer: a.answer.as_ref().map(|v| match v {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    }),
                    correct: a.correct,
                });
            }
            answers.sort_by_key(|a| a.member);
            questions.push(Question { answers });
        }

        let mut messages = Vec::with_capacity(rr.messages.len());
        for m in &rr.messages {
            if !m.time_s.is_finite() {
                return Err(Error::Validation(format!("round {round_no}: non-finite message time")));
            }
            if let Some(prev) = messages.last().map(|p: &Message| p.time) {
                if m.time_s < prev {
                    return Err(Error::Validation(format!(
                        "round {round_no}: message times decrease ({prev} then {})",
                        m.time_s
                    )));
                }
            }
            messages.push(Message { sender: index(&m.sender)?, time: m.time_s, text: m.text.clone() });
        }

        let influence = match &rr.influence_report {
            None => None,
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|row| row.len() != n) {
                    return Err(Error::Validation(format!("round {round_no}: influence report must be {n}x{n}")));
                }
                Some(
                    InfluenceMatrix::from_allocations(rows)
                        .map_err(|e| Error::Validation(format!("round {round_no}: {e}")))?,
                )
            }
        };
        rounds.push(Round { questions, messages, influence });
    }

    Ok(TeamSession { team_id: raw.team_id, member_ids: raw.members, rounds })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "team_id": "t1",
        "members": ["a", "b", "c", "d"],
        "rounds": [{
            "questions": [],
            "messages": [],
            "influence_report": [[100, 0, 0, 0], [25, 25, 25, 25], [10, 20, 30, 40], [0, 0, 50, 50]]
        }]
    }"#;

    #[test]
    fn minimal_document() {
        let s = parse_session(MINIMAL).unwrap();
        assert_eq!(s.n(), 4);
        assert_eq!(s.rounds.len(), 1);
        let m = s.rounds[0].influence.as_ref().unwrap();
        assert_eq!(m.row(0), vec![1.0, 0.0, 0.0, 0.0]);
        assert!(m.max_row_sum_deviation() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let shape = crate::synthetic::SessionShape::default();
        let s = crate::synthetic::identity_map_session(&mut rng, "rt", &shape, 0.05);
        let back = parse_session(&session_to_json(&s)).unwrap();
        assert_eq!(back.member_ids, s.member_ids);
        for (a, b) in back.rounds.iter().zip(&s.rounds) {
            assert_eq!(a.messages, b.messages);
            assert_eq!(a.questions, b.questions);
            let (ma, mb) = (a.influence.as_ref().unwrap(), b.influence.as_ref().unwrap());
            assert!((ma.as_matrix() - mb.as_matrix()).amax() < 1e-15);
        }
    }

    #[test]
    fn unknown_sender_rejected() {
        let doc = r#"{"team_id": "t", "members": ["a", "b"],
            "rounds": [{"messages": [{"sender": "z", "time_s": 1.0, "text": "hi"}]}]}"#;
        assert!(matches!(parse_session(doc), Err(Error::Validation(_))));
    }

    #[test]
    fn missing_field_is_schema_error() {
        let doc = r#"{"team_id": "t", "rounds": []}"#;
        match parse_session(doc) {
            Err(Error::Schema(msg)) => assert!(msg.contains("members")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn answers_and_messages_parsed() {
        let doc = r#"{"team_id": "t", "members": ["a", "b"],
            "rounds": [{
                "questions": [{"b": {"answer": 3, "correct": false}, "a": {"answer": "x", "correct": true}}],
                "messages": [{"sender": "a", "time_s": 1.0, "text": "hi"},
                             {"sender": "b", "time_s": 2.5, "text": "yes"}]
            }]}"#;
        let s = parse_session(doc).unwrap();
        let q = &s.rounds[0].questions[0];
        assert_eq!(q.answers[0].member, 0);
        assert_eq!(q.answers[1].answer.as_deref(), Some("3"));
        assert_eq!(s.rounds[0].messages[1].sender, 1);
        assert!(s.rounds[0].influence.is_none());
    }

    #[test]
    fn bad_reports_rejected() {
        let doc = r#"{"team_id": "t", "members": ["a", "b"],
            "rounds": [{"influence_report": [[1, 0], [0, 0]]}]}"#;
        assert!(matches!(parse_session(doc), Err(Error::Validation(_))));
        let doc = r#"{"team_id": "t", "members": ["a", "b"],
            "rounds": [{"influence_report": [[1, 0, 0], [0, 1, 0]]}]}"#;
        assert!(matches!(parse_session(doc), Err(Error::Validation(_))));
        let doc = r#"{"team_id": "t", "members": ["a", "b"],
            "rounds": [{"messages": [{"sender": "a", "time_s": 5.0}, {"sender": "b", "time_s": 1.0}]}]}"#;
        assert!(matches!(parse_session(doc), Err(Error::Validation(_))));
    }
}
