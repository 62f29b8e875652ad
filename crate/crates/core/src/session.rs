//! One team's full experiment log.

use serde::Serialize;

use crate::matrix::InfluenceMatrix;

/// A chat message; `sender` is the member index within the team.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Message {
    pub sender: usize,
    pub time: f64,
    pub text: String,
}

/// One member's individual answer to a question.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Answer {
    pub member: usize,
    pub answer: Option<String>,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Question {
    pub answers: Vec<Answer>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Round {
    pub questions: Vec<Question>,
    /// Time-sorted.
    pub messages: Vec<Message>,
    pub influence: Option<InfluenceMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TeamSession {
    pub team_id: String,
    pub member_ids: Vec<String>,
    pub rounds: Vec<Round>,
}

impl TeamSession {
    pub fn n(&self) -> usize {
        self.member_ids.len()
    }

    pub fn member_index(&self, id: &str) -> Option<usize> {
        self.member_ids.iter().position(|m| m == id)
    }

    /// Messages of rounds `1..=round` (1-based), in order.
    pub fn messages_upto(&self, round: usize) -> Vec<Message> {
        self.rounds.iter().take(round).flat_map(|r| r.messages.iter().cloned()).collect()
    }

    /// Number of questions per round.
    pub fn question_counts(&self) -> Vec<usize> {
        self.rounds.iter().map(|r| r.questions.len()).collect()
    }

    /// Session truncated to its first `round` rounds.
    pub fn truncated(&self, round: usize) -> TeamSession {
        TeamSession {
            team_id: self.team_id.clone(),
            member_ids: self.member_ids.clone(),
            rounds: self.rounds.iter().take(round).cloned().collect(),
        }
    }
}
