//! Per-round response, sentiment and emotion networks.

use influence_core::ingest::{build_network, Lexicons, NetworkSettings, NetworkWeight};
use influence_core::{ConnectivityNetwork, TeamSession};
use rayon::prelude::*;

use crate::config::{NetworkScope, RunConfig};
use crate::inputs::{load_lexicons, load_sessions, Failure};
use crate::output::{OutputDir, Table};

type Networks = Vec<(usize, &'static str, ConnectivityNetwork)>;

fn team_networks(
    s: &TeamSession,
    scope: NetworkScope,
    settings: &NetworkSettings,
    lex: &Lexicons,
) -> influence_core::Result<Networks> {
    let n = s.n();
    let mut out = Vec::new();
    for r in 1..=s.rounds.len() {
        let messages = match scope {
            NetworkScope::Round => s.rounds[r - 1].messages.clone(),
            NetworkScope::Cumulative => s.messages_upto(r),
        };
        let w = &settings.window;
        out.push((r, "response", build_network(&messages, n, w, NetworkWeight::Response { gamma: settings.gamma })?));
        if let Some(l) = &lex.sentiment {
            out.push((r, "sentiment", build_network(&messages, n, w, NetworkWeight::Sentiment(l))?));
        }
        if let Some(l) = &lex.emotion {
            out.push((r, "emotion", build_network(&messages, n, w, NetworkWeight::Emotion(l, settings.emotion_axis))?));
        }
    }
    Ok(out)
}

pub fn run(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Vec<Failure>> {
    let (sessions, mut failures) = load_sessions(cfg)?;
    let lexicons = load_lexicons(cfg)?;
    let settings = cfg.network.settings()?;
    let per_team: Vec<_> = sessions
        .par_iter()
        .map(|s| (s.team_id.clone(), team_networks(s, cfg.network.scope, &settings, &lexicons)))
        .collect();
    let width = sessions.iter().map(TeamSession::n).max().unwrap_or(0);
    let mut table = Table::matrix(["team", "round", "network"], width);
    for (team, r) in per_team {
        match r {
            Ok(nets) => {
                for (round, kind, a) in nets {
                    table.push_matrix(&[team.clone(), round.to_string(), kind.into()], a.as_matrix());
                }
            }
            Err(e) => failures.push(Failure::new(team, e)),
        }
    }
    out.csv("networks.csv", &table)?;
    Ok(failures)
}
