//! Loading sessions, lexicons and embeddings named in the config.

use std::collections::HashSet;
use std::path::Path;

use anyhow::{bail, Context};
use influence_core::ingest::{parse_session_file, EmbeddingStore, Lexicon, Lexicons};
use influence_core::TeamSession;
use serde::Serialize;

use crate::config::RunConfig;

/// A team (or session file) that could not be processed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub team: String,
    pub error: String,
}

impl Failure {
    pub fn new(team: impl Into<String>, error: impl std::fmt::Display) -> Self {
        Self { team: team.into(), error: error.to_string() }
    }
}

/// Parses every `*.json` in the sessions directory. Files that fail to
/// parse become failures keyed by file name; duplicate team ids keep the
/// first file in name order.
pub fn load_sessions(cfg: &RunConfig) -> anyhow::Result<(Vec<TeamSession>, Vec<Failure>)> {
    let Some(dir) = &cfg.data.sessions_dir else {
        bail!("data.sessions_dir is required for this command");
    };
    load_sessions_from(dir)
}

pub fn load_sessions_from(dir: &Path) -> anyhow::Result<(Vec<TeamSession>, Vec<Failure>)> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut sessions = Vec::new();
    let mut failures = Vec::new();
    let mut seen = HashSet::new();
    for p in paths {
        let name = p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        match parse_session_file(&p) {
            Ok(s) if !seen.insert(s.team_id.clone()) => {
                failures.push(Failure::new(name, format!("duplicate team id {}", s.team_id)))
            }
            Ok(s) => sessions.push(s),
            Err(e) => failures.push(Failure::new(name, e)),
        }
    }
    if sessions.is_empty() && failures.is_empty() {
        bail!("no session documents in {}", dir.display());
    }
    Ok((sessions, failures))
}

pub fn load_lexicons(cfg: &RunConfig) -> anyhow::Result<Lexicons> {
    let load = |p: &Option<std::path::PathBuf>| -> anyhow::Result<Option<Lexicon>> {
        p.as_ref().map(|p| Lexicon::load(p).with_context(|| format!("lexicon {}", p.display()))).transpose()
    };
    Ok(Lexicons { sentiment: load(&cfg.data.sentiment_lexicon)?, emotion: load(&cfg.data.emotion_lexicon)? })
}

pub fn load_embeddings(cfg: &RunConfig) -> anyhow::Result<Option<EmbeddingStore>> {
    cfg.data
        .embeddings
        .as_ref()
        .map(|p| EmbeddingStore::load(p).with_context(|| format!("embeddings {}", p.display())))
        .transpose()
}
