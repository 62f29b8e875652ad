//! Precomputed per-member content embeddings.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};

/// Vectors keyed by `(team_id, round, member_id)`, rounds 1-based.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    dim: Option<usize>,
    vectors: HashMap<(String, usize, String), Vec<f64>>,
}

#[derive(Deserialize)]
struct JsonRow {
    team_id: String,
    round: usize,
    member_id: String,
    vector: Vec<f64>,
}

impl EmbeddingStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, team_id: &str, round: usize, member_id: &str, vector: Vec<f64>) -> Result<()> {
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput("embedding"));
        }
        match self.dim {
            Some(d) if d != vector.len() => return Err(Error::DimensionMismatch { expected: d, found: vector.len() }),
            None if vector.is_empty() => return Err(Error::Schema("empty embedding vector".into())),
            _ => self.dim = Some(vector.len()),
        }
        self.vectors.insert((team_id.to_string(), round, member_id.to_string()), vector);
        Ok(())
    }

    /// CSV with header `team_id,round,member_id,v0,v1,...`.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut store = Self::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 4 {
                return Err(Error::Schema(format!("embedding line {}: too few columns", line + 2)));
            }
            let round = rec[1]
                .parse::<usize>()
                .map_err(|_| Error::Schema(format!("embedding line {}: bad round", line + 2)))?;
            let vector = rec
                .iter()
                .skip(3)
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Schema(format!("embedding line {}: bad number", line + 2)))?;
            store.insert(&rec[0], round, &rec[2], vector)?;
        }
        Ok(store)
    }

    /// JSON array of `{team_id, round, member_id, vector}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let rows: Vec<JsonRow> = serde_json::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        let mut store = Self::new();
        for r in rows {
            store.insert(&r.team_id, r.round, &r.member_id, r.vector)?;
        }
        Ok(store)
    }

    /// Loads by extension (`.json`, otherwise CSV).
    pub fn load(path: &Path) -> Result<Self> {
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&std::fs::read_to_string(path)?)
        } else {
            Self::from_csv_reader(std::fs::File::open(path)?)
        }
    }

    /// `n x d` matrix for one team round. `None` when no member has a
    /// vector for that round; members without one get a zero row.
    pub fn matrix(&self, team_id: &str, round: usize, members: &[String]) -> Option<DMatrix<f64>> {
        let d = self.dim?;
        let mut out = DMatrix::zeros(members.len(), d);
        let mut any = false;
        for (i, m) in members.iter().enumerate() {
            if let Some(v) = self.vectors.get(&(team_id.to_string(), round, m.clone())) {
                any = true;
                for (k, x) in v.iter().enumerate() {
                    out[(i, k)] = *x;
                }
            }
        }
        any.then_some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_agree() {
        let csv = "team_id,round,member_id,v0,v1\nt,1,a,0.5,1.0\nt,1,b,-1,2\n";
        let a = EmbeddingStore::from_csv_reader(csv.as_bytes()).unwrap();
        let json = r#"[{"team_id":"t","round":1,"member_id":"a","vector":[0.5,1.0]},
                       {"team_id":"t","round":1,"member_id":"b","vector":[-1,2]}]"#;
        let b = EmbeddingStore::from_json_str(json).unwrap();
        let members = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let ma = a.matrix("t", 1, &members).unwrap();
        assert_eq!(ma, b.matrix("t", 1, &members).unwrap());
        assert_eq!(ma.shape(), (3, 2));
        assert_eq!(ma[(1, 1)], 2.0);
        assert_eq!(ma[(2, 0)], 0.0);
        assert!(a.matrix("t", 2, &members).is_none());
    }

    #[test]
    fn inconsistent_dimension_rejected() {
        let csv = "team_id,round,member_id,v0,v1\nt,1,a,0.5,1.0\nt,1,b,1\n";
        assert!(EmbeddingStore::from_csv_reader(csv.as_bytes()).is_err());
    }
}
