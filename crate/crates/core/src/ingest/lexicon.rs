//! Pluggable word lexicons for sentiment and emotion scoring.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affect {
    pub valence: f64,
    pub arousal: f64,
    pub dominance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionAxis {
    #[default]
    Valence,
    Arousal,
    Dominance,
}

/// `token,score` (sentiment) or `token,valence,arousal,dominance` (emotion).
#[derive(Debug, Clone, PartialEq)]
pub enum Lexicon {
    Sentiment(HashMap<String, f64>),
    Emotion(HashMap<String, Affect>),
}

impl Lexicon {
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut sentiment = HashMap::new();
        let mut emotion = HashMap::new();
        let mut width = None;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.is_empty() || rec.iter().all(str::is_empty) {
                continue;
            }
            let nums: std::result::Result<Vec<f64>, _> = rec.iter().skip(1).map(str::parse::<f64>).collect();
            let nums = match nums {
                Ok(v) => v,
                // header row
                Err(_) if line == 0 => continue,
                Err(_) => return Err(Error::Schema(format!("lexicon line {}: bad number", line + 1))),
            };
            if nums.iter().any(|x| !x.is_finite()) {
                return Err(Error::Schema(format!("lexicon line {}: non-finite score", line + 1)));
            }
            let w = *width.get_or_insert(nums.len());
            if w != nums.len() {
                return Err(Error::Schema(format!("lexicon line {}: inconsistent column count", line + 1)));
            }
            let token = rec[0].to_lowercase();
            match w {
                1 => {
                    sentiment.insert(token, nums[0]);
                }
                3 => {
                    emotion.insert(token, Affect { valence: nums[0], arousal: nums[1], dominance: nums[2] });
                }
                _ => return Err(Error::Schema(format!("lexicon rows need 2 or 4 columns, got {}", w + 1))),
            }
        }
        Ok(if width == Some(3) { Lexicon::Emotion(emotion) } else { Lexicon::Sentiment(sentiment) })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn token_score(&self, token: &str, axis: EmotionAxis) -> Option<f64> {
        match self {
            Lexicon::Sentiment(map) => map.get(token).copied(),
            Lexicon::Emotion(map) => map.get(token).map(|a| match axis {
                EmotionAxis::Valence => a.valence,
                EmotionAxis::Arousal => a.arousal,
                EmotionAxis::Dominance => a.dominance,
            }),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Lexicon::Sentiment(m) => m.len(),
            Lexicon::Emotion(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Lowercased runs of alphanumeric characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

/// Mean lexicon score over matched tokens, 0 when nothing matches.
/// `axis` selects the emotion dimension and is ignored by sentiment lexicons.
pub fn score_text(text: &str, lexicon: &Lexicon, axis: EmotionAxis) -> f64 {
    let (sum, count) =
        tokenize(text).filter_map(|t| lexicon.token_score(&t, axis)).fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}
