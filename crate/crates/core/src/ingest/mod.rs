//! Session parsing, lexicon scoring, connectivity networks and feature
//! assembly for the estimators.

mod embeddings;
mod features;
mod lexicon;
mod network;
mod schema;

pub use embeddings::EmbeddingStore;
pub use features::{assemble_features, FeatureBundle, FeatureKind, Lexicons, NetworkSettings};
pub use lexicon::{score_text, tokenize, Affect, EmotionAxis, Lexicon};
pub use network::{build_network, response_set, NetworkWeight, ResponseWindow, DEFAULT_GAMMA};
pub use schema::{load_sessions_dir, parse_session, parse_session_file, session_to_json};
