//! The run configuration file.
//!
//! One TOML document with a section per command. Every field has a default,
//! so an empty file (or no file) is a valid configuration. The resolved
//! configuration is embedded in every output file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use influence_core::baselines::SbtMode;
use influence_core::dynamics::{ModelKind, DEFAULT_TAU};
use influence_core::estimate::{default_lambda_grid, SolverConfig};
use influence_core::evaluation::derive_seed;
use influence_core::evaluation::HoldoutConfig;
use influence_core::ingest::{EmotionAxis, FeatureKind, NetworkSettings, ResponseWindow, DEFAULT_GAMMA};
use influence_core::metrics::KL_EPS;
use influence_core::synthetic::SessionShape;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every random stream; `--seed` overrides it.
    pub seed: u64,
    /// Output directory; `--out` overrides it.
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub network: NetworkConfig,
    pub simulate: SimulateConfig,
    pub forecast: ForecastConfig,
    pub fit: FitConfig,
    pub analyze: AnalyzeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            network: NetworkConfig::default(),
            simulate: SimulateConfig::default(),
            forecast: ForecastConfig::default(),
            fit: FitConfig::default(),
            analyze: AnalyzeConfig::default(),
        }
    }
}

/// Input locations. Relative paths resolve against the config file's
/// directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Directory of session JSON documents.
    pub sessions_dir: Option<PathBuf>,
    /// `token,score` CSV.
    pub sentiment_lexicon: Option<PathBuf>,
    /// `token,valence,arousal,dominance` CSV.
    pub emotion_lexicon: Option<PathBuf>,
    /// Per-member embeddings, CSV or JSON.
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkScope {
    /// Messages of the round alone.
    #[default]
    Round,
    /// Messages of every round up to and including it.
    Cumulative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Response gaps admitted, in seconds.
    pub window_start: f64,
    pub window_end: f64,
    /// Decay per second of response weights.
    pub gamma: f64,
    pub emotion_axis: EmotionAxis,
    /// Message scope of the `networks` command. Model features are always
    /// cumulative.
    pub scope: NetworkScope,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let w = ResponseWindow::default();
        Self {
            window_start: w.t1(),
            window_end: w.t2(),
            gamma: DEFAULT_GAMMA,
            emotion_axis: EmotionAxis::default(),
            scope: NetworkScope::default(),
        }
    }
}

impl NetworkConfig {
    pub fn settings(&self) -> anyhow::Result<NetworkSettings> {
        Ok(NetworkSettings {
            window: ResponseWindow::new(self.window_start, self.window_end)?,
            gamma: self.gamma,
            emotion_axis: self.emotion_axis,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialMatrix {
    #[default]
    Random,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    /// Reports follow the configured model.
    #[default]
    Dynamics,
    /// Every round repeats one matrix.
    Constant,
    /// Previous report plus Gaussian noise.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelKind,
    pub tau: f64,
    pub steps: usize,
    pub members: usize,
    /// Constant expertise driving the trajectories, one entry per member.
    pub expertise: Vec<f64>,
    pub initial: InitialMatrix,
    /// Independent trajectories, each from its own start.
    pub runs: usize,
    /// Synthetic sessions written next to the trajectories (0 = none).
    pub sessions: usize,
    pub generator: Generator,
    pub rounds: usize,
    pub questions_per_round: usize,
    pub messages_per_round: usize,
    /// Noise level of the identity generator.
    pub noise: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let shape = SessionShape::default();
        Self {
            model: ModelKind::DRP,
            tau: DEFAULT_TAU,
            steps: 200,
            members: shape.members,
            expertise: vec![1.0; shape.members],
            initial: InitialMatrix::default(),
            runs: 1,
            sessions: 0,
            generator: Generator::default(),
            rounds: shape.rounds,
            questions_per_round: shape.questions_per_round,
            messages_per_round: shape.messages_per_round,
            noise: 0.01,
        }
    }
}

impl SimulateConfig {
    pub fn shape(&self) -> SessionShape {
        SessionShape {
            members: self.members,
            rounds: self.rounds,
            questions_per_round: self.questions_per_round,
            messages_per_round: self.messages_per_round,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    /// Step size shared by the dynamics models.
    pub tau: f64,
    pub sbt_mode: SbtMode,
    /// Clamp for predicted entries inside the KL logarithm.
    pub kl_eps: f64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self { tau: DEFAULT_TAU, sbt_mode: SbtMode::default(), kl_eps: KL_EPS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Held-out share of teams.
    pub holdout: f64,
    pub bootstrap: usize,
    pub features: Vec<FeatureKind>,
    /// Fixed regularization; when absent it is chosen from `lambda_grid`.
    pub lambda: Option<f64>,
    pub lambda_grid: Vec<f64>,
    /// Validation share of the training teams for lambda selection.
    pub validation: f64,
    pub softmax: bool,
    pub solver: SolverConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        let h = HoldoutConfig::default();
        Self {
            holdout: h.holdout,
            bootstrap: h.bootstrap,
            features: h.features,
            lambda: h.lambda,
            lambda_grid: default_lambda_grid(),
            validation: h.validation,
            softmax: h.softmax,
            solver: h.solver,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Benjamini-Hochberg level for the pooled Granger tests.
    pub fdr: f64,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self { fdr: 0.05 }
    }
}

/// Streams derived from the root seed by stable hashing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DerivedSeeds {
    pub split: u64,
    pub bootstrap: u64,
    pub random_baseline: u64,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("invalid config")?;
        Ok(cfg)
    }

    /// Reads `path` and rebases relative data paths onto its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.data.sessions_dir,
            &mut cfg.data.sentiment_lexicon,
            &mut cfg.data.emotion_lexicon,
            &mut cfg.data.embeddings,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn seeds(&self) -> DerivedSeeds {
        DerivedSeeds {
            split: derive_seed(self.seed, &["fit", "split"]),
            bootstrap: derive_seed(self.seed, &["fit", "bootstrap"]),
            random_baseline: derive_seed(self.seed, &["baseline", "random"]),
        }
    }

    pub fn holdout(&self) -> HoldoutConfig {
        let seeds = self.seeds();
        HoldoutConfig {
            holdout: self.fit.holdout,
            split_seed: seeds.split,
            bootstrap: self.fit.bootstrap,
            bootstrap_seed: seeds.bootstrap,
            features: self.fit.features.clone(),
            lambda: self.fit.lambda,
            lambda_grid: self.fit.lambda_grid.clone(),
            validation: self.fit.validation,
            softmax: self.fit.softmax,
            solver: self.fit.solver.clone(),
            tau: self.forecast.tau,
            sbt_mode: self.forecast.sbt_mode,
            random_seed: seeds.random_baseline,
        }
    }

    /// Rejects values the commands cannot run with.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.network.settings()?;
        let s = &self.simulate;
        if s.members < 2 {
            bail!("simulate.members must be at least 2");
        }
        if s.expertise.len() != s.members {
            bail!("simulate.expertise has {} entries for {} members", s.expertise.len(), s.members);
        }
        for tau in [s.tau, self.forecast.tau] {
            if !(0.0 < tau && tau < 1.0) {
                bail!("tau must lie in (0, 1), got {tau}");
            }
        }
        if !(0.0 < self.fit.holdout && self.fit.holdout < 1.0) {
            bail!("fit.holdout must lie in (0, 1)");
        }
        if self.fit.bootstrap == 0 {
            bail!("fit.bootstrap must be positive");
        }
        if self.fit.features.is_empty() {
            bail!("fit.features is empty");
        }
        self.fit.solver.validate()?;
        if !(0.0 < self.analyze.fdr && self.analyze.fdr < 1.0) {
            bail!("analyze.fdr must lie in (0, 1)");
        }
        for p in
            [&self.data.sessions_dir, &self.data.sentiment_lexicon, &self.data.emotion_lexicon, &self.data.embeddings]
                .into_iter()
                .flatten()
        {
            if !p.exists() {
                bail!("configured path {} does not exist", p.display());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.fit.lambda = Some(0.01);
        cfg.network.scope = NetworkScope::Cumulative;
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("[fit]\nholdot = 0.3\n").is_err());
    }

    #[test]
    fn section_values_parse() {
        let cfg = RunConfig::from_toml(
            "seed = 9\n[simulate]\nmodel = \"D\"\nmembers = 3\nexpertise = [0.2, 0.5, 0.9]\n[fit]\nfeatures = [\"previous\", \"response\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.simulate.model, ModelKind::D);
        assert_eq!(cfg.fit.features, vec![FeatureKind::Previous, FeatureKind::Response]);
        cfg.validate().unwrap();
    }

    #[test]
    fn seeds_follow_root() {
        let a = RunConfig::default();
        let b = RunConfig { seed: 1, ..RunConfig::default() };
        assert_ne!(a.seeds(), b.seeds());
        assert_eq!(a.seeds(), RunConfig::default().seeds());
    }
}
