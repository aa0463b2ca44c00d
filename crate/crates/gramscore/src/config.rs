//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gramscore_core::inject::ErrorType;
use gramscore_core::metrics::RoundingPolicy;
use gramscore_core::synth::SynthConfig;
use gramscore_core::trainer::{recommended_learning_rate, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LlmBackend {
    Live,
    #[default]
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelBackend {
    #[default]
    Featurizer,
    Encoder,
}

macro_rules! enum_from_str {
    ($ty:ty, $($name:literal => $v:expr),+) => {
        impl FromStr for $ty {
            type Err = anyhow::Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($v),)+
                    other => bail!("unknown value {other:?}"),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = match self { $(v if *v == $v => $name,)+ _ => unreachable!() };
                f.write_str(s)
            }
        }
    };
}

enum_from_str!(LlmBackend, "live" => LlmBackend::Live, "mock" => LlmBackend::Mock);
enum_from_str!(ModelBackend, "featurizer" => ModelBackend::Featurizer, "encoder" => ModelBackend::Encoder);

/// Everything a command may need. Paths are optional here; each command
/// checks for the ones it uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub rubric: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub suite: Option<PathBuf>,

    pub backend: LlmBackend,
    pub model_backend: ModelBackend,

    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// `None` picks the backend default.
    pub learning_rate: Option<f64>,
    pub seed: u64,
    pub shuffle: bool,
    pub alpha_grid: Vec<f64>,

    pub rounding_policy: RoundingPolicy,
    pub retries: usize,
    pub concurrency: usize,
    pub max_rejection_rate: f64,
    pub mock_corruption_rate: f64,

    pub intensities: Vec<f64>,
    pub error_types: Vec<ErrorType>,
    pub impact_threshold: f64,
    pub score_threshold: f64,

    pub n_train: usize,
    pub n_test: usize,
    pub synth: SynthConfig,

    pub encoder_name: Option<String>,
    pub max_tokens: usize,
}

pub const DEFAULT_ENCODER_LEARNING_RATE: f64 = 2e-5;

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        ExperimentConfig {
            train: None,
            test: None,
            cache: None,
            rubric: None,
            model_path: None,
            suite: None,
            backend: LlmBackend::Mock,
            model_backend: ModelBackend::Featurizer,
            alpha: train.alpha,
            epochs: train.epochs,
            batch_size: train.batch_size,
            learning_rate: None,
            seed: 0,
            shuffle: true,
            alpha_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            rounding_policy: RoundingPolicy::NearestIntegerClamped,
            retries: 3,
            concurrency: 4,
            max_rejection_rate: 0.1,
            mock_corruption_rate: 0.0,
            intensities: vec![0.0, 0.05, 0.1, 0.2, 0.3],
            error_types: ErrorType::ALL.to_vec(),
            impact_threshold: 0.25,
            score_threshold: 4.5,
            n_train: 2000,
            n_test: 500,
            synth: SynthConfig::default(),
            encoder_name: None,
            max_tokens: 256,
        }
    }
}

fn list<T: FromStr>(v: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow!("{s:?}: {e}")))
        .collect()
}

fn parse<T: FromStr>(v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| anyhow!("{v:?}: {e}"))
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse_str(&text, base).with_context(|| format!("in {}", path.display()))
    }

    /// Parses `key = value` lines; `#` starts a comment. Relative paths are
    /// resolved against `base`.
    pub fn parse_str(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
            cfg.set(k.trim(), v.trim(), base)
                .with_context(|| format!("line {}: key {}", i + 1, k.trim()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str, base: &Path) -> Result<()> {
        let path = || Some(base.join(v));
        match key {
            "train" => self.train = path(),
            "test" => self.test = path(),
            "cache" => self.cache = path(),
            "rubric" => self.rubric = path(),
            "model" => self.model_path = path(),
            "suite" => self.suite = path(),
            "backend" => self.backend = parse(v)?,
            "model_backend" => self.model_backend = parse(v)?,
            "alpha" => self.alpha = parse(v)?,
            "epochs" => self.epochs = parse(v)?,
            "batch_size" => self.batch_size = parse(v)?,
            "learning_rate" => self.learning_rate = if v == "auto" { None } else { Some(parse(v)?) },
            "seed" => self.seed = parse(v)?,
            "shuffle" => self.shuffle = parse(v)?,
            "alpha_grid" => self.alpha_grid = list(v)?,
            "rounding_policy" => self.rounding_policy = parse(v)?,
            "retries" => self.retries = parse(v)?,
            "concurrency" => self.concurrency = parse(v)?,
            "max_rejection_rate" => self.max_rejection_rate = parse(v)?,
            "mock_corruption_rate" => self.mock_corruption_rate = parse(v)?,
            "intensities" => self.intensities = list(v)?,
            "error_types" => self.error_types = list(v)?,
            "impact_threshold" => self.impact_threshold = parse(v)?,
            "score_threshold" => self.score_threshold = parse(v)?,
            "n_train" => self.n_train = parse(v)?,
            "n_test" => self.n_test = parse(v)?,
            "terse_fraction" => self.synth.terse_fraction = parse(v)?,
            "min_error_types" => self.synth.min_error_types = parse(v)?,
            "max_error_types" => self.synth.max_error_types = parse(v)?,
            "max_budget" => self.synth.max_budget = parse(v)?,
            "penalty" => self.synth.penalty = parse(v)?,
            "encoder_name" => self.encoder_name = Some(v.to_owned()),
            "max_tokens" => self.max_tokens = parse(v)?,
            "api_key" | "endpoint" | "llm_api_key" => {
                bail!("credentials are read from the environment only, never from config files")
            }
            other => bail!("unknown key {other:?}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config(1)?.validate()?;
        if let Some(a) = self.alpha_grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            bail!("alpha_grid value {a} outside [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.mock_corruption_rate) {
            bail!("mock_corruption_rate must be in [0, 1]");
        }
        if self.retries == 0 {
            bail!("retries must be at least 1");
        }
        if self.max_tokens == 0 {
            bail!("max_tokens must be positive");
        }
        Ok(())
    }

    /// Trainer settings for `n` samples, filling in the backend's default
    /// learning rate when none is configured.
    pub fn train_config(&self, n: usize) -> Result<TrainConfig> {
        let learning_rate = self.learning_rate.unwrap_or(match self.model_backend {
            ModelBackend::Featurizer => recommended_learning_rate(n),
            ModelBackend::Encoder => DEFAULT_ENCODER_LEARNING_RATE,
        });
        let cfg = TrainConfig {
            alpha: self.alpha,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate,
            seed: self.seed,
            shuffle: self.shuffle,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Hash of every setting except file paths, so relocating a run does not
    /// change it.
    pub fn hash(&self) -> String {
        let mut portable = self.clone();
        portable.train = None;
        portable.test = None;
        portable.cache = None;
        portable.model_path = None;
        portable.suite = None;
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&portable).expect("config serializes"));
        if let Some(r) = &self.rubric {
            h.update(std::fs::read(r).unwrap_or_default());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
