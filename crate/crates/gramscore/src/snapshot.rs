//! Model files and a backend-agnostic model handle.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use gramscore_core::model::{Example, FeaturizerConfig, FeaturizerModel, LinearParams, RegressionModel, FEATURE_NAMES};

#[cfg(feature = "encoder")]
use crate::encoder::EncoderModel;

pub const FEATURIZER_FORMAT: &str = "gramscore-featurizer";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerFile {
    pub format: String,
    pub version: String,
    pub config: FeaturizerConfig,
    pub feature_names: Vec<String>,
    pub params: LinearParams,
}

pub fn save_featurizer(path: &Path, model: &FeaturizerModel) -> Result<()> {
    let file = FeaturizerFile {
        format: FEATURIZER_FORMAT.to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        config: *model.config(),
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        params: model.params().clone(),
    };
    let mut json = serde_json::to_string_pretty(&file)?;
    json.push('\n');
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))
}

pub fn load_featurizer(path: &Path) -> Result<FeaturizerModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: FeaturizerFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if file.format != FEATURIZER_FORMAT {
        bail!("{} is not a featurizer model file", path.display());
    }
    if file
        .feature_names
        .iter()
        .map(String::as_str)
        .ne(FEATURE_NAMES.iter().copied())
    {
        bail!("{} was written for a different feature set", path.display());
    }
    Ok(FeaturizerModel::from_params(file.config, file.params)?)
}

/// Either backend behind one type.
#[derive(Debug)]
pub enum AnyModel {
    Featurizer(FeaturizerModel),
    #[cfg(feature = "encoder")]
    Encoder(Box<EncoderModel>),
}

#[derive(Debug, Clone)]
pub enum AnyParams {
    Featurizer(LinearParams),
    #[cfg(feature = "encoder")]
    Encoder(Vec<(String, candle_core::Tensor)>),
}

impl AnyModel {
    /// File name used for this backend inside an output directory.
    pub fn file_name(&self) -> &'static str {
        match self {
            AnyModel::Featurizer(_) => "model.json",
            #[cfg(feature = "encoder")]
            AnyModel::Encoder(_) => "model.safetensors",
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            AnyModel::Featurizer(m) => save_featurizer(path, m),
            #[cfg(feature = "encoder")]
            AnyModel::Encoder(m) => m.save(path),
        }
    }

    /// Loads either kind of model file, chosen by extension.
    pub fn load(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(AnyModel::Featurizer(load_featurizer(path)?)),
            #[cfg(feature = "encoder")]
            Some("safetensors") => Ok(AnyModel::Encoder(Box::new(EncoderModel::load(path)?))),
            #[cfg(not(feature = "encoder"))]
            Some("safetensors") => bail!("this build has no encoder backend"),
            _ => bail!("unrecognized model file {}", path.display()),
        }
    }
}

impl RegressionModel for AnyModel {
    type Params = AnyParams;

    fn predict(&self, text: &str) -> gramscore_core::Result<f64> {
        match self {
            AnyModel::Featurizer(m) => m.predict(text),
            #[cfg(feature = "encoder")]
            AnyModel::Encoder(m) => m.predict(text),
        }
    }

    fn predict_batch(&self, texts: &[&str]) -> gramscore_core::Result<Vec<f64>> {
        match self {
            AnyModel::Featurizer(m) => m.predict_batch(texts),
            #[cfg(feature = "encoder")]
            AnyModel::Encoder(m) => m.predict_batch(texts),
        }
    }

    fn train_step(&mut self, batch: &[Example<'_>], learning_rate: f64) -> gramscore_core::Result<f64> {
        match self {
            AnyModel::Featurizer(m) => m.train_step(batch, learning_rate),
            #[cfg(feature = "encoder")]
            AnyModel::Encoder(m) => m.train_step(batch, learning_rate),
        }
    }

    fn snapshot(&self) -> AnyParams {
        match self {
            AnyModel::Featurizer(m) => AnyParams::Featurizer(m.snapshot()),
            #[cfg(feature = "encoder")]
            AnyModel::Encoder(m) => AnyParams::Encoder(m.snapshot()),
        }
    }

    fn restore(&mut self, params: AnyParams) {
        match (self, params) {
            (AnyModel::Featurizer(m), AnyParams::Featurizer(p)) => m.restore(p),
            #[cfg(feature = "encoder")]
            (AnyModel::Encoder(m), AnyParams::Encoder(p)) => m.restore(p),
            #[allow(unreachable_patterns)]
            _ => panic!("snapshot belongs to a different backend"),
        }
    }
}
