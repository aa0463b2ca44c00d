//! Transformer encoder backend: BERT-style encoder, mean pooling over
//! non-padding tokens, and a linear projection to one score.
//!
//! Pre-trained weights are read from a local directory holding
//! `config.json`, `tokenizer.json` and `model.safetensors`. A trained model
//! is saved as one safetensors file whose metadata embeds the backend
//! config, the encoder config and the tokenizer.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use candle_core::{DType, Device, Tensor, Var, D};
use candle_nn::{AdamW, Linear, Module, Optimizer, ParamsAdamW, VarBuilder, VarMap};
use candle_transformers::models::bert::{BertModel, Config as BertConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tokenizers::{Tokenizer, TruncationDirection, TruncationParams};

use gramscore_core::model::{validate_batch, Example, RegressionModel};
use gramscore_core::Error;

pub const FORMAT: &str = "gramscore-encoder";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub encoder_name: String,
    pub max_tokens: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Initial head bias; predictions start near this value.
    pub init_bias: f64,
}

impl EncoderConfig {
    pub fn new(encoder_name: impl Into<String>) -> Self {
        EncoderConfig {
            encoder_name: encoder_name.into(),
            max_tokens: 256,
            learning_rate: 2e-5,
            seed: 0,
            init_bias: 3.0,
        }
    }
}

pub struct EncoderModel {
    config: EncoderConfig,
    bert_config: BertConfig,
    bert_config_json: String,
    tokenizer: Tokenizer,
    bert: BertModel,
    head: Linear,
    encoder_vars: VarMap,
    head_vars: Vec<(String, Var)>,
    opt: Option<AdamW>,
    device: Device,
}

impl std::fmt::Debug for EncoderModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EncoderModel")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

fn core_err(e: impl std::fmt::Display) -> Error {
    Error::Validation(format!("encoder: {e}"))
}

fn sorted_vars(map: &VarMap) -> Vec<(String, Var)> {
    let data = map.data().lock().unwrap();
    let mut v: Vec<(String, Var)> = data.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    v.sort_by(|a, b| a.0.cmp(&b.0));
    v
}

fn gaussian(rng: &mut ChaCha8Rng) -> f32 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    ((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()) as f32
}

impl EncoderModel {
    fn build(
        config: EncoderConfig,
        bert_config_json: String,
        mut tokenizer: Tokenizer,
        prefix: Option<&str>,
    ) -> Result<(Self, VarMap)> {
        let bert_config: BertConfig = serde_json::from_str(&bert_config_json).context("parsing encoder config")?;
        tokenizer
            .with_truncation(Some(TruncationParams {
                max_length: config.max_tokens,
                direction: TruncationDirection::Right,
                ..Default::default()
            }))
            .map_err(|e| anyhow!("{e}"))?;
        tokenizer.with_padding(None);
        let device = Device::Cpu;
        let encoder_vars = VarMap::new();
        let vb = VarBuilder::from_varmap(&encoder_vars, DType::F32, &device);
        let vb = match prefix {
            Some(p) => vb.pp(p),
            None => vb,
        };
        let bert = BertModel::load(vb, &bert_config)?;

        let hidden = bert_config.hidden_size;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bound = 1.0 / (hidden as f64).sqrt();
        let w: Vec<f32> = (0..hidden).map(|_| rng.random_range(-bound..bound) as f32).collect();
        let weight = Var::from_tensor(&Tensor::from_vec(w, (1, hidden), &device)?)?;
        let bias = Var::from_tensor(&Tensor::from_vec(vec![config.init_bias as f32], 1, &device)?)?;
        let head = Linear::new(weight.as_tensor().clone(), Some(bias.as_tensor().clone()));
        let model = EncoderModel {
            config,
            bert_config,
            bert_config_json,
            tokenizer,
            bert,
            head,
            encoder_vars: encoder_vars.clone(),
            head_vars: vec![("head.bias".into(), bias), ("head.weight".into(), weight)],
            opt: None,
            device,
        };
        Ok((model, encoder_vars))
    }

    /// Loads pre-trained weights from `config.encoder_name`, a directory.
    pub fn from_pretrained(config: EncoderConfig) -> Result<Self> {
        let dir = Path::new(&config.encoder_name).to_owned();
        let cfg_json = std::fs::read_to_string(dir.join("config.json"))
            .with_context(|| format!("reading {}/config.json", dir.display()))?;
        let tokenizer = Tokenizer::from_file(dir.join("tokenizer.json")).map_err(|e| anyhow!("tokenizer: {e}"))?;
        let weights = dir.join("model.safetensors");
        let bytes = std::fs::read(&weights).with_context(|| format!("reading {}", weights.display()))?;
        let names = safetensors::SafeTensors::deserialize(&bytes)?
            .names()
            .into_iter()
            .map(str::to_owned)
            .collect::<Vec<_>>();
        let prefix = if names.iter().any(|n| n.starts_with("bert.")) {
            Some("bert")
        } else {
            None
        };
        let (model, mut vars) = Self::build(config, cfg_json, tokenizer, prefix)?;
        vars.load(&weights)
            .with_context(|| format!("loading {}", weights.display()))?;
        Ok(model)
    }

    /// A randomly initialized encoder, seeded for reproducibility.
    pub fn random(config: EncoderConfig, bert_config_json: &str, tokenizer: Tokenizer) -> Result<Self> {
        let (model, vars) = Self::build(config, bert_config_json.to_owned(), tokenizer, None)?;
        let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed ^ 0xe4c0de);
        for (name, var) in sorted_vars(&vars) {
            let shape = var.shape().clone();
            let n = shape.elem_count();
            let values: Vec<f32> = if name.contains("LayerNorm") && name.ends_with("weight") {
                vec![1.0; n]
            } else if name.ends_with("bias") || name.contains("LayerNorm") {
                vec![0.0; n]
            } else {
                let r = model.bert_config.initializer_range as f32;
                (0..n).map(|_| gaussian(&mut rng) * r).collect()
            };
            var.set(&Tensor::from_vec(values, shape, &model.device)?)?;
        }
        Ok(model)
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    fn all_vars(&self) -> Vec<(String, Var)> {
        let mut v: Vec<(String, Var)> = sorted_vars(&self.encoder_vars)
            .into_iter()
            .map(|(k, var)| (format!("encoder.{k}"), var))
            .collect();
        v.extend(self.head_vars.iter().cloned());
        v
    }

    fn encode(&self, texts: &[&str]) -> Result<(Tensor, Tensor)> {
        let encs = texts
            .iter()
            .map(|t| self.tokenizer.encode(*t, true).map_err(|e| anyhow!("tokenizing: {e}")))
            .collect::<Result<Vec<_>>>()?;
        let len = encs.iter().map(|e| e.get_ids().len()).max().unwrap_or(0).max(1);
        let pad = self.bert_config.pad_token_id as u32;
        let mut ids = Vec::with_capacity(texts.len() * len);
        let mut mask = Vec::with_capacity(texts.len() * len);
        for e in &encs {
            let n = e.get_ids().len();
            ids.extend_from_slice(e.get_ids());
            ids.extend(std::iter::repeat_n(pad, len - n));
            mask.extend(std::iter::repeat_n(1u32, n));
            mask.extend(std::iter::repeat_n(0u32, len - n));
        }
        let ids = Tensor::from_vec(ids, (texts.len(), len), &self.device)?;
        let mask = Tensor::from_vec(mask, (texts.len(), len), &self.device)?;
        Ok((ids, mask))
    }

    /// Scores for a padded batch, shape `[B]`.
    fn forward(&self, texts: &[&str]) -> Result<Tensor> {
        let (ids, mask) = self.encode(texts)?;
        let types = ids.zeros_like()?;
        let hidden = self.bert.forward(&ids, &types, Some(&mask))?;
        let m = mask.to_dtype(DType::F32)?.unsqueeze(D::Minus1)?;
        let summed = hidden.broadcast_mul(&m)?.sum(1)?;
        let counts = m.sum(1)?.clamp(1.0, f64::MAX)?;
        let pooled = summed.broadcast_div(&counts)?;
        Ok(self.head.forward(&pooled)?.squeeze(D::Minus1)?)
    }

    fn predict_one(&self, text: &str) -> Result<f64> {
        if text.split_whitespace().next().is_none() {
            bail!("cannot score empty text");
        }
        let out = self.forward(&[text])?.to_vec1::<f32>()?;
        Ok(out[0] as f64)
    }

    fn step(&mut self, batch: &[Example<'_>], learning_rate: f64) -> Result<f64> {
        let texts: Vec<&str> = batch.iter().map(|e| e.text).collect();
        let targets: Vec<f32> = batch.iter().map(|e| e.target as f32).collect();
        let weights: Vec<f32> = batch.iter().map(|e| e.weight as f32).collect();
        let preds = self.forward(&texts)?;
        let y = Tensor::from_vec(targets, batch.len(), &self.device)?;
        let w = Tensor::from_vec(weights, batch.len(), &self.device)?;
        let loss = ((preds - y)?.sqr()? * w)?.mean_all()?;
        let value = loss.to_scalar::<f32>()? as f64;
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss.into());
        }
        if self.opt.is_none() {
            let vars = self.all_vars().into_iter().map(|(_, v)| v).collect();
            let params = ParamsAdamW {
                lr: learning_rate,
                weight_decay: 0.0,
                ..Default::default()
            };
            self.opt = Some(AdamW::new(vars, params)?);
        }
        let opt = self.opt.as_mut().unwrap();
        opt.set_learning_rate(learning_rate);
        opt.backward_step(&loss)?;
        Ok(value)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut meta = HashMap::new();
        meta.insert("format".to_owned(), FORMAT.to_owned());
        meta.insert("config".to_owned(), serde_json::to_string(&self.config)?);
        meta.insert("encoder_config".to_owned(), self.bert_config_json.clone());
        meta.insert(
            "tokenizer".to_owned(),
            self.tokenizer.to_string(false).map_err(|e| anyhow!("{e}"))?,
        );
        let tensors: Vec<(String, Tensor)> = self
            .all_vars()
            .into_iter()
            .map(|(k, v)| (k, v.as_tensor().clone()))
            .collect();
        safetensors::serialize_to_file(tensors.iter().map(|(k, t)| (k.as_str(), t)), Some(meta), path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let (_, header) = safetensors::SafeTensors::read_metadata(&bytes)?;
        let meta = header.metadata().clone().unwrap_or_default();
        if meta.get("format").map(String::as_str) != Some(FORMAT) {
            bail!("{} is not a saved encoder model", path.display());
        }
        let field = |k: &str| meta.get(k).cloned().ok_or_else(|| anyhow!("model file lacks {k}"));
        let config: EncoderConfig = serde_json::from_str(&field("config")?)?;
        let tokenizer: Tokenizer = field("tokenizer")?.parse().map_err(|e| anyhow!("tokenizer: {e}"))?;
        let saved = candle_core::safetensors::load_buffer(&bytes, &Device::Cpu)?;
        let prefix = if saved.keys().any(|k| k.starts_with("encoder.bert.")) {
            Some("bert")
        } else {
            None
        };
        let (model, _) = Self::build(config, field("encoder_config")?, tokenizer, prefix)?;
        for (name, var) in model.all_vars() {
            let t = saved
                .get(&name)
                .ok_or_else(|| anyhow!("model file lacks tensor {name}"))?;
            var.set(t)?;
        }
        Ok(model)
    }
}

impl RegressionModel for EncoderModel {
    type Params = Vec<(String, Tensor)>;

    fn predict(&self, text: &str) -> gramscore_core::Result<f64> {
        self.predict_one(text).map_err(core_err)
    }

    /// Runs texts one at a time so results never depend on batch padding.
    fn predict_batch(&self, texts: &[&str]) -> gramscore_core::Result<Vec<f64>> {
        texts.iter().map(|t| self.predict(t)).collect()
    }

    fn train_step(&mut self, batch: &[Example<'_>], learning_rate: f64) -> gramscore_core::Result<f64> {
        validate_batch(batch, learning_rate)?;
        self.step(batch, learning_rate)
            .map_err(|e| match e.downcast::<Error>() {
                Ok(core) => core,
                Err(other) => core_err(format!("{other:#}")),
            })
    }

    fn snapshot(&self) -> Self::Params {
        self.all_vars()
            .into_iter()
            .map(|(k, v)| (k, v.as_tensor().copy().expect("tensor copy")))
            .collect()
    }

    fn restore(&mut self, params: Self::Params) {
        let vars: HashMap<String, Var> = self.all_vars().into_iter().collect();
        for (k, t) in params {
            if let Some(v) = vars.get(&k) {
                v.set(&t).expect("snapshot shapes match");
            }
        }
        self.opt = None;
    }
}
