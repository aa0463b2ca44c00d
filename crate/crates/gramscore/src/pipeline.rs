//! The experiment commands. Each reads its inputs from an
//! [`ExperimentConfig`] and writes into an output directory that the caller
//! has already prepared.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use gramscore_core::dataset::{check_split_integrity, Dataset, Split};
use gramscore_core::inject::{build_synthetic_suite, robustness_report, RobustnessRow, SuiteRecord};
use gramscore_core::metrics::{self, AgreementReport};
use gramscore_core::model::{FeaturizerConfig, FeaturizerModel, RegressionModel};
use gramscore_core::prompt::{LlmClient, MockClient, RubricPrompt};
use gramscore_core::synth::{self, SynthConfig};
use gramscore_core::trainer::{train_on, TrainHistory};

use crate::cache::PseudoLabelCache;
use crate::config::{ExperimentConfig, LlmBackend, ModelBackend};
use crate::io;
use crate::label::{pseudo_label_dataset, write_rejections, LabelOutcome};
use crate::live::LiveClient;
use crate::output::{num, opt, write_table, Meta};
use crate::plot::{try_line_chart, Series};
use crate::snapshot::AnyModel;

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| anyhow!("no {what} given (set it in the config or on the command line)"))
}

fn meta(cfg: &ExperimentConfig, command: &str) -> Meta {
    Meta::new(command, &cfg.hash(), cfg.seed)
}

/// Test split seed derived from the base seed.
pub fn test_seed(seed: u64) -> u64 {
    seed ^ 0x7e57_5eed
}

pub struct Synthetic {
    pub train: PathBuf,
    pub test: PathBuf,
}

pub fn gen_synthetic(cfg: &ExperimentConfig, out: &Path) -> Result<Synthetic> {
    let base = SynthConfig {
        seed: cfg.seed,
        ..cfg.synth
    };
    let train = synth::generate(
        &SynthConfig {
            n_samples: cfg.n_train,
            ..base
        },
        "train",
    )?;
    let test = synth::generate(
        &SynthConfig {
            n_samples: cfg.n_test,
            seed: test_seed(cfg.seed),
            ..base
        },
        "test",
    )?;
    let paths = Synthetic {
        train: out.join("train.jsonl"),
        test: out.join("test.jsonl"),
    };
    io::save_dataset(&paths.train, &synth::unlabeled(&train, Split::Train)?)?;
    io::save_dataset(&paths.test, &synth::rated(&test, Split::Test)?)?;
    io::save_dataset(&out.join("train_truth.jsonl"), &synth::rated(&train, Split::Train)?)?;

    let rows: Vec<Vec<String>> = train
        .iter()
        .map(|s| ("train", s))
        .chain(test.iter().map(|s| ("test", s)))
        .map(|(split, s)| {
            let injected = s
                .injected
                .iter()
                .map(|(t, x)| format!("{t}:{}", num(*x)))
                .collect::<Vec<_>>()
                .join(";");
            vec![s.id.clone(), split.to_owned(), num(s.true_score), injected]
        })
        .collect();
    write_table(
        &out.join("synthetic.csv"),
        &["sample_id", "split", "true_score", "injected"],
        &rows,
        &meta(cfg, "gen-synthetic").with("synth", base),
    )?;
    log::info!(
        "wrote {} train and {} test samples to {}",
        train.len(),
        test.len(),
        out.display()
    );
    Ok(paths)
}

pub fn load_rubric(cfg: &ExperimentConfig) -> Result<RubricPrompt> {
    match &cfg.rubric {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading rubric {}", p.display()))?;
            Ok(RubricPrompt::with_rubric(text.trim_end())?)
        }
        None => Ok(RubricPrompt::default()),
    }
}

/// Runs `f` with the configured client. The live client is built, and its
/// credentials checked, before anything is sent.
fn with_client<T>(cfg: &ExperimentConfig, f: impl FnOnce(&(dyn LlmClient + Sync)) -> Result<T>) -> Result<T> {
    match cfg.backend {
        LlmBackend::Mock => f(&MockClient::new(cfg.seed, cfg.mock_corruption_rate)?),
        LlmBackend::Live => f(&LiveClient::from_env()?),
    }
}

fn label_with_cache(cfg: &ExperimentConfig, dataset: &Dataset, cache_path: &Path) -> Result<LabelOutcome> {
    let rubric = load_rubric(cfg)?;
    let out = with_client(cfg, |client| {
        let cache = PseudoLabelCache::open(cache_path)?;
        pseudo_label_dataset(dataset, &client, &rubric, cfg.retries, &cache, cfg.concurrency)
    })?;
    log::info!(
        "{} labeled, {} rejected, {} cache hits, {} client calls",
        out.labels.len(),
        out.rejections.len(),
        out.cache_hits,
        out.client_calls
    );
    Ok(out)
}

pub struct PseudolabelSummary {
    pub labeled: PathBuf,
    pub outcome: LabelOutcome,
}

pub fn pseudolabel(cfg: &ExperimentConfig, out: &Path) -> Result<PseudolabelSummary> {
    let dataset = io::load_dataset(required(&cfg.train, "train set")?, false, Split::Train)?;
    let cache_path = cfg.cache.clone().unwrap_or_else(|| out.join("pseudo_cache.jsonl"));
    let outcome = label_with_cache(cfg, &dataset, &cache_path)?;

    let report = out.join("rejections.csv");
    write_rejections(&report, &outcome.rejections)?;
    let m = meta(cfg, "pseudolabel")
        .with("labeled", outcome.labels.len())
        .with("rejected", outcome.rejections.len())
        .with("prompt_hash", load_rubric(cfg)?.prompt_hash);
    std::fs::write(
        crate::output::sidecar_path(&report),
        serde_json::to_string_pretty(&m)? + "\n",
    )?;

    if outcome.rejection_rate() > cfg.max_rejection_rate {
        bail!(
            "{:.1}% of samples were rejected (limit {:.1}%); see {}",
            100.0 * outcome.rejection_rate(),
            100.0 * cfg.max_rejection_rate,
            report.display()
        );
    }
    let labeled_path = out.join("train_labeled.jsonl");
    let kept: Vec<_> = outcome
        .dataset
        .records
        .iter()
        .filter(|r| r.pseudo.is_some())
        .cloned()
        .collect();
    io::save_dataset(&labeled_path, &Dataset::new(kept, Split::Train)?)?;
    Ok(PseudolabelSummary {
        labeled: labeled_path,
        outcome,
    })
}

fn new_model(cfg: &ExperimentConfig, seed: u64, n: usize) -> Result<AnyModel> {
    match cfg.model_backend {
        ModelBackend::Featurizer => Ok(AnyModel::Featurizer(FeaturizerModel::new(FeaturizerConfig {
            seed,
            ..FeaturizerConfig::default()
        }))),
        #[cfg(feature = "encoder")]
        ModelBackend::Encoder => {
            use crate::encoder::{EncoderConfig, EncoderModel};
            let name = cfg
                .encoder_name
                .clone()
                .ok_or_else(|| anyhow!("encoder backend needs encoder_name (a local model directory)"))?;
            let ec = EncoderConfig {
                max_tokens: cfg.max_tokens,
                learning_rate: cfg.train_config(n)?.learning_rate,
                seed,
                ..EncoderConfig::new(name)
            };
            Ok(AnyModel::Encoder(Box::new(EncoderModel::from_pretrained(ec)?)))
        }
        #[cfg(not(feature = "encoder"))]
        ModelBackend::Encoder => {
            let _ = n;
            bail!("this build has no encoder backend")
        }
    }
}

fn abort_on_overlap(train: &Dataset, test: &Dataset) -> Result<()> {
    let overlap = check_split_integrity(train, test);
    if !overlap.is_empty() {
        let list: Vec<_> = overlap.into_iter().take(10).collect();
        bail!("train and test share candidates: {}", list.join(", "));
    }
    Ok(())
}

pub struct TrainRun {
    pub model: AnyModel,
    pub history: TrainHistory,
    pub model_path: PathBuf,
}

/// Trains from scratch with `seed` and writes the model, history, loss
/// matrix and final weights into `out`.
pub fn train_into(cfg: &ExperimentConfig, dataset: &Dataset, seed: u64, out: &Path) -> Result<TrainRun> {
    let n = dataset.len();
    let tc = {
        let mut t = cfg.train_config(n)?;
        t.seed = seed;
        t
    };
    let mut model = new_model(cfg, seed, n)?;
    let texts = dataset.texts();
    let targets = dataset.pseudo_targets()?;
    let history = train_on(&mut model, &texts, &targets, &tc, |rec, _, _| {
        log::debug!(
            "epoch {} loss {:.6} clean {}",
            rec.epoch,
            rec.mean_weighted_loss,
            rec.clean_set_size
        );
        if let Some(w) = &rec.warning {
            log::warn!("{w}");
        }
    })
    .context("training failed")?;

    let model_path = out.join(model.file_name());
    model.save(&model_path)?;
    let m = meta(cfg, "train")
        .with("train_config", tc)
        .with("samples", n)
        .with("degenerate", history.any_degenerate());
    let rows: Vec<Vec<String>> = history
        .epochs
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                num(e.mean_weighted_loss),
                e.clean_set_size.to_string(),
                num(e.churn_fraction),
                e.degenerate.to_string(),
            ]
        })
        .collect();
    write_table(
        &out.join("history.csv"),
        &[
            "epoch",
            "mean_weighted_loss",
            "clean_set_size",
            "churn_fraction",
            "degenerate",
        ],
        &rows,
        &m,
    )?;

    let mut header = vec!["sample_id".to_owned()];
    header.extend(history.epochs.iter().map(|e| format!("epoch_{}", e.epoch)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = dataset
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![r.sample.id.clone()];
            row.extend(history.epochs.iter().map(|e| num(e.losses[i])));
            row
        })
        .collect();
    write_table(&out.join("losses.csv"), &header, &rows, &m)?;

    if let Some(w) = &history.final_weights {
        let rows: Vec<Vec<String>> = dataset
            .records
            .iter()
            .zip(&w.weights)
            .map(|(r, x)| vec![r.sample.id.clone(), num(*x)])
            .collect();
        write_table(&out.join("weights.csv"), &["sample_id", "weight"], &rows, &m)?;
    }
    Ok(TrainRun {
        model,
        history,
        model_path,
    })
}

fn load_train(cfg: &ExperimentConfig) -> Result<Dataset> {
    let ds = io::load_dataset(required(&cfg.train, "train set")?, false, Split::Train)?;
    ds.pseudo_targets().context("the train set must be pseudo-labeled")?;
    Ok(ds)
}

fn load_test(cfg: &ExperimentConfig) -> Result<Dataset> {
    io::load_dataset(required(&cfg.test, "test set")?, true, Split::Test)
}

pub fn train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainRun> {
    let ds = load_train(cfg)?;
    if cfg.test.is_some() {
        abort_on_overlap(&ds, &load_test(cfg)?)?;
    }
    train_into(cfg, &ds, cfg.seed, out)
}

const REPORT_HEADER: [&str; 6] = ["n", "qwk", "plcc", "srcc", "rmse", "rounding_policy"];

fn report_row(r: &AgreementReport) -> Vec<String> {
    vec![
        r.n.to_string(),
        num(r.qwk),
        opt(r.plcc),
        opt(r.srcc),
        num(r.rmse),
        r.rounding_policy.as_str().to_owned(),
    ]
}

pub fn summary_line(r: &AgreementReport) -> String {
    let f = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "undefined".into());
    format!(
        "n={} qwk={:.4} plcc={} srcc={} rmse={:.4} ({})",
        r.n,
        r.qwk,
        f(r.plcc),
        f(r.srcc),
        r.rmse,
        r.rounding_policy
    )
}

/// Evaluates `model` on `test`, writing `evaluation.csv` and
/// `predictions.csv` into `out`.
pub fn evaluate_into<M: RegressionModel + ?Sized>(
    cfg: &ExperimentConfig,
    model: &M,
    test: &Dataset,
    out: &Path,
) -> Result<AgreementReport> {
    let preds = model.predict_batch(&test.texts())?;
    let gold = test.gold_targets()?;
    let clamped: Vec<f64> = preds.iter().map(|p| p.clamp(1.0, 5.0)).collect();
    let report = metrics::report(&clamped, &gold, cfg.rounding_policy)?;
    let m = meta(cfg, "evaluate");
    write_table(&out.join("evaluation.csv"), &REPORT_HEADER, &[report_row(&report)], &m)?;
    let rows: Vec<Vec<String>> = test
        .records
        .iter()
        .zip(preds.iter().zip(&gold))
        .map(|(r, (p, g))| vec![r.sample.id.clone(), num(*g), num(*p)])
        .collect();
    write_table(
        &out.join("predictions.csv"),
        &["sample_id", "gold", "prediction"],
        &rows,
        &m,
    )?;
    Ok(report)
}

pub fn evaluate(cfg: &ExperimentConfig, out: &Path) -> Result<AgreementReport> {
    let model = AnyModel::load(required(&cfg.model_path, "model file")?)?;
    let test = load_test(cfg)?;
    let report = evaluate_into(cfg, &model, &test, out)?;
    println!("{}", summary_line(&report));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub seed: u64,
    pub report: Option<AgreementReport>,
    pub degenerate: bool,
    pub error: Option<String>,
}

pub fn alpha_dir(alpha: f64) -> String {
    format!("alpha_{alpha:.2}")
}

pub fn alpha_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SweepRow>> {
    let train = load_train(cfg)?;
    let test = load_test(cfg)?;
    abort_on_overlap(&train, &test)?;
    let mut rows = Vec::new();
    for (idx, &alpha) in cfg.alpha_grid.iter().enumerate() {
        let seed = cfg.seed.wrapping_add(idx as u64);
        let dir = out.join(alpha_dir(alpha));
        let run = || -> Result<(AgreementReport, bool)> {
            std::fs::create_dir_all(&dir)?;
            let sub = ExperimentConfig {
                alpha,
                seed,
                ..cfg.clone()
            };
            let t = train_into(&sub, &train, seed, &dir)?;
            let report = evaluate_into(&sub, &t.model, &test, &dir)?;
            Ok((report, t.history.any_degenerate()))
        };
        let row = match run() {
            Ok((report, degenerate)) => SweepRow {
                alpha,
                seed,
                report: Some(report),
                degenerate,
                error: None,
            },
            Err(e) => {
                log::error!("alpha {alpha}: {e:#}");
                SweepRow {
                    alpha,
                    seed,
                    report: None,
                    degenerate: false,
                    error: Some(format!("{e:#}")),
                }
            }
        };
        log::info!(
            "alpha {alpha:.2}: {}",
            row.report.as_ref().map(summary_line).unwrap_or_default()
        );
        rows.push(row);
    }

    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let rep = r.report.as_ref();
            vec![
                num(r.alpha),
                rep.map(|x| num(x.qwk)).unwrap_or_else(|| "NA".into()),
                opt(rep.and_then(|x| x.plcc)),
                opt(rep.and_then(|x| x.srcc)),
                rep.map(|x| num(x.rmse)).unwrap_or_else(|| "NA".into()),
                r.seed.to_string(),
                r.degenerate.to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_table(
        &out.join("alpha_sweep.csv"),
        &["alpha", "qwk", "plcc", "srcc", "rmse", "seed", "degenerate", "error"],
        &table,
        &meta(cfg, "alpha-sweep"),
    )?;
    let curve = |f: fn(&AgreementReport) -> f64| Series {
        name: String::new(),
        points: rows
            .iter()
            .filter_map(|r| r.report.as_ref().map(|x| (r.alpha, f(x))))
            .collect(),
    };
    try_line_chart(
        &out.join("rmse_vs_alpha.svg"),
        "RMSE by alpha",
        "alpha",
        "RMSE",
        &[curve(|r| r.rmse)],
    );
    try_line_chart(
        &out.join("qwk_vs_alpha.svg"),
        "QWK by alpha",
        "alpha",
        "QWK",
        &[curve(|r| r.qwk)],
    );
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub method: &'static str,
    pub report: AgreementReport,
}

pub fn baselines(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<BaselineRow>> {
    let train = load_train(cfg)?;
    let test = load_test(cfg)?;
    abort_on_overlap(&train, &test)?;
    let mut rows = Vec::new();
    for (method, alpha) in [("proposed", cfg.alpha), ("supervised_baseline", 1.0)] {
        let dir = out.join(method);
        std::fs::create_dir_all(&dir)?;
        let sub = ExperimentConfig { alpha, ..cfg.clone() };
        let t = train_into(&sub, &train, cfg.seed, &dir)?;
        rows.push(BaselineRow {
            method,
            report: evaluate_into(&sub, &t.model, &test, &dir)?,
        });
    }

    let cache_path = cfg.cache.clone().unwrap_or_else(|| out.join("pseudo_cache.jsonl"));
    let labeled = label_with_cache(cfg, &test, &cache_path)?;
    let (pred, gold): (Vec<f64>, Vec<f64>) = labeled
        .dataset
        .records
        .iter()
        .filter_map(|r| Some((r.pseudo_score()?, r.gold_score()?)))
        .unzip();
    if pred.is_empty() {
        bail!("the client labeled no test sample");
    }
    rows.push(BaselineRow {
        method: "unsupervised_baseline",
        report: metrics::report(&pred, &gold, cfg.rounding_policy)?,
    });

    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.method.to_owned()];
            row.extend(report_row(&r.report));
            row
        })
        .collect();
    let mut header = vec!["method"];
    header.extend(REPORT_HEADER);
    write_table(&out.join("baselines.csv"), &header, &table, &meta(cfg, "baselines"))?;
    for r in &rows {
        println!("{:<22} {}", r.method, summary_line(&r.report));
    }
    Ok(rows)
}

fn build_suite(cfg: &ExperimentConfig) -> Result<Vec<SuiteRecord>> {
    let ds = load_test(cfg)?;
    Ok(build_synthetic_suite(
        &ds,
        cfg.score_threshold,
        &cfg.intensities,
        &cfg.error_types,
        cfg.seed,
    )?)
}

pub fn inject_errors(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SuiteRecord>> {
    let suite = build_suite(cfg)?;
    io::save_suite(&out.join("suite.jsonl"), &suite)?;
    let mut cells: std::collections::BTreeMap<(String, u64), (usize, f64, usize)> = Default::default();
    for r in &suite {
        let c = cells
            .entry((r.error_type.to_string(), r.intensity.to_bits()))
            .or_default();
        c.0 += 1;
        c.1 += r.achieved_intensity;
        c.2 += usize::from(r.shortfall);
    }
    let rows: Vec<Vec<String>> = suite
        .iter()
        .map(|r| (r.error_type.to_string(), r.intensity))
        .fold(Vec::<(String, f64)>::new(), |mut acc, k| {
            if !acc.contains(&k) {
                acc.push(k);
            }
            acc
        })
        .into_iter()
        .map(|(t, x)| {
            let (n, sum, short) = cells[&(t.clone(), x.to_bits())];
            vec![t, num(x), n.to_string(), num(sum / n as f64), short.to_string()]
        })
        .collect();
    write_table(
        &out.join("suite_summary.csv"),
        &["error_type", "intensity", "n", "mean_achieved_intensity", "shortfalls"],
        &rows,
        &meta(cfg, "inject-errors"),
    )?;
    log::info!("wrote {} corrupted copies", suite.len());
    Ok(suite)
}

pub fn robustness(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<RobustnessRow>> {
    let model = AnyModel::load(required(&cfg.model_path, "model file")?)?;
    let suite = match &cfg.suite {
        Some(p) => io::load_suite(p)?,
        None => build_suite(cfg)?,
    };
    let rows = robustness_report(&model, &suite, cfg.impact_threshold)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.error_type.to_string(),
                num(r.intensity),
                num(r.mean_pred),
                num(r.mean_drop),
                num(r.pct_impacted),
                r.n.to_string(),
            ]
        })
        .collect();
    write_table(
        &out.join("robustness.csv"),
        &["error_type", "intensity", "mean_pred", "mean_drop", "pct_impacted", "n"],
        &table,
        &meta(cfg, "robustness-report").with("impact_threshold", cfg.impact_threshold),
    )?;
    let curves = |f: fn(&RobustnessRow) -> f64| -> Vec<Series> {
        cfg.error_types
            .iter()
            .map(|t| Series {
                name: t.to_string(),
                points: rows
                    .iter()
                    .filter(|r| r.error_type == *t)
                    .map(|r| (r.intensity, f(r)))
                    .collect(),
            })
            .filter(|s| !s.points.is_empty())
            .collect()
    };
    try_line_chart(
        &out.join("robustness_mean_pred.svg"),
        "Mean prediction by error intensity",
        "intensity",
        "mean prediction",
        &curves(|r| r.mean_pred),
    );
    try_line_chart(
        &out.join("robustness_impacted.svg"),
        "Impacted samples by error intensity",
        "intensity",
        "% impacted",
        &curves(|r| r.pct_impacted),
    );
    Ok(rows)
}
