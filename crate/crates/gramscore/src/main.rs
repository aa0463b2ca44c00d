use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use gramscore::config::{ExperimentConfig, LlmBackend, ModelBackend};
use gramscore::output::prepare_out_dir;
use gramscore::pipeline;

const AFTER_HELP: &str = "\
The live backend reads its credentials from the environment only:
  GRAMSCORE_LLM_ENDPOINT  chat-completions URL
  GRAMSCORE_LLM_API_KEY   bearer token
  GRAMSCORE_LLM_MODEL     model name sent with each request
Set RUST_LOG=debug for per-epoch progress.";

#[derive(Parser)]
#[command(name = "gramscore", version, about = "Train and evaluate grammar scorers from LLM pseudo-labels", after_help = AFTER_HELP)]
struct Cli {
    /// Config file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// LLM used for pseudo-labels.
    #[arg(long, global = true, value_enum)]
    backend: Option<LlmBackend>,
    /// Overwrite files in a non-empty output directory.
    #[arg(long, global = true)]
    force: bool,
    /// Override any config key, e.g. `--set epochs=5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Inputs {
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Model file (model.json or model.safetensors).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Pseudo-label cache (defaults to pseudo_cache.jsonl in the output directory).
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Rubric text file.
    #[arg(long)]
    rubric: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_enum)]
    model_backend: Option<ModelBackend>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic train/test corpus with known scores.
    GenSynthetic(Inputs),
    /// Label the train set with the LLM.
    Pseudolabel(Inputs),
    /// Train a scorer on the pseudo-labeled train set.
    Train(Inputs),
    /// Score a model against the rated test set.
    Evaluate(Inputs),
    /// Train and evaluate once per alpha in the grid.
    AlphaSweep(Inputs),
    /// Compare the proposed setting with the supervised and LLM-only baselines.
    Baselines(Inputs),
    /// Build the corrupted-copy suite from high-scoring test samples.
    InjectErrors(Inputs),
    /// Measure how a model's predictions react to injected errors.
    RobustnessReport(Inputs),
}

impl Command {
    fn inputs(&self) -> &Inputs {
        match self {
            Command::GenSynthetic(i)
            | Command::Pseudolabel(i)
            | Command::Train(i)
            | Command::Evaluate(i)
            | Command::AlphaSweep(i)
            | Command::Baselines(i)
            | Command::InjectErrors(i)
            | Command::RobustnessReport(i) => i,
        }
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    let here = Path::new("");
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .with_context(|| format!("--set {o}: expected KEY=VALUE"))?;
        cfg.set(k.trim(), v.trim(), here)
            .with_context(|| format!("--set {o}"))?;
    }
    let i = cli.command.inputs();
    let paths = [
        (&i.train, &mut cfg.train),
        (&i.test, &mut cfg.test),
        (&i.model, &mut cfg.model_path),
        (&i.suite, &mut cfg.suite),
        (&i.cache, &mut cfg.cache),
        (&i.rubric, &mut cfg.rubric),
    ];
    for (src, dst) in paths {
        if src.is_some() {
            *dst = src.clone();
        }
    }
    if let Some(a) = i.alpha {
        cfg.alpha = a;
    }
    if let Some(e) = i.epochs {
        cfg.epochs = e;
    }
    if let Some(m) = i.model_backend {
        cfg.model_backend = m;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(b) = cli.backend {
        cfg.backend = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = build_config(cli)?;
    let out = cli.out.as_path();
    prepare_out_dir(out, cli.force)?;
    match &cli.command {
        Command::GenSynthetic(_) => {
            let p = pipeline::gen_synthetic(&cfg, out)?;
            println!("{}\n{}", p.train.display(), p.test.display());
        }
        Command::Pseudolabel(_) => {
            let s = pipeline::pseudolabel(&cfg, out)?;
            println!(
                "labeled {} of {} ({} from cache, {} client calls) -> {}",
                s.outcome.labels.len(),
                s.outcome.dataset.len(),
                s.outcome.cache_hits,
                s.outcome.client_calls,
                s.labeled.display()
            );
        }
        Command::Train(_) => {
            let t = pipeline::train(&cfg, out)?;
            if let Some(last) = t.history.epochs.last() {
                println!(
                    "{} epochs, final loss {:.6}, clean set {} -> {}",
                    t.history.epochs.len(),
                    last.mean_weighted_loss,
                    last.clean_set_size,
                    t.model_path.display()
                );
            }
        }
        Command::Evaluate(_) => {
            pipeline::evaluate(&cfg, out)?;
        }
        Command::AlphaSweep(_) => {
            let rows = pipeline::alpha_sweep(&cfg, out)?;
            for r in &rows {
                match (&r.report, &r.error) {
                    (Some(rep), _) => println!("alpha {:.2}: {}", r.alpha, pipeline::summary_line(rep)),
                    (None, Some(e)) => println!("alpha {:.2}: failed: {e}", r.alpha),
                    (None, None) => {}
                }
            }
        }
        Command::Baselines(_) => {
            pipeline::baselines(&cfg, out)?;
        }
        Command::InjectErrors(_) => {
            let suite = pipeline::inject_errors(&cfg, out)?;
            println!(
                "{} corrupted copies -> {}",
                suite.len(),
                out.join("suite.jsonl").display()
            );
        }
        Command::RobustnessReport(_) => {
            let rows = pipeline::robustness(&cfg, out)?;
            println!("{} rows -> {}", rows.len(), out.join("robustness.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
