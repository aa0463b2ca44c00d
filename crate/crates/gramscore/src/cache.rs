//! Append-only pseudo-label cache.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{Context, Result};

use gramscore_core::prompt::PseudoLabel;

type Key = (String, String, String);

fn key(sample_id: &str, prompt_hash: &str, model_name: &str) -> Key {
    (sample_id.to_owned(), prompt_hash.to_owned(), model_name.to_owned())
}

/// JSONL cache keyed by `(sample_id, prompt_hash, model_name)`. Later lines
/// win over earlier ones for the same key.
#[derive(Debug)]
pub struct PseudoLabelCache {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

#[derive(Debug)]
struct Inner {
    entries: HashMap<Key, PseudoLabel>,
    file: Option<File>,
}

impl PseudoLabelCache {
    /// A cache that is never persisted.
    pub fn in_memory() -> Self {
        PseudoLabelCache {
            path: None,
            inner: Mutex::new(Inner {
                entries: HashMap::new(),
                file: None,
            }),
        }
    }

    /// Opens (or creates) the cache file at `path`.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let label: PseudoLabel =
                    serde_json::from_str(&line).with_context(|| format!("{}: line {}", path.display(), i + 1))?;
                entries.insert(key(&label.sample_id, &label.prompt_hash, &label.model_name), label);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {} for append", path.display()))?;
        Ok(PseudoLabelCache {
            path: Some(path.to_owned()),
            inner: Mutex::new(Inner {
                entries,
                file: Some(file),
            }),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, sample_id: &str, prompt_hash: &str, model_name: &str) -> Option<PseudoLabel> {
        self.inner
            .lock()
            .unwrap()
            .entries
            .get(&key(sample_id, prompt_hash, model_name))
            .cloned()
    }

    /// Stores `label` and appends it to the file. Write failures are errors.
    pub fn insert(&self, label: PseudoLabel) -> Result<()> {
        let mut line = serde_json::to_string(&label)?;
        line.push('\n');
        let mut inner = self.inner.lock().unwrap();
        if let Some(f) = inner.file.as_mut() {
            f.write_all(line.as_bytes()).context("writing pseudo-label cache")?;
            f.flush().context("flushing pseudo-label cache")?;
        }
        inner
            .entries
            .insert(key(&label.sample_id, &label.prompt_hash, &label.model_name), label);
        Ok(())
    }
}
