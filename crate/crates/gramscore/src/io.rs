//! JSONL datasets and corruption suites.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use gramscore_core::dataset::{Dataset, Modality, Provenance, Record, Sample, Split};
use gramscore_core::inject::SuiteRecord;

#[derive(Debug, Deserialize)]
struct InRecord {
    id: String,
    candidate_id: String,
    text: String,
    modality: Modality,
    #[serde(default)]
    ratings: Option<Vec<f64>>,
    #[serde(default)]
    pseudo_score: Option<f64>,
    #[serde(default)]
    pseudo_provenance: Option<Provenance>,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    candidate_id: &'a str,
    text: &'a str,
    modality: Modality,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratings: Option<Vec<Box<RawValue>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pseudo_score: Option<Box<RawValue>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pseudo_provenance: Option<&'a Provenance>,
}

/// Decimal form of a score with at least six fractional digits that parses
/// back to the same `f64`.
pub fn format_score(x: f64) -> String {
    let fixed = format!("{x:.6}");
    if fixed.parse::<f64>().ok() == Some(x) {
        fixed
    } else {
        format!("{x:?}")
    }
}

fn raw_score(x: f64) -> Box<RawValue> {
    RawValue::from_string(format_score(x)).expect("a formatted float is valid JSON")
}

pub fn parse_dataset(reader: impl BufRead, expect_ratings: bool, split: Split) -> Result<Dataset> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.with_context(|| format!("line {lineno}: read failed"))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InRecord = serde_json::from_str(&line).with_context(|| format!("line {lineno}: malformed record"))?;
        let sample =
            Sample::new(rec.id, rec.candidate_id, rec.text, rec.modality).with_context(|| format!("line {lineno}"))?;
        let mut record = match rec.ratings {
            Some(r) => Record::rated(sample, r).with_context(|| format!("line {lineno}"))?,
            None if expect_ratings => bail!("line {lineno}: sample {} has no ratings", sample.id),
            None => Record::unrated(sample),
        };
        if let Some(score) = rec.pseudo_score {
            record = record
                .with_pseudo(score, rec.pseudo_provenance)
                .with_context(|| format!("line {lineno}: pseudo_score"))?;
        }
        records.push(record);
    }
    Ok(Dataset::new(records, split)?)
}

pub fn load_dataset(path: &Path, expect_ratings: bool, split: Split) -> Result<Dataset> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_dataset(BufReader::new(file), expect_ratings, split).with_context(|| format!("loading {}", path.display()))
}

pub fn write_dataset(mut w: impl Write, dataset: &Dataset) -> Result<()> {
    for r in &dataset.records {
        let out = OutRecord {
            id: &r.sample.id,
            candidate_id: &r.sample.candidate_id,
            text: &r.sample.text,
            modality: r.sample.modality,
            ratings: r
                .ratings
                .as_ref()
                .map(|x| x.values().iter().map(|&v| raw_score(v)).collect()),
            pseudo_score: r.pseudo.as_ref().map(|p| raw_score(p.score)),
            pseudo_provenance: r.pseudo.as_ref().and_then(|p| p.provenance.as_ref()),
        };
        serde_json::to_writer(&mut w, &out)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write_dataset(&mut w, dataset)?;
    w.flush()?;
    Ok(())
}

pub fn save_suite(path: &Path, suite: &[SuiteRecord]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for rec in suite {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_suite(path: &Path) -> Result<Vec<SuiteRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}: line {}", path.display(), i + 1))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, expect: bool) -> Result<Dataset> {
        parse_dataset(s.as_bytes(), expect, Split::Train)
    }

    #[test]
    fn loads_records_in_order() {
        let text = r#"{"id":"a","candidate_id":"c1","text":"one two","modality":"spoken"}
{"id":"b","candidate_id":"c2","text":"three","modality":"written","ratings":[4.0,5.0]}
{"id":"c","candidate_id":"c3","text":"four","modality":"written"}
"#;
        let ds = parse(text, false).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.records[1].gold_score(), Some(4.5));
    }

    #[test]
    fn errors_name_the_line() {
        let text = "{\"id\":\"a\",\"candidate_id\":\"c\",\"text\":\"x\",\"modality\":\"spoken\"}\nnot json\n";
        let err = format!("{:#}", parse(text, false).unwrap_err());
        assert!(err.contains("line 2"), "{err}");
        let missing = "{\"id\":\"a\",\"candidate_id\":\"c\",\"text\":\"x\",\"modality\":\"spoken\"}\n";
        assert!(format!("{:#}", parse(missing, true).unwrap_err()).contains("line 1"));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let line = "{\"id\":\"s1\",\"candidate_id\":\"c\",\"text\":\"x\",\"modality\":\"spoken\"}\n";
        let err = parse(&line.repeat(2), false).unwrap_err();
        assert!(format!("{err:#}").contains("s1"));
    }

    #[test]
    fn scores_keep_six_decimals() {
        assert_eq!(format_score(4.5), "4.500000");
        assert_eq!(format_score(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
        assert!(format_score(1.0 / 3.0).len() > 8);
    }

    proptest::proptest! {
        #[test]
        fn write_then_parse_preserves_scores(
            rows in proptest::collection::vec(
                (proptest::collection::vec(1.0f64..=5.0, 1..4), proptest::option::of(1.0f64..=5.0)),
                1..20,
            ),
            text in r#"[a-zA-Z][a-zA-Z ,."\\]{0,40}"#,
        ) {
            let records: Vec<Record> = rows
                .iter()
                .enumerate()
                .map(|(i, (ratings, pseudo))| {
                    let sample = Sample::new(format!("s{i}"), format!("c{i}"), text.clone(), Modality::Written).unwrap();
                    let r = Record::rated(sample, ratings.clone()).unwrap();
                    match pseudo {
                        Some(p) => r.with_pseudo(*p, None).unwrap(),
                        None => r,
                    }
                })
                .collect();
            let ds = Dataset::new(records, Split::Train).unwrap();
            let mut buf = Vec::new();
            write_dataset(&mut buf, &ds).unwrap();
            let back = parse_dataset(buf.as_slice(), true, Split::Train).unwrap();
            proptest::prop_assert_eq!(back.len(), ds.len());
            for (a, b) in ds.records.iter().zip(&back.records) {
                proptest::prop_assert_eq!(&a.sample, &b.sample);
                proptest::prop_assert_eq!(a.gold_score().map(f64::to_bits), b.gold_score().map(f64::to_bits));
                proptest::prop_assert_eq!(a.pseudo_score().map(f64::to_bits), b.pseudo_score().map(f64::to_bits));
            }
        }
    }
}
