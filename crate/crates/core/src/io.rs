//! File formats.
//!
//! - Embeddings: JSON lines, one object per replicate:
//!   `{"model": "...", "query": "...", "replicate": 0, "vector": [..]}`.
//! - Dissimilarity matrices: CSV with a header `label,<id_1>,...,<id_n>` and
//!   one row per model starting with its id.
//! - Configurations: CSV with a header `label,x1,...,xd`.
//! - Results: CSV with the header in [`RESULTS_HEADER`].
//!
//! Reals in CSV files are written with 17 significant digits in scientific
//! notation, which round-trips every `f64` exactly.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::discrepancy::CollectionTable;
use crate::error::{Error, Result};
use crate::experiments::{Regime, TrialResult};
use crate::types::{Configuration, DissimilarityMatrix, ResponseBatch};

pub const RESULTS_HEADER: [&str; 10] = [
    "regime",
    "n",
    "m",
    "r",
    "bootstrap",
    "avg_l2_err",
    "two_inf_err",
    "stress",
    "condition_ratio",
    "wall_time_s",
];

/// 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// One embedded response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingRecord {
    pub model: String,
    pub query: String,
    pub replicate: u64,
    pub vector: Vec<f64>,
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<CollectionTable> {
    read_embeddings_from(BufReader::new(File::open(path)?))
}

/// Parse JSON lines into a complete table. Models and queries are ordered by
/// first appearance; replicates by their index. Blank lines are skipped.
pub fn read_embeddings_from(reader: impl BufRead) -> Result<CollectionTable> {
    let mut model_ids: Vec<String> = vec![];
    let mut query_ids: Vec<String> = vec![];
    let mut model_seen: HashMap<String, usize> = HashMap::new();
    let mut query_seen: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), BTreeMap<u64, Vec<f64>>> = HashMap::new();
    let mut dim: Option<usize> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        if rec.vector.is_empty() {
            return Err(Error::Parse { line: line_no, message: "empty vector".into() });
        }
        if rec.vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse { line: line_no, message: "non-finite vector entry".into() });
        }
        match dim {
            None => dim = Some(rec.vector.len()),
            Some(s) if s != rec.vector.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("vector has dimension {}, expected {s}", rec.vector.len()),
                })
            }
            _ => {}
        }
        let a = *model_seen.entry(rec.model.clone()).or_insert_with(|| {
            model_ids.push(rec.model.clone());
            model_ids.len() - 1
        });
        let b = *query_seen.entry(rec.query.clone()).or_insert_with(|| {
            query_ids.push(rec.query.clone());
            query_ids.len() - 1
        });
        let cell = cells.entry((a, b)).or_default();
        if cell.insert(rec.replicate, rec.vector).is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "duplicate replicate {} for ({}, {})",
                    rec.replicate, rec.model, rec.query
                ),
            });
        }
    }
    if model_ids.is_empty() {
        return Err(Error::invalid("embedding file has no records"));
    }
    let mut batches = Vec::with_capacity(cells.len());
    for a in 0..model_ids.len() {
        for b in 0..query_ids.len() {
            let Some(cell) = cells.remove(&(a, b)) else {
                return Err(Error::invalid(format!(
                    "missing responses for model `{}` on query `{}`",
                    model_ids[a], query_ids[b]
                )));
            };
            let vectors = cell.into_values().collect();
            batches.push(ResponseBatch::new(model_ids[a].clone(), query_ids[b].clone(), vectors)?);
        }
    }
    CollectionTable::new(model_ids, query_ids, batches)
}

pub fn write_embeddings(table: &CollectionTable, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_embeddings_to(table, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Model-major, then query, then replicate order.
pub fn write_embeddings_to(table: &CollectionTable, mut w: impl Write) -> Result<()> {
    for batch in table.batches() {
        for (k, v) in batch.vectors().iter().enumerate() {
            let rec = EmbeddingRecord {
                model: batch.model_id().to_string(),
                query: batch.query_id().to_string(),
                replicate: k as u64,
                vector: v.clone(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn parse_real(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse { line, message: format!("`{field}`: {e}") })
}

fn csv_reader(reader: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader)
}

pub fn read_dissimilarity(path: impl AsRef<Path>) -> Result<DissimilarityMatrix> {
    read_dissimilarity_from(File::open(path)?)
}

pub fn read_dissimilarity_from(reader: impl Read) -> Result<DissimilarityMatrix> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers()?.clone();
    let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = labels.len();
    if n == 0 {
        return Err(Error::Parse { line: 1, message: "header lists no labels".into() });
    }
    let mut values = DMatrix::zeros(n, n);
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if i >= n {
            return Err(Error::Parse { line, message: format!("more than {n} rows") });
        }
        if rec.len() != n + 1 {
            return Err(Error::Parse { line, message: format!("expected {} fields, got {}", n + 1, rec.len()) });
        }
        if rec[0] != labels[i] {
            return Err(Error::Parse {
                line,
                message: format!("row label `{}` does not match header label `{}`", &rec[0], labels[i]),
            });
        }
        for j in 0..n {
            values[(i, j)] = parse_real(&rec[j + 1], line)?;
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Parse { line: rows + 2, message: format!("expected {n} rows, got {rows}") });
    }
    DissimilarityMatrix::new(labels, values)
}

pub fn write_dissimilarity(d: &DissimilarityMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_dissimilarity_to(d, File::create(path)?)
}

pub fn write_dissimilarity_to(d: &DissimilarityMatrix, w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["label".to_string()];
    header.extend(d.labels().iter().cloned());
    wtr.write_record(&header)?;
    for i in 0..d.n() {
        let mut row = vec![d.labels()[i].clone()];
        row.extend((0..d.n()).map(|j| fmt_real(d.get(i, j))));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_configuration(path: impl AsRef<Path>) -> Result<Configuration> {
    read_configuration_from(File::open(path)?)
}

pub fn read_configuration_from(reader: impl Read) -> Result<Configuration> {
    let mut rdr = csv_reader(reader);
    let d = rdr.headers()?.len().saturating_sub(1);
    if d == 0 {
        return Err(Error::Parse { line: 1, message: "header lists no coordinates".into() });
    }
    let mut labels = vec![];
    let mut data = vec![];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != d + 1 {
            return Err(Error::Parse { line, message: format!("expected {} fields, got {}", d + 1, rec.len()) });
        }
        labels.push(rec[0].to_string());
        for c in 0..d {
            data.push(parse_real(&rec[c + 1], line)?);
        }
    }
    if labels.is_empty() {
        return Err(Error::invalid("configuration file has no rows"));
    }
    let points = DMatrix::from_row_slice(labels.len(), d, &data);
    Configuration::new(labels, points)
}

pub fn write_configuration(cfg: &Configuration, path: impl AsRef<Path>) -> Result<()> {
    write_configuration_to(cfg, File::create(path)?)
}

pub fn write_configuration_to(cfg: &Configuration, w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["label".to_string()];
    header.extend((1..=cfg.dim()).map(|c| format!("x{c}")));
    wtr.write_record(&header)?;
    for (i, label) in cfg.labels().iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend((0..cfg.dim()).map(|c| fmt_real(cfg.points()[(i, c)])));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_results(results: &[TrialResult], path: impl AsRef<Path>) -> Result<()> {
    write_results_to(results, File::create(path)?)
}

/// Rows are written in the order given; [`crate::experiments::run_regime`]
/// already yields grid-then-bootstrap order.
pub fn write_results_to(results: &[TrialResult], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(RESULTS_HEADER)?;
    for t in results {
        wtr.write_record([
            t.regime.as_str().to_string(),
            t.n.to_string(),
            t.m.to_string(),
            t.r.to_string(),
            t.bootstrap.to_string(),
            fmt_real(t.avg_l2_err),
            fmt_real(t.two_inf_err),
            fmt_real(t.stress),
            fmt_real(t.condition_ratio),
            fmt_real(t.wall_time),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<TrialResult>> {
    read_results_from(File::open(path)?)
}

pub fn read_results_from(reader: impl Read) -> Result<Vec<TrialResult>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != RESULTS_HEADER {
        return Err(Error::Parse { line: 1, message: format!("unexpected header {header:?}") });
    }
    let mut out = vec![];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let int = |k: usize| -> Result<usize> {
            rec[k].parse().map_err(|e| Error::Parse { line, message: format!("`{}`: {e}", &rec[k]) })
        };
        let regime = Regime::parse(&rec[0])
            .ok_or_else(|| Error::Parse { line, message: format!("unknown regime `{}`", &rec[0]) })?;
        out.push(TrialResult {
            regime,
            n: int(1)?,
            m: int(2)?,
            r: int(3)?,
            bootstrap: int(4)?,
            avg_l2_err: parse_real(&rec[5], line)?,
            two_inf_err: parse_real(&rec[6], line)?,
            stress: parse_real(&rec[7], line)?,
            condition_ratio: parse_real(&rec[8], line)?,
            wall_time: parse_real(&rec[9], line)?,
        });
    }
    Ok(out)
}

/// Read a JSON config file.
pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
