//! Stored MCMC samples and their on-disk form: a CSV of samples plus a JSON
//! metadata sidecar. Column indices are 1-based and underscore-separated
//! (`g_1_2`, `k_1_1`) so traits beyond nine stay unambiguous.

use crate::error::{Error, Result};
use crate::graph::{edge_pairs, n_edge_slots, TraitGraph};
use crate::mcmc::ChainState;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Length of the row-major upper triangle (diagonal included) of a p x p
/// symmetric matrix.
pub fn precision_triu_len(p: usize) -> usize {
    p * (p + 1) / 2
}

/// Index of entry (i, j), i <= j, within the stored upper triangle.
pub fn triu_index(p: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < p);
    i * p - i * (i + 1) / 2 + j
}

/// One stored post-warmup sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub iteration: usize,
    /// Edge indicators in slot order (upper triangle, i < j).
    pub edges: Vec<u8>,
    /// Precision upper triangle, diagonal included, row-major.
    pub precision_triu: Vec<f64>,
}

impl TraceSample {
    pub(crate) fn from_state(state: &ChainState, p: usize) -> Self {
        let edges = state
            .graph
            .indicator()
            .iter()
            .map(|&e| u8::from(e))
            .collect();
        let mut precision_triu = Vec::with_capacity(precision_triu_len(p));
        for i in 0..p {
            for j in i..p {
                precision_triu.push(state.precision.values()[(i, j)]);
            }
        }
        TraceSample {
            iteration: state.iteration,
            edges,
            precision_triu,
        }
    }

    /// Reconstruct the full symmetric precision matrix.
    pub fn precision_matrix(&self, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(p, p, |i, j| {
            self.precision_triu[triu_index(p, i.min(j), i.max(j))]
        })
    }

    pub fn graph(&self, p: usize) -> TraitGraph {
        TraitGraph::from_indicator(p, &self.edges.iter().map(|&e| e == 1).collect::<Vec<_>>())
    }

    pub fn n_edges(&self) -> usize {
        self.edges.iter().filter(|&&e| e == 1).count()
    }
}

/// JSON sidecar describing how a trace was produced.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TraceMetadata {
    pub p: usize,
    pub n_taxa: usize,
    pub model: String,
    pub n_iterations: usize,
    pub warmup: usize,
    pub thin: usize,
    pub seed: u64,
    pub delta_hash: String,
}

/// A complete run: metadata plus all stored samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub p: usize,
    pub n_taxa: usize,
    pub model: String,
    pub n_iterations: usize,
    pub warmup: usize,
    pub thin: usize,
    pub seed: u64,
    pub delta_hash: String,
    pub samples: Vec<TraceSample>,
}

impl ChainTrace {
    pub fn metadata(&self) -> TraceMetadata {
        TraceMetadata {
            p: self.p,
            n_taxa: self.n_taxa,
            model: self.model.clone(),
            n_iterations: self.n_iterations,
            warmup: self.warmup,
            thin: self.thin,
            seed: self.seed,
            delta_hash: self.delta_hash.clone(),
        }
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }
}

/// Write the samples CSV and its JSON metadata sidecar (`<csv>.meta.json`).
pub fn write_trace_csv(trace: &ChainTrace, csv_path: &Path) -> Result<()> {
    let p = trace.p;
    let mut writer = csv::Writer::from_path(csv_path)?;
    let mut header = vec!["iteration".to_string()];
    for (i, j) in edge_pairs(p) {
        header.push(format!("g_{}_{}", i + 1, j + 1));
    }
    for i in 0..p {
        for j in i..p {
            header.push(format!("k_{}_{}", i + 1, j + 1));
        }
    }
    writer.write_record(&header)?;
    for sample in &trace.samples {
        let mut row = vec![sample.iteration.to_string()];
        row.extend(sample.edges.iter().map(|e| e.to_string()));
        row.extend(sample.precision_triu.iter().map(|k| format!("{k:.17e}")));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    let meta_path = sidecar_path(csv_path);
    let json = serde_json::to_string_pretty(&trace.metadata())?;
    std::fs::write(meta_path, json)?;
    Ok(())
}

/// Read a trace back from a CSV written by [`write_trace_csv`] and its
/// sidecar.
pub fn read_trace_csv(csv_path: &Path) -> Result<ChainTrace> {
    let meta_path = sidecar_path(csv_path);
    let meta: TraceMetadata = serde_json::from_str(&std::fs::read_to_string(&meta_path)?)?;
    let p = meta.p;
    let n_slots = n_edge_slots(p);
    let n_triu = precision_triu_len(p);

    let mut reader = csv::Reader::from_path(csv_path)?;
    let header = reader.headers()?.clone();
    if header.len() != 1 + n_slots + n_triu {
        return Err(Error::InvalidInput(format!(
            "trace CSV has {} columns, expected {} for p = {p}",
            header.len(),
            1 + n_slots + n_triu
        )));
    }
    let mut samples = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |field: &str, what: &str| -> Result<f64> {
            field.trim().parse::<f64>().map_err(|_| {
                Error::InvalidInput(format!(
                    "trace CSV row {}: non-numeric {what} value {field:?}",
                    row_idx + 2
                ))
            })
        };
        let iteration = parse(&record[0], "iteration")? as usize;
        let mut edges = Vec::with_capacity(n_slots);
        for field in record.iter().skip(1).take(n_slots) {
            let value = parse(field, "edge indicator")?;
            if value != 0.0 && value != 1.0 {
                return Err(Error::InvalidInput(format!(
                    "trace CSV row {}: edge indicator {value} is not 0/1",
                    row_idx + 2
                )));
            }
            edges.push(value as u8);
        }
        let mut precision_triu = Vec::with_capacity(n_triu);
        for field in record.iter().skip(1 + n_slots) {
            precision_triu.push(parse(field, "precision")?);
        }
        samples.push(TraceSample {
            iteration,
            edges,
            precision_triu,
        });
    }
    Ok(ChainTrace {
        p,
        n_taxa: meta.n_taxa,
        model: meta.model,
        n_iterations: meta.n_iterations,
        warmup: meta.warmup,
        thin: meta.thin,
        seed: meta.seed,
        delta_hash: meta.delta_hash,
        samples,
    })
}

fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    let mut name = csv_path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    csv_path.with_file_name(name)
}
