//! On-disk formats.
//!
//! - Datasets: CSV with header `x_0..x_{d-1},u_0..u_{q-1},y_0..y_{d-1}`.
//! - Embeddings: a JSON container holding the sample, kernels, `λ`, mode and
//!   the prior's system description. Loading refits; the factorization is
//!   never serialized.
//! - Reports: JSON (full) or CSV (one row per error record).

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::SCHEMA_VERSION;
use crate::control::TrackResult;
use crate::dynamics::SystemSpec;
use crate::embedding::{EmbeddingMode, FittedEmbedding, PriorModel, TransitionDataset};
use crate::error::{PikeError, Result};
use crate::experiments::ExperimentReport;
use crate::kernel::KernelSpec;
use crate::points::Points;

fn json_error(e: serde_json::Error) -> PikeError {
    if e.is_io() {
        return PikeError::Io(e.into());
    }
    PikeError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn csv_error(e: csv::Error) -> PikeError {
    let (line, column) = match e.position() {
        Some(p) => (p.line() as usize, 1),
        None => (0, 0),
    };
    match e.into_kind() {
        csv::ErrorKind::Io(io) => PikeError::Io(io),
        kind => PikeError::Parse {
            line,
            column,
            message: format!("{kind:?}"),
        },
    }
}

fn write_json<T: Serialize, W: Write>(value: &T, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(json_error)?;
    writeln!(w)?;
    Ok(())
}

fn check_schema(found: u32) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(PikeError::invalid(format!(
            "unsupported schema_version {found}; expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

pub fn write_dataset_csv<W: Write>(data: &TransitionDataset, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let d = data.state_dim();
    let q = data.action_dim();
    let header: Vec<String> = (0..d)
        .map(|i| format!("x_{i}"))
        .chain((0..q).map(|i| format!("u_{i}")))
        .chain((0..d).map(|i| format!("y_{i}")))
        .collect();
    out.write_record(&header).map_err(csv_error)?;
    for i in 0..data.len() {
        let row: Vec<String> = data
            .states()
            .row(i)
            .iter()
            .chain(data.actions().row(i))
            .chain(data.next_states().row(i))
            .map(|v| format!("{v:e}"))
            .collect();
        out.write_record(&row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(r: R) -> Result<TransitionDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers().map_err(csv_error)?.clone();
    // counts of x_, u_, y_ columns
    let mut counts = [0usize; 3];
    for (col, name) in header.iter().enumerate() {
        let (prefix, block) = match name.split_once('_') {
            Some(("x", _)) => ("x", 0),
            Some(("u", _)) => ("u", 1),
            Some(("y", _)) => ("y", 2),
            _ => {
                return Err(PikeError::Parse {
                    line: 1,
                    column: col + 1,
                    message: format!("unexpected column `{name}`"),
                })
            }
        };
        let k = counts[block];
        let expected_col = counts[..block].iter().sum::<usize>() + k;
        let later_blocks_empty = counts[block + 1..].iter().all(|&c| c == 0);
        if name != format!("{prefix}_{k}") || expected_col != col || !later_blocks_empty {
            return Err(PikeError::Parse {
                line: 1,
                column: col + 1,
                message: format!("column `{name}` out of order; expected x_*, then u_*, then y_*"),
            });
        }
        counts[block] += 1;
    }
    let [d, q, dy] = counts;
    if d == 0 || dy != d {
        return Err(PikeError::Parse {
            line: 1,
            column: 1,
            message: format!("header needs x_0.. and y_0.. of equal length, found {d} and {dy}"),
        });
    }

    let mut states = Points::zeros(0, d);
    let mut actions = Points::zeros(0, q);
    let mut next = Points::zeros(0, d);
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut values = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| PikeError::Parse {
                line,
                column: col + 1,
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(PikeError::Parse {
                    line,
                    column: col + 1,
                    message: format!("non-finite value `{field}`"),
                });
            }
            values.push(v);
        }
        states.push(&values[..d])?;
        actions.push(&values[d..d + q])?;
        next.push(&values[d + q..])?;
    }
    TransitionDataset::new(states, actions, next)
}

/// Serializable form of a fitted embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingFile {
    pub schema_version: u32,
    pub mode: EmbeddingMode,
    pub kernel_x: KernelSpec,
    pub kernel_u: KernelSpec,
    pub lambda: f64,
    /// System whose prior model the physics-informed mode uses.
    pub system: Option<SystemSpec>,
    pub dataset: TransitionDataset,
}

impl EmbeddingFile {
    pub fn new(embedding: &FittedEmbedding, system: Option<&SystemSpec>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            mode: embedding.mode(),
            kernel_x: *embedding.spec_x(),
            kernel_u: *embedding.spec_u(),
            lambda: embedding.lambda(),
            system: system.cloned(),
            dataset: embedding.dataset().clone(),
        }
    }

    /// Rebuilds the embedding. Deserialized data is revalidated first.
    pub fn refit(&self) -> Result<FittedEmbedding> {
        check_schema(self.schema_version)?;
        let ds = &self.dataset;
        let dataset = TransitionDataset::new(ds.states().clone(), ds.actions().clone(), ds.next_states().clone())?;
        let prior: Option<Arc<dyn PriorModel>> = match (&self.system, self.mode) {
            (Some(system), EmbeddingMode::PhysicsInformed) => {
                system.validate()?;
                if system.state_dim() != dataset.state_dim() || system.action_dim() != dataset.action_dim() {
                    return Err(PikeError::invalid("system dimensions do not match the stored dataset"));
                }
                Some(Arc::new(system.prior()))
            }
            _ => None,
        };
        FittedEmbedding::fit(dataset, prior, self.kernel_x, self.kernel_u, self.lambda, self.mode)
    }
}

pub fn write_embedding<W: Write>(embedding: &FittedEmbedding, system: Option<&SystemSpec>, w: W) -> Result<()> {
    write_json(&EmbeddingFile::new(embedding, system), w)
}

pub fn read_embedding_file<R: Read>(r: R) -> Result<EmbeddingFile> {
    serde_json::from_reader(r).map_err(json_error)
}

pub fn read_embedding<R: Read>(r: R) -> Result<FittedEmbedding> {
    read_embedding_file(r)?.refit()
}

pub fn write_report_json<W: Write>(report: &ExperimentReport, w: W) -> Result<()> {
    write_json(report, w)
}

pub fn read_report_json<R: Read>(r: R) -> Result<ExperimentReport> {
    let report: ExperimentReport = serde_json::from_reader(r).map_err(json_error)?;
    check_schema(report.schema_version)?;
    Ok(report)
}

/// One row per error record.
pub fn write_report_csv<W: Write>(report: &ExperimentReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "experiment",
        "mode",
        "M",
        "trial",
        "seed",
        "error",
        "runtime_ms",
        "regime",
        "diverged",
    ])
    .map_err(csv_error)?;
    for r in &report.records {
        out.write_record([
            r.experiment.name().to_owned(),
            r.mode.short_name().to_owned(),
            r.samples.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            format!("{:e}", r.error),
            format!("{:.3}", r.runtime_ms),
            r.regime.clone(),
            r.diverged.to_string(),
        ])
        .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// Closed-loop run as written by `pike control`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub schema_version: u32,
    pub config_digest: String,
    pub seed: u64,
    pub mode: EmbeddingMode,
    pub samples: usize,
    pub mean_squared_error: f64,
    pub targets: Vec<Vec<f64>>,
    pub result: TrackResult,
}

pub fn write_track_json<W: Write>(record: &TrackRecord, w: W) -> Result<()> {
    write_json(record, w)
}

pub fn write_trajectory_csv<W: Write>(states: &[Vec<f64>], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let d = states.first().map_or(0, Vec::len);
    let header: Vec<String> = std::iter::once("t".to_owned())
        .chain((0..d).map(|i| format!("x_{i}")))
        .collect();
    out.write_record(&header).map_err(csv_error)?;
    for (t, x) in states.iter().enumerate() {
        let row: Vec<String> = std::iter::once(t.to_string())
            .chain(x.iter().map(|v| format!("{v:e}")))
            .collect();
        out.write_record(&row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}
