//! Experiment configuration, replicate scheduling and row output.
//!
//! Replicate `r` of a grid point with key `g` always draws from
//! `substream(derive_seed(seed, g), r)`, and replicate results are collected
//! in index order, so every statistic is reproducible from the master seed
//! regardless of thread count.

mod config;
mod experiments;
pub mod stats;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::Result;

pub use config::{ExperimentConfig, ExperimentKind, OutputFormat, SCHEMA_VERSION};
pub use experiments::{
    arcsine_cdf, coupling_samples, mast_scaling, run_experiment, scaling_point, CouplingSamples, ScalingFit,
    ScalingPoint,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub experiment: String,
    pub statistic: String,
    pub params: Map<String, Value>,
    pub value: f64,
    pub stderr: Option<f64>,
    pub replicates: usize,
    pub seed: u64,
    /// Grid-point key `g` of the substreams behind this row.
    pub substream: u64,
    pub wall_time_s: f64,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    experiment: &'a str,
    statistic: &'a str,
    params: String,
    value: f64,
    stderr: Option<f64>,
    replicates: usize,
    seed: u64,
    substream: u64,
    wall_time_s: f64,
}

pub fn write_rows<W: Write>(rows: &[ExperimentRow], format: OutputFormat, mut out: W) -> Result<()> {
    match format {
        OutputFormat::Jsonl => {
            for row in rows {
                serde_json::to_writer(&mut out, row)?;
                out.write_all(b"\n")?;
            }
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for row in rows {
                w.serialize(CsvRow {
                    experiment: &row.experiment,
                    statistic: &row.statistic,
                    params: Value::Object(row.params.clone()).to_string(),
                    value: row.value,
                    stderr: row.stderr,
                    replicates: row.replicates,
                    seed: row.seed,
                    substream: row.substream,
                    wall_time_s: row.wall_time_s,
                })?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn write_rows_to(rows: &[ExperimentRow], format: OutputFormat, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_rows(rows, format, file)
}
