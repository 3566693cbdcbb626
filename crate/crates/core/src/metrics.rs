//! Evaluation metrics and report serialization.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EpochReport;
use crate::pilot::WorkloadVector;

/// Column order of the per-epoch CSV.
pub const CSV_COLUMNS: [&str; 10] = [
    "epoch",
    "committed_tx",
    "dropped_tx",
    "intra",
    "cross",
    "cross_ratio",
    "workload_deviation",
    "normalized_throughput",
    "proposed_mr",
    "committed_mr",
];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("metrics file has no rows")]
    Empty,
    #[error("unrecognized metrics header")]
    Header,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `cross / (intra + cross)`, zero for an empty epoch.
pub fn cross_shard_ratio(intra: u64, cross: u64) -> f64 {
    let total = intra + cross;
    if total == 0 {
        0.0
    } else {
        cross as f64 / total as f64
    }
}

/// `sqrt(Σ (ω_i − ω̄)² / (k · ω̄))`. Note the `k · ω̄` denominator: this is
/// not the textbook standard deviation. `None` when every shard is idle.
pub fn workload_deviation(omega: &WorkloadVector) -> Option<f64> {
    let k = omega.k() as f64;
    let mean = omega.total() / k;
    if omega.k() == 0 || !(mean > 0.0) {
        return None;
    }
    let ss: f64 = omega.loads().iter().map(|w| (w - mean) * (w - mean)).sum();
    Some((ss / (k * mean)).sqrt())
}

/// `Λ / λ` with `Λ` the committed transaction count.
pub fn normalized_throughput(committed: u64, lambda: f64) -> f64 {
    committed as f64 / lambda
}

/// The fields of an epoch report that the CSV carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub epoch: u64,
    pub committed_tx: u64,
    pub dropped_tx: u64,
    pub intra: u64,
    pub cross: u64,
    pub cross_ratio: f64,
    pub workload_deviation: f64,
    pub normalized_throughput: f64,
    pub proposed_mr: u64,
    pub committed_mr: u64,
}

impl From<&EpochReport> for ReportRow {
    fn from(r: &EpochReport) -> Self {
        ReportRow {
            epoch: r.epoch,
            committed_tx: r.committed_tx,
            dropped_tx: r.dropped_tx,
            intra: r.intra,
            cross: r.cross,
            cross_ratio: r.cross_ratio,
            workload_deviation: r.workload_deviation,
            normalized_throughput: r.normalized_throughput,
            proposed_mr: r.proposed_mr,
            committed_mr: r.committed_mr,
        }
    }
}

/// Means over the evaluation epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub epochs: usize,
    pub mean_cross_ratio: f64,
    pub mean_workload_deviation: f64,
    pub mean_normalized_throughput: f64,
    pub total_committed_mr: u64,
}

impl Aggregates {
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a ReportRow>) -> Self {
        let mut n = 0usize;
        let (mut cr, mut wd, mut nt) = (0.0, 0.0, 0.0);
        let mut mr = 0;
        for r in rows {
            n += 1;
            cr += r.cross_ratio;
            wd += r.workload_deviation;
            nt += r.normalized_throughput;
            mr += r.committed_mr;
        }
        let mean = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
        Aggregates {
            epochs: n,
            mean_cross_ratio: mean(cr),
            mean_workload_deviation: mean(wd),
            mean_normalized_throughput: mean(nt),
            total_committed_mr: mr,
        }
    }
}

/// Trace identity recorded in a run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceInfo {
    pub source: String,
    pub digest: String,
    pub transactions: usize,
    pub accounts: usize,
    pub first_block: Option<u64>,
    pub last_block: Option<u64>,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub code_version: String,
    pub created_unix: u64,
    pub params: crate::model::SimParams,
    pub lambda_source: String,
    pub allocator: crate::allocators::AllocatorKind,
    pub init_allocator: crate::allocators::AllocatorKind,
    pub epochs_requested: Option<usize>,
    pub epochs_run: usize,
    pub history_window: Option<u32>,
    pub noisy_mempool: f64,
    pub fusion: crate::pilot::Fusion,
    pub greedy_cap_factor: f64,
    pub split: SplitInfo,
    pub trace: TraceInfo,
    pub notes: Vec<String>,
}

/// How the trace was divided into warm-up and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub unit: String,
    pub warmup_fraction: f64,
    pub warmup_transactions: usize,
    pub evaluation_start_block: u64,
    pub full_epochs_available: usize,
    /// `(first_block, last_block, transactions)` of a trailing window shorter
    /// than an epoch; never simulated.
    pub partial_tail: Option<(u64, u64, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub run_manifest: Option<RunManifest>,
    pub reports: Vec<EpochReport>,
}

impl MetricSeries {
    pub fn new(reports: Vec<EpochReport>) -> Self {
        MetricSeries { run_manifest: None, reports }
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        self.reports.iter().map(ReportRow::from).collect()
    }

    pub fn aggregates(&self) -> Aggregates {
        Aggregates::from_rows(&self.rows())
    }

    /// Aggregates over the last `n` epochs.
    pub fn tail_aggregates(&self, n: usize) -> Aggregates {
        let rows = self.rows();
        Aggregates::from_rows(&rows[rows.len().saturating_sub(n)..])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    run_manifest: &'a Option<RunManifest>,
    aggregates: Aggregates,
    reports: &'a [EpochReport],
}

#[derive(Deserialize)]
struct JsonDocumentOwned {
    run_manifest: Option<RunManifest>,
    reports: Vec<EpochReport>,
}

/// Writes the series as CSV (one row per epoch, no manifest) or as a JSON
/// document holding the manifest, aggregates and full reports.
pub fn serialize_reports<W: Write>(series: &MetricSeries, format: ReportFormat, w: W) -> Result<(), MetricsError> {
    match format {
        ReportFormat::Csv => {
            let mut out =
                csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::Any(b'\n')).from_writer(w);
            out.write_record(CSV_COLUMNS)?;
            for row in series.rows() {
                out.serialize(row)?;
            }
            out.flush()?;
        }
        ReportFormat::Json => {
            let doc = JsonDocument {
                run_manifest: &series.run_manifest,
                aggregates: series.aggregates(),
                reports: &series.reports,
            };
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, &doc)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn deserialize_json<R: Read>(r: R) -> Result<MetricSeries, MetricsError> {
    let doc: JsonDocumentOwned = serde_json::from_reader(r)?;
    Ok(MetricSeries { run_manifest: doc.run_manifest, reports: doc.reports })
}

/// Parses the per-epoch CSV, naming the first malformed row.
pub fn parse_csv_rows<R: Read>(r: R) -> Result<Vec<ReportRow>, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(MetricsError::Header);
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<ReportRow>().enumerate() {
        let row = rec.map_err(|e| MetricsError::Row { row: i + 1, reason: e.to_string() })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(rows)
}
