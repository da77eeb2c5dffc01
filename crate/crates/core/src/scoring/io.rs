//! Results and counts CSV files.
//!
//! Instance ids have the form `<onnx path>|<vnnlib path>`; relative paths
//! are resolved against the directory holding the CSV file.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{InstanceRecord, Status, Tally, Truth};
use crate::cex::{load_counterexample, validate, CexMode, CexVerdict};
use crate::onnx::{load_network, Network};
use crate::specfmt::{load_specification, Specification, DEFAULT_CASE_CAP};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoringError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Csv { path: String, message: String },
}

/// One line of a per-tool results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub benchmark: String,
    pub instance: String,
    pub status: String,
    pub runtime_s: f64,
    #[serde(default)]
    pub cex_path: String,
}

fn io_err(path: &Path, e: impl ToString) -> ScoringError {
    ScoringError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn csv_err(path: &Path, e: impl ToString) -> ScoringError {
    ScoringError::Csv { path: path.display().to_string(), message: e.to_string() }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, ScoringError> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_path(path).map_err(|e| io_err(path, e))
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultsRow>, ScoringError> {
    let path = path.as_ref();
    let mut rows = Vec::new();
    for row in reader(path)?.deserialize() {
        let row: ResultsRow = row.map_err(|e| csv_err(path, e))?;
        row.status.parse::<Status>().map_err(|e| csv_err(path, e))?;
        if row.runtime_s.is_nan() || row.runtime_s < 0.0 {
            return Err(csv_err(path, format!("negative or invalid runtime {} for {}", row.runtime_s, row.instance)));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_results_csv(path: impl AsRef<Path>, rows: &[ResultsRow]) -> Result<(), ScoringError> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Debug, Deserialize)]
struct CountsRow {
    benchmark: String,
    tool: String,
    verified: u64,
    falsified: u64,
    penalties: u64,
}

/// Reads `benchmark,tool,verified,falsified,penalties` rows, grouped by
/// benchmark in file order.
pub fn read_counts_csv(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<Tally>>, ScoringError> {
    let path = path.as_ref();
    let mut out: BTreeMap<String, Vec<Tally>> = BTreeMap::new();
    for row in reader(path)?.deserialize() {
        let row: CountsRow = row.map_err(|e| csv_err(path, e))?;
        let tallies = out.entry(row.benchmark.clone()).or_default();
        if tallies.iter().any(|t| t.tool == row.tool) {
            return Err(csv_err(path, format!("duplicate row for {} on {}", row.tool, row.benchmark)));
        }
        tallies.push(Tally {
            tool: row.tool,
            verified: row.verified,
            falsified: row.falsified,
            penalties: row.penalties,
        });
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct TruthRow {
    instance: String,
    truth: String,
}

/// Reads `instance,truth` rows of fixture-declared ground truth.
pub fn read_truth_csv(path: impl AsRef<Path>) -> Result<BTreeMap<String, Truth>, ScoringError> {
    let path = path.as_ref();
    let mut out = BTreeMap::new();
    for row in reader(path)?.deserialize() {
        let row: TruthRow = row.map_err(|e| csv_err(path, e))?;
        let truth = row.truth.parse().map_err(|e| csv_err(path, e))?;
        out.insert(row.instance, truth);
    }
    Ok(out)
}

/// Splits an instance id into its network and specification paths.
pub fn split_instance_id(id: &str) -> Option<(&str, &str)> {
    id.split_once('|').filter(|(a, b)| !a.is_empty() && !b.is_empty())
}

pub fn instance_id(onnx: &Path, vnnlib: &Path) -> String {
    format!("{}|{}", onnx.display(), vnnlib.display())
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

type Loaded = Result<(Arc<Network>, Arc<Specification>), String>;

/// Loads networks and specifications on demand and validates witnesses,
/// caching each instance's files across tools.
#[derive(Debug)]
pub struct WitnessResolver {
    pub mode: CexMode,
    pub out_tol: f64,
    cache: HashMap<(PathBuf, PathBuf), Loaded>,
    /// Human-readable reasons for witnesses that could not be checked.
    pub warnings: Vec<String>,
}

impl WitnessResolver {
    pub fn new(mode: CexMode, out_tol: f64) -> Self {
        WitnessResolver { mode, out_tol, cache: HashMap::new(), warnings: Vec::new() }
    }

    fn load(&mut self, base: &Path, instance: &str) -> Loaded {
        let Some((onnx, vnnlib)) = split_instance_id(instance) else {
            return Err(format!("instance id `{instance}` is not of the form <onnx>|<vnnlib>"));
        };
        let key = (resolve(base, onnx), resolve(base, vnnlib));
        self.cache
            .entry(key.clone())
            .or_insert_with(|| {
                let net = load_network(&key.0).map_err(|e| e.to_string())?;
                let spec = load_specification(&key.1, DEFAULT_CASE_CAP).map_err(|e| e.to_string())?;
                Ok((Arc::new(net), Arc::new(spec)))
            })
            .clone()
    }

    /// Validates the witness of a `Violated` row; `None` when there is none
    /// or it cannot be checked.
    pub fn verdict(&mut self, base: &Path, row: &ResultsRow) -> Option<CexVerdict> {
        if row.cex_path.is_empty() {
            return None;
        }
        let loaded = self.load(base, &row.instance);
        let outcome = loaded.and_then(|(net, spec)| {
            let cex = load_counterexample(resolve(base, &row.cex_path)).map_err(|e| e.to_string())?;
            validate(&cex, &spec, &net, self.mode, self.out_tol).map_err(|e| e.to_string())
        });
        match outcome {
            Ok(v) => Some(v),
            Err(msg) => {
                self.warnings.push(format!("{}: {msg}", row.instance));
                None
            }
        }
    }
}

/// Reads every `<tool>.csv` in `dir` into records, validating witnesses of
/// `Violated` rows with `resolver`.
pub fn read_results_dir(
    dir: impl AsRef<Path>,
    resolver: &mut WitnessResolver,
) -> Result<Vec<InstanceRecord>, ScoringError> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut records = Vec::new();
    for file in files {
        let tool = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        for row in read_results_csv(&file)? {
            let status: Status = row.status.parse().expect("validated on read");
            let cex_verdict = if status == Status::Violated { resolver.verdict(dir, &row) } else { None };
            records.push(InstanceRecord {
                benchmark: row.benchmark,
                instance: row.instance,
                tool: tool.clone(),
                status,
                runtime_s: row.runtime_s,
                cex_verdict,
            });
        }
    }
    Ok(records)
}
