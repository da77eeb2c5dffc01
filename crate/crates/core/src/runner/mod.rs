//! Drives external verification tools over a benchmark.
//!
//! Each tool is described by a [`ToolAdapter`] whose command templates are
//! run through `sh -c` once per instance. A run writes a status word to the
//! result file and, for `violated`, a witness to the counterexample file.
//! Instances run one at a time; trivial instances run first so the tool's
//! startup overhead is known before real instances are timed.

mod process;

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

pub use process::{run_shell, Finished, Limits};

use crate::onnx::builder::{encode, identity_model};
use crate::scoring::{apply_overhead, instance_id, InstanceRecord, ResultsRow, Status};

/// Upper bound on the summed timeouts of one benchmark, in seconds.
pub const MAX_BENCHMARK_SECONDS: f64 = 6.0 * 3600.0;
pub const DEFAULT_GRACE: Duration = Duration::from_secs(10);
pub const DEFAULT_POLL: Duration = Duration::from_millis(200);
pub const DEFAULT_PREPARE_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunnerError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Manifest { path: String, line: u64, message: String },
    #[error("manifest {path} has no instances")]
    EmptyManifest { path: String },
    #[error("missing file {0}")]
    MissingFile(String),
    #[error("summed timeouts {total} s exceed the benchmark cap of {cap} s")]
    CapExceeded { total: f64, cap: f64 },
    #[error("adapter {path}: {message}")]
    Adapter { path: String, message: String },
    #[error("no instance finished without error, so the overhead is unknown")]
    NoSuccessfulRun,
}

fn io_err(path: &Path, e: impl ToString) -> RunnerError {
    RunnerError::Io { path: path.display().to_string(), message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestInstance {
    pub onnx: PathBuf,
    pub vnnlib: PathBuf,
    pub timeout_s: f64,
}

impl ManifestInstance {
    pub fn id(&self) -> String {
        instance_id(&self.onnx, &self.vnnlib)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkManifest {
    pub name: String,
    pub instances: Vec<ManifestInstance>,
}

impl BenchmarkManifest {
    pub fn total_timeout(&self) -> f64 {
        self.instances.iter().map(|i| i.timeout_s).sum()
    }

    /// Checks instance count, timeouts and the per-benchmark cap.
    pub fn validate(&self) -> Result<(), RunnerError> {
        if self.instances.is_empty() {
            return Err(RunnerError::EmptyManifest { path: self.name.clone() });
        }
        let total = self.total_timeout();
        if total > MAX_BENCHMARK_SECONDS {
            return Err(RunnerError::CapExceeded { total, cap: MAX_BENCHMARK_SECONDS });
        }
        Ok(())
    }
}

/// Reads an `onnx,vnnlib,timeout` CSV (no header). Relative paths are
/// resolved against the manifest's directory; the benchmark is named after
/// that directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<BenchmarkManifest, RunnerError> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    let base = fs::canonicalize(base).unwrap_or_else(|_| base.to_path_buf());
    let name = base
        .file_name()
        .or_else(|| path.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "benchmark".into());
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let mut instances = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| io_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| RunnerError::Manifest { path: path.display().to_string(), line, message };
        if record.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", record.len())));
        }
        let timeout_s: f64 = record[2].parse().map_err(|_| bad(format!("invalid timeout `{}`", &record[2])))?;
        if !(timeout_s > 0.0 && timeout_s.is_finite()) {
            return Err(bad(format!("timeout must be positive, got {timeout_s}")));
        }
        let onnx = base.join(&record[0]);
        let vnnlib = base.join(&record[1]);
        for p in [&onnx, &vnnlib] {
            if !p.is_file() {
                return Err(RunnerError::MissingFile(p.display().to_string()));
            }
        }
        instances.push(ManifestInstance { onnx, vnnlib, timeout_s });
    }
    let manifest = BenchmarkManifest { name, instances };
    if manifest.instances.is_empty() {
        return Err(RunnerError::EmptyManifest { path: path.display().to_string() });
    }
    manifest.validate()?;
    Ok(manifest)
}

/// How to prepare and run one tool.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ToolAdapter {
    pub name: String,
    #[serde(default)]
    pub prepare: Option<String>,
    pub run: String,
    #[serde(default)]
    pub env: BTreeMap<String, String>,
}

const PLACEHOLDERS: [&str; 5] = ["onnx", "vnnlib", "timeout", "result_out", "cex_out"];

impl ToolAdapter {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let adapter: ToolAdapter = toml::from_str(text).map_err(|e| e.to_string())?;
        for template in adapter.prepare.iter().chain([&adapter.run]) {
            check_template(template)?;
        }
        if adapter.name.is_empty() || adapter.name.contains(['/', '\\']) {
            return Err(format!("invalid tool name `{}`", adapter.name));
        }
        Ok(adapter)
    }
}

pub fn load_adapter(path: impl AsRef<Path>) -> Result<ToolAdapter, RunnerError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    ToolAdapter::from_toml(&text).map_err(|message| RunnerError::Adapter { path: path.display().to_string(), message })
}

fn check_template(template: &str) -> Result<(), String> {
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let close = rest[open..].find('}').ok_or_else(|| format!("unclosed placeholder in `{template}`"))?;
        let key = &rest[open + 1..open + close];
        if !PLACEHOLDERS.contains(&key) {
            return Err(format!("unknown placeholder {{{key}}} in `{template}`"));
        }
        rest = &rest[open + close + 1..];
    }
    Ok(())
}

/// Quotes `s` for POSIX `sh`.
pub fn shell_quote(s: &str) -> String {
    if !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b"-_./=:,+".contains(&b)) {
        return s.to_string();
    }
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Substitutes placeholders; path values are shell-quoted.
pub fn render_template(template: &str, values: &BTreeMap<&str, String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        match rest[open..].find('}') {
            Some(close) => {
                let key = &rest[open + 1..open + close];
                match values.get(key) {
                    Some(v) => out.push_str(&shell_quote(v)),
                    None => out.push_str(&rest[open..open + close + 1]),
                }
                rest = &rest[open + close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunnerConfig {
    pub grace: Duration,
    pub poll: Duration,
    pub prepare_timeout: Duration,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        RunnerConfig { grace: DEFAULT_GRACE, poll: DEFAULT_POLL, prepare_timeout: DEFAULT_PREPARE_TIMEOUT }
    }
}

/// Reads the status word at the start of a result file.
pub fn parse_result_file(text: &str) -> Option<Status> {
    text.split_whitespace().next()?.parse().ok()
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Runs one instance. `extra_budget_s` extends the wall-clock budget beyond
/// the instance timeout to absorb the tool's startup overhead. Files for
/// the run are created in `workdir` under `stem`.
pub fn run_instance(
    adapter: &ToolAdapter,
    benchmark: &str,
    instance: &ManifestInstance,
    cfg: &RunnerConfig,
    extra_budget_s: f64,
    workdir: &Path,
    stem: &str,
) -> Result<ResultsRow, RunnerError> {
    let result_out = workdir.join(format!("{stem}.result"));
    let cex_out = workdir.join(format!("{stem}.counterexample"));
    let log = workdir.join(format!("{stem}.log"));
    for p in [&result_out, &cex_out] {
        if p.exists() {
            fs::remove_file(p).map_err(|e| io_err(p, e))?;
        }
    }
    let values: BTreeMap<&str, String> = BTreeMap::from([
        ("onnx", instance.onnx.display().to_string()),
        ("vnnlib", instance.vnnlib.display().to_string()),
        ("timeout", format!("{}", instance.timeout_s)),
        ("result_out", result_out.display().to_string()),
        ("cex_out", cex_out.display().to_string()),
    ]);
    let mut row = ResultsRow {
        benchmark: benchmark.to_string(),
        instance: instance.id(),
        status: Status::Error.to_string(),
        runtime_s: 0.0,
        cex_path: String::new(),
    };

    if let Some(prepare) = &adapter.prepare {
        let limits = Limits { budget: cfg.prepare_timeout, grace: cfg.grace, poll: cfg.poll };
        let prep_log = workdir.join(format!("{stem}.prepare.log"));
        match run_shell(&render_template(prepare, &values), &adapter.env, limits, Some(&prep_log)) {
            Ok(f) if f.status.is_some_and(|s| s.success()) => {}
            _ => return Ok(row),
        }
    }

    let limits = Limits {
        budget: Duration::from_secs_f64(instance.timeout_s + extra_budget_s.max(0.0)),
        grace: cfg.grace,
        poll: cfg.poll,
    };
    let finished = match run_shell(&render_template(&adapter.run, &values), &adapter.env, limits, Some(&log)) {
        Ok(f) => f,
        Err(_) => return Ok(row),
    };
    row.runtime_s = secs(finished.elapsed);
    if finished.timed_out() {
        row.status = Status::Timeout.to_string();
        return Ok(row);
    }
    let status = fs::read_to_string(&result_out).ok().as_deref().and_then(parse_result_file).unwrap_or(Status::Error);
    row.status = status.to_string();
    if status == Status::Violated && cex_out.is_file() {
        row.cex_path = cex_out.display().to_string();
    }
    Ok(row)
}

/// Minimum runtime over runs that finished with a result.
pub fn measure_overhead<'a>(rows: impl IntoIterator<Item = &'a ResultsRow>) -> Result<f64, RunnerError> {
    rows.into_iter()
        .filter(|r| !matches!(r.status.parse(), Ok(Status::Error) | Ok(Status::Timeout) | Err(_)))
        .map(|r| r.runtime_s)
        .min_by(f64::total_cmp)
        .ok_or(RunnerError::NoSuccessfulRun)
}

const TRIVIAL_SPEC: &str = "\
; Holds for the identity: Y_0 = X_0 <= 1 < 2.
(declare-const X_0 Real)
(declare-const Y_0 Real)
(assert (>= X_0 0))
(assert (<= X_0 1))
(assert (>= Y_0 2))
";

/// Writes the 1x1 identity network and its trivially holding property
/// into `dir`.
pub fn write_trivial_instance(dir: &Path, timeout_s: f64) -> Result<ManifestInstance, RunnerError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let onnx = dir.join("trivial_identity.onnx");
    let vnnlib = dir.join("trivial_identity.vnnlib");
    fs::write(&onnx, encode(&identity_model(1))).map_err(|e| io_err(&onnx, e))?;
    fs::write(&vnnlib, TRIVIAL_SPEC).map_err(|e| io_err(&vnnlib, e))?;
    Ok(ManifestInstance { onnx, vnnlib, timeout_s })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Rows after the overhead rule.
    pub rows: Vec<ResultsRow>,
    /// Rows as measured.
    pub raw_rows: Vec<ResultsRow>,
    pub trivial_runtimes: Vec<f64>,
    pub overhead_s: f64,
}

/// Runs trivial instances then every manifest instance, appending each
/// result to `out_csv` as soon as it is known. When done, the overhead is
/// measured, applied, and `out_csv` is rewritten with adjusted rows; the
/// overhead is also written to `<out_csv>.overhead`.
pub fn run_benchmark(
    adapter: &ToolAdapter,
    manifest: &BenchmarkManifest,
    out_csv: &Path,
    cfg: &RunnerConfig,
    trivial_runs: usize,
    mut progress: impl FnMut(&ResultsRow),
) -> Result<RunSummary, RunnerError> {
    manifest.validate()?;
    let workdir = PathBuf::from(format!("{}.work", out_csv.display()));
    fs::create_dir_all(&workdir).map_err(|e| io_err(&workdir, e))?;
    let work_rel = PathBuf::from(workdir.file_name().expect("named results file"));

    let trivial = write_trivial_instance(&workdir.join("trivial"), 60.0)?;
    let mut trivial_rows = Vec::new();
    for k in 0..trivial_runs {
        trivial_rows.push(run_instance(adapter, "trivial", &trivial, cfg, 0.0, &workdir, &format!("trivial_{k}"))?);
    }
    let estimate = measure_overhead(&trivial_rows).unwrap_or(0.0);

    let mut file = File::create(out_csv).map_err(|e| io_err(out_csv, e))?;
    writeln!(file, "benchmark,instance,status,runtime_s,cex_path").map_err(|e| io_err(out_csv, e))?;
    drop(file);
    let mut rows = Vec::with_capacity(manifest.instances.len());
    for (k, inst) in manifest.instances.iter().enumerate() {
        let mut row = run_instance(adapter, &manifest.name, inst, cfg, estimate, &workdir, &format!("{k:05}"))?;
        if let Some(name) = Path::new(&row.cex_path).file_name() {
            // Relative to the CSV's directory, where scoring resolves it.
            row.cex_path = work_rel.join(name).display().to_string();
        }
        append_row(out_csv, &row)?;
        progress(&row);
        rows.push(row);
    }

    let overhead_s = measure_overhead(trivial_rows.iter().chain(&rows))?;
    let timeouts: BTreeMap<String, f64> = manifest.instances.iter().map(|i| (i.id(), i.timeout_s)).collect();
    let adjusted = adjust_rows(&rows, overhead_s, &timeouts);

    let tmp = out_csv.with_extension("csv.tmp");
    crate::scoring::write_results_csv(&tmp, &adjusted)
        .map_err(|e| RunnerError::Io { path: tmp.display().to_string(), message: e.to_string() })?;
    fs::rename(&tmp, out_csv).map_err(|e| io_err(out_csv, e))?;
    let sidecar = PathBuf::from(format!("{}.overhead", out_csv.display()));
    fs::write(&sidecar, format!("{overhead_s}\n")).map_err(|e| io_err(&sidecar, e))?;

    Ok(RunSummary {
        rows: adjusted,
        raw_rows: rows,
        trivial_runtimes: trivial_rows.iter().map(|r| r.runtime_s).collect(),
        overhead_s,
    })
}

fn append_row(path: &Path, row: &ResultsRow) -> Result<(), RunnerError> {
    let file = OpenOptions::new().append(true).open(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.serialize(row).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

/// Applies the overhead rule to result rows.
pub fn adjust_rows(rows: &[ResultsRow], overhead_s: f64, timeouts: &BTreeMap<String, f64>) -> Vec<ResultsRow> {
    let records: Vec<InstanceRecord> = rows
        .iter()
        .map(|r| InstanceRecord {
            benchmark: r.benchmark.clone(),
            instance: r.instance.clone(),
            tool: String::new(),
            status: r.status.parse().unwrap_or(Status::Error),
            runtime_s: r.runtime_s,
            cex_verdict: None,
        })
        .collect();
    apply_overhead(&records, overhead_s, timeouts)
        .into_iter()
        .zip(rows)
        .map(|(rec, row)| ResultsRow {
            status: rec.status.to_string(),
            runtime_s: rec.runtime_s,
            cex_path: if rec.status == Status::Violated { row.cex_path.clone() } else { String::new() },
            ..row.clone()
        })
        .collect()
}
