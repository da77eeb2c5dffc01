//! Scoreboard tables and cactus-plot data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::scoring::{adjudicate, classify, BenchmarkScoreRow, InstanceRecord, Outcome, OverallRow, Scoreboard, Truth};

pub const TABLE_HEADER: [&str; 8] = ["# ", "Tool", "Verified", "Falsified", "Fastest", "Penalty", "Score", "Percent"];

fn row_cells(rank: usize, row: &BenchmarkScoreRow) -> [String; 8] {
    [
        rank.to_string(),
        row.tool.clone(),
        row.verified.to_string(),
        row.falsified.to_string(),
        row.fastest.to_string(),
        row.penalties.to_string(),
        row.raw_score.to_string(),
        row.percent_display(),
    ]
}

pub fn render_benchmark_csv(rows: &[BenchmarkScoreRow]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(TABLE_HEADER).expect("in-memory write");
    for (i, row) in rows.iter().enumerate() {
        w.write_record(row_cells(i + 1, row)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn render_benchmark_markdown(benchmark: &str, rows: &[BenchmarkScoreRow]) -> String {
    let mut out = format!("### Benchmark `{benchmark}`\n\n");
    out.push_str("| # | Tool | Verified | Falsified | Fastest | Penalty | Score | Percent |\n");
    out.push_str("|---|------|----------|-----------|---------|---------|------:|--------:|\n");
    for (i, row) in rows.iter().enumerate() {
        let _ = writeln!(out, "| {} |", row_cells(i + 1, row).join(" | "));
    }
    out
}

pub fn render_overall_markdown(title: &str, rows: &[OverallRow]) -> String {
    let mut out = format!("### {title}\n\n| # | Tool | Score |\n|---|------|------:|\n");
    for (i, row) in rows.iter().enumerate() {
        let _ = writeln!(out, "| {} | {} | {:.1} |", i + 1, row.tool, row.total);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CactusMode {
    /// Point k is the k-th smallest runtime.
    #[default]
    PerInstance,
    /// Point k is the sum of the k smallest runtimes.
    Cumulative,
}

impl FromStr for CactusMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-instance" => Ok(CactusMode::PerInstance),
            "cumulative" => Ok(CactusMode::Cumulative),
            other => Err(format!("unknown cactus mode `{other}` (expected per-instance or cumulative)")),
        }
    }
}

/// Per benchmark and tool, the sorted runtimes of correctly solved
/// instances.
pub fn solved_runtimes(
    records: &[InstanceRecord],
    declared: &BTreeMap<String, Truth>,
) -> BTreeMap<String, BTreeMap<String, Vec<f64>>> {
    let mut by_instance: BTreeMap<(&str, &str), Vec<InstanceRecord>> = BTreeMap::new();
    for r in records {
        by_instance.entry((&r.benchmark, &r.instance)).or_default().push(r.clone());
    }
    let mut out: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for ((bench, inst), recs) in &by_instance {
        let truth = adjudicate(recs, declared.get(*inst).copied()).truth;
        let tools = out.entry(bench.to_string()).or_default();
        for r in recs {
            let times = tools.entry(r.tool.clone()).or_default();
            if matches!(classify(r.status, r.witness_valid(), truth), Outcome::Verified | Outcome::Falsified) {
                times.push(r.runtime_s);
            }
        }
    }
    for tools in out.values_mut() {
        for times in tools.values_mut() {
            times.sort_by(f64::total_cmp);
        }
    }
    out
}

/// Cactus points `(k, t_k)` for 1-based `k` from sorted runtimes.
pub fn cactus_points(sorted_runtimes: &[f64], mode: CactusMode) -> Vec<(usize, f64)> {
    let mut acc = 0.0;
    sorted_runtimes
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            acc += t;
            (i + 1, if mode == CactusMode::Cumulative { acc } else { t })
        })
        .collect()
}

pub fn render_cactus_csv(tools: &BTreeMap<String, Vec<f64>>, mode: CactusMode) -> String {
    let column = match mode {
        CactusMode::PerInstance => "runtime_s",
        CactusMode::Cumulative => "cumulative_runtime_s",
    };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["tool", "solved", column]).expect("in-memory write");
    for (tool, times) in tools {
        for (k, t) in cactus_points(times, mode) {
            w.write_record([tool.clone(), k.to_string(), format!("{t:.6}")]).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// File-system friendly form of a benchmark name.
pub fn file_stem(benchmark: &str) -> String {
    benchmark.chars().map(|c| if c.is_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

/// Writes `tables/<b>.md`, `tables/<b>.csv`, `overall.md` and, when
/// records are given, `cactus/<b>.csv` below `out`.
pub fn write_report(
    out: &Path,
    board: &Scoreboard,
    overall_title: &str,
    cactus: Option<(&[InstanceRecord], &BTreeMap<String, Truth>, CactusMode)>,
) -> std::io::Result<()> {
    let tables = out.join("tables");
    fs::create_dir_all(&tables)?;
    for (bench, rows) in &board.per_benchmark {
        let stem = file_stem(bench);
        fs::write(tables.join(format!("{stem}.md")), render_benchmark_markdown(bench, rows))?;
        fs::write(tables.join(format!("{stem}.csv")), render_benchmark_csv(rows))?;
    }
    fs::write(out.join("overall.md"), render_overall_markdown(overall_title, &board.overall))?;
    if let Some((records, declared, mode)) = cactus {
        let dir = out.join("cactus");
        fs::create_dir_all(&dir)?;
        for (bench, tools) in solved_runtimes(records, declared) {
            fs::write(dir.join(format!("{}.csv", file_stem(&bench))), render_cactus_csv(&tools, mode))?;
        }
    }
    Ok(())
}
