//! Instance scores, adjudication, per-benchmark normalisation and overall
//! totals.
//!
//! A correct result earns 10 points and an incorrect one costs 150. A
//! `Violated` claim is correct only when its witness validates; a `Holds`
//! claim is correct when no validated witness exists and some tool reported
//! `Holds`. Benchmark percentages are raw scores divided by the best raw
//! score on that benchmark, and the overall total sums those percentages.

mod io;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use io::{
    instance_id, read_counts_csv, read_results_csv, read_results_dir, read_truth_csv, split_instance_id,
    write_results_csv, ResultsRow, ScoringError, WitnessResolver,
};

use crate::cex::CexVerdict;

pub const CORRECT_POINTS: i64 = 10;
pub const INCORRECT_POINTS: i64 = -150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Status {
    Holds,
    Violated,
    Timeout,
    Error,
    Unknown,
}

impl Status {
    pub const ALL: [Status; 5] = [Status::Holds, Status::Violated, Status::Timeout, Status::Error, Status::Unknown];

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Holds => "holds",
            Status::Violated => "violated",
            Status::Timeout => "timeout",
            Status::Error => "error",
            Status::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = String;

    /// Case-insensitive; `unsat` and `sat` are accepted as aliases of
    /// `holds` and `violated`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "holds" | "unsat" => Ok(Status::Holds),
            "violated" | "sat" => Ok(Status::Violated),
            "timeout" => Ok(Status::Timeout),
            "error" => Ok(Status::Error),
            "unknown" => Ok(Status::Unknown),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Truth {
    Holds,
    Violated,
    Undetermined,
}

impl Truth {
    pub const ALL: [Truth; 3] = [Truth::Holds, Truth::Violated, Truth::Undetermined];
}

impl FromStr for Truth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "holds" => Ok(Truth::Holds),
            "violated" => Ok(Truth::Violated),
            "undetermined" => Ok(Truth::Undetermined),
            other => Err(format!("unknown truth `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord {
    pub benchmark: String,
    pub instance: String,
    pub tool: String,
    pub status: Status,
    pub runtime_s: f64,
    /// Adjudicated witness; `None` on a `Violated` record means no witness
    /// could be checked, which counts as invalid.
    pub cex_verdict: Option<CexVerdict>,
}

impl InstanceRecord {
    pub fn witness_valid(&self) -> bool {
        self.cex_verdict.as_ref().is_some_and(|v| v.valid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub instance: String,
    pub truth: Truth,
}

/// Ground truth of one instance from all tools' records on it. A declared
/// truth from a fixture is used when no tool produced a validated witness.
pub fn adjudicate(records: &[InstanceRecord], declared: Option<Truth>) -> GroundTruth {
    let instance = records.first().map(|r| r.instance.clone()).unwrap_or_default();
    let truth = if records.iter().any(|r| r.status == Status::Violated && r.witness_valid()) {
        Truth::Violated
    } else if let Some(t) = declared {
        t
    } else if records.iter().any(|r| r.status == Status::Holds) {
        Truth::Holds
    } else {
        Truth::Undetermined
    };
    GroundTruth { instance, truth }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Verified,
    Falsified,
    Incorrect,
    NoResult,
}

impl Outcome {
    pub fn points(self) -> i64 {
        match self {
            Outcome::Verified | Outcome::Falsified => CORRECT_POINTS,
            Outcome::Incorrect => INCORRECT_POINTS,
            Outcome::NoResult => 0,
        }
    }
}

/// Classifies a claim given whether its witness validated and the
/// instance's adjudicated truth.
pub fn classify(status: Status, witness_valid: bool, truth: Truth) -> Outcome {
    match status {
        Status::Violated if witness_valid => Outcome::Falsified,
        Status::Violated => Outcome::Incorrect,
        Status::Holds => match truth {
            Truth::Holds => Outcome::Verified,
            Truth::Violated => Outcome::Incorrect,
            Truth::Undetermined => Outcome::NoResult,
        },
        Status::Timeout | Status::Error | Status::Unknown => Outcome::NoResult,
    }
}

pub fn score_instance(record: &InstanceRecord, truth: Truth) -> i64 {
    classify(record.status, record.witness_valid(), truth).points()
}

/// Verified, falsified and penalty counts of one tool on one benchmark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tally {
    pub tool: String,
    pub verified: u64,
    pub falsified: u64,
    pub penalties: u64,
}

impl Tally {
    pub fn new(tool: impl Into<String>) -> Self {
        Tally { tool: tool.into(), verified: 0, falsified: 0, penalties: 0 }
    }

    pub fn add(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Verified => self.verified += 1,
            Outcome::Falsified => self.falsified += 1,
            Outcome::Incorrect => self.penalties += 1,
            Outcome::NoResult => {}
        }
    }

    pub fn raw_score(&self) -> i64 {
        CORRECT_POINTS * (self.verified + self.falsified) as i64 + INCORRECT_POINTS * self.penalties as i64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkScoreRow {
    pub tool: String,
    pub verified: u64,
    pub falsified: u64,
    /// Always 0: no time bonus is awarded.
    pub fastest: u64,
    pub penalties: u64,
    pub raw_score: i64,
    pub percent: f64,
    /// Best raw score on the benchmark, kept for exact display rounding.
    pub max_raw_score: i64,
}

impl BenchmarkScoreRow {
    /// Percent rounded half-to-even to one decimal, in tenths. `None` for
    /// negative scores, which display as `0%`.
    pub fn percent_tenths(&self) -> Option<i64> {
        if self.raw_score < 0 {
            return None;
        }
        if self.max_raw_score <= 0 {
            return Some(0);
        }
        Some(div_round_half_even(1000 * self.raw_score as i128, self.max_raw_score as i128) as i64)
    }

    pub fn percent_display(&self) -> String {
        match self.percent_tenths() {
            None => "0%".to_string(),
            Some(t) => format!("{}.{}%", t / 10, t % 10),
        }
    }
}

/// `round(num / den)` with ties to even, for `num >= 0` and `den > 0`.
pub fn div_round_half_even(num: i128, den: i128) -> i128 {
    let (q, r) = (num / den, num % den);
    match (2 * r).cmp(&den) {
        Ordering::Less => q,
        Ordering::Greater => q + 1,
        Ordering::Equal if q % 2 == 0 => q,
        Ordering::Equal => q + 1,
    }
}

/// Ranks by descending raw score; ties are ordered by tool name ascending.
fn rank_rows(rows: &mut [BenchmarkScoreRow]) {
    rows.sort_by(|a, b| b.raw_score.cmp(&a.raw_score).then_with(|| a.tool.cmp(&b.tool)));
}

/// Normalises tallies into ranked rows. When no tool has a positive score
/// every percent is 0.
pub fn score_benchmark(tallies: &[Tally]) -> Vec<BenchmarkScoreRow> {
    let max_raw = tallies.iter().map(Tally::raw_score).max().unwrap_or(0);
    let mut rows: Vec<BenchmarkScoreRow> = tallies
        .iter()
        .map(|t| {
            let raw = t.raw_score();
            let percent = if max_raw > 0 { (100.0 * raw as f64 / max_raw as f64).max(0.0) } else { 0.0 };
            BenchmarkScoreRow {
                tool: t.tool.clone(),
                verified: t.verified,
                falsified: t.falsified,
                fastest: 0,
                penalties: t.penalties,
                raw_score: raw,
                percent,
                max_raw_score: max_raw,
            }
        })
        .collect();
    rank_rows(&mut rows);
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverallRow {
    pub tool: String,
    pub total: f64,
}

/// Sums each tool's percents and ranks by descending total, ties by name.
pub fn score_overall(per_benchmark: &BTreeMap<String, Vec<BenchmarkScoreRow>>) -> Vec<OverallRow> {
    let mut totals: BTreeMap<&str, f64> = BTreeMap::new();
    for rows in per_benchmark.values() {
        for row in rows {
            *totals.entry(&row.tool).or_insert(0.0) += row.percent;
        }
    }
    let mut overall: Vec<OverallRow> =
        totals.into_iter().map(|(tool, total)| OverallRow { tool: tool.to_string(), total }).collect();
    overall.sort_by(|a, b| b.total.total_cmp(&a.total).then_with(|| a.tool.cmp(&b.tool)));
    overall
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scoreboard {
    pub per_benchmark: BTreeMap<String, Vec<BenchmarkScoreRow>>,
    pub overall: Vec<OverallRow>,
}

impl Scoreboard {
    pub fn from_tallies(tallies: BTreeMap<String, Vec<Tally>>) -> Self {
        let per_benchmark: BTreeMap<_, _> = tallies.into_iter().map(|(b, t)| (b, score_benchmark(&t))).collect();
        let overall = score_overall(&per_benchmark);
        Scoreboard { per_benchmark, overall }
    }

    /// Adjudicates every instance and tallies outcomes per benchmark and
    /// tool. `declared` maps instance ids to fixture-declared truths.
    pub fn from_records(records: &[InstanceRecord], declared: &BTreeMap<String, Truth>) -> Self {
        let mut by_instance: BTreeMap<(&str, &str), Vec<InstanceRecord>> = BTreeMap::new();
        for r in records {
            by_instance.entry((&r.benchmark, &r.instance)).or_default().push(r.clone());
        }
        let mut tallies: BTreeMap<String, BTreeMap<String, Tally>> = BTreeMap::new();
        for ((bench, inst), recs) in &by_instance {
            let truth = adjudicate(recs, declared.get(*inst).copied()).truth;
            let per_tool = tallies.entry(bench.to_string()).or_default();
            for r in recs {
                per_tool.entry(r.tool.clone()).or_insert_with(|| Tally::new(&r.tool)).add(classify(
                    r.status,
                    r.witness_valid(),
                    truth,
                ));
            }
        }
        Scoreboard::from_tallies(tallies.into_iter().map(|(b, m)| (b, m.into_values().collect())).collect())
    }
}

/// Applies the per-tool startup overhead: runtimes are reduced by
/// `overhead_s` (clamped at 0), and any result whose adjusted runtime
/// exceeds its instance timeout becomes `Timeout`. Records whose instance
/// has no entry in `timeouts` keep their status.
pub fn apply_overhead(
    records: &[InstanceRecord],
    overhead_s: f64,
    timeouts: &BTreeMap<String, f64>,
) -> Vec<InstanceRecord> {
    records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            let adjusted = (r.runtime_s - overhead_s).max(0.0);
            if let Some(&limit) = timeouts.get(&r.instance) {
                if adjusted > limit && r.status != Status::Timeout {
                    r.status = Status::Timeout;
                    r.cex_verdict = None;
                }
            }
            r.runtime_s = adjusted;
            r
        })
        .collect()
}
