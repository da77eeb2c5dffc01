//! Command-line front end. Exit status 0 means success (or a valid
//! witness), 1 an invalid witness, 2 any error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::baseline::{verify_specification, Verdict};
use crate::cex::{load_counterexample, validate, CexMode};
use crate::config::Config;
use crate::onnx::load_network;
use crate::report::{render_overall_markdown, write_report, CactusMode};
use crate::runner::{load_adapter, load_manifest, run_benchmark};
use crate::scoring::{read_counts_csv, read_results_dir, read_truth_csv, Scoreboard, WitnessResolver};
use crate::specfmt::{load_specification, specification_json};
use crate::synth::{baseline_adapter_toml, write_benchmark, SynthOptions, MAX_INSTANCES};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_ERROR: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "vnnharness", version, about = "Neural network verification competition harness")]
pub struct Cli {
    /// TOML file overriding built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for the baseline verifier and fixture generation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Specification tools.
    #[command(subcommand)]
    Spec(SpecCommand),
    /// Network tools.
    #[command(subcommand)]
    Net(NetCommand),
    /// Counterexample tools.
    #[command(subcommand)]
    Cex(CexCommand),
    /// Run a tool on every instance of a benchmark.
    Run(RunArgs),
    /// Build scoreboard tables from results or counts.
    Score(ScoreArgs),
    /// Run the built-in baseline verifier on one instance.
    Verify(VerifyArgs),
    /// Write a synthetic ACAS Xu shaped benchmark and a baseline adapter.
    GenFixtures(GenArgs),
}

#[derive(Debug, Subcommand)]
pub enum SpecCommand {
    /// Print the normalised DNF as JSON.
    Dump { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum NetCommand {
    /// Print operators, shapes and the parameter count.
    Info { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum CexCommand {
    /// Check a witness against a network and specification.
    Check {
        onnx: PathBuf,
        vnnlib: PathBuf,
        witness: PathBuf,
        /// `discard` recomputes outputs; `penalize` also requires recorded outputs to match.
        #[arg(long, default_value = "discard")]
        mode: CexMode,
        /// Largest absolute output deviation accepted in penalize mode.
        #[arg(long)]
        out_tol: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Headerless `onnx,vnnlib,timeout` CSV; its directory names the benchmark.
    #[arg(long)]
    pub manifest: PathBuf,
    /// TOML tool adapter with `name`, `run` and optional `prepare` and `env`.
    #[arg(long)]
    pub adapter: PathBuf,
    /// Results CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Runs of the trivial 1x1 instance used to estimate overhead.
    #[arg(long)]
    pub trivial_runs: Option<usize>,
    /// Seconds between SIGTERM and SIGKILL.
    #[arg(long)]
    pub grace: Option<f64>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["results", "counts"])))]
pub struct ScoreArgs {
    /// Directory of per-tool `<tool>.csv` results files.
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// CSV of `benchmark,tool,verified,falsified,penalties` rows.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    /// Directory receiving `tables/`, `cactus/` and `overall.md`.
    #[arg(long)]
    pub out: PathBuf,
    /// Penalize witnesses whose recorded outputs disagree with inference.
    #[arg(long)]
    pub alt: bool,
    /// CSV of `instance,truth` rows fixing known ground truth.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// `per-instance` or `cumulative` runtimes on the cactus axis.
    #[arg(long)]
    pub cactus: Option<CactusMode>,
    /// Output tolerance for `--alt`.
    #[arg(long)]
    pub out_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub onnx: PathBuf,
    pub vnnlib: PathBuf,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    pub timeout: f64,
    /// File receiving the status word; standard output otherwise.
    #[arg(long)]
    pub result_out: Option<PathBuf>,
    /// File receiving the witness of a violated result.
    #[arg(long)]
    pub cex_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Directory to create; its name becomes the benchmark name.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 12)]
    pub instances: usize,
    #[arg(long, default_value_t = 2)]
    pub networks: usize,
    #[arg(long, default_value_t = crate::synth::ACAS_TIMEOUT_S)]
    pub timeout: f64,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

fn fail(message: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_ERROR, message: message.to_string() }
}

fn at(path: &Path, e: impl std::fmt::Display) -> Failure {
    fail(format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn execute(cli: &Cli) -> Result<u8, Failure> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path).map_err(fail)?,
        None => Config::default(),
    };
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    let origin = cli.config.clone().unwrap_or_default();
    match &cli.command {
        Command::Spec(SpecCommand::Dump { file }) => {
            let spec = load_specification(file, config.case_cap()).map_err(|e| at(file, e))?;
            let json = serde_json::to_string_pretty(&specification_json(&spec)).map_err(fail)?;
            println!("{json}");
            Ok(EXIT_OK)
        }
        Command::Net(NetCommand::Info { file }) => {
            let net = load_network(file).map_err(|e| at(file, e))?;
            print!("{}", describe_network(&net));
            Ok(EXIT_OK)
        }
        Command::Cex(CexCommand::Check { onnx, vnnlib, witness, mode, out_tol }) => {
            let net = load_network(onnx).map_err(|e| at(onnx, e))?;
            let spec = load_specification(vnnlib, config.case_cap()).map_err(|e| at(vnnlib, e))?;
            let cex = load_counterexample(witness).map_err(|e| at(witness, e))?;
            let verdict = validate(&cex, &spec, &net, *mode, out_tol.unwrap_or(config.out_tol())).map_err(fail)?;
            match verdict.satisfied_case {
                Some(k) if verdict.valid => println!("valid (case {k})"),
                _ if verdict.valid => println!("valid"),
                _ => println!("invalid: {}", verdict.reason),
            }
            Ok(if verdict.valid { EXIT_OK } else { EXIT_INVALID })
        }
        Command::Run(args) => run_command(args, &config, &origin),
        Command::Score(args) => score_command(args, &config),
        Command::Verify(args) => verify_command(args, &config),
        Command::GenFixtures(args) => gen_command(args, &config),
    }
}

pub fn describe_network(net: &crate::onnx::Network) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "input  {} {:?}", net.input_name, net.input_shape);
    let _ = writeln!(s, "output {} {:?}", net.output_name, net.output_shape);
    let _ = writeln!(s, "opset {}", net.opset);
    let _ = writeln!(s, "parameters {}", net.parameter_count());
    let _ = writeln!(s, "nodes {}", net.nodes.len());
    for (i, node) in net.nodes.iter().enumerate() {
        let _ = writeln!(s, "  {i:>3} {:<10} {:?}", node.op_type, node.output_shape);
    }
    s
}

fn run_command(args: &RunArgs, config: &Config, origin: &Path) -> Result<u8, Failure> {
    let manifest = load_manifest(&args.manifest).map_err(fail)?;
    let adapter = load_adapter(&args.adapter).map_err(fail)?;
    let mut cfg = config.runner_config(origin).map_err(fail)?;
    if let Some(g) = args.grace {
        cfg.grace = Duration::try_from_secs_f64(g).map_err(|_| fail(format!("invalid --grace {g}")))?;
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| at(parent, e))?;
    }
    let trivial_runs = args.trivial_runs.unwrap_or(config.trivial_runs());
    let total = manifest.instances.len();
    let mut done = 0;
    let summary = run_benchmark(&adapter, &manifest, &args.out, &cfg, trivial_runs, |row| {
        done += 1;
        eprintln!("[{done}/{total}] {} {} {:.3}s", row.instance, row.status, row.runtime_s);
    })
    .map_err(fail)?;
    eprintln!("overhead {:.3}s; results in {}", summary.overhead_s, args.out.display());
    Ok(EXIT_OK)
}

fn score_command(args: &ScoreArgs, config: &Config) -> Result<u8, Failure> {
    let declared = match &args.truth {
        Some(path) => read_truth_csv(path).map_err(fail)?,
        None => BTreeMap::new(),
    };
    let cactus_mode = match (args.cactus, &config.report.cactus) {
        (Some(m), _) => m,
        (None, Some(s)) => s.parse().map_err(fail)?,
        (None, None) => CactusMode::default(),
    };
    let title = if args.alt { "Overall Score (alternative scoring)" } else { "Overall Score" };
    if let Some(counts) = &args.counts {
        let board = Scoreboard::from_tallies(read_counts_csv(counts).map_err(fail)?);
        write_report(&args.out, &board, title, None).map_err(|e| at(&args.out, e))?;
        print!("{}", render_overall_markdown(title, &board.overall));
        return Ok(EXIT_OK);
    }
    let dir = args.results.as_ref().expect("clap requires --results or --counts");
    let mode = if args.alt {
        CexMode::PenalizeOutputs
    } else {
        match &config.cex.mode {
            Some(m) => m.parse().map_err(fail)?,
            None => CexMode::DiscardOutputs,
        }
    };
    let mut resolver = WitnessResolver::new(mode, args.out_tol.unwrap_or(config.out_tol()));
    let records = read_results_dir(dir, &mut resolver).map_err(fail)?;
    for w in &resolver.warnings {
        eprintln!("warning: {w}");
    }
    let board = Scoreboard::from_records(&records, &declared);
    write_report(&args.out, &board, title, Some((&records, &declared, cactus_mode))).map_err(|e| at(&args.out, e))?;
    print!("{}", render_overall_markdown(title, &board.overall));
    Ok(EXIT_OK)
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| at(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn verify_command(args: &VerifyArgs, config: &Config) -> Result<u8, Failure> {
    let outcome = (|| {
        let limit = Duration::try_from_secs_f64(args.timeout)
            .map_err(|_| fail(format!("invalid --timeout {}", args.timeout)))?;
        let net = load_network(&args.onnx).map_err(|e| at(&args.onnx, e))?;
        let spec = load_specification(&args.vnnlib, config.case_cap()).map_err(|e| at(&args.vnnlib, e))?;
        let mut budget = config.budget();
        budget.time_limit = Some(limit);
        verify_specification(&net, &spec, &budget).map_err(fail)
    })();
    let verdict = match outcome {
        Ok(v) => v,
        Err(f) => {
            if let Some(p) = &args.result_out {
                let _ = fs::write(p, "error\n");
            }
            return Err(f);
        }
    };
    write_or_print(args.result_out.as_deref(), &format!("{}\n", verdict.status_word()))?;
    if let Verdict::Violated(cex) = &verdict {
        write_or_print(args.cex_out.as_deref(), &cex.serialize())?;
    }
    Ok(EXIT_OK)
}

fn gen_command(args: &GenArgs, config: &Config) -> Result<u8, Failure> {
    if args.instances == 0 || args.instances > MAX_INSTANCES {
        return Err(fail(format!("--instances must be between 1 and {MAX_INSTANCES}")));
    }
    if args.networks == 0 {
        return Err(fail("--networks must be positive"));
    }
    let seed = config.seed.unwrap_or(0);
    let opts = SynthOptions { instances: args.instances, networks: args.networks, timeout_s: args.timeout, seed };
    let bench = write_benchmark(&args.out, &opts).map_err(|e| at(&args.out, e))?;
    let exe = std::env::current_exe().map_err(fail)?;
    let adapter = args.out.join("baseline.toml");
    fs::write(&adapter, baseline_adapter_toml(&exe, seed)).map_err(|e| at(&adapter, e))?;
    println!("manifest {}", bench.manifest.display());
    println!("adapter {}", adapter.display());
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> u8 {
        main_with_args(std::iter::once("vnnharness").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(&[]), EXIT_ERROR);
        assert_eq!(run(&["score", "--out", "x"]), EXIT_ERROR);
        assert_eq!(run(&["cex", "check", "a", "b", "c", "--mode", "strict"]), EXIT_ERROR);
    }

    #[test]
    fn help_exits_0() {
        assert_eq!(run(&["--help"]), EXIT_OK);
    }

    #[test]
    fn malformed_spec_exits_2() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.vnnlib");
        fs::write(&p, "(declare-const X_0 Real)\n(assert (<= X_0 1)\n").unwrap();
        assert_eq!(run(&["spec", "dump", p.to_str().unwrap()]), EXIT_ERROR);
    }

    #[test]
    fn verify_writes_result_file() {
        let dir = tempfile::tempdir().unwrap();
        let onnx = dir.path().join("id.onnx");
        fs::write(&onnx, crate::onnx::builder::encode(&crate::onnx::builder::identity_model(1))).unwrap();
        let spec = dir.path().join("p.vnnlib");
        fs::write(&spec, "(declare-const X_0 Real)\n(declare-const Y_0 Real)\n(assert (>= X_0 0))\n(assert (<= X_0 1))\n(assert (>= Y_0 0.5))\n").unwrap();
        let (res, cex) = (dir.path().join("res"), dir.path().join("cex"));
        let code = run(&[
            "verify",
            onnx.to_str().unwrap(),
            spec.to_str().unwrap(),
            "--timeout",
            "10",
            "--result-out",
            res.to_str().unwrap(),
            "--cex-out",
            cex.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(fs::read_to_string(&res).unwrap(), "violated\n");
        assert_eq!(
            run(&["cex", "check", onnx.to_str().unwrap(), spec.to_str().unwrap(), cex.to_str().unwrap()]),
            EXIT_OK
        );
    }
}
