//! Seeded synthetic benchmarks shaped like ACAS Xu: fully connected ReLU
//! networks with 5 inputs and 5 outputs, "output j is minimal" properties
//! over small input boxes, and threshold properties the center violates.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline::{ibp_forward, IntervalVector};
use crate::onnx::builder::{encode, mlp_model, Activation, DenseLayer, DenseStyle};
use crate::onnx::Network;
use crate::runner::shell_quote;
use crate::specfmt::parse_str;

pub const INPUTS: usize = 5;
pub const OUTPUTS: usize = 5;
pub const HIDDEN: [usize; 3] = [16, 16, 16];
pub const ACAS_TIMEOUT_S: f64 = 116.0;
pub const MAX_INSTANCES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub instances: usize,
    pub networks: usize,
    pub timeout_s: f64,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions { instances: 12, networks: 2, timeout_s: ACAS_TIMEOUT_S, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropertyKind {
    /// Output `j` stays minimal; proven by interval bounds at the root box.
    MinimalRoot,
    /// Output `j` stays minimal on a box three times the provable radius.
    MinimalWide,
    /// `Y_0 >= t` with `t` below the center's output.
    Threshold,
}

impl PropertyKind {
    fn for_index(i: usize) -> Self {
        match i % 4 {
            0 | 1 => PropertyKind::MinimalRoot,
            2 => PropertyKind::MinimalWide,
            _ => PropertyKind::Threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthInstance {
    pub onnx: PathBuf,
    pub vnnlib: PathBuf,
    pub kind: PropertyKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthBenchmark {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub instances: Vec<SynthInstance>,
}

pub fn random_network(rng: &mut impl Rng) -> Vec<DenseLayer> {
    let mut dims = vec![INPUTS];
    dims.extend(HIDDEN);
    dims.push(OUTPUTS);
    dims.windows(2)
        .map(|w| {
            let s = (6.0 / w[0] as f64).sqrt() as f32;
            let weights = (0..w[0] * w[1]).map(|_| rng.gen_range(-s..s)).collect();
            let bias = (0..w[1]).map(|_| rng.gen_range(-0.1f32..0.1)).collect();
            DenseLayer::new(w[0], w[1], weights, bias)
        })
        .collect()
}

fn header(out: &mut String) {
    for i in 0..INPUTS {
        let _ = writeln!(out, "(declare-const X_{i} Real)");
    }
    for j in 0..OUTPUTS {
        let _ = writeln!(out, "(declare-const Y_{j} Real)");
    }
}

fn input_box(out: &mut String, center: &[f64], radius: f64) {
    for (i, c) in center.iter().enumerate() {
        let _ = writeln!(out, "(assert (>= X_{i} {:.6}))", c - radius);
        let _ = writeln!(out, "(assert (<= X_{i} {:.6}))", c + radius);
    }
}

/// Counterexample: some other output reaches `Y_j`.
pub fn minimal_property(center: &[f64], radius: f64, j: usize) -> String {
    let mut s = format!("; Y_{j} is strictly minimal on the box.\n");
    header(&mut s);
    input_box(&mut s, center, radius);
    s.push_str("(assert (or\n");
    for k in (0..OUTPUTS).filter(|&k| k != j) {
        let _ = writeln!(s, "  (and (<= Y_{k} Y_{j}))");
    }
    s.push_str("))\n");
    s
}

/// Counterexample: `Y_0 >= threshold`.
pub fn threshold_property(center: &[f64], radius: f64, threshold: f64) -> String {
    let mut s = format!("; Y_0 stays below {threshold:.6} on the box.\n");
    header(&mut s);
    input_box(&mut s, center, radius);
    let _ = writeln!(s, "(assert (>= Y_0 {threshold:.6}))");
    s
}

/// Whether root interval bounds already refute every case of `text`.
fn proven_at_root(net: &Network, text: &str) -> bool {
    let spec = parse_str(text).expect("generated property parses");
    spec.cases.iter().all(|case| {
        let b = case.input_box.as_ref().expect("boxed input");
        let x = IntervalVector::new(b.iter().map(|b| b.lower).collect(), b.iter().map(|b| b.upper).collect());
        let y = ibp_forward(net, &x).expect("matching dimensions");
        case.output_constraints.iter().any(|c| {
            let (mut lo, mut hi) = (0.0, 0.0);
            for (v, &a) in &c.coefficients {
                let iv = y.get(v.index);
                lo += (a * iv.lo).min(a * iv.hi);
                hi += (a * iv.lo).max(a * iv.hi);
            }
            match c.relation {
                crate::specfmt::Relation::LessEq => lo > c.constant,
                crate::specfmt::Relation::GreaterEq => hi < c.constant,
            }
        })
    })
}

fn argmin(y: &[f64]) -> usize {
    (0..y.len()).min_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap_or(0)
}

/// A property of `kind` for `net`, resampling centers until one works.
fn make_property(net: &Network, kind: PropertyKind, rng: &mut impl Rng) -> String {
    loop {
        let center: Vec<f64> = (0..INPUTS).map(|_| (rng.gen_range(-1.0..1.0f64) * 1000.0).round() / 1000.0).collect();
        let y = net.infer_f64(&center).expect("matching dimensions");
        if kind == PropertyKind::Threshold {
            return threshold_property(&center, 0.05, y[0] - 0.01);
        }
        let j = argmin(&y);
        let mut radius = 0.05;
        for _ in 0..12 {
            if proven_at_root(net, &minimal_property(&center, radius, j)) {
                let r = if kind == PropertyKind::MinimalWide { 3.0 * radius } else { radius };
                return minimal_property(&center, r, j);
            }
            radius /= 2.0;
        }
    }
}

/// Writes networks, properties and `instances.csv` into `dir`. The
/// benchmark takes its name from `dir`.
pub fn write_benchmark(dir: &Path, opts: &SynthOptions) -> std::io::Result<SynthBenchmark> {
    assert!(opts.networks > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    fs::create_dir_all(dir.join("onnx"))?;
    fs::create_dir_all(dir.join("vnnlib"))?;
    let mut nets = Vec::new();
    for k in 0..opts.networks {
        let bytes = encode(&mlp_model(&random_network(&mut rng), Activation::Relu, DenseStyle::Gemm));
        let rel = PathBuf::from(format!("onnx/net_{k}.onnx"));
        fs::write(dir.join(&rel), &bytes)?;
        nets.push((rel, Network::from_bytes(&bytes).expect("builder output loads")));
    }
    let mut manifest = String::new();
    let mut instances = Vec::new();
    for i in 0..opts.instances {
        let (onnx, net) = &nets[i % nets.len()];
        let kind = PropertyKind::for_index(i);
        let vnnlib = PathBuf::from(format!("vnnlib/prop_{i:02}.vnnlib"));
        fs::write(dir.join(&vnnlib), make_property(net, kind, &mut rng))?;
        let _ = writeln!(manifest, "{},{},{}", onnx.display(), vnnlib.display(), opts.timeout_s);
        instances.push(SynthInstance { onnx: dir.join(onnx), vnnlib: dir.join(&vnnlib), kind });
    }
    let manifest_path = dir.join("instances.csv");
    fs::write(&manifest_path, manifest)?;
    Ok(SynthBenchmark { dir: dir.to_path_buf(), manifest: manifest_path, instances })
}

/// Adapter that runs the built-in baseline through `exe verify`.
pub fn baseline_adapter_toml(exe: &Path, seed: u64) -> String {
    let exe = shell_quote(&exe.display().to_string());
    let run = format!(
        "{exe} --seed {seed} verify {{onnx}} {{vnnlib}} --timeout {{timeout}} --result-out {{result_out}} --cex-out {{cex_out}}"
    );
    format!("name = \"baseline\"\nrun = {}\n", toml::Value::String(run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::{load_manifest, ToolAdapter};

    #[test]
    fn generation_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let opts = SynthOptions { instances: 6, ..SynthOptions::default() };
        let ga = write_benchmark(a.path(), &opts).unwrap();
        write_benchmark(b.path(), &opts).unwrap();
        for inst in &ga.instances {
            let rel = inst.vnnlib.strip_prefix(a.path()).unwrap();
            assert_eq!(fs::read(&inst.vnnlib).unwrap(), fs::read(b.path().join(rel)).unwrap());
        }
        assert_eq!(
            fs::read(a.path().join("onnx/net_1.onnx")).unwrap(),
            fs::read(b.path().join("onnx/net_1.onnx")).unwrap()
        );
    }

    #[test]
    fn manifest_loads_with_acas_timeouts() {
        let dir = tempfile::tempdir().unwrap();
        let g = write_benchmark(dir.path(), &SynthOptions::default()).unwrap();
        let m = load_manifest(&g.manifest).unwrap();
        assert_eq!(m.instances.len(), 12);
        assert!(m.instances.iter().all(|i| i.timeout_s == 116.0));
        let net = crate::onnx::load_network(&m.instances[0].onnx).unwrap();
        assert_eq!((net.num_inputs(), net.num_outputs()), (5, 5));
    }

    #[test]
    fn root_properties_are_provable() {
        let dir = tempfile::tempdir().unwrap();
        let g = write_benchmark(dir.path(), &SynthOptions { instances: 4, ..SynthOptions::default() }).unwrap();
        let inst = &g.instances[0];
        assert_eq!(inst.kind, PropertyKind::MinimalRoot);
        let net = crate::onnx::load_network(&inst.onnx).unwrap();
        assert!(proven_at_root(&net, &fs::read_to_string(&inst.vnnlib).unwrap()));
    }

    #[test]
    fn adapter_toml_parses() {
        let a = ToolAdapter::from_toml(&baseline_adapter_toml(Path::new("/opt/my tools/vnn"), 3)).unwrap();
        assert_eq!(a.name, "baseline");
        assert!(a.run.starts_with("'/opt/my tools/vnn' --seed 3 verify {onnx}"));
    }
}
