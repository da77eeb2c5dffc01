//! Generators and independent oracles shared by the integration suites.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use vnnharness::onnx::builder::{encode, mlp_model, Activation, DenseLayer, DenseStyle};
use vnnharness::onnx::Network;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

// ---------------------------------------------------------------------------
// Assertion trees

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    X(usize),
    Y(usize),
}

impl Var {
    fn name(self) -> String {
        match self {
            Var::X(i) => format!("X_{i}"),
            Var::Y(j) => format!("Y_{j}"),
        }
    }
}

/// `sum(lhs) - sum(rhs) <= 0` (or `>= 0`), where constants are terms
/// with no variable.
#[derive(Debug, Clone)]
pub struct Atom {
    pub lhs: Vec<(f64, Option<Var>)>,
    pub rhs: Vec<(f64, Option<Var>)>,
    pub less_eq: bool,
}

#[derive(Debug, Clone)]
pub enum Tree {
    Atom(Atom),
    And(Vec<Tree>),
    Or(Vec<Tree>),
}

fn side_value(terms: &[(f64, Option<Var>)], x: &[f64], y: &[f64]) -> f64 {
    terms
        .iter()
        .map(|&(c, v)| match v {
            None => c,
            Some(Var::X(i)) => c * x[i],
            Some(Var::Y(j)) => c * y[j],
        })
        .sum()
}

impl Tree {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> bool {
        match self {
            Tree::Atom(a) => {
                let l = side_value(&a.lhs, x, y);
                let r = side_value(&a.rhs, x, y);
                if a.less_eq {
                    l <= r
                } else {
                    l >= r
                }
            }
            Tree::And(ch) => ch.iter().all(|c| c.eval(x, y)),
            Tree::Or(ch) => ch.iter().any(|c| c.eval(x, y)),
        }
    }

    /// Cases obtained by literally distributing every conjunction.
    pub fn brute_force_cases(&self) -> Vec<Vec<Atom>> {
        match self {
            Tree::Atom(a) => vec![vec![a.clone()]],
            Tree::Or(ch) => ch.iter().flat_map(Tree::brute_force_cases).collect(),
            Tree::And(ch) => {
                let mut acc = vec![Vec::new()];
                for c in ch {
                    let parts = c.brute_force_cases();
                    let mut next = Vec::new();
                    for a in &acc {
                        for p in &parts {
                            let mut joined: Vec<Atom> = a.clone();
                            joined.extend(p.iter().cloned());
                            next.push(joined);
                        }
                    }
                    acc = next;
                }
                acc
            }
        }
    }

    pub fn render(&self, out: &mut String) {
        match self {
            Tree::Atom(a) => {
                let _ = write!(out, "({} ", if a.less_eq { "<=" } else { ">=" });
                render_side(&a.lhs, out);
                out.push(' ');
                render_side(&a.rhs, out);
                out.push(')');
            }
            Tree::And(ch) | Tree::Or(ch) => {
                out.push_str(if matches!(self, Tree::And(_)) { "(and" } else { "(or" });
                for c in ch {
                    out.push(' ');
                    c.render(out);
                }
                out.push(')');
            }
        }
    }
}

fn render_term(c: f64, v: Option<Var>, out: &mut String) {
    match v {
        None => {
            let _ = write!(out, "{c:?}");
        }
        Some(v) if c == 1.0 => out.push_str(&v.name()),
        Some(v) if c == -1.0 => {
            let _ = write!(out, "(- {})", v.name());
        }
        Some(v) => {
            let _ = write!(out, "(* {c:?} {})", v.name());
        }
    }
}

fn render_side(terms: &[(f64, Option<Var>)], out: &mut String) {
    if terms.len() == 1 {
        render_term(terms[0].0, terms[0].1, out);
        return;
    }
    out.push_str("(+");
    for &(c, v) in terms {
        out.push(' ');
        render_term(c, v, out);
    }
    out.push(')');
}

pub struct TreeGen {
    pub num_inputs: usize,
    pub num_outputs: usize,
}

impl TreeGen {
    fn vars(&self) -> Vec<Var> {
        (0..self.num_inputs).map(Var::X).chain((0..self.num_outputs).map(Var::Y)).collect()
    }

    /// Unit-coefficient single-input atoms only ever give lower bounds
    /// below 0 and upper bounds above 0, so no case has a contradictory box.
    pub fn atom(&self, rng: &mut impl Rng) -> Atom {
        if rng.gen_bool(0.2) {
            let i = rng.gen_range(0..self.num_inputs);
            let less_eq = rng.gen();
            let bound = if less_eq { rng.gen_range(1..=8) } else { -rng.gen_range(1..=8) } as f64 / 8.0;
            return Atom { lhs: vec![(1.0, Some(Var::X(i)))], rhs: vec![(bound, None)], less_eq };
        }
        let mut vars = self.vars();
        vars.shuffle(rng);
        let k = rng.gen_range(1..=vars.len().min(3));
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        for (n, &v) in vars[..k].iter().enumerate() {
            let c: f64 = *[1.0, -1.0, 2.0, -0.5, 3.0, 0.25].choose(rng).unwrap();
            // The first variable always sits on the left so lhs is never
            // empty; a lone input on the left needs a non-unit coefficient.
            let c = if k == 1 && matches!(v, Var::X(_)) && c.abs() == 1.0 { 2.0 * c } else { c };
            if n == 0 || rng.gen() {
                lhs.push((c, Some(v)))
            } else {
                rhs.push((c, Some(v)))
            }
        }
        let constant = (rng.gen_range(-16..=16) as f64) / 8.0;
        if rhs.is_empty() || rng.gen() {
            rhs.push((constant, None));
        } else {
            lhs.push((constant, None));
        }
        Atom { lhs, rhs, less_eq: rng.gen() }
    }

    pub fn tree(&self, rng: &mut impl Rng, depth: usize) -> Tree {
        if depth == 0 || rng.gen_bool(0.3) {
            return Tree::Atom(self.atom(rng));
        }
        let n = rng.gen_range(1..=3);
        let ch = (0..n).map(|_| self.tree(rng, depth - 1)).collect();
        if rng.gen() {
            Tree::And(ch)
        } else {
            Tree::Or(ch)
        }
    }

    /// A whole property: declarations plus 1 to 3 asserted trees, which
    /// the format conjoins.
    pub fn property(&self, rng: &mut impl Rng) -> (String, Tree) {
        let asserts: Vec<Tree> = (0..rng.gen_range(1..=3)).map(|_| self.tree(rng, 3)).collect();
        let mut text = String::new();
        for i in 0..self.num_inputs {
            let _ = writeln!(text, "(declare-const X_{i} Real)");
        }
        for j in 0..self.num_outputs {
            let _ = writeln!(text, "(declare-const Y_{j} Real)");
        }
        for t in &asserts {
            text.push_str("(assert ");
            t.render(&mut text);
            text.push_str(")\n");
        }
        (text, Tree::And(asserts))
    }
}

// ---------------------------------------------------------------------------
// Networks

pub fn random_layers(rng: &mut impl Rng, dims: &[usize]) -> Vec<DenseLayer> {
    dims.windows(2)
        .map(|w| {
            let s = (3.0 / w[0] as f32).sqrt();
            let weights = (0..w[0] * w[1]).map(|_| rng.gen_range(-s..s)).collect();
            let bias = (0..w[1]).map(|_| rng.gen_range(-0.5f32..0.5)).collect();
            DenseLayer::new(w[0], w[1], weights, bias)
        })
        .collect()
}

pub fn build(layers: &[DenseLayer], act: Activation, style: DenseStyle) -> Network {
    Network::from_bytes(&encode(&mlp_model(layers, act, style))).expect("builder output loads")
}

/// Plain nested loops in float64, activation after every hidden layer.
pub fn scalar_reference(layers: &[DenseLayer], act: Activation, x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    for (li, layer) in layers.iter().enumerate() {
        let mut next = vec![0.0; layer.outputs];
        for (j, out) in next.iter_mut().enumerate() {
            let mut acc = layer.bias[j] as f64;
            for (i, &xi) in cur.iter().enumerate() {
                acc += layer.weight(i, j) as f64 * xi;
            }
            *out = acc;
        }
        if li + 1 < layers.len() {
            for v in &mut next {
                *v = match act {
                    Activation::Relu => v.max(0.0),
                    Activation::Sigmoid => 1.0 / (1.0 + (-*v).exp()),
                    Activation::Tanh => v.tanh(),
                };
            }
        }
        cur = next;
    }
    cur
}

/// A 2-input network with one or two hidden ReLU layers and 1 or 2 outputs,
/// plus a property over a box inside `[-1, 1]^2`. The threshold is drawn
/// from sampled outputs so both outcomes occur.
pub struct TinyInstance {
    pub layers: Vec<DenseLayer>,
    pub net: Network,
    pub text: String,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

pub fn tiny_instance(rng: &mut impl Rng) -> TinyInstance {
    let hidden = rng.gen_range(2..=6);
    let outputs = rng.gen_range(1..=2);
    let dims: Vec<usize> =
        if rng.gen() { vec![2, hidden, outputs] } else { vec![2, hidden, rng.gen_range(2..=4), outputs] };
    let layers = random_layers(rng, &dims);
    let net = build(&layers, Activation::Relu, if rng.gen() { DenseStyle::Gemm } else { DenseStyle::MatMulAdd });
    let mut lower = [0.0; 2];
    let mut upper = [0.0; 2];
    for i in 0..2 {
        let a = (rng.gen_range(-1.0..1.0f64) * 100.0).round() / 100.0;
        let w = rng.gen_range(5..=100) as f64 / 100.0;
        lower[i] = a.min(1.0 - w);
        upper[i] = (lower[i] + w).min(1.0);
        lower[i] = (lower[i] * 100.0).round() / 100.0;
        upper[i] = (upper[i] * 100.0).round() / 100.0;
    }
    // Output expression: Y_0, or Y_0 - Y_1 with two outputs.
    let expr = |y: &[f64]| if y.len() == 2 { y[0] - y[1] } else { y[0] };
    let mut samples: Vec<f64> = (0..64)
        .map(|_| {
            let x = [rng.gen_range(lower[0]..=upper[0]), rng.gen_range(lower[1]..=upper[1])];
            expr(&net.infer_f64(&x).unwrap())
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    let (lo, hi) = (samples[0], samples[63]);
    let t = lo - 0.1 * (hi - lo) + rng.gen_range(0.0..1.3) * (hi - lo) * 1.1;
    let t = (t * 1e4).round() / 1e4;
    let mut text = String::new();
    for i in 0..2 {
        let _ = writeln!(text, "(declare-const X_{i} Real)");
    }
    for j in 0..outputs {
        let _ = writeln!(text, "(declare-const Y_{j} Real)");
    }
    for i in 0..2 {
        let _ = writeln!(text, "(assert (>= X_{i} {:?}))\n(assert (<= X_{i} {:?}))", lower[i], upper[i]);
    }
    let lhs = if outputs == 2 { "(- Y_0 Y_1)" } else { "Y_0" };
    let _ = writeln!(text, "(assert (>= {lhs} {t:?}))");
    TinyInstance { layers, net, text, lower, upper }
}

// ---------------------------------------------------------------------------
// Published tables

#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
pub struct PublishedRow {
    pub section: String,
    pub benchmark: String,
    pub rank: usize,
    pub tool: String,
    pub verified: u64,
    pub falsified: u64,
    pub fastest: u64,
    pub penalty: u64,
    pub score: i64,
    pub percent: String,
}

pub fn published_tables() -> BTreeMap<(String, String), Vec<PublishedRow>> {
    let mut r = csv::Reader::from_path(fixtures().join("published/published_tables.csv")).unwrap();
    let mut out: BTreeMap<(String, String), Vec<PublishedRow>> = BTreeMap::new();
    for row in r.deserialize() {
        let row: PublishedRow = row.unwrap();
        out.entry((row.section.clone(), row.benchmark.clone())).or_default().push(row);
    }
    for rows in out.values_mut() {
        rows.sort_by_key(|r| r.rank);
    }
    out
}

/// Rows of a rendered table CSV as `(rank, cells after rank)`.
pub fn read_table_csv(path: &Path) -> Vec<(usize, Vec<String>)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].parse().unwrap(), rec.iter().skip(1).map(str::to_string).collect())
        })
        .collect()
}

/// Rank ranges of equal-score blocks, keyed by score.
pub fn tie_blocks(scores: impl IntoIterator<Item = (usize, i64)>) -> BTreeMap<i64, (usize, usize)> {
    let mut blocks: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
    for (rank, score) in scores {
        let e = blocks.entry(score).or_insert((rank, rank));
        e.0 = e.0.min(rank);
        e.1 = e.1.max(rank);
    }
    blocks
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_vnnharness")
}
