//! Reference verifier for small fully connected networks.
//!
//! Each DNF case is decided by branch and bound over its input box. A node
//! is first checked with interval bound propagation; if some constraint of
//! the case cannot hold anywhere in the node's box, the node is pruned.
//! Otherwise a sampling falsifier tries the center, corners and uniform
//! samples, and if none is a counterexample the widest input dimension is
//! bisected.

mod ibp;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use ibp::{ibp_forward, Interval, IntervalVector, OUTPUT_SLACK};

use crate::cex::Counterexample;
use crate::onnx::{Network, OnnxError};
use crate::specfmt::{evaluate_case, ConjunctiveCase, LinearConstraint, Relation, Specification, VarKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BaselineError {
    #[error("case {case} has no finite input box")]
    UnboundedInput { case: usize },
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Network(#[from] OnnxError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    /// Nodes processed per case before giving up.
    pub max_nodes: usize,
    pub max_depth: usize,
    /// Wall-clock limit for a whole specification.
    pub time_limit: Option<Duration>,
    pub samples_per_node: usize,
    pub seed: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_nodes: 20_000, max_depth: 60, time_limit: None, samples_per_node: 256, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaseVerdict {
    Holds,
    Violated(Vec<f64>),
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BabNode {
    pub bounds: IntervalVector,
    pub depth: usize,
}

/// Bounds of `c`'s left-hand side given input and output bounds.
fn lhs_bounds(c: &LinearConstraint, x: &IntervalVector, y: &IntervalVector) -> Interval {
    let (mut lo, mut hi, mut mag) = (0.0, 0.0, 0.0);
    for (var, &coef) in &c.coefficients {
        let v = match var.kind {
            VarKind::Input => x.get(var.index),
            VarKind::Output => y.get(var.index),
        };
        let (a, b) = (coef * v.lo, coef * v.hi);
        lo += a.min(b);
        hi += a.max(b);
        mag += coef.abs() * v.mag();
    }
    // Absorbs float64 rounding both here and in the evaluator.
    let slack = 1e-12 * mag;
    Interval::new(lo - slack, hi + slack)
}

/// Whether `c` is false for every point of the bounds.
fn infeasible(c: &LinearConstraint, x: &IntervalVector, y: &IntervalVector) -> bool {
    let lhs = lhs_bounds(c, x, y);
    match c.relation {
        Relation::LessEq => lhs.lo > c.constant,
        Relation::GreaterEq => lhs.hi < c.constant,
    }
}

fn case_box(case: &ConjunctiveCase, index: usize) -> Result<IntervalVector, BaselineError> {
    let b = case.input_box.as_ref().ok_or(BaselineError::UnboundedInput { case: index })?;
    Ok(IntervalVector::new(b.iter().map(|b| b.lower).collect(), b.iter().map(|b| b.upper).collect()))
}

struct Falsifier<'a> {
    net: &'a Network,
    case: &'a ConjunctiveCase,
    num_outputs: usize,
    samples: usize,
    rng: ChaCha8Rng,
}

impl Falsifier<'_> {
    fn check(&self, x: &[f64]) -> Result<bool, BaselineError> {
        let y = self.net.infer_f64(x)?;
        Ok(evaluate_case(self.case, x, &y, x.len(), self.num_outputs).unwrap_or(false))
    }

    /// Center, then corners, then uniform points of `b`, `samples` in all.
    fn search(&mut self, b: &IntervalVector) -> Result<Option<Vec<f64>>, BaselineError> {
        let n = b.len();
        if self.samples == 0 {
            return Ok(None);
        }
        let center = b.center();
        if self.check(&center)? {
            return Ok(Some(center));
        }
        let corner_budget = (self.samples - 1) / 2;
        let exhaustive = n < 20 && (1usize << n) <= corner_budget;
        let corners = if exhaustive { 1usize << n } else { corner_budget };
        for k in 0..corners {
            let x: Vec<f64> = (0..n)
                .map(|i| {
                    let high = if exhaustive { k >> i & 1 == 1 } else { self.rng.gen::<bool>() };
                    if high {
                        b.upper[i]
                    } else {
                        b.lower[i]
                    }
                })
                .collect();
            if self.check(&x)? {
                return Ok(Some(x));
            }
        }
        for _ in 0..self.samples.saturating_sub(1 + corners) {
            let x: Vec<f64> = (0..n)
                .map(|i| {
                    let t: f64 = self.rng.gen();
                    (b.lower[i] + t * (b.upper[i] - b.lower[i])).clamp(b.lower[i], b.upper[i])
                })
                .collect();
            if self.check(&x)? {
                return Ok(Some(x));
            }
        }
        Ok(None)
    }
}

/// Decides one DNF case by branch and bound over its input box.
pub fn verify_case(
    net: &Network,
    case: &ConjunctiveCase,
    case_index: usize,
    budget: &Budget,
    deadline: Option<Instant>,
) -> Result<CaseVerdict, BaselineError> {
    let root = case_box(case, case_index)?;
    if root.len() != net.num_inputs() {
        return Err(BaselineError::DimensionMismatch { expected: net.num_inputs(), got: root.len() });
    }
    if budget.max_nodes == 0 {
        return Ok(CaseVerdict::Unknown);
    }
    let mut falsifier = Falsifier {
        net,
        case,
        num_outputs: net.num_outputs(),
        samples: budget.samples_per_node,
        rng: ChaCha8Rng::seed_from_u64(budget.seed ^ (case_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
    };
    let mut stack = vec![BabNode { bounds: root, depth: 0 }];
    let mut processed = 0usize;
    let mut complete = true;

    while let Some(node) = stack.pop() {
        if processed >= budget.max_nodes || deadline.is_some_and(|d| Instant::now() >= d) {
            return Ok(CaseVerdict::Unknown);
        }
        processed += 1;

        let y = ibp_forward(net, &node.bounds)?;
        if case.constraints().any(|c| infeasible(c, &node.bounds, &y)) {
            continue;
        }
        if let Some(x) = falsifier.search(&node.bounds)? {
            return Ok(CaseVerdict::Violated(x));
        }
        match node.bounds.widest() {
            Some((dim, width)) if width > 0.0 && node.depth < budget.max_depth => {
                let (left, right) = node.bounds.bisect(dim);
                if left.upper[dim] <= left.lower[dim] || right.lower[dim] >= right.upper[dim] {
                    complete = false;
                    continue;
                }
                stack.push(BabNode { bounds: right, depth: node.depth + 1 });
                stack.push(BabNode { bounds: left, depth: node.depth + 1 });
            }
            _ => complete = false,
        }
    }
    Ok(if complete { CaseVerdict::Holds } else { CaseVerdict::Unknown })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Holds,
    Violated(Counterexample),
    Unknown,
}

impl Verdict {
    pub fn status_word(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Violated(_) => "violated",
            Verdict::Unknown => "unknown",
        }
    }
}

/// Holds iff every case holds; the first violated case yields its witness
/// together with the recomputed outputs.
pub fn verify_specification(net: &Network, spec: &Specification, budget: &Budget) -> Result<Verdict, BaselineError> {
    if spec.num_inputs != net.num_inputs() {
        return Err(BaselineError::DimensionMismatch { expected: net.num_inputs(), got: spec.num_inputs });
    }
    if spec.num_outputs != net.num_outputs() {
        return Err(BaselineError::DimensionMismatch { expected: net.num_outputs(), got: spec.num_outputs });
    }
    let deadline = budget.time_limit.map(|t| Instant::now() + t);
    let mut all_hold = true;
    for (i, case) in spec.cases.iter().enumerate() {
        match verify_case(net, case, i, budget, deadline)? {
            CaseVerdict::Holds => {}
            CaseVerdict::Violated(x) => {
                let y = net.infer_f64(&x)?;
                return Ok(Verdict::Violated(Counterexample::from_vectors(&x, Some(&y))));
            }
            CaseVerdict::Unknown => all_hold = false,
        }
    }
    Ok(if all_hold { Verdict::Holds } else { Verdict::Unknown })
}
