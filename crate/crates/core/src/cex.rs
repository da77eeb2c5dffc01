//! Counterexample witness files and their adjudication.
//!
//! A witness is a list of `(X_i value)` / `(Y_j value)` pairs, optionally
//! wrapped in one outer group. Adjudication recomputes the network output
//! from the inputs; in [`CexMode::DiscardOutputs`] the recorded outputs are
//! ignored entirely, while [`CexMode::PenalizeOutputs`] additionally requires
//! them to be present and close to the recomputed ones.

use std::collections::BTreeMap;
use std::fmt::{self, Write};
use std::path::Path;
use std::str::FromStr;

use crate::onnx::{Network, OnnxError};
use crate::specfmt::{format_number, read_sexprs, tokenize, SExpr, SpecError, Specification, VarKind, VariableId};

/// Default absolute tolerance between recorded and recomputed outputs.
pub const DEFAULT_OUT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Counterexample {
    pub inputs: BTreeMap<usize, f64>,
    /// `None` when the file has no `Y_j` entries at all.
    pub outputs: Option<BTreeMap<usize, f64>>,
}

impl Counterexample {
    pub fn from_vectors(x: &[f64], y: Option<&[f64]>) -> Self {
        Counterexample {
            inputs: x.iter().copied().enumerate().collect(),
            outputs: y.map(|y| y.iter().copied().enumerate().collect()),
        }
    }

    /// Inputs as a dense vector, if indices are exactly `0..n`.
    pub fn input_vector(&self, n: usize) -> Option<Vec<f64>> {
        (0..n).map(|i| self.inputs.get(&i).copied()).collect()
    }

    /// Renders the witness in the file format read by
    /// [`parse_counterexample`].
    pub fn serialize(&self) -> String {
        let mut out = String::from("(");
        for (i, v) in &self.inputs {
            let _ = write!(out, "(X_{i} {})\n ", format_number(*v));
        }
        for (j, v) in self.outputs.iter().flatten() {
            let _ = write!(out, "(Y_{j} {})\n ", format_number(*v));
        }
        let trimmed = out.trim_end().len();
        out.truncate(trimmed);
        out.push_str(")\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CexError {
    #[error(transparent)]
    Syntax(#[from] SpecError),
    #[error("duplicate assignment to {0}")]
    DuplicateAssignment(VariableId),
    #[error("{pos}: expected a `(<variable> <number>)` pair")]
    MalformedPair { pos: crate::specfmt::Pos },
    #[error("{pos}: unknown variable `{name}`")]
    UnknownVariable { name: String, pos: crate::specfmt::Pos },
    #[error("counterexample has {what} {got}, expected {expected}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error(transparent)]
    Network(#[from] OnnxError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn number_of(e: &SExpr) -> Option<f64> {
    if let Some(v) = e.as_number() {
        return Some(v);
    }
    // `(- 0.5)` is the SMT-LIB spelling of a negative literal.
    match e {
        SExpr::List(items, _) if items.len() == 2 && items[0].as_symbol() == Some("-") => {
            number_of(&items[1]).map(|v| -v)
        }
        _ => None,
    }
}

fn is_pair(e: &SExpr) -> bool {
    matches!(e, SExpr::List(items, _) if items.len() == 2 && items[0].as_symbol().is_some())
}

/// Parses a witness file.
pub fn parse_counterexample(text: &str) -> Result<Counterexample, CexError> {
    let tokens = tokenize(text).map_err(SpecError::from)?;
    let mut exprs = read_sexprs(&tokens)?;
    // Tools commonly prefix the witness with their verdict word.
    if exprs.first().and_then(SExpr::as_symbol).is_some_and(|s| matches!(s, "sat" | "violated")) {
        exprs.remove(0);
    }
    let pairs: Vec<SExpr> = match exprs.as_slice() {
        [SExpr::List(items, _)] if !is_pair(&exprs[0]) => items.clone(),
        _ => exprs,
    };

    let mut cex = Counterexample::default();
    for pair in &pairs {
        let SExpr::List(items, pos) = pair else {
            return Err(CexError::MalformedPair { pos: pair.pos() });
        };
        let [name, value] = items.as_slice() else {
            return Err(CexError::MalformedPair { pos: *pos });
        };
        let name_str = name.as_symbol().ok_or(CexError::MalformedPair { pos: *pos })?;
        let var = VariableId::parse(name_str)
            .ok_or_else(|| CexError::UnknownVariable { name: name_str.to_string(), pos: name.pos() })?;
        let value = number_of(value).ok_or(CexError::MalformedPair { pos: value.pos() })?;
        let slot = match var.kind {
            VarKind::Input => &mut cex.inputs,
            VarKind::Output => cex.outputs.get_or_insert_with(BTreeMap::new),
        };
        if slot.insert(var.index, value).is_some() {
            return Err(CexError::DuplicateAssignment(var));
        }
    }
    Ok(cex)
}

pub fn load_counterexample(path: impl AsRef<Path>) -> Result<Counterexample, CexError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CexError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_counterexample(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CexMode {
    /// Recorded outputs are ignored; only the inputs matter.
    #[default]
    DiscardOutputs,
    /// Recorded outputs must be present and match the recomputed ones.
    PenalizeOutputs,
}

impl FromStr for CexMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "discard" => Ok(CexMode::DiscardOutputs),
            "penalize" | "penalise" => Ok(CexMode::PenalizeOutputs),
            other => Err(format!("unknown mode `{other}` (expected discard or penalize)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CexReason {
    Valid,
    /// No case's input constraints admit the given inputs.
    InputOutsideAllCases,
    /// The inputs fit some case, but the recomputed outputs satisfy none.
    OutputViolatesCase,
    /// Some input index in `0..num_inputs` has no value.
    MissingInput,
    /// Outputs were required but absent or incomplete.
    MissingOutput,
    OutputMismatch {
        max_abs_dev: f64,
    },
}

impl fmt::Display for CexReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CexReason::Valid => f.write_str("valid"),
            CexReason::InputOutsideAllCases => f.write_str("input outside all cases"),
            CexReason::OutputViolatesCase => f.write_str("output violates every admissible case"),
            CexReason::MissingInput => f.write_str("missing input"),
            CexReason::MissingOutput => f.write_str("missing output"),
            CexReason::OutputMismatch { max_abs_dev } => write!(f, "output mismatch (max abs deviation {max_abs_dev})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CexVerdict {
    pub valid: bool,
    pub satisfied_case: Option<usize>,
    pub reason: CexReason,
    /// Network output recomputed from the inputs, when inference ran.
    pub computed_outputs: Option<Vec<f64>>,
}

impl CexVerdict {
    fn invalid(reason: CexReason, computed_outputs: Option<Vec<f64>>) -> Self {
        CexVerdict { valid: false, satisfied_case: None, reason, computed_outputs }
    }
}

/// Adjudicates `cex` against `spec` using `net` to recompute outputs.
pub fn validate(
    cex: &Counterexample,
    spec: &Specification,
    net: &Network,
    mode: CexMode,
    out_tol: f64,
) -> Result<CexVerdict, CexError> {
    if net.num_inputs() != spec.num_inputs {
        return Err(CexError::DimensionMismatch {
            what: "network inputs",
            expected: spec.num_inputs,
            got: net.num_inputs(),
        });
    }
    if net.num_outputs() != spec.num_outputs {
        return Err(CexError::DimensionMismatch {
            what: "network outputs",
            expected: spec.num_outputs,
            got: net.num_outputs(),
        });
    }
    if let Some(&max) = cex.inputs.keys().next_back() {
        if max >= spec.num_inputs {
            return Err(CexError::DimensionMismatch { what: "input index", expected: spec.num_inputs, got: max });
        }
    }
    let Some(x) = cex.input_vector(spec.num_inputs) else {
        return Ok(CexVerdict::invalid(CexReason::MissingInput, None));
    };
    let y = net.infer_f64(&x)?;

    let admissible: Vec<usize> = (0..spec.cases.len()).filter(|&i| spec.cases[i].inputs_hold(&x)).collect();
    if admissible.is_empty() {
        return Ok(CexVerdict::invalid(CexReason::InputOutsideAllCases, Some(y)));
    }
    let Some(case) = admissible.into_iter().find(|&i| spec.cases[i].outputs_hold(&x, &y)) else {
        return Ok(CexVerdict::invalid(CexReason::OutputViolatesCase, Some(y)));
    };

    if mode == CexMode::PenalizeOutputs {
        let Some(recorded) = cex.outputs.as_ref().filter(|o| (0..y.len()).all(|j| o.contains_key(&j))) else {
            return Ok(CexVerdict::invalid(CexReason::MissingOutput, Some(y)));
        };
        if let Some(&max) = recorded.keys().next_back() {
            if max >= spec.num_outputs {
                return Err(CexError::DimensionMismatch { what: "output index", expected: spec.num_outputs, got: max });
            }
        }
        let max_abs_dev = y.iter().enumerate().map(|(j, v)| (recorded[&j] - v).abs()).fold(0.0, f64::max);
        // NaN deviations fail the comparison.
        if !matches!(max_abs_dev.partial_cmp(&out_tol), Some(std::cmp::Ordering::Less | std::cmp::Ordering::Equal))
            || y.iter().enumerate().any(|(j, v)| (recorded[&j] - v).is_nan())
        {
            return Ok(CexVerdict::invalid(CexReason::OutputMismatch { max_abs_dev }, Some(y)));
        }
    }
    Ok(CexVerdict { valid: true, satisfied_case: Some(case), reason: CexReason::Valid, computed_outputs: Some(y) })
}
