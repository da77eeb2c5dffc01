//! VNN-LIB property files: tokenizer, parser, DNF normalisation and
//! semantic evaluation.
//!
//! A property is a set of `declare-const` declarations of inputs `X_i` and
//! outputs `Y_j` (sort `Real`) plus one or more `assert`s combining linear
//! `<=`/`>=` atoms with `and`/`or`. The file describes counterexamples: the
//! property *holds* when no assignment satisfies the assertions and is
//! *violated* when some case of the normalised DNF is satisfiable.

mod dnf;
pub mod lexer;
mod parser;
mod render;
mod types;

use std::path::Path;

pub use dnf::{dnf_case_count, expand_clauses, normalize_dnf, DEFAULT_CASE_CAP};
pub use lexer::{tokenize, LexError, Pos, Token, TokenKind};
pub use parser::{parse_formula, parse_specification, read_sexprs, ParsedSpec, SExpr};
pub use render::{format_number, serialize_specification, specification_json};
pub use types::{
    evaluate_case, Bounds, ConjunctiveCase, Formula, LinearConstraint, Relation, Specification, VarKind, VariableId,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("{pos}: unbalanced parenthesis")]
    UnbalancedParen { pos: Pos },
    #[error("{pos}: undeclared variable `{name}`")]
    UndeclaredVariable { name: String, pos: Pos },
    #[error("{pos}: nonlinear term (only constant-variable products are allowed)")]
    NonlinearTerm { pos: Pos },
    #[error("{pos}: unsupported form: {what}")]
    UnsupportedForm { what: String, pos: Pos },
    #[error("{pos}: duplicate declaration of `{name}`")]
    DuplicateDeclaration { name: String, pos: Pos },
    #[error("{pos}: invalid constraint: {reason}")]
    InvalidAtom { reason: String, pos: Pos },
    #[error("variable indices are not dense: {missing} is not declared")]
    NonDenseVariables { missing: VariableId },
    #[error("specification normalises to zero cases")]
    EmptyDnf,
    #[error("a normalised case has no constraints")]
    EmptyCase,
    #[error("DNF expansion yields {cases} cases, above the cap of {cap}")]
    CaseExplosion { cases: u128, cap: usize },
    #[error("contradictory bounds on {var}: lower {lower} > upper {upper}")]
    ContradictoryBounds { var: VariableId, lower: f64, upper: f64 },
    #[error("constraint has no nonzero coefficient")]
    DegenerateConstraint,
    #[error("constraint has a non-finite coefficient or constant")]
    NonFinite,
    #[error("assignment has {got:?} (inputs, outputs), specification expects {expected:?}")]
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl SpecError {
    /// Source position for diagnostics, when the error has one.
    pub fn pos(&self) -> Option<Pos> {
        match self {
            SpecError::Lex(e) => Some(e.pos()),
            SpecError::UnbalancedParen { pos }
            | SpecError::UndeclaredVariable { pos, .. }
            | SpecError::NonlinearTerm { pos }
            | SpecError::UnsupportedForm { pos, .. }
            | SpecError::DuplicateDeclaration { pos, .. }
            | SpecError::InvalidAtom { pos, .. } => Some(*pos),
            _ => None,
        }
    }
}

/// Parses VNN-LIB text with the default case cap.
pub fn parse_str(text: &str) -> Result<Specification, SpecError> {
    parse_str_with_cap(text, DEFAULT_CASE_CAP)
}

pub fn parse_str_with_cap(text: &str, case_cap: usize) -> Result<Specification, SpecError> {
    parse_specification(&tokenize(text)?, case_cap)
}

/// Reads and parses a `.vnnlib` file.
pub fn load_specification(path: impl AsRef<Path>, case_cap: usize) -> Result<Specification, SpecError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| SpecError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_str_with_cap(&text, case_cap)
}
