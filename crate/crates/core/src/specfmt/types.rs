use std::collections::BTreeMap;
use std::fmt;

use super::SpecError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    Input,
    Output,
}

/// An input (`X_i`) or output (`Y_j`) variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VariableId {
    pub kind: VarKind,
    pub index: usize,
}

impl VariableId {
    pub const fn input(index: usize) -> Self {
        VariableId { kind: VarKind::Input, index }
    }

    pub const fn output(index: usize) -> Self {
        VariableId { kind: VarKind::Output, index }
    }

    /// Parses `X_<n>` / `Y_<n>`. Leading zeros other than `0` itself are
    /// rejected so that every variable has exactly one spelling.
    pub fn parse(name: &str) -> Option<Self> {
        let (kind, digits) = match (name.strip_prefix("X_"), name.strip_prefix("Y_")) {
            (Some(d), _) => (VarKind::Input, d),
            (_, Some(d)) => (VarKind::Output, d),
            _ => return None,
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if digits.len() > 1 && digits.starts_with('0') {
            return None;
        }
        digits.parse().ok().map(|index| VariableId { kind, index })
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            VarKind::Input => write!(f, "X_{}", self.index),
            VarKind::Output => write!(f, "Y_{}", self.index),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    LessEq,
    GreaterEq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::LessEq => "<=",
            Relation::GreaterEq => ">=",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Relation::LessEq => Relation::GreaterEq,
            Relation::GreaterEq => Relation::LessEq,
        }
    }
}

/// `sum(coefficients[v] * v)  relation  constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coefficients: BTreeMap<VariableId, f64>,
    pub relation: Relation,
    pub constant: f64,
}

impl LinearConstraint {
    /// Builds a constraint, enforcing the nonzero/finite invariants.
    pub fn new(coefficients: BTreeMap<VariableId, f64>, relation: Relation, constant: f64) -> Result<Self, SpecError> {
        let coefficients: BTreeMap<_, _> = coefficients.into_iter().filter(|(_, c)| *c != 0.0).collect();
        if coefficients.is_empty() {
            return Err(SpecError::DegenerateConstraint);
        }
        if !constant.is_finite() || coefficients.values().any(|c| !c.is_finite()) {
            return Err(SpecError::NonFinite);
        }
        Ok(LinearConstraint { coefficients, relation, constant })
    }

    /// `var <= value` or `var >= value`.
    pub fn bound(var: VariableId, relation: Relation, value: f64) -> Result<Self, SpecError> {
        Self::new(BTreeMap::from([(var, 1.0)]), relation, value)
    }

    pub fn mentions_output(&self) -> bool {
        self.coefficients.keys().any(|v| v.kind == VarKind::Output)
    }

    /// If this is `X_i <= c` or `X_i >= c` with unit coefficient, returns the
    /// input index.
    pub fn as_input_bound(&self) -> Option<usize> {
        if self.coefficients.len() != 1 {
            return None;
        }
        let (var, coeff) = self.coefficients.iter().next()?;
        (var.kind == VarKind::Input && *coeff == 1.0).then_some(var.index)
    }

    /// Left-hand side under the assignment, accumulated in key order.
    pub fn lhs(&self, x: &[f64], y: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .map(|(v, c)| {
                let value = match v.kind {
                    VarKind::Input => x[v.index],
                    VarKind::Output => y[v.index],
                };
                c * value
            })
            .sum()
    }

    /// Whether the constraint holds. Callers guarantee the slices are long
    /// enough for every referenced variable.
    pub fn holds(&self, x: &[f64], y: &[f64]) -> bool {
        let lhs = self.lhs(x, y);
        match self.relation {
            Relation::LessEq => lhs <= self.constant,
            Relation::GreaterEq => lhs >= self.constant,
        }
    }
}

impl fmt::Display for LinearConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (v, c)) in self.coefficients.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if *c == 1.0 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{c:?}*{v}")?;
            }
        }
        write!(f, " {} {:?}", self.relation.symbol(), self.constant)
    }
}

/// Boolean structure of the assertions before normalisation.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Atom(LinearConstraint),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> bool {
        match self {
            Formula::Atom(c) => c.holds(x, y),
            Formula::And(children) => children.iter().all(|c| c.evaluate(x, y)),
            Formula::Or(children) => children.iter().any(|c| c.evaluate(x, y)),
        }
    }

    pub fn atoms(&self) -> Vec<&LinearConstraint> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a LinearConstraint>) {
        match self {
            Formula::Atom(c) => out.push(c),
            Formula::And(ch) | Formula::Or(ch) => ch.iter().for_each(|c| c.collect_atoms(out)),
        }
    }
}

/// Closed interval for one input dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// One disjunct of the normalised specification.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjunctiveCase {
    /// Constraints over input variables only.
    pub input_constraints: Vec<LinearConstraint>,
    /// Constraints mentioning at least one output variable.
    pub output_constraints: Vec<LinearConstraint>,
    /// Per-input box implied by the unit-coefficient bound constraints, when
    /// every input has both a lower and an upper bound.
    pub input_box: Option<Vec<Bounds>>,
}

impl ConjunctiveCase {
    /// Routes atoms into input/output constraints and folds pure bounds into
    /// a box.
    pub fn from_atoms(atoms: Vec<LinearConstraint>, num_inputs: usize) -> Result<Self, SpecError> {
        if atoms.is_empty() {
            return Err(SpecError::EmptyCase);
        }
        let (output_constraints, input_constraints): (Vec<_>, Vec<_>) =
            atoms.into_iter().partition(|c| c.mentions_output());
        let input_box = extract_box(&input_constraints, num_inputs)?;
        Ok(ConjunctiveCase { input_constraints, output_constraints, input_box })
    }

    pub fn inputs_hold(&self, x: &[f64]) -> bool {
        self.input_constraints.iter().all(|c| c.holds(x, &[]))
    }

    pub fn outputs_hold(&self, x: &[f64], y: &[f64]) -> bool {
        self.output_constraints.iter().all(|c| c.holds(x, y))
    }

    pub fn constraints(&self) -> impl Iterator<Item = &LinearConstraint> {
        self.input_constraints.iter().chain(self.output_constraints.iter())
    }
}

fn extract_box(input_constraints: &[LinearConstraint], num_inputs: usize) -> Result<Option<Vec<Bounds>>, SpecError> {
    let mut lower = vec![f64::NEG_INFINITY; num_inputs];
    let mut upper = vec![f64::INFINITY; num_inputs];
    for c in input_constraints {
        let Some(i) = c.as_input_bound() else { continue };
        if i >= num_inputs {
            continue;
        }
        match c.relation {
            Relation::LessEq => upper[i] = upper[i].min(c.constant),
            Relation::GreaterEq => lower[i] = lower[i].max(c.constant),
        }
    }
    for i in 0..num_inputs {
        if lower[i] > upper[i] {
            return Err(SpecError::ContradictoryBounds { var: VariableId::input(i), lower: lower[i], upper: upper[i] });
        }
    }
    if num_inputs == 0 || lower.iter().chain(&upper).any(|b| !b.is_finite()) {
        return Ok(None);
    }
    Ok(Some(lower.into_iter().zip(upper).map(|(lower, upper)| Bounds { lower, upper }).collect()))
}

/// A parsed and normalised property: satisfied (a counterexample exists) iff
/// some case is satisfiable.
#[derive(Debug, Clone, PartialEq)]
pub struct Specification {
    pub num_inputs: usize,
    pub num_outputs: usize,
    pub cases: Vec<ConjunctiveCase>,
}

impl Specification {
    /// Index of the first case satisfied by the assignment.
    pub fn satisfied_case(&self, x: &[f64], y: &[f64]) -> Result<Option<usize>, SpecError> {
        self.check_dims(x, y)?;
        Ok(self.cases.iter().position(|c| c.inputs_hold(x) && c.outputs_hold(x, y)))
    }

    pub fn check_dims(&self, x: &[f64], y: &[f64]) -> Result<(), SpecError> {
        if x.len() != self.num_inputs || y.len() != self.num_outputs {
            return Err(SpecError::DimensionMismatch {
                expected: (self.num_inputs, self.num_outputs),
                got: (x.len(), y.len()),
            });
        }
        Ok(())
    }
}

/// True iff every constraint of `case` holds under `(x, y)`.
pub fn evaluate_case(
    case: &ConjunctiveCase,
    x: &[f64],
    y: &[f64],
    num_inputs: usize,
    num_outputs: usize,
) -> Result<bool, SpecError> {
    if x.len() != num_inputs || y.len() != num_outputs {
        return Err(SpecError::DimensionMismatch { expected: (num_inputs, num_outputs), got: (x.len(), y.len()) });
    }
    Ok(case.inputs_hold(x) && case.outputs_hold(x, y))
}
