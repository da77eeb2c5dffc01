//! Interpretation of the VNN-LIB subset on top of the token stream.

use std::collections::{BTreeMap, BTreeSet};

use super::dnf::normalize_dnf;
use super::lexer::{Pos, Token, TokenKind};
use super::types::{Formula, LinearConstraint, Relation, Specification, VarKind, VariableId};
use super::SpecError;

/// Parenthesised tree built from tokens.
#[derive(Debug, Clone, PartialEq)]
pub enum SExpr {
    Leaf(Token),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Leaf(t) => t.pos,
            SExpr::List(_, p) => *p,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            SExpr::Leaf(Token { kind: TokenKind::Symbol(s), .. }) => Some(s),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            SExpr::Leaf(Token { kind: TokenKind::Number { value, .. }, .. }) => Some(*value),
            _ => None,
        }
    }
}

/// Groups tokens into top-level s-expressions.
pub fn read_sexprs(tokens: &[Token]) -> Result<Vec<SExpr>, SpecError> {
    let mut stack: Vec<(Vec<SExpr>, Pos)> = Vec::new();
    let mut top = Vec::new();
    for tok in tokens {
        match tok.kind {
            TokenKind::LParen => stack.push((Vec::new(), tok.pos)),
            TokenKind::RParen => {
                let (items, pos) = stack.pop().ok_or(SpecError::UnbalancedParen { pos: tok.pos })?;
                let list = SExpr::List(items, pos);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => top.push(list),
                }
            }
            _ => match stack.last_mut() {
                Some((parent, _)) => parent.push(SExpr::Leaf(tok.clone())),
                None => top.push(SExpr::Leaf(tok.clone())),
            },
        }
    }
    if let Some((_, pos)) = stack.pop() {
        return Err(SpecError::UnbalancedParen { pos });
    }
    Ok(top)
}

/// Declarations plus the conjunction of all assertions, before DNF.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSpec {
    pub num_inputs: usize,
    pub num_outputs: usize,
    pub assertion: Formula,
}

impl ParsedSpec {
    pub fn into_specification(self, case_cap: usize) -> Result<Specification, SpecError> {
        let cases = normalize_dnf(&self.assertion, self.num_inputs, case_cap)?;
        Ok(Specification { num_inputs: self.num_inputs, num_outputs: self.num_outputs, cases })
    }
}

/// Linear expression `sum(coeffs) + constant` under construction.
#[derive(Debug, Clone, Default)]
struct Linear {
    coeffs: BTreeMap<VariableId, f64>,
    constant: f64,
}

impl Linear {
    fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn add(mut self, other: Linear) -> Linear {
        for (v, c) in other.coeffs {
            *self.coeffs.entry(v).or_insert(0.0) += c;
        }
        self.constant += other.constant;
        self
    }

    fn negate(mut self) -> Linear {
        self.coeffs.values_mut().for_each(|c| *c = -*c);
        self.constant = -self.constant;
        self
    }

    fn scale(mut self, k: f64) -> Linear {
        self.coeffs.values_mut().for_each(|c| *c *= k);
        self.constant *= k;
        self
    }

    /// `self - other` without touching coefficients that appear on one side
    /// only, so literal values survive unchanged.
    fn minus_coeffs(&self, other: &Linear) -> BTreeMap<VariableId, f64> {
        let mut out = self.coeffs.clone();
        for (v, c) in &other.coeffs {
            match out.get_mut(v) {
                Some(existing) => *existing -= c,
                None => {
                    out.insert(*v, -c);
                }
            }
        }
        out
    }
}

struct Declarations {
    declared: BTreeSet<VariableId>,
}

impl Declarations {
    fn lookup(&self, name: &str, pos: Pos) -> Result<VariableId, SpecError> {
        match VariableId::parse(name) {
            Some(v) if self.declared.contains(&v) => Ok(v),
            _ => Err(SpecError::UndeclaredVariable { name: name.to_string(), pos }),
        }
    }
}

/// Parses the token stream into declarations and an assertion tree.
pub fn parse_formula(tokens: &[Token]) -> Result<ParsedSpec, SpecError> {
    let exprs = read_sexprs(tokens)?;
    let mut decls = Declarations { declared: BTreeSet::new() };
    let mut asserts = Vec::new();

    for expr in &exprs {
        let SExpr::List(items, pos) = expr else {
            return Err(unsupported("bare token at top level", expr.pos()));
        };
        let head = items.first().and_then(SExpr::as_symbol);
        match head {
            Some("declare-const") => {
                let [_, name, sort] = items.as_slice() else {
                    return Err(unsupported("declare-const expects a name and a sort", *pos));
                };
                let name_str =
                    name.as_symbol().ok_or_else(|| unsupported("declare-const name must be a symbol", name.pos()))?;
                if sort.as_symbol() != Some("Real") {
                    return Err(unsupported("only sort Real is supported", sort.pos()));
                }
                let var = VariableId::parse(name_str).ok_or_else(|| {
                    unsupported(&format!("variable {name_str} is not named X_<n> or Y_<n>"), name.pos())
                })?;
                if !decls.declared.insert(var) {
                    return Err(SpecError::DuplicateDeclaration { name: name_str.to_string(), pos: name.pos() });
                }
            }
            Some("assert") => {
                let [_, body] = items.as_slice() else {
                    return Err(unsupported("assert expects exactly one formula", *pos));
                };
                asserts.push(parse_bool(body, &decls)?);
            }
            Some(other) => return Err(unsupported(&format!("command `{other}`"), *pos)),
            None => return Err(unsupported("empty or non-symbol command", *pos)),
        }
    }

    let num_inputs = dense_count(&decls.declared, VarKind::Input)?;
    let num_outputs = dense_count(&decls.declared, VarKind::Output)?;
    Ok(ParsedSpec { num_inputs, num_outputs, assertion: Formula::And(asserts) })
}

/// Parses and normalises a token stream into a [`Specification`].
pub fn parse_specification(tokens: &[Token], case_cap: usize) -> Result<Specification, SpecError> {
    parse_formula(tokens)?.into_specification(case_cap)
}

fn dense_count(declared: &BTreeSet<VariableId>, kind: VarKind) -> Result<usize, SpecError> {
    let indices: Vec<usize> = declared.iter().filter(|v| v.kind == kind).map(|v| v.index).collect();
    for (expected, &got) in indices.iter().enumerate() {
        if got != expected {
            return Err(SpecError::NonDenseVariables { missing: VariableId { kind, index: expected } });
        }
    }
    Ok(indices.len())
}

fn unsupported(what: &str, pos: Pos) -> SpecError {
    SpecError::UnsupportedForm { what: what.to_string(), pos }
}

fn parse_bool(expr: &SExpr, decls: &Declarations) -> Result<Formula, SpecError> {
    let SExpr::List(items, pos) = expr else {
        return Err(unsupported("expected a boolean formula", expr.pos()));
    };
    let head = items.first().and_then(SExpr::as_symbol);
    match head {
        Some("and") => Ok(Formula::And(items[1..].iter().map(|e| parse_bool(e, decls)).collect::<Result<_, _>>()?)),
        Some("or") => Ok(Formula::Or(items[1..].iter().map(|e| parse_bool(e, decls)).collect::<Result<_, _>>()?)),
        Some(op @ ("<=" | ">=")) => {
            let [_, lhs, rhs] = items.as_slice() else {
                return Err(unsupported(&format!("`{op}` expects exactly two operands"), *pos));
            };
            let relation = if op == "<=" { Relation::LessEq } else { Relation::GreaterEq };
            let lhs = parse_term(lhs, decls)?;
            let rhs = parse_term(rhs, decls)?;
            let constraint = if lhs.is_constant() {
                // c REL u  ==>  u REL' c, so a plain `(>= 3.5 Y_0)` keeps its literal.
                LinearConstraint::new(rhs.minus_coeffs(&lhs), relation.flipped(), lhs.constant - rhs.constant)
            } else {
                LinearConstraint::new(lhs.minus_coeffs(&rhs), relation, rhs.constant - lhs.constant)
            };
            constraint.map(Formula::Atom).map_err(|e| SpecError::InvalidAtom { reason: e.to_string(), pos: *pos })
        }
        Some(op @ ("<" | ">")) => Err(unsupported(&format!("strict inequality `{op}`"), *pos)),
        Some(other) => Err(unsupported(&format!("boolean operator `{other}`"), *pos)),
        None => Err(unsupported("expected a boolean formula", *pos)),
    }
}

fn parse_term(expr: &SExpr, decls: &Declarations) -> Result<Linear, SpecError> {
    match expr {
        SExpr::Leaf(tok) => match &tok.kind {
            TokenKind::Number { value, .. } => Ok(Linear { coeffs: BTreeMap::new(), constant: *value }),
            TokenKind::Symbol(name) => {
                let v = decls.lookup(name, tok.pos)?;
                Ok(Linear { coeffs: BTreeMap::from([(v, 1.0)]), constant: 0.0 })
            }
            _ => Err(unsupported(&format!("unexpected token `{}` in term", tok.text()), tok.pos)),
        },
        SExpr::List(items, pos) => {
            let head = items.first().and_then(SExpr::as_symbol);
            let args = items
                .get(1..)
                .unwrap_or_default()
                .iter()
                .map(|e| parse_term(e, decls))
                .collect::<Result<Vec<_>, _>>()?;
            match head {
                Some("+") if !args.is_empty() => Ok(args.into_iter().fold(Linear::default(), Linear::add)),
                Some("-") if args.len() == 1 => Ok(args.into_iter().next().unwrap().negate()),
                Some("-") if args.len() > 1 => {
                    let mut it = args.into_iter();
                    let first = it.next().unwrap();
                    Ok(it.fold(first, |acc, t| acc.add(t.negate())))
                }
                Some("*") if !args.is_empty() => {
                    let mut variable: Option<Linear> = None;
                    let mut factor = 1.0;
                    for a in args {
                        if a.is_constant() {
                            factor *= a.constant;
                        } else if variable.is_some() {
                            return Err(SpecError::NonlinearTerm { pos: *pos });
                        } else {
                            variable = Some(a);
                        }
                    }
                    Ok(match variable {
                        Some(v) => v.scale(factor),
                        None => Linear { coeffs: BTreeMap::new(), constant: factor },
                    })
                }
                Some(op) => Err(unsupported(&format!("term operator `{op}`"), *pos)),
                None => Err(unsupported("expected a term", *pos)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfmt::{lexer::tokenize, parse_str, Bounds, DEFAULT_CASE_CAP};

    fn parse(src: &str) -> Result<Specification, SpecError> {
        parse_specification(&tokenize(src).unwrap(), DEFAULT_CASE_CAP)
    }

    const BOX: &str =
        "(declare-const X_0 Real)\n(declare-const X_1 Real)\n(declare-const Y_0 Real)\n(declare-const Y_1 Real)\n\
        (assert (<= X_0 1))\n(assert (>= X_0 0))\n(assert (<= X_1 1))\n(assert (>= X_1 0))\n";

    #[test]
    fn single_conjunction() {
        let src = "(declare-const X_0 Real)(declare-const X_1 Real)(declare-const Y_0 Real)\
            (assert (<= X_0 1))(assert (>= X_0 0))(assert (<= X_1 1))(assert (>= X_1 0))(assert (>= Y_0 3.5))";
        let spec = parse(src).unwrap();
        assert_eq!((spec.num_inputs, spec.num_outputs), (2, 1));
        assert_eq!(spec.cases.len(), 1);
        let case = &spec.cases[0];
        assert_eq!(case.input_box, Some(vec![Bounds { lower: 0.0, upper: 1.0 }, Bounds { lower: 0.0, upper: 1.0 }]));
        assert_eq!(case.output_constraints.len(), 1);
        let c = &case.output_constraints[0];
        assert_eq!(c.relation, Relation::GreaterEq);
        assert_eq!(c.constant, 3.5);
        assert_eq!(c.coefficients, BTreeMap::from([(VariableId::output(0), 1.0)]));
    }

    #[test]
    fn disjunction_fans_out_over_shared_box() {
        let src = format!("{BOX}(assert (or (and (<= Y_0 0)) (and (<= Y_1 0))))");
        let spec = parse(&src).unwrap();
        assert_eq!(spec.cases.len(), 2);
        assert_eq!(spec.cases[0].input_box, spec.cases[1].input_box);
        assert!(spec.cases[0].input_box.is_some());
        assert_eq!(spec.cases[0].output_constraints[0].coefficients.keys().next(), Some(&VariableId::output(0)));
        assert_eq!(spec.cases[1].output_constraints[0].coefficients.keys().next(), Some(&VariableId::output(1)));
    }

    #[test]
    fn relational_output_constraint() {
        let src = format!("{BOX}(assert (<= Y_0 Y_1))");
        let c = &parse(&src).unwrap().cases[0].output_constraints[0];
        assert_eq!(c.coefficients, BTreeMap::from([(VariableId::output(0), 1.0), (VariableId::output(1), -1.0)]));
        assert_eq!((c.relation, c.constant), (Relation::LessEq, 0.0));
    }

    #[test]
    fn constant_on_left_is_flipped() {
        let src = format!("{BOX}(assert (>= 3.5 Y_0))");
        let c = &parse(&src).unwrap().cases[0].output_constraints[0];
        assert_eq!((c.relation, c.constant), (Relation::LessEq, 3.5));
    }

    #[test]
    fn linear_terms() {
        let src = format!("{BOX}(assert (<= (+ (* 2 Y_0) (- Y_1) 1) (* 0.5 (- 3 X_0))))");
        let c = &parse(&src).unwrap().cases[0].output_constraints[0];
        assert_eq!(
            c.coefficients,
            BTreeMap::from([(VariableId::input(0), 0.5), (VariableId::output(0), 2.0), (VariableId::output(1), -1.0)])
        );
        assert_eq!(c.constant, 0.5);
    }

    #[test]
    fn nonlinear_product_rejected() {
        let src = format!("{BOX}(assert (<= (* Y_0 Y_1) 1))");
        assert!(matches!(parse(&src), Err(SpecError::NonlinearTerm { pos }) if pos.line == 9));
    }

    #[test]
    fn undeclared_variable() {
        let err = parse("(declare-const X_0 Real)(assert (<= X_1 1))").unwrap_err();
        assert!(matches!(err, SpecError::UndeclaredVariable { ref name, pos } if name == "X_1" && pos.column == 37));
    }

    #[test]
    fn strict_inequality_rejected() {
        let err = parse("(declare-const X_0 Real)(assert (< X_0 1))").unwrap_err();
        assert!(matches!(err, SpecError::UnsupportedForm { .. }));
    }

    #[test]
    fn unsupported_commands_and_sorts() {
        assert!(matches!(parse("(check-sat)"), Err(SpecError::UnsupportedForm { .. })));
        assert!(matches!(parse("(declare-const X_0 Int)"), Err(SpecError::UnsupportedForm { .. })));
        assert!(matches!(parse("(declare-const foo Real)"), Err(SpecError::UnsupportedForm { .. })));
    }

    #[test]
    fn gaps_in_declarations() {
        let err = parse("(declare-const X_0 Real)(declare-const X_2 Real)(assert (<= X_0 1))").unwrap_err();
        assert_eq!(err, SpecError::NonDenseVariables { missing: VariableId::input(1) });
    }

    #[test]
    fn duplicate_declaration() {
        assert!(matches!(
            parse("(declare-const X_0 Real)(declare-const X_0 Real)"),
            Err(SpecError::DuplicateDeclaration { .. })
        ));
    }

    #[test]
    fn empty_disjunction_reported() {
        let src = format!("{BOX}(assert (or))");
        assert_eq!(parse(&src).unwrap_err(), SpecError::EmptyDnf);
    }

    #[test]
    fn contradictory_box_is_a_parse_error() {
        let err = parse(
            "(declare-const X_0 Real)(declare-const Y_0 Real)(assert (<= X_0 0))(assert (>= X_0 1))(assert (>= Y_0 0))",
        )
        .unwrap_err();
        assert!(matches!(err, SpecError::ContradictoryBounds { .. }));
    }

    #[test]
    fn unbalanced_parens() {
        assert!(matches!(parse("(assert (<= X_0 1)"), Err(SpecError::UnbalancedParen { .. })));
        assert!(matches!(parse("(assert X_0))"), Err(SpecError::UnbalancedParen { .. })));
    }

    #[test]
    fn degenerate_atom() {
        let src = format!("{BOX}(assert (<= (- Y_0 Y_0) 1))");
        assert!(matches!(parse(&src), Err(SpecError::InvalidAtom { .. })));
    }

    #[test]
    fn parse_str_entry_point() {
        let spec = parse_str(&format!("{BOX}(assert (>= Y_0 0))")).unwrap();
        assert_eq!(spec.cases.len(), 1);
    }
}
