//! Canonical text and JSON renderings of a normalised specification.

use std::fmt::Write;

use serde_json::{json, Value};

use super::types::{ConjunctiveCase, LinearConstraint, Specification};

/// Formats a float so that it re-parses to the identical value and is
/// accepted by the literal grammar (always has a digit before any exponent).
pub fn format_number(v: f64) -> String {
    let s = format!("{v:?}");
    if s == "-0.0" {
        // `-0.0` reparses fine, but keep a single spelling for zero.
        "0.0".to_string()
    } else {
        s
    }
}

fn render_constraint(c: &LinearConstraint) -> String {
    let terms: Vec<String> = c
        .coefficients
        .iter()
        .map(|(v, k)| if *k == 1.0 { v.to_string() } else { format!("(* {} {v})", format_number(*k)) })
        .collect();
    let lhs = if terms.len() == 1 { terms.into_iter().next().unwrap() } else { format!("(+ {})", terms.join(" ")) };
    format!("({} {lhs} {})", c.relation.symbol(), format_number(c.constant))
}

fn render_case(case: &ConjunctiveCase) -> String {
    let atoms: Vec<String> = case.constraints().map(render_constraint).collect();
    format!("(and {})", atoms.join(" "))
}

/// Renders the specification back to VNN-LIB as declarations followed by a
/// single assertion `(or (and ...) ...)`. Re-parsing the output yields a
/// structurally identical [`Specification`].
pub fn serialize_specification(spec: &Specification) -> String {
    let mut out = String::new();
    for i in 0..spec.num_inputs {
        let _ = writeln!(out, "(declare-const X_{i} Real)");
    }
    for j in 0..spec.num_outputs {
        let _ = writeln!(out, "(declare-const Y_{j} Real)");
    }
    if spec.cases.len() == 1 {
        let _ = writeln!(out, "(assert {})", render_case(&spec.cases[0]));
    } else {
        out.push_str("(assert (or\n");
        for case in &spec.cases {
            let _ = writeln!(out, "  {}", render_case(case));
        }
        out.push_str("))\n");
    }
    out
}

fn constraint_json(c: &LinearConstraint) -> Value {
    json!({
        "terms": c.coefficients.iter()
            .map(|(v, k)| json!({ "var": v.to_string(), "coeff": k }))
            .collect::<Vec<_>>(),
        "relation": c.relation.symbol(),
        "constant": c.constant,
    })
}

/// JSON rendering used by `spec dump`.
pub fn specification_json(spec: &Specification) -> Value {
    let cases: Vec<Value> = spec
        .cases
        .iter()
        .map(|case| {
            json!({
                "input_box": case.input_box.as_ref().map(|b| {
                    b.iter().map(|d| json!([d.lower, d.upper])).collect::<Vec<_>>()
                }),
                "input_constraints": case.input_constraints.iter().map(constraint_json).collect::<Vec<_>>(),
                "output_constraints": case.output_constraints.iter().map(constraint_json).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "num_inputs": spec.num_inputs,
        "num_outputs": spec.num_outputs,
        "num_cases": spec.cases.len(),
        "cases": cases,
    })
}
