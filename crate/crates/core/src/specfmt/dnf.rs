//! Conversion of an and/or tree of linear atoms to disjunctive normal form.

use super::types::{ConjunctiveCase, Formula, LinearConstraint};
use super::SpecError;

/// Default upper bound on the number of DNF cases.
pub const DEFAULT_CASE_CAP: usize = 65536;

/// Number of DNF cases `f` expands to, saturating at `u128::MAX`.
pub fn dnf_case_count(f: &Formula) -> u128 {
    match f {
        Formula::Atom(_) => 1,
        Formula::Or(ch) => ch.iter().map(dnf_case_count).fold(0u128, u128::saturating_add),
        Formula::And(ch) => ch.iter().map(dnf_case_count).fold(1u128, u128::saturating_mul),
    }
}

/// Distributes conjunction over disjunction. Each returned clause is the
/// ordered list of atoms of one case; clause order follows the tree
/// left-to-right (`A & (B | C)` gives `[A, B]`, `[A, C]`).
pub fn expand_clauses(f: &Formula, cap: usize) -> Result<Vec<Vec<LinearConstraint>>, SpecError> {
    let total = dnf_case_count(f);
    if total > cap as u128 {
        return Err(SpecError::CaseExplosion { cases: total, cap });
    }
    Ok(expand(f))
}

fn expand(f: &Formula) -> Vec<Vec<LinearConstraint>> {
    match f {
        Formula::Atom(c) => vec![vec![c.clone()]],
        Formula::Or(ch) => ch.iter().flat_map(expand).collect(),
        Formula::And(ch) => {
            // An unsatisfiable conjunct empties the product; skip expanding
            // the others so intermediate sizes stay under the final count.
            if ch.iter().any(|c| dnf_case_count(c) == 0) {
                return Vec::new();
            }
            let mut acc: Vec<Vec<LinearConstraint>> = vec![Vec::new()];
            for child in ch {
                let parts = expand(child);
                let mut next = Vec::with_capacity(acc.len() * parts.len());
                for prefix in &acc {
                    for part in &parts {
                        let mut clause = prefix.clone();
                        clause.extend(part.iter().cloned());
                        next.push(clause);
                    }
                }
                acc = next;
            }
            acc
        }
    }
}

/// Normalises `f` into routed conjunctive cases.
pub fn normalize_dnf(f: &Formula, num_inputs: usize, cap: usize) -> Result<Vec<ConjunctiveCase>, SpecError> {
    let clauses = expand_clauses(f, cap)?;
    if clauses.is_empty() {
        return Err(SpecError::EmptyDnf);
    }
    clauses.into_iter().map(|atoms| ConjunctiveCase::from_atoms(atoms, num_inputs)).collect()
}
