use serde::{Deserialize, Serialize};

/// One audited inequality `lhs <= rhs` (or `lhs < rhs` when strict).
///
/// `margin` is `rhs - lhs`; a failed check has a negative (or, for strict
/// checks, non-positive) margin. Failures are data, never errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    pub margin: f64,
}

impl InequalityCheck {
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            pass: lhs <= rhs,
            margin: rhs - lhs,
        }
    }

    pub fn lt(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            pass: lhs < rhs,
            margin: rhs - lhs,
        }
    }
}

pub fn all_pass(checks: &[InequalityCheck]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Serialize a list of checks as a JSON array of `{name, lhs, rhs, pass, margin}`.
pub fn to_json(checks: &[InequalityCheck]) -> serde_json::Result<String> {
    serde_json::to_string_pretty(checks)
}
