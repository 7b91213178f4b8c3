//! Outcome records shared by every checker.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One checked statement of the form `lhs ≤ C·rhs_without_constant`.
///
/// Identity checks use the same shape with `lhs` the measured mismatch,
/// `rhs_without_constant = 1` and the tolerance as budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub lhs: f64,
    pub rhs_without_constant: f64,
    pub implied_constant: f64,
    pub pass: bool,
    pub meta: BTreeMap<String, Value>,
}

/// Smallest C ≥ 0 with lhs ≤ C·rhs; infinite when no such C exists.
pub fn implied_constant(lhs: f64, rhs: f64) -> f64 {
    if lhs.is_nan() || rhs.is_nan() {
        f64::NAN
    } else if lhs <= 0.0 {
        0.0
    } else if rhs > 0.0 {
        lhs / rhs
    } else {
        f64::INFINITY
    }
}

impl CheckReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs_without_constant: f64, budget: f64) -> Self {
        let implied = implied_constant(lhs, rhs_without_constant);
        let mut meta = BTreeMap::new();
        meta.insert("budget".to_string(), json_f64(budget));
        Self {
            name: name.into(),
            lhs,
            rhs_without_constant,
            implied_constant: implied,
            pass: implied <= budget,
            meta,
        }
    }

    /// A mismatch measurement against a tolerance.
    pub fn mismatch(name: impl Into<String>, mismatch: f64, tolerance: f64) -> Self {
        Self::new(name, mismatch, 1.0, tolerance)
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    pub fn with_meta_f64(self, key: &str, value: f64) -> Self {
        self.with_meta(key, json_f64(value))
    }

    /// Force a failure with a recorded reason.
    pub fn failed(mut self, reason: &str) -> Self {
        self.pass = false;
        self.with_meta("failure", reason)
    }

    pub fn budget(&self) -> Option<f64> {
        self.meta.get("budget").and_then(Value::as_f64)
    }
}

/// Non-finite floats become strings so JSON stays valid and lossless.
pub fn json_f64(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else {
        Value::from(format!("{v}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn implied_constant_cases() {
        assert_eq!(implied_constant(0.0, 0.0), 0.0);
        assert_eq!(implied_constant(-1.0, 2.0), 0.0);
        assert_eq!(implied_constant(1.0, 4.0), 0.25);
        assert_eq!(implied_constant(1.0, 0.0), f64::INFINITY);
        assert!(implied_constant(f64::NAN, 1.0).is_nan());
    }

    #[test]
    fn pass_iff_within_budget() {
        assert!(CheckReport::new("a", 1.0, 2.0, 0.5).pass);
        assert!(!CheckReport::new("a", 1.0, 2.0, 0.49).pass);
        assert!(!CheckReport::new("a", f64::NAN, 2.0, 10.0).pass);
        let r = CheckReport::new("a", 1.0, 0.0, 1e300);
        assert!(!r.pass);
        assert_eq!(r.implied_constant, f64::INFINITY);
    }
}

/// Observed convergence order from errors at two resolutions differing by `ratio`.
pub fn observed_order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}
