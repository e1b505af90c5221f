use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::util::sha256_hex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// One sample-level row for the per-check CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub case: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub error: f64,
}

/// Outcome of one check. `margin ≥ 0` means the inequality holds as stated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_id: String,
    /// Which statement is being tested, e.g. `gradient_bound.b`.
    pub anchor: String,
    pub model: String,
    /// SHA-256 of the canonical JSON of the check inputs.
    pub inputs_digest: String,
    pub margin: f64,
    pub tolerance: f64,
    /// Statistical or discretization error attached to the margin.
    pub stat_error: f64,
    pub verdict: Verdict,
    pub details: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<CaseRow>,
}

/// Pass iff `margin ≥ −tolerance`; otherwise inconclusive when the error bar exceeds `|margin|`.
pub fn verdict(margin: f64, tolerance: f64, stat_error: f64) -> Verdict {
    if margin >= -tolerance {
        Verdict::Pass
    } else if stat_error > margin.abs() {
        Verdict::Inconclusive
    } else {
        Verdict::Fail
    }
}

impl CheckResult {
    pub fn new(check_id: &str, anchor: &str, model: &str, inputs: &impl Serialize, margin: f64, tolerance: f64, stat_error: f64) -> CheckResult {
        let digest = sha256_hex(serde_json::to_string(inputs).unwrap_or_default().as_bytes());
        // NaN margins must never pass.
        let v = if margin.is_nan() { Verdict::Fail } else { verdict(margin, tolerance, stat_error) };
        CheckResult {
            check_id: check_id.to_string(),
            anchor: anchor.to_string(),
            model: model.to_string(),
            inputs_digest: digest,
            margin,
            tolerance,
            stat_error,
            verdict: v,
            details: BTreeMap::new(),
            notes: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn detail(mut self, key: &str, value: f64) -> CheckResult {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> CheckResult {
        self.notes.push(text.into());
        self
    }

    pub fn with_rows(mut self, rows: Vec<CaseRow>) -> CheckResult {
        self.rows = rows;
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_rule() {
        assert_eq!(verdict(0.0, 0.0, 0.0), Verdict::Pass);
        assert_eq!(verdict(-1e-9, 1e-8, 0.0), Verdict::Pass);
        assert_eq!(verdict(-1.0, 0.1, 0.5), Verdict::Fail);
        assert_eq!(verdict(-1.0, 0.1, 2.0), Verdict::Inconclusive);
    }

    #[test]
    fn nan_fails() {
        let r = CheckResult::new("x", "y", "m", &1, f64::NAN, 1.0, 0.0);
        assert_eq!(r.verdict, Verdict::Fail);
    }
}
