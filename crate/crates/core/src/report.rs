//! Verdicts for hypothesis and conclusion checks.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// A prerequisite set (region, surface section) was empty.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub t: f64,
    pub x: Option<f64>,
}

/// Outcome of one check. `worst` is signed: positive values are violations
/// in units of the checked quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub verdict: Verdict,
    pub worst: f64,
    pub witness: Option<Witness>,
    pub tol: f64,
    pub notes: String,
}

impl CheckReport {
    /// PASS/FAIL from the worst violation against `tol`.
    pub fn judge(check: impl Into<String>, worst: f64, tol: f64, witness: Option<Witness>) -> Self {
        let verdict = if worst > tol {
            Verdict::Fail
        } else {
            Verdict::Pass
        };
        CheckReport {
            check: check.into(),
            verdict,
            worst,
            witness,
            tol,
            notes: String::new(),
        }
    }

    pub fn inconclusive(check: impl Into<String>, notes: impl Into<String>) -> Self {
        CheckReport {
            check: check.into(),
            verdict: Verdict::Inconclusive,
            worst: 0.0,
            witness: None,
            tol: 0.0,
            notes: notes.into(),
        }
    }

    pub fn with_notes(mut self, notes: impl Into<String>) -> Self {
        self.notes = notes.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}

/// Tracks the largest violation seen so far and where it happened.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WorstTracker {
    pub worst: f64,
    pub witness: Option<Witness>,
}

impl WorstTracker {
    pub fn new() -> Self {
        WorstTracker {
            worst: f64::NEG_INFINITY,
            witness: None,
        }
    }

    pub fn offer(&mut self, violation: f64, t: f64, x: Option<f64>) {
        if violation > self.worst || self.witness.is_none() {
            self.worst = violation;
            self.witness = Some(Witness { t, x });
        }
    }

    /// Worst violation, reported as 0 when nothing was examined.
    pub fn value(&self) -> f64 {
        if self.witness.is_none() {
            0.0
        } else {
            self.worst
        }
    }
}
