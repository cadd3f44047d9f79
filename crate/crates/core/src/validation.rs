use serde::Serialize;

/// Outcome of one sampled assumption check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    /// A sample point where the check failed, if any.
    pub witness: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub(crate) fn push(&mut self, name: &str, witness: Option<f64>, detail: impl Into<String>) {
        self.checks.push(AssumptionCheck {
            name: name.to_string(),
            passed: witness.is_none(),
            witness,
            detail: detail.into(),
        });
    }

    pub(crate) fn push_bool(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(AssumptionCheck {
            name: name.to_string(),
            passed,
            witness: None,
            detail: detail.into(),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Log-spaced sample points in `[lo, hi]`, both ends included.
pub(crate) fn log_samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (l, h) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (l + (h - l) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
