use serde::{Deserialize, Serialize};

use crate::eps::EpsGrid;
use crate::error::{Error, Result};
use crate::gmet::{check_space, FuzzySpace, GMetSpec};
use crate::terms::Signature;

/// Caps on the exhaustive enumerations. Exceeding one is an error, never a
/// silent truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    /// Interpretations enumerated per satisfaction check.
    pub interpretations: u64,
    /// Rule instances examined by one saturation run.
    pub instances: u64,
    /// Terms in one bounded universe.
    pub terms: u64,
    /// Candidate maps enumerated by a uniqueness check.
    pub enumeration: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            interpretations: 1_000_000,
            instances: 200_000_000,
            terms: 4_000,
            enumeration: 1_000_000,
        }
    }
}

/// `base^exp`, saturating at `u64::MAX`.
pub(crate) fn count_maps(base: usize, exp: usize) -> u64 {
    let mut acc: u64 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base as u64);
    }
    acc
}

/// The fixed ingredients shared by every judgment in a run: signature, GMet
/// specification, distance grid and enumeration budgets.
#[derive(Clone, Debug)]
pub struct Logic {
    pub signature: Signature,
    pub spec: GMetSpec,
    pub grid: EpsGrid,
    pub budget: Budget,
}

impl Logic {
    pub fn new(signature: Signature, spec: GMetSpec, grid: EpsGrid) -> Result<Logic> {
        signature.validate()?;
        spec.compile(&grid)?;
        Ok(Logic { signature, spec, grid, budget: Budget::default() })
    }

    pub fn with_budget(mut self, budget: Budget) -> Logic {
        self.budget = budget;
        self
    }

    /// `Ok` iff `sp` lies on the grid and satisfies every clause of the spec.
    pub fn require_space(&self, sp: &FuzzySpace, what: &str) -> Result<()> {
        let violations = check_space(&self.spec, &self.grid, sp)?;
        match violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::SpecViolation(format!(
                "{what} is not a {} space: {v} ({} violation(s))",
                self.spec.name,
                violations.len()
            ))),
        }
    }

    pub(crate) fn require_budget(&self, what: &str, count: u64, cap: u64) -> Result<()> {
        if count > cap {
            Err(Error::BudgetExceeded(format!("{what}: {count} exceeds the cap of {cap}")))
        } else {
            Ok(())
        }
    }
}
