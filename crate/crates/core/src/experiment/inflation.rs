//! Search for the variance-inflation factor `υ` that minimises the converged analysis error.

use serde::{Deserialize, Serialize};

use super::{run_ensemble, AssimR, Scenario};
use crate::error::{Error, Result};

/// Bracketing and refinement controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InflationSearch {
    pub scan_ratio: f64,
    pub tol: f64,
    pub upper_limit: f64,
}

impl Default for InflationSearch {
    fn default() -> Self {
        Self { scan_ratio: 1.5, tol: 0.25, upper_limit: 1e3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflationResult {
    pub upsilon: f64,
    pub sigma_a_star: f64,
    /// Every `(υ, σ_a^*)` evaluated, in evaluation order.
    pub evaluations: Vec<(f64, f64)>,
}

/// Geometric scan from `υ = 1` until `σ_a^*` increases, then golden-section refinement.
///
/// Every evaluation reuses the scenario seed, so all `υ` see the same realizations.
pub fn optimal_inflation(scenario: &Scenario, search: &InflationSearch) -> Result<InflationResult> {
    if !matches!(scenario.assim, AssimR::InflatedDiagonal { .. }) {
        return Err(Error::param("assim", "the inflation search needs an inflated-diagonal scenario"));
    }
    if !(search.scan_ratio > 1.0 && search.tol > 0.0) {
        return Err(Error::param("search", "scan_ratio must exceed 1 and tol must be positive"));
    }
    let mut evaluations = Vec::new();
    let mut eval = |u: f64| -> Result<f64> {
        let s = scenario.with_assim(AssimR::InflatedDiagonal { upsilon: u });
        let e = run_ensemble(&s)?.sigma_a_star;
        evaluations.push((u, e));
        Ok(e)
    };

    let mut prev = (1.0, eval(1.0)?);
    let mut before = (1.0 / search.scan_ratio, f64::NAN);
    let bracket = loop {
        let u = prev.0 * search.scan_ratio;
        if u > search.upper_limit {
            return Err(Error::SearchRange { limit: search.upper_limit });
        }
        let cur = (u, eval(u)?);
        if cur.1 > prev.1 {
            break (before.0, cur.0);
        }
        before = prev;
        prev = cur;
    };

    let (mut lo, mut hi) = bracket;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
    while hi - lo > search.tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    let (upsilon, sigma_a_star) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    Ok(InflationResult { upsilon, sigma_a_star, evaluations })
}
