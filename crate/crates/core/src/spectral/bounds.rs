//! Upper bounds on `κ(S)` and the minima criteria derived from them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{log_kappa_s, log_kappa_so, HessianSpec};
use crate::covariance::{covariance_spectrum, guard, CirculantOperator, CorrelationSpec};
use crate::error::{Error, Result};

/// `1 + λ_max(B)/λ_min(R)`, using `λ_max(HHᵀ) = 1` for a selection operator.
pub fn bound_naive(spec: &HessianSpec) -> f64 {
    let lmax_b = spec.b.log_spectrum()[0];
    let lmin_r = spec.o.log_spectrum().into_iter().fold(f64::INFINITY, f64::min);
    1.0 + (lmax_b - lmin_r).exp()
}

/// `1 + ‖V⁻¹HBHᵀV⁻¹‖_∞` with `V` the symmetric square root of `R` (dense, `n ≤ 512`).
pub fn bound_infnorm(spec: &HessianSpec) -> Result<f64> {
    guard(spec.n())?;
    let (m, z) = (spec.m(), spec.zeta);
    let b = covariance_spectrum(&spec.b).to_dense()?;
    let hbh = DMatrix::from_fn(m, m, |i, j| b[(i * z, j * z)]);
    let vinv = CirculantOperator::from_spectrum(
        spec.o.log_spectrum().into_iter().map(|l| (-0.5 * l).exp()).collect(),
    )
    .to_dense()?;
    let x = &vinv * hbh * &vinv;
    let norm = x
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(1.0 + norm)
}

/// Which branch of the `η` bound applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaCase {
    /// All three conditions hold: the interior maximum (three-factor product).
    Interior,
    /// Maximum attained at the highest wavenumber, `(1+4L̃_o²)^{M_o}/(1+4L̃_{b/o}²)^{M_b}`.
    Endpoint,
    /// The ratio never exceeds 1, so `η = 1 + α`.
    Unit,
}

/// The bound `η ≥ κ(S_o)`, returned with the branch that produced it.
pub fn bound_eta(spec: &HessianSpec) -> (f64, EtaCase) {
    let (l, c) = log_eta_parts(
        spec.o.order,
        spec.b.order,
        spec.o.ltilde(),
        spec.ltilde_bo(),
    );
    (1.0 + (spec.alpha().ln() + l).exp(), c)
}

/// `ln` of the wavenumber factor multiplying `α` in `η`, plus the branch.
pub(crate) fn log_eta_parts(mo: u32, mb: u32, lo: f64, lbo: f64) -> (f64, EtaCase) {
    let (mo_f, mb_f) = (mo as f64, mb as f64);
    let (lo2, lbo2) = (lo * lo, lbo * lbo);
    let cond_i = lo2 * mo_f > lbo2 * mb_f;
    let cond_ii = mo < mb;
    let cond_iii = lbo2 * mb_f - lo2 * mo_f > 4.0 * lbo2 * lo2 * (mo_f - mb_f);
    if mo > 0 && cond_i && cond_ii && cond_iii {
        let l = mb_f * (lo2 / mb_f).ln()
            + mo_f * (mo_f / lbo2).ln()
            + (mb_f - mo_f) * ((mb_f - mo_f) / (lo2 - lbo2)).ln();
        return (l, EtaCase::Interior);
    }
    let end = if mo == 0 { 0.0 } else { mo_f * (4.0 * lo2).ln_1p() } - mb_f * (4.0 * lbo2).ln_1p();
    if end > 0.0 {
        (end, EtaCase::Endpoint)
    } else {
        (0.0, EtaCase::Unit)
    }
}

/// Whether a predicted minimum honours the assumptions it was derived under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimumStatus {
    Ok,
    /// `L̃_o√(2M_o−1) ≤ ½`: outside the range where the `M_o ≥ M_b` relation was derived.
    LowerBoundViolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimumPrediction {
    /// Predicted optimal `L̃_o = L_o/h_o`.
    pub ltilde_o: f64,
    pub status: MinimumStatus,
}

/// Observation-error length that minimises `η`, in observation-grid units.
///
/// `M_o ≥ M_b`: `L̃_o = ½√((1+4L̃_{b/o}²)^{M_b/M_o} − 1)`.
/// `M_o < M_b`: equal Stein lengths, `L_o√(2M_o−1) = L_b√(2M_b−1)`.
pub fn predicted_min_lo(mo: u32, mb: u32, ltilde_bo: f64) -> Result<MinimumPrediction> {
    crate::matern::check_order(mo)?;
    crate::matern::check_order(mb)?;
    if !(ltilde_bo > 0.0) {
        return Err(Error::param("Ltilde_bo", "must be positive"));
    }
    let (mo_f, mb_f) = (mo as f64, mb as f64);
    if mo >= mb {
        let p = (mb_f / mo_f) * (4.0 * ltilde_bo * ltilde_bo).ln_1p();
        let lo = 0.5 * p.exp_m1().sqrt();
        let status = if lo * (2.0 * mo_f - 1.0).sqrt() > 0.5 {
            MinimumStatus::Ok
        } else {
            MinimumStatus::LowerBoundViolated
        };
        Ok(MinimumPrediction { ltilde_o: lo, status })
    } else {
        let lo = ltilde_bo * ((2.0 * mb_f - 1.0) / (2.0 * mo_f - 1.0)).sqrt();
        Ok(MinimumPrediction { ltilde_o: lo, status: MinimumStatus::Ok })
    }
}

/// `2(1 + 4L̃_min²)`: the largest `M_b` for which the `M_o < M_b` bound stays in its interior
/// branch for every `L̃ ≥ L̃_min`.
pub fn corollary3_mb_limit(ltilde_min: f64) -> f64 {
    2.0 * (1.0 + 4.0 * ltilde_min * ltilde_min)
}

/// One point of a bounds sweep over the observation length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub ratio_lo_lb: f64,
    pub l_o_km: f64,
    pub kappa_s: f64,
    pub kappa_so: f64,
    pub bound_naive: f64,
    pub bound_infnorm: Option<f64>,
    pub bound_eta: f64,
    pub eta_case: EtaCase,
}

/// Sweep `L_o` over `ratios · L_b` (ratios of `L̃_o/L̃_b` in grid units) keeping everything
/// else in `base` fixed.
pub fn bounds_sweep(base: &HessianSpec, ratios: &[f64], with_infnorm: bool) -> Result<Vec<BoundsRow>> {
    use rayon::prelude::*;
    if base.o.order == 0 {
        return Err(Error::param("M_o", "a bounds sweep needs a correlated R (M_o >= 1)"));
    }
    if with_infnorm {
        guard(base.n())?;
    }
    ratios
        .par_iter()
        .map(|&r| {
            // L̃_o / L̃_b = r with L̃ measured on each factor's own grid.
            let l_o = r * base.b.ltilde() * base.o.spacing_km;
            let o = CorrelationSpec::new(base.o.sigma2, base.o.order, l_o, base.o.spacing_km, base.o.size)?;
            let s = HessianSpec { o, ..*base };
            let (eta, case) = bound_eta(&s);
            Ok(BoundsRow {
                ratio_lo_lb: r,
                l_o_km: l_o,
                kappa_s: log_kappa_s(&s).exp(),
                kappa_so: log_kappa_so(&s).exp(),
                bound_naive: bound_naive(&s),
                bound_infnorm: if with_infnorm { Some(bound_infnorm(&s)?) } else { None },
                bound_eta: eta,
                eta_case: case,
            })
        })
        .collect()
}
