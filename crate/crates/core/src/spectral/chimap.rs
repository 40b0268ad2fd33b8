//! Maps of `χ = κ(S)/κ(S_u)` over observation-error order and Daley length.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bounds::predicted_min_lo, log_kappa_s, log_kappa_su, Geometry, HessianSpec, MinimumStatus};
use crate::error::{Error, Result};

/// Inputs to [`chi_map`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiMapRequest {
    pub geometry: Geometry,
    pub sigma2_b: f64,
    pub m_b: u32,
    pub d_b_km: f64,
    pub sigma2_o: f64,
    pub m_o_values: Vec<u32>,
    pub d_o_values_km: Vec<f64>,
}

impl ChiMapRequest {
    /// Default axes: `M_o ∈ {2,4,6,8,10}` and 60 log-spaced `D_o ∈ [10, 300]` km.
    pub fn with_default_axes(geometry: Geometry, m_b: u32, d_b_km: f64) -> Self {
        Self {
            geometry,
            sigma2_b: 1.0,
            m_b,
            d_b_km,
            sigma2_o: 1.0,
            m_o_values: vec![2, 4, 6, 8, 10],
            d_o_values_km: log_space(10.0, 300.0, 60),
        }
    }

    fn spec(&self, m_o: u32, d_o: f64) -> Result<HessianSpec> {
        HessianSpec::from_daley(
            &self.geometry,
            (self.sigma2_b, self.m_b, self.d_b_km),
            (self.sigma2_o, m_o, d_o),
        )
    }
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Exact and predicted location of the smallest `κ(S)` along one `M_o` row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowMinimum {
    pub m_o: u32,
    pub exact_d_o_km: f64,
    pub exact_kappa: f64,
    pub predicted_d_o_km: f64,
    pub predicted_kappa: f64,
    /// `κ(predicted)/κ(exact) − 1`.
    pub relative_excess: f64,
    pub predicted_status: MinimumStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiMap {
    pub m_b: u32,
    pub d_b_km: f64,
    pub m_o_values: Vec<u32>,
    pub d_o_values_km: Vec<f64>,
    pub kappa_su: f64,
    /// `chi[row][col]` for `m_o_values[row]`, `d_o_values_km[col]`.
    pub chi: Vec<Vec<f64>>,
    pub log10_chi: Vec<Vec<f64>>,
    pub rows: Vec<RowMinimum>,
}

/// Evaluate `χ` on the grid and locate the minimum of `κ(S)` along each row.
///
/// Every cell is computed independently, so the table does not depend on the number of
/// worker threads.
pub fn chi_map(req: &ChiMapRequest) -> Result<ChiMap> {
    if req.m_o_values.is_empty() || req.d_o_values_km.is_empty() {
        return Err(Error::param("grid", "needs at least one M_o and one D_o value"));
    }
    if let Some(&m) = req.m_o_values.iter().find(|&&m| m < 2) {
        return Err(Error::UndefinedDaley(m));
    }
    if let Some(&d) = req.d_o_values_km.iter().find(|&&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::param("D_o_km", format!("grid values must be positive, got {d}")));
    }
    let base = req.spec(req.m_o_values[0], req.d_o_values_km[0])?;
    let ln_ksu = log_kappa_su(&base);
    let ncol = req.d_o_values_km.len();
    let cells: Vec<(usize, usize)> = (0..req.m_o_values.len())
        .flat_map(|r| (0..ncol).map(move |c| (r, c)))
        .collect();
    let log_chi: Vec<f64> = cells
        .par_iter()
        .map(|&(r, c)| {
            let s = req.spec(req.m_o_values[r], req.d_o_values_km[c])?;
            Ok(log_kappa_s(&s) - ln_ksu)
        })
        .collect::<Result<_>>()?;
    let rows = req
        .m_o_values
        .par_iter()
        .map(|&m_o| row_minimum(req, m_o))
        .collect::<Result<Vec<_>>>()?;

    let ln10 = std::f64::consts::LN_10;
    Ok(ChiMap {
        m_b: req.m_b,
        d_b_km: req.d_b_km,
        m_o_values: req.m_o_values.clone(),
        d_o_values_km: req.d_o_values_km.clone(),
        kappa_su: ln_ksu.exp(),
        chi: log_chi.chunks(ncol).map(|r| r.iter().map(|x| x.exp()).collect()).collect(),
        log10_chi: log_chi.chunks(ncol).map(|r| r.iter().map(|x| x / ln10).collect()).collect(),
        rows,
    })
}

const SCAN_POINTS: usize = 400;
const GOLDEN_TOL: f64 = 1e-10;

fn row_minimum(req: &ChiMapRequest, m_o: u32) -> Result<RowMinimum> {
    let b = req.spec(m_o, req.d_o_values_km[0])?.b;
    let h_o = req.geometry.h_o();
    let pred = predicted_min_lo(m_o, req.m_b, b.length_km / h_o)?;
    let daley_factor = f64::from(2 * m_o - 3).sqrt();
    let pred_d = pred.ltilde_o * h_o * daley_factor;

    // Search the axis range, widened to keep the prediction well inside it.
    let lo = req.d_o_values_km.iter().copied().fold(f64::INFINITY, f64::min).min(pred_d / 2.0);
    let hi = req.d_o_values_km.iter().copied().fold(0.0, f64::max).max(pred_d * 2.0);
    let f = |ln_d: f64| -> Result<f64> { Ok(log_kappa_s(&req.spec(m_o, ln_d.exp())?)) };
    let (ln_d, ln_k) = minimise(f, lo.ln(), hi.ln())?;
    let ln_kp = f(pred_d.ln())?;
    Ok(RowMinimum {
        m_o,
        exact_d_o_km: ln_d.exp(),
        exact_kappa: ln_k.exp(),
        predicted_d_o_km: pred_d,
        predicted_kappa: ln_kp.exp(),
        relative_excess: (ln_kp - ln_k).exp_m1(),
        predicted_status: pred.status,
    })
}

/// Coarse scan then golden-section refinement; ties go to the smaller abscissa.
pub(crate) fn minimise(f: impl Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<(f64, f64)> {
    let xs: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| a + (b - a) * i as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    let ys = xs.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, y) in ys.iter().enumerate() {
        if *y < ys[best] {
            best = i;
        }
    }
    let mut lo = xs[best.saturating_sub(1)];
    let mut hi = xs[(best + 1).min(SCAN_POINTS - 1)];
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while hi - lo > GOLDEN_TOL * (1.0 + lo.abs()) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        }
    }
    let (xm, fm) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if fm <= ys[best] {
        Ok((xm, fm))
    } else {
        Ok((xs[best], ys[best]))
    }
}
