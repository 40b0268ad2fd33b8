//! Spectrum and conditioning of the B-preconditioned Hessian `S = I + UᵀHᵀR⁻¹HU`.
//!
//! With circulant `B` on the fine grid, circulant `R` on the coarse grid and `H` selecting
//! every `ζ`-th point, all of `S`'s eigenvalues are available in closed form. Everything is
//! evaluated in log-space because condition numbers here span more than ten decades.

mod bounds;
mod chimap;

use serde::{Deserialize, Serialize};

use crate::covariance::{laplacian_log_eig, CorrelationSpec};
use crate::error::{Error, Result};

pub use bounds::{
    bound_eta, bound_infnorm, bound_naive, bounds_sweep, corollary3_mb_limit, predicted_min_lo,
    BoundsRow, EtaCase, MinimumPrediction, MinimumStatus,
};
pub use chimap::{chi_map, log_space, ChiMap, ChiMapRequest, RowMinimum};

/// Uniform periodic model grid with a uniform observation network on every `ζ`-th point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub domain_km: f64,
    /// Number of model grid points `n`.
    pub n: usize,
    /// Selection stride `ζ`; there are `m = n/ζ` observations.
    pub zeta: usize,
}

impl Geometry {
    pub fn new(domain_km: f64, n: usize, zeta: usize) -> Result<Self> {
        if !(domain_km > 0.0 && domain_km.is_finite()) {
            return Err(Error::param("domain_km", "must be positive"));
        }
        if zeta == 0 || n % zeta != 0 {
            return Err(Error::Divisibility { n, zeta });
        }
        if n / zeta < 4 {
            return Err(Error::param("n", "observation grid needs at least 4 points"));
        }
        Ok(Self { domain_km, n, zeta })
    }

    /// The paper's configuration: 2000 km, 500 points, every second point observed.
    pub fn paper() -> Self {
        Self { domain_km: 2000.0, n: 500, zeta: 2 }
    }

    pub fn m(&self) -> usize {
        self.n / self.zeta
    }

    pub fn h_b(&self) -> f64 {
        self.domain_km / self.n as f64
    }

    pub fn h_o(&self) -> f64 {
        self.h_b() * self.zeta as f64
    }
}

/// `B` on the model grid, `R` on the observation grid, and the selection stride.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianSpec {
    pub b: CorrelationSpec,
    pub o: CorrelationSpec,
    pub zeta: usize,
}

impl HessianSpec {
    pub fn new(b: CorrelationSpec, o: CorrelationSpec, zeta: usize) -> Result<Self> {
        if zeta == 0 || b.size != zeta * o.size {
            return Err(Error::Divisibility { n: b.size, zeta });
        }
        let ho = b.spacing_km * zeta as f64;
        if ((o.spacing_km - ho) / ho).abs() > 1e-12 {
            return Err(Error::param(
                "h_o",
                format!("observation spacing {} km must equal zeta * h_b = {ho} km", o.spacing_km),
            ));
        }
        Ok(Self { b, o, zeta })
    }

    /// Build both factors on a [`Geometry`] from Daley lengths (order 0 means diagonal).
    pub fn from_daley(
        geom: &Geometry,
        (sigma2_b, m_b, d_b): (f64, u32, f64),
        (sigma2_o, m_o, d_o): (f64, u32, f64),
    ) -> Result<Self> {
        use crate::matern::LengthKind::Daley;
        let b = CorrelationSpec::with_length(sigma2_b, m_b, d_b, Daley, geom.h_b(), geom.n)?;
        let o = if m_o == 0 {
            CorrelationSpec::diagonal(sigma2_o, geom.h_o(), geom.m())?
        } else {
            CorrelationSpec::with_length(sigma2_o, m_o, d_o, Daley, geom.h_o(), geom.m())?
        };
        Self::new(b, o, geom.zeta)
    }

    pub fn n(&self) -> usize {
        self.b.size
    }

    pub fn m(&self) -> usize {
        self.o.size
    }

    /// `α = σ_b²ν_bL_b / (σ_o²ν_oL_o)`; with `R` diagonal this is `σ_b²ν_bL_b/(σ_o²h_o)`.
    pub fn alpha(&self) -> f64 {
        self.b.scale() / (self.zeta as f64 * self.o.scale())
    }

    /// `L̃_{b/o} = L_b / h_o`.
    pub fn ltilde_bo(&self) -> f64 {
        self.b.length_km / self.o.spacing_km
    }

    /// The same problem with `R` replaced by `σ_o²I`.
    pub fn uncorrelated(&self) -> Self {
        let o = CorrelationSpec { order: 0, length_km: 0.0, ..self.o };
        Self { o, ..*self }
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + xs.map(|x| (x - mx).exp()).sum::<f64>().ln()
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln λ_i(HBHᵀ) = ln[(1/ζ) Σ_r λ_{i+rm}(B)]`.
pub fn log_eigenvalues_hbht(b: &CorrelationSpec, zeta: usize) -> Result<Vec<f64>> {
    if zeta == 0 || b.size % zeta != 0 {
        return Err(Error::Divisibility { n: b.size, zeta });
    }
    let m = b.size / zeta;
    let lb = b.log_spectrum();
    let ln_z = (zeta as f64).ln();
    Ok((0..m)
        .map(|i| log_sum_exp((0..zeta).map(|r| lb[i + r * m])) - ln_z)
        .collect())
}

/// Eigenvalues of `HBHᵀ`: averages of `ζ` aliased eigenvalues of `B`.
pub fn eigenvalues_hbht(b: &CorrelationSpec, zeta: usize) -> Result<Vec<f64>> {
    Ok(log_eigenvalues_hbht(b, zeta)?.into_iter().map(f64::exp).collect())
}

/// `ln(λ_i(S) − 1)` for the `m` non-trivial eigenvalues, in Fourier order.
pub fn log_excess_s(spec: &HessianSpec) -> Vec<f64> {
    let hbh = log_eigenvalues_hbht(&spec.b, spec.zeta).expect("validated spec");
    let lr = spec.o.log_spectrum();
    hbh.iter().zip(&lr).map(|(a, b)| a - b).collect()
}

/// Eigenvalues of `S`: the `m` closed-form values in Fourier order, then `n − m` ones.
pub fn eigenvalues_s(spec: &HessianSpec) -> Vec<f64> {
    let mut ev: Vec<f64> = log_excess_s(spec).into_iter().map(|x| softplus(x).exp()).collect();
    ev.resize(spec.n(), 1.0);
    ev
}

/// Eigenvalues of `S_o = I_m + R⁻¹B_o`, where `B_o` is `B` rebuilt on the observation grid.
pub fn eigenvalues_so(spec: &HessianSpec) -> Vec<f64> {
    log_excess_so(spec).into_iter().map(|x| softplus(x).exp()).collect()
}

pub(crate) fn log_excess_so(spec: &HessianSpec) -> Vec<f64> {
    let m = spec.m();
    let ln_alpha = spec.alpha().ln();
    let (lo2, lbo2) = (spec.o.ltilde().powi(2), spec.ltilde_bo().powi(2));
    let (mo, mb) = (spec.o.order as f64, spec.b.order as f64);
    (0..m)
        .map(|i| {
            let num = if spec.o.order == 0 { 0.0 } else { mo * laplacian_log_eig(lo2, i, m) };
            ln_alpha + num - mb * laplacian_log_eig(lbo2, i, m)
        })
        .collect()
}

/// `ln κ(S)`. Uses the exact `λ_min = 1` when `m < n`.
pub fn log_kappa_s(spec: &HessianSpec) -> f64 {
    let lx = log_excess_s(spec);
    let hi = softplus(lx.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let lo = if spec.m() < spec.n() {
        0.0
    } else {
        softplus(lx.iter().copied().fold(f64::INFINITY, f64::min))
    };
    hi - lo
}

pub fn kappa_s(spec: &HessianSpec) -> f64 {
    log_kappa_s(spec).exp()
}

/// `ln κ(S_o)`.
pub fn log_kappa_so(spec: &HessianSpec) -> f64 {
    let lx = log_excess_so(spec);
    let hi = lx.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = lx.iter().copied().fold(f64::INFINITY, f64::min);
    softplus(hi) - softplus(lo)
}

/// `ln κ(S_u)`, the condition number with `R = σ_o²I`.
///
/// For `m < n` this is the closed form `1 + α_u Σ_r [1 + 4L̃_b² sin²(πr/ζ)]^{−M_b}` with
/// `α_u = σ_b²ν_bL_b/(σ_o²h_o)`; otherwise the generic extreme-eigenvalue ratio.
pub fn log_kappa_su(spec: &HessianSpec) -> f64 {
    let u = spec.uncorrelated();
    if spec.m() == spec.n() {
        return log_kappa_s(&u);
    }
    let lb2 = spec.b.ltilde().powi(2);
    let mb = spec.b.order as f64;
    let n = spec.n();
    let m = spec.m();
    let ln_alpha_u = u.alpha().ln();
    let s = log_sum_exp((0..spec.zeta).map(|r| -mb * laplacian_log_eig(lb2, r * m, n)));
    softplus(ln_alpha_u + s)
}

pub fn kappa_su(spec: &HessianSpec) -> f64 {
    log_kappa_su(spec).exp()
}

/// `ln χ = ln κ(S) − ln κ(S_u)`.
pub fn log_chi(spec: &HessianSpec) -> f64 {
    log_kappa_s(spec) - log_kappa_su(spec)
}

/// `χ = κ(S)/κ(S_u)`: below 1 means correlated observation errors improve conditioning.
pub fn chi(spec: &HessianSpec) -> f64 {
    log_chi(spec).exp()
}

/// CG error ceiling `2((√κ − 1)/(√κ + 1))^ℓ`.
pub fn cg_error_bound(kappa: f64, ell: usize) -> f64 {
    let s = kappa.sqrt();
    2.0 * ((s - 1.0) / (s + 1.0)).powi(ell as i32)
}

/// All spectral diagnostics for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub m: usize,
    pub zeta: usize,
    pub alpha: f64,
    pub eigenvalues_s: Vec<f64>,
    pub eigenvalues_so: Vec<f64>,
    pub kappa_s: f64,
    pub kappa_su: f64,
    pub kappa_so: f64,
    pub chi: f64,
    pub log10_chi: f64,
    pub bound_naive: f64,
    pub bound_infnorm: Option<f64>,
    pub bound_eta: f64,
    pub eta_case: EtaCase,
    /// Whether the `n − m` trailing unit eigenvalues are guaranteed (false when `m = n`).
    pub ones_tail: bool,
    pub predicted_min_lo_km: Option<f64>,
    pub predicted_min_status: Option<MinimumStatus>,
    pub discretization_warning: bool,
}

/// Build a [`SpectrumReport`]; the dense Theorem-1 bound is included only when `n` allows.
pub fn spectrum_report(spec: &HessianSpec) -> SpectrumReport {
    let (eta, eta_case) = bound_eta(spec);
    let infnorm = bound_infnorm(spec).ok();
    let pred = (spec.o.order > 0)
        .then(|| predicted_min_lo(spec.o.order, spec.b.order, spec.ltilde_bo()).ok())
        .flatten();
    let log_chi = log_chi(spec);
    SpectrumReport {
        n: spec.n(),
        m: spec.m(),
        zeta: spec.zeta,
        alpha: spec.alpha(),
        eigenvalues_s: eigenvalues_s(spec),
        eigenvalues_so: eigenvalues_so(spec),
        kappa_s: kappa_s(spec),
        kappa_su: kappa_su(spec),
        kappa_so: log_kappa_so(spec).exp(),
        chi: log_chi.exp(),
        log10_chi: log_chi / std::f64::consts::LN_10,
        bound_naive: bound_naive(spec),
        bound_infnorm: infnorm,
        bound_eta: eta,
        eta_case,
        ones_tail: spec.m() < spec.n(),
        predicted_min_lo_km: pred.map(|p| p.ltilde_o * spec.o.spacing_km),
        predicted_min_status: pred.map(|p| p.status),
        discretization_warning: spec.b.discretization_warning() || spec.o.discretization_warning(),
    }
}
