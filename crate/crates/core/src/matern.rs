//! Autoregressive (Matérn-family) correlation functions on the line and on the circle,
//! together with the length-scale algebra `L ↔ D ↔ ρ`.
//!
//! An AR function of order `M` is a degree-`M−1` polynomial in `r/L` times `exp(−r/L)`;
//! `M = 2` is the familiar SOAR function and `M → ∞` approaches a Gaussian.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest AR order supported. Beyond this the functions are practically Gaussian.
pub const MAX_ORDER: u32 = 10;

fn factorial(k: u32) -> u128 {
    (1..=k as u128).product()
}

pub(crate) fn check_order(m: u32) -> Result<()> {
    if (1..=MAX_ORDER).contains(&m) {
        Ok(())
    } else {
        Err(Error::InvalidOrder(m))
    }
}

/// Polynomial coefficients `β_0..β_{M−1}` of the order-`M` AR function.
pub fn beta_coefficients(m: u32) -> Result<Vec<f64>> {
    check_order(m)?;
    let denom_common = factorial(2 * m - 2);
    Ok((0..m)
        .map(|j| {
            let num = (1u128 << j) * factorial(m - 1) * factorial(2 * m - j - 2);
            let den = factorial(j) * factorial(m - j - 1) * denom_common;
            // Reduce before converting so the float division is well-conditioned.
            let g = gcd(num, den);
            (num / g) as f64 / (den / g) as f64
        })
        .collect())
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Normalisation constant `ν = 2^{2M−1}[(M−1)!]²/(2M−2)!` ensuring `c(0) = 1`.
pub fn nu(m: u32) -> Result<f64> {
    check_order(m)?;
    Ok(nu_exact(m))
}

pub(crate) fn nu_exact(m: u32) -> f64 {
    let num = (1u128 << (2 * m - 1)) * factorial(m - 1) * factorial(m - 1);
    let den = factorial(2 * m - 2);
    let g = gcd(num, den);
    (num / g) as f64 / (den / g) as f64
}

/// Gaussian correlation `exp(−r²/2D²)`, the `M → ∞` limit of the AR family.
pub fn gaussian_limit(r: f64, daley: f64) -> f64 {
    (-r * r / (2.0 * daley * daley)).exp()
}

/// Which length-scale parameterisation a value is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LengthKind {
    /// The diffusion length `L`.
    L,
    /// Daley's curvature length `D = L√(2M−3)`; needs `M ≥ 2`.
    Daley,
    /// The geostatistical (Stein) length `ρ = L√(2M−1)`.
    Stein,
}

fn length_factor(m: u32, kind: LengthKind) -> Result<f64> {
    check_order(m)?;
    match kind {
        LengthKind::L => Ok(1.0),
        LengthKind::Daley if m < 2 => Err(Error::UndefinedDaley(m)),
        LengthKind::Daley => Ok(f64::from(2 * m - 3).sqrt()),
        LengthKind::Stein => Ok(f64::from(2 * m - 1).sqrt()),
    }
}

/// Convert a length-scale between parameterisations at AR order `m`.
pub fn length_convert(value: f64, m: u32, from: LengthKind, to: LengthKind) -> Result<f64> {
    let f = length_factor(m, from)?;
    let t = length_factor(m, to)?;
    if from == to {
        return Ok(value);
    }
    Ok(value / f * t)
}

/// One row of the matched length-scale table, all lengths in km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthScaleRow {
    pub order: u32,
    /// `L`, `ρ`, `D` with `(1 + 4L̃²)^M` held fixed.
    pub growth_l_km: f64,
    pub growth_stein_km: f64,
    pub growth_daley_km: f64,
    /// `L`, `ρ`, `D` with the Stein length `L√(2M−1)` held fixed.
    pub stein_l_km: f64,
    pub stein_stein_km: f64,
    pub stein_daley_km: f64,
}

/// Length-scales that keep either `(1 + 4L̃²)^M = growth` or `ρ = stein_km` fixed across
/// orders, with `L̃ = L/h`.
///
/// These are the two matching conditions under which the predicted conditioning minima stay
/// put when the observation-error order changes.
pub fn length_scale_table(orders: &[u32], growth: f64, stein_km: f64, h_km: f64) -> Result<Vec<LengthScaleRow>> {
    if !(growth > 1.0 && stein_km > 0.0 && h_km > 0.0) {
        return Err(Error::param("table", "needs growth > 1 and positive lengths"));
    }
    orders
        .iter()
        .map(|&m| {
            let lg = 0.5 * h_km * ((growth.ln() / m as f64).exp_m1()).sqrt();
            let ls = length_convert(stein_km, m, LengthKind::Stein, LengthKind::L)?;
            Ok(LengthScaleRow {
                order: m,
                growth_l_km: lg,
                growth_stein_km: length_convert(lg, m, LengthKind::L, LengthKind::Stein)?,
                growth_daley_km: length_convert(lg, m, LengthKind::L, LengthKind::Daley)?,
                stein_l_km: ls,
                stein_stein_km: stein_km,
                stein_daley_km: length_convert(ls, m, LengthKind::L, LengthKind::Daley)?,
            })
        })
        .collect()
}

/// An order-`M` AR correlation function on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArKernel {
    order: u32,
    length: f64,
    #[serde(skip)]
    beta: Vec<f64>,
}

impl ArKernel {
    pub fn new(order: u32, length: f64) -> Result<Self> {
        check_order(order)?;
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::param("L", format!("must be positive and finite, got {length}")));
        }
        Ok(Self {
            order,
            length,
            beta: beta_coefficients(order)?,
        })
    }

    /// Build from a length given in any parameterisation.
    pub fn with_length(order: u32, value: f64, kind: LengthKind) -> Result<Self> {
        Self::new(order, length_convert(value, order, kind, LengthKind::L)?)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn nu(&self) -> f64 {
        nu_exact(self.order)
    }

    /// `γ² = νL`, the continuous-domain normalisation.
    pub fn gamma2(&self) -> f64 {
        self.nu() * self.length
    }

    pub fn daley(&self) -> Result<f64> {
        length_convert(self.length, self.order, LengthKind::L, LengthKind::Daley)
    }

    pub fn stein(&self) -> f64 {
        self.length * f64::from(2 * self.order - 1).sqrt()
    }

    /// `c(r) = Σ β_j (r/L)^j e^{−r/L}`.
    pub fn correlation(&self, r: f64) -> Result<f64> {
        if r < 0.0 || r.is_nan() {
            return Err(Error::NegativeDistance(r));
        }
        let x = r / self.length;
        // Horner on the polynomial part.
        let poly = self.beta.iter().rev().fold(0.0, |acc, &b| acc * x + b);
        Ok(poly * (-x).exp())
    }

    /// `ĉ(ẑ) = γ² / (1 + L²ẑ²)^M`.
    pub fn power_spectrum(&self, zhat: f64) -> f64 {
        let l2z2 = (self.length * zhat).powi(2);
        self.gamma2() * (-(self.order as f64) * l2z2.ln_1p()).exp()
    }
}

// Cutoff rule for the circle series: stop once the next block of terms is negligible.
const TAIL_BLOCK: usize = 100;
const TAIL_RTOL: f64 = 1e-10;
const MAX_TRUNCATION: usize = 50_000_000;

/// An order-`M` AR correlation on a circle of radius `a`, expressed as a Fourier series in the
/// polar angle with coefficients `c_m = (1/π)(1 + L²m²/a²)^{−M}`.
///
/// The series is the two-sided one (`m ∈ ℤ`), i.e. the `m = 0` coefficient carries half the
/// weight of the others in the cosine form. That is the expansion of the periodised flat-line
/// kernel, and it is what makes the circle function agree with [`ArKernel`] when `L ≪ a`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleKernel {
    order: u32,
    length: f64,
    radius: f64,
    truncation: usize,
    // Σ_{m∈ℤ} c_m over the retained terms.
    partial_sum: f64,
}

impl CircleKernel {
    /// Build with the automatic truncation rule.
    pub fn new(order: u32, length: f64, radius: f64) -> Result<Self> {
        let (eps, m) = Self::validate(order, length, radius)?;
        let mut sum = coeff(eps, m, 0);
        let mut n = 0usize;
        loop {
            let block: f64 = (n + 1..=n + TAIL_BLOCK).map(|k| 2.0 * coeff(eps, m, k)).sum();
            if block < TAIL_RTOL * sum {
                break;
            }
            sum += block;
            n += TAIL_BLOCK;
            if n > MAX_TRUNCATION {
                return Err(Error::InsufficientTruncation {
                    truncation: n,
                    tail_ratio: block / sum,
                });
            }
        }
        // Trim the last block down to the exact smallest passing cutoff.
        let mut trunc = n;
        let mut s = sum;
        while trunc > 0 {
            let c = 2.0 * coeff(eps, m, trunc);
            let next: f64 = (trunc..trunc + TAIL_BLOCK).map(|k| 2.0 * coeff(eps, m, k)).sum();
            if next >= TAIL_RTOL * (s - c) {
                break;
            }
            s -= c;
            trunc -= 1;
        }
        Ok(Self {
            order,
            length,
            radius,
            truncation: trunc,
            partial_sum: series_sum(eps, m, trunc),
        })
    }

    /// Build with an explicit cutoff, rejected if its tail is not negligible.
    pub fn with_truncation(order: u32, length: f64, radius: f64, truncation: usize) -> Result<Self> {
        let (eps, m) = Self::validate(order, length, radius)?;
        if truncation == 0 {
            return Err(Error::param("truncation", "must be positive"));
        }
        let sum = series_sum(eps, m, truncation);
        let tail: f64 = (truncation + 1..=truncation + TAIL_BLOCK)
            .map(|k| 2.0 * coeff(eps, m, k))
            .sum();
        if tail >= TAIL_RTOL * sum {
            return Err(Error::InsufficientTruncation {
                truncation,
                tail_ratio: tail / sum,
            });
        }
        Ok(Self {
            order,
            length,
            radius,
            truncation,
            partial_sum: sum,
        })
    }

    fn validate(order: u32, length: f64, radius: f64) -> Result<(f64, i32)> {
        check_order(order)?;
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::param("L", "must be positive and finite"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param("a", "circle radius must be positive and finite"));
        }
        Ok(((length / radius).powi(2), order as i32))
    }

    fn eps(&self) -> f64 {
        (self.length / self.radius).powi(2)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Fourier coefficient `c_m`.
    pub fn coefficient(&self, m: usize) -> f64 {
        coeff(self.eps(), self.order as i32, m)
    }

    /// Normalisation `γ² = 1 / Σ_{m∈ℤ} c_m`, including the analytic tail beyond the cutoff.
    pub fn gamma2(&self) -> f64 {
        let x = self.truncation as f64 + 0.5;
        1.0 / (self.partial_sum + 2.0 * tail_moment(self.eps(), self.order, 0, x))
    }

    /// Correlation at polar angle `theta` (radians); equals 1 at `theta = 0`.
    pub fn correlation(&self, theta: f64) -> f64 {
        let (eps, m) = (self.eps(), self.order as i32);
        let s: f64 = (1..=self.truncation)
            .map(|k| 2.0 * coeff(eps, m, k) * (k as f64 * theta).cos())
            .sum();
        (coeff(eps, m, 0) + s) / self.partial_sum
    }

    /// Correlation at arc length `r` (km).
    pub fn correlation_at_distance(&self, r: f64) -> f64 {
        self.correlation(r / self.radius)
    }

    /// Daley length on the circle, `a (Σ m² c_m / Σ c_m)^{−1/2}` with the sums over `m ∈ ℤ`.
    pub fn daley(&self) -> Result<f64> {
        if self.order < 2 {
            return Err(Error::DivergentSeries(self.order));
        }
        let (eps, m) = (self.eps(), self.order as i32);
        // m²c_m decays only like m^{2−2M}: sum far enough that the asymptotic tail is accurate.
        let cutoff = self
            .truncation
            .max((1e3 / eps.sqrt()).ceil() as usize)
            .min(MAX_TRUNCATION);
        let x = cutoff as f64 + 0.5;
        let mut s0 = coeff(eps, m, 0);
        let mut s2 = 0.0;
        for k in 1..=cutoff {
            let c = 2.0 * coeff(eps, m, k);
            s0 += c;
            s2 += c * (k * k) as f64;
        }
        s0 += 2.0 * tail_moment(eps, self.order, 0, x);
        s2 += 2.0 * tail_moment(eps, self.order, 2, x);
        Ok(self.radius / (s2 / s0).sqrt())
    }
}

// Same summation order as `correlation`, so that c(0) = 1 holds bit-exactly.
fn series_sum(eps: f64, m: i32, truncation: usize) -> f64 {
    let s: f64 = (1..=truncation).map(|k| 2.0 * coeff(eps, m, k)).sum();
    coeff(eps, m, 0) + s
}

fn coeff(eps: f64, m: i32, k: usize) -> f64 {
    let k = k as f64;
    (1.0 + eps * k * k).powi(-m) / PI
}

/// `(1/π)∫_x^∞ t^p (1 + εt²)^{−M} dt`, using the first two terms of the large-`t` expansion.
fn tail_moment(eps: f64, m: u32, p: i32, x: f64) -> f64 {
    let m_f = m as f64;
    let lead = |q: f64| -> f64 {
        // ∫_x^∞ t^{q} dt for q < −1
        x.powf(q + 1.0) / -(q + 1.0)
    };
    let q0 = p as f64 - 2.0 * m_f;
    let main = lead(q0);
    let corr = if q0 - 2.0 < -1.0 { m_f / eps * lead(q0 - 2.0) } else { 0.0 };
    eps.powf(-m_f) * (main - corr) / PI
}
