//! Diffusion-modelled covariance operators on a uniform periodic grid.
//!
//! A covariance with AR order `M` and length `L` on a grid of spacing `h` is
//! `C = σ² ν L̃ T^{−M}` with `L̃ = L/h` and `T = I − L²Δ_h` the circulant shifted Laplacian.
//! Every operator here is circulant, so it is fully described by its first row and its
//! real spectrum in Fourier order.

mod cyclic;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matern::{self, LengthKind};

use cyclic::CyclicTridiagonal;

/// Largest size for which explicit dense matrices are built.
pub const DENSE_LIMIT: usize = 512;

/// One covariance factor: variance, AR order, length-scale and grid.
///
/// Order 0 denotes the uncorrelated limit `σ²I` (no diffusion).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    pub sigma2: f64,
    pub order: u32,
    /// Diffusion length `L` in km (ignored when `order == 0`).
    pub length_km: f64,
    pub spacing_km: f64,
    pub size: usize,
}

impl CorrelationSpec {
    pub fn new(sigma2: f64, order: u32, length_km: f64, spacing_km: f64, size: usize) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::param("sigma2", format!("must be positive, got {sigma2}")));
        }
        if order > matern::MAX_ORDER {
            return Err(Error::InvalidOrder(order));
        }
        if order > 0 && !(length_km > 0.0 && length_km.is_finite()) {
            return Err(Error::param("L", format!("must be positive, got {length_km}")));
        }
        if !(spacing_km > 0.0 && spacing_km.is_finite()) {
            return Err(Error::param("h", format!("must be positive, got {spacing_km}")));
        }
        if size < 4 {
            return Err(Error::param("size", format!("must be at least 4, got {size}")));
        }
        Ok(Self {
            sigma2,
            order,
            length_km: if order == 0 { 0.0 } else { length_km },
            spacing_km,
            size,
        })
    }

    /// Build from a length given as `L`, `D` or `ρ`.
    pub fn with_length(
        sigma2: f64,
        order: u32,
        value_km: f64,
        kind: LengthKind,
        spacing_km: f64,
        size: usize,
    ) -> Result<Self> {
        let l = matern::length_convert(value_km, order, kind, LengthKind::L)?;
        Self::new(sigma2, order, l, spacing_km, size)
    }

    /// The uncorrelated covariance `σ²I`.
    pub fn diagonal(sigma2: f64, spacing_km: f64, size: usize) -> Result<Self> {
        Self::new(sigma2, 0, 0.0, spacing_km, size)
    }

    pub fn is_diagonal(&self) -> bool {
        self.order == 0
    }

    /// Dimensionless length `L̃ = L/h`.
    pub fn ltilde(&self) -> f64 {
        self.length_km / self.spacing_km
    }

    /// `ν L̃`, or 1 in the uncorrelated limit.
    pub fn nu_ltilde(&self) -> f64 {
        if self.order == 0 {
            1.0
        } else {
            matern::nu_exact(self.order) * self.ltilde()
        }
    }

    /// Scalar factor `σ² ν L̃` in front of `T^{−M}`.
    pub fn scale(&self) -> f64 {
        self.sigma2 * self.nu_ltilde()
    }

    /// True when `L/h < 1`, where the discretisation is too coarse to resolve the correlation.
    pub fn discretization_warning(&self) -> bool {
        self.order > 0 && self.ltilde() < 1.0
    }

    /// Daley length in km (requires order ≥ 2).
    pub fn daley_km(&self) -> Result<f64> {
        matern::length_convert(self.length_km, self.order, LengthKind::L, LengthKind::Daley)
    }

    /// `ln λ_i` for all `i` in Fourier order.
    pub fn log_spectrum(&self) -> Vec<f64> {
        let ln_scale = self.scale().ln();
        let n = self.size;
        let lt2 = self.ltilde().powi(2);
        (0..n)
            .map(|i| {
                if self.order == 0 {
                    return ln_scale;
                }
                ln_scale - self.order as f64 * laplacian_log_eig(lt2, i, n)
            })
            .collect()
    }

    /// Eigenvalues `λ_i = σ²νL̃[1 + 4L̃² sin²(πi/n)]^{−M}` in Fourier order.
    pub fn spectrum(&self) -> Vec<f64> {
        self.log_spectrum().into_iter().map(f64::exp).collect()
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.size {
            return Err(Error::DimensionMismatch {
                expected: self.size,
                got: v.len(),
            });
        }
        Ok(())
    }
}

/// `ln(1 + 4L̃² sin²(πi/n))`.
pub(crate) fn laplacian_log_eig(lt2: f64, i: usize, n: usize) -> f64 {
    (4.0 * lt2 * sin2_pi_frac(i, n)).ln_1p()
}

/// `sin²(πi/n)`, reduced to the first half-period for accuracy.
pub(crate) fn sin2_pi_frac(i: usize, n: usize) -> f64 {
    let i = i % n;
    let k = i.min(n - i);
    let s = (std::f64::consts::PI * k as f64 / n as f64).sin();
    s * s
}

/// A symmetric circulant matrix held as its first row and its spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirculantOperator {
    stencil: Vec<f64>,
    spectrum: Vec<f64>,
}

impl CirculantOperator {
    /// Build from a real, reflection-symmetric spectrum; the stencil is its inverse DFT.
    pub fn from_spectrum(spectrum: Vec<f64>) -> Self {
        let n = spectrum.len();
        let cos = cos_table(n);
        let stencil = (0..n)
            .map(|k| {
                (0..n).map(|i| spectrum[i] * cos[(i * k) % n]).sum::<f64>() / n as f64
            })
            .collect();
        Self { stencil, spectrum }
    }

    /// Build from a reflection-symmetric first row; the spectrum is its DFT.
    pub fn from_stencil(stencil: Vec<f64>) -> Self {
        let n = stencil.len();
        let cos = cos_table(n);
        let spectrum = (0..n)
            .map(|i| (0..n).map(|k| stencil[k] * cos[(i * k) % n]).sum())
            .collect();
        Self { stencil, spectrum }
    }

    pub fn size(&self) -> usize {
        self.stencil.len()
    }

    pub fn stencil(&self) -> &[f64] {
        &self.stencil
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Circulant matrix-vector product, skipping structurally zero stencil entries.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = self.size();
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
        let mut out = vec![0.0; n];
        for (k, &s) in self.stencil.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            // out_j += C[j, j+k] v_{j+k}, and C[j, j+k] = stencil[k]; split at the wrap.
            let (head, tail) = out.split_at_mut(n - k);
            for (o, x) in head.iter_mut().zip(&v[k..]) {
                *o += s * x;
            }
            for (o, x) in tail.iter_mut().zip(&v[..k]) {
                *o += s * x;
            }
        }
        Ok(out)
    }

    /// Dense matrix, guarded by [`DENSE_LIMIT`].
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.size();
        guard(n)?;
        Ok(DMatrix::from_fn(n, n, |i, j| self.stencil[(j + n - i) % n]))
    }

    /// The symmetric circulant square root (spectrum `√λ_i`).
    pub fn sqrt(&self) -> Self {
        Self::from_spectrum(self.spectrum.iter().map(|l| l.max(0.0).sqrt()).collect())
    }
}

pub(crate) fn guard(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::SizeGuard { size: n, limit: DENSE_LIMIT });
    }
    Ok(())
}

fn cos_table(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
        .collect()
}

/// The shifted Laplacian `T = I − L̃²Δ`, stencil `[1+2L̃², −L̃², 0, …, 0, −L̃²]`.
pub fn shifted_laplacian(ltilde: f64, size: usize) -> Result<CirculantOperator> {
    if !(ltilde > 0.0 && ltilde.is_finite()) {
        return Err(Error::param("Ltilde", format!("must be positive, got {ltilde}")));
    }
    if size < 4 {
        return Err(Error::param("size", format!("must be at least 4, got {size}")));
    }
    let lt2 = ltilde * ltilde;
    let mut stencil = vec![0.0; size];
    stencil[0] = 1.0 + 2.0 * lt2;
    stencil[1] = -lt2;
    stencil[size - 1] = -lt2;
    let spectrum = (0..size).map(|i| 1.0 + 4.0 * lt2 * sin2_pi_frac(i, size)).collect();
    Ok(CirculantOperator { stencil, spectrum })
}

/// The covariance as a circulant operator (stencil = first row of the dense matrix).
pub fn covariance_spectrum(spec: &CorrelationSpec) -> CirculantOperator {
    CirculantOperator::from_spectrum(spec.spectrum())
}

/// Explicit dense covariance matrix for small sizes.
pub fn dense_covariance(spec: &CorrelationSpec) -> Result<DMatrix<f64>> {
    guard(spec.size)?;
    covariance_spectrum(spec).to_dense()
}

/// Diagonal of the discrete correlation matrix (variance factored out). Its deviation from 1
/// measures the error of the continuous normalisation `γ² = νL`.
pub fn normalization_diagnostic(spec: &CorrelationSpec) -> f64 {
    if spec.is_diagonal() {
        return 1.0;
    }
    let s = spec.log_spectrum();
    let ln_sigma2 = spec.sigma2.ln();
    s.iter().map(|l| (l - ln_sigma2).exp()).sum::<f64>() / spec.size as f64
}

/// Matrix-free application of a covariance and its inverse.
///
/// The forward product is `M` cyclic-tridiagonal solves with `T`; the inverse is `M`
/// stencil applications of `T`. Both are `O(M n)`.
#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    spec: CorrelationSpec,
    lt2: f64,
    solver: Option<CyclicTridiagonal>,
}

impl DiffusionOperator {
    pub fn new(spec: CorrelationSpec) -> Self {
        let lt2 = spec.ltilde().powi(2);
        let solver = (spec.order > 0).then(|| CyclicTridiagonal::new(1.0 + 2.0 * lt2, -lt2, spec.size));
        Self { spec, lt2, solver }
    }

    pub fn spec(&self) -> &CorrelationSpec {
        &self.spec
    }

    /// `σ²νL̃ T^{−M} v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.spec.check_len(v)?;
        let mut x = v.to_vec();
        if let Some(s) = &self.solver {
            for _ in 0..self.spec.order {
                s.solve_in_place(&mut x);
            }
        }
        let c = self.spec.scale();
        x.iter_mut().for_each(|xi| *xi *= c);
        Ok(x)
    }

    /// `(σ²νL̃)^{−1} T^M v`.
    pub fn apply_inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.spec.check_len(v)?;
        let mut x = v.to_vec();
        let mut tmp = vec![0.0; x.len()];
        for _ in 0..self.spec.order {
            apply_t(self.lt2, &x, &mut tmp);
            std::mem::swap(&mut x, &mut tmp);
        }
        let c = 1.0 / self.spec.scale();
        x.iter_mut().for_each(|xi| *xi *= c);
        Ok(x)
    }
}

fn apply_t(lt2: f64, x: &[f64], out: &mut [f64]) {
    let n = x.len();
    let d = 1.0 + 2.0 * lt2;
    for i in 0..n {
        let l = x[(i + n - 1) % n];
        let r = x[(i + 1) % n];
        out[i] = d * x[i] - lt2 * (l + r);
    }
}

/// `σ²νL̃ T^{−M} v` for a one-off application.
pub fn apply(spec: &CorrelationSpec, v: &[f64]) -> Result<Vec<f64>> {
    DiffusionOperator::new(*spec).apply(v)
}

/// `(σ²νL̃)^{−1} T^M v` for a one-off application.
pub fn apply_inverse(spec: &CorrelationSpec, v: &[f64]) -> Result<Vec<f64>> {
    DiffusionOperator::new(*spec).apply_inverse(v)
}

/// Draws correlated Gaussian samples by scaling each Fourier mode of white noise by `√λ_i`,
/// realised as a convolution with the symmetric square-root kernel.
#[derive(Debug, Clone)]
pub struct Sampler {
    root: CirculantOperator,
}

impl Sampler {
    pub fn new(spec: &CorrelationSpec) -> Self {
        Self {
            root: covariance_spectrum(spec).sqrt(),
        }
    }

    pub fn root(&self) -> &CirculantOperator {
        &self.root
    }

    /// Colour a given white-noise vector.
    pub fn colour(&self, white: &[f64]) -> Result<Vec<f64>> {
        self.root.apply(white)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let white: Vec<f64> = (0..self.root.size()).map(|_| rng.sample(StandardNormal)).collect();
        self.root.apply(&white).expect("white noise has the operator's size")
    }
}

/// One correlated sample with covariance `spec`.
pub fn sample<R: Rng + ?Sized>(spec: &CorrelationSpec, rng: &mut R) -> Vec<f64> {
    Sampler::new(spec).sample(rng)
}
