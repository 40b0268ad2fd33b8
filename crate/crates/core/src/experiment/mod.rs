//! Monte-Carlo 1D-Var experiments: synthetic truth, background and observations, ensembles
//! of CG minimisations, and the analysis-error convergence metric `σ_a^(ℓ)/σ_a^(0)`.

mod inflation;
mod presets;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{covariance_spectrum, CorrelationSpec, Sampler};
use crate::error::{Error, Result};
use crate::matern::LengthKind;
use crate::solver::{pcg, select, PcgOptions, QuadraticSystem};
use crate::spectral::{log_eigenvalues_hbht, Geometry, HessianSpec};

pub use inflation::{optimal_inflation, InflationResult, InflationSearch};
pub use presets::{scenario_presets, PAPER_D_B_KM, PAPER_M_B};

/// Largest model grid for the dense `σ_a^opt` route.
pub const SIGMA_OPT_DENSE_LIMIT: usize = 2048;

/// A covariance factor in physical units, independent of any grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub sigma2: f64,
    /// AR order; 0 means uncorrelated.
    pub order: u32,
    /// Daley length in km (ignored for order 0).
    pub d_km: f64,
}

impl Factor {
    pub fn new(sigma2: f64, order: u32, d_km: f64) -> Self {
        Self { sigma2, order, d_km }
    }

    pub fn diagonal(sigma2: f64) -> Self {
        Self { sigma2, order: 0, d_km: 0.0 }
    }

    pub fn on_grid(&self, spacing_km: f64, size: usize) -> Result<CorrelationSpec> {
        if self.order == 0 {
            CorrelationSpec::diagonal(self.sigma2, spacing_km, size)
        } else {
            CorrelationSpec::with_length(self.sigma2, self.order, self.d_km, LengthKind::Daley, spacing_km, size)
        }
    }
}

/// Observation-error covariance used inside the minimisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AssimR {
    /// The covariance the observation errors were drawn from.
    TrueR,
    /// `σ_o²I` with the true variance.
    Diagonal,
    /// `υσ_o²I`.
    InflatedDiagonal { upsilon: f64 },
    /// A correlated model differing from the truth.
    Misspecified { sigma2: f64, order: u32, d_km: f64 },
}

impl AssimR {
    pub fn label(&self) -> String {
        match self {
            AssimR::TrueR => "true_r".into(),
            AssimR::Diagonal => "diagonal".into(),
            AssimR::InflatedDiagonal { upsilon } => format!("inflated_{upsilon}"),
            AssimR::Misspecified { order, d_km, .. } => format!("misspecified_m{order}_d{d_km}"),
        }
    }

    /// The assimilation factor given the true one.
    pub fn factor(&self, true_r: &Factor) -> Factor {
        match *self {
            AssimR::TrueR => *true_r,
            AssimR::Diagonal => Factor::diagonal(true_r.sigma2),
            AssimR::InflatedDiagonal { upsilon } => Factor::diagonal(upsilon * true_r.sigma2),
            AssimR::Misspecified { sigma2, order, d_km } => Factor::new(sigma2, order, d_km),
        }
    }
}

/// The synthetic true state. It cancels from every error statistic for a linear `H`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Truth {
    #[default]
    Zero,
    Sinusoid { amplitude: f64, wavenumber: u32 },
}

impl Truth {
    pub fn field(&self, n: usize) -> Vec<f64> {
        match *self {
            Truth::Zero => vec![0.0; n],
            Truth::Sinusoid { amplitude, wavenumber } => (0..n)
                .map(|j| amplitude * (2.0 * std::f64::consts::PI * (wavenumber as f64) * j as f64 / n as f64).sin())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub geometry: Geometry,
    pub b: Factor,
    pub true_r: Factor,
    pub assim: AssimR,
    pub realizations: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub truth: Truth,
    /// Test hook: draw no noise at all.
    pub zero_noise: bool,
}

impl Scenario {
    pub fn b_spec(&self) -> Result<CorrelationSpec> {
        self.b.on_grid(self.geometry.h_b(), self.geometry.n)
    }

    pub fn true_r_spec(&self) -> Result<CorrelationSpec> {
        self.true_r.on_grid(self.geometry.h_o(), self.geometry.m())
    }

    pub fn assim_r_spec(&self) -> Result<CorrelationSpec> {
        self.assim.factor(&self.true_r).on_grid(self.geometry.h_o(), self.geometry.m())
    }

    /// Hessian spec with the assimilation `R̃`.
    pub fn hessian(&self) -> Result<HessianSpec> {
        HessianSpec::new(self.b_spec()?, self.assim_r_spec()?, self.geometry.zeta)
    }

    pub fn with_assim(&self, assim: AssimR) -> Self {
        Self { assim, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::param("realizations", "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        if let AssimR::InflatedDiagonal { upsilon } = self.assim {
            if !(upsilon > 0.0) {
                return Err(Error::param("upsilon", "must be positive"));
            }
        }
        self.hessian()?;
        self.true_r_spec()?;
        Ok(())
    }
}

/// Stream roles within one realization.
const ROLE_BACKGROUND: u64 = 0;
const ROLE_OBSERVATION: u64 = 1;

fn substream(seed: u64, index: usize, role: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 * 4 + role);
    rng
}

/// One synthetic realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub x_t: Vec<f64>,
    pub x_b: Vec<f64>,
    pub y_o: Vec<f64>,
}

/// Pre-built samplers and operator for a scenario.
struct Engine {
    scenario: Scenario,
    sampler_b: Sampler,
    sampler_r: Sampler,
    system: QuadraticSystem,
}

impl Engine {
    fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let b = scenario.b_spec()?;
        Ok(Self {
            scenario: scenario.clone(),
            sampler_b: Sampler::new(&b),
            sampler_r: Sampler::new(&scenario.true_r_spec()?),
            system: QuadraticSystem::operator(&b, &scenario.assim_r_spec()?, scenario.geometry.zeta)?,
        })
    }

    fn realization(&self, index: usize) -> Realization {
        let g = &self.scenario.geometry;
        let x_t = self.scenario.truth.field(g.n);
        let (eb, eo) = if self.scenario.zero_noise {
            (vec![0.0; g.n], vec![0.0; g.m()])
        } else {
            let seed = self.scenario.seed;
            (
                self.sampler_b.sample(&mut substream(seed, index, ROLE_BACKGROUND)),
                self.sampler_r.sample(&mut substream(seed, index, ROLE_OBSERVATION)),
            )
        };
        let x_b = x_t.iter().zip(&eb).map(|(t, e)| t + e).collect();
        let y_o = select(&x_t, g.zeta).iter().zip(&eo).map(|(t, e)| t + e).collect();
        Realization { x_t, x_b, y_o }
    }

    fn run_member(&self, index: usize) -> Result<MemberResult> {
        let g = &self.scenario.geometry;
        let r = self.realization(index);
        let hx_b = select(&r.x_b, g.zeta);
        let d: Vec<f64> = r.y_o.iter().zip(&hx_b).map(|(y, h)| y - h).collect();
        let mut sys = self.system.clone();
        sys.set_data(&d, &vec![0.0; g.n])?;
        let opts = PcgOptions {
            tol: self.scenario.tol,
            max_iter: self.scenario.max_iter,
            background_error: Some(r.x_b.iter().zip(&r.x_t).map(|(b, t)| b - t).collect()),
            ..Default::default()
        };
        let out = pcg(&sys, &opts, |_, _| {})?;
        Ok(MemberResult {
            sq_errors: out.trace.records.iter().map(|x| x.sigma_a_contrib.unwrap_or(0.0)).collect(),
            iterations: out.iterations,
            converged: out.converged,
        })
    }
}

/// Draw realization `index` of a scenario: `x_b = x_t + ε_b`, `y_o = Hx_t + ε_o`.
pub fn generate_realization(scenario: &Scenario, index: usize) -> Result<Realization> {
    Ok(Engine::new(scenario)?.realization(index))
}

struct MemberResult {
    sq_errors: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Summed in a fixed tree order so the result does not depend on how work was scheduled.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

fn median(xs: &[usize]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

/// Averaged convergence of the analysis error over an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEnsemble {
    pub scenario: String,
    pub assim: String,
    /// `σ_a^(ℓ)/σ_a^(0)`.
    pub curve: Vec<f64>,
    /// `σ_a^(ℓ)` in field units.
    pub sigma_a: Vec<f64>,
    pub sigma_a_star: f64,
    pub sigma_a_opt: f64,
    /// `√(tr B / n)`.
    pub sigma_b: f64,
    /// `1 − σ_a^*/σ_a^(0)`.
    pub reduction: f64,
    /// `1 − σ_a^opt/σ_b`.
    pub optimal_reduction: f64,
    pub realizations: usize,
    pub seed: u64,
    pub iterations: Vec<usize>,
    pub median_iterations: f64,
    pub unconverged: usize,
}

/// Run every realization of `scenario` and average the analysis-error curves.
///
/// Members that converge early contribute their final error to later iterations.
pub fn run_ensemble(scenario: &Scenario) -> Result<ConvergenceEnsemble> {
    let engine = Engine::new(scenario)?;
    let members: Vec<MemberResult> = (0..scenario.realizations)
        .into_par_iter()
        .map(|i| {
            engine.run_member(i).map_err(|e| Error::Realization { realization: i, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;

    let len = members.iter().map(|m| m.sq_errors.len()).max().unwrap_or(1);
    let mut column = vec![0.0; members.len()];
    let sigma_a: Vec<f64> = (0..len)
        .map(|l| {
            for (c, m) in column.iter_mut().zip(&members) {
                *c = m.sq_errors[l.min(m.sq_errors.len() - 1)];
            }
            (pairwise_sum(&column) / members.len() as f64).sqrt()
        })
        .collect();
    let s0 = sigma_a[0];
    let curve: Vec<f64> = sigma_a.iter().map(|s| if s0 > 0.0 { s / s0 } else { 1.0 }).collect();
    let b = scenario.b_spec()?;
    let sigma_b = (b.spectrum().iter().sum::<f64>() / b.size as f64).sqrt();
    let sigma_a_opt = sigma_a_opt_spectral(&b, &scenario.true_r_spec()?, scenario.geometry.zeta)?;
    let iterations: Vec<usize> = members.iter().map(|m| m.iterations).collect();
    let star = *sigma_a.last().expect("at least one iterate");
    Ok(ConvergenceEnsemble {
        scenario: scenario.name.clone(),
        assim: scenario.assim.label(),
        reduction: 1.0 - curve.last().copied().unwrap_or(1.0),
        curve,
        sigma_a_star: star,
        sigma_a_opt,
        sigma_b,
        optimal_reduction: 1.0 - sigma_a_opt / sigma_b,
        realizations: scenario.realizations,
        seed: scenario.seed,
        median_iterations: median(&iterations),
        unconverged: members.iter().filter(|m| !m.converged).count(),
        iterations,
        sigma_a,
    })
}

/// `√(tr[(B⁻¹ + HᵀR⁻¹H)⁻¹]/n)`, the analysis error of the exact BLUE.
///
/// Evaluated densely through the equivalent form `B − BHᵀ(R + HBHᵀ)⁻¹HB`, which never
/// inverts `B` or `R` (either can have a condition number near `1e17`).
pub fn sigma_a_opt(b: &CorrelationSpec, r: &CorrelationSpec, zeta: usize) -> Result<f64> {
    let n = b.size;
    if n > SIGMA_OPT_DENSE_LIMIT {
        return Err(Error::SizeGuard { size: n, limit: SIGMA_OPT_DENSE_LIMIT });
    }
    if zeta == 0 || n != zeta * r.size {
        return Err(Error::Divisibility { n, zeta });
    }
    let m = r.size;
    let bs = covariance_spectrum(b);
    let bst = bs.stencil();
    let rs = covariance_spectrum(r);
    let rst = rs.stencil();
    let bij = |i: usize, j: usize| bst[(j + n - i) % n];
    // G = HB (m × n), K = R + HBHᵀ.
    let g = DMatrix::from_fn(m, n, |i, j| bij(i * zeta, j));
    let k = DMatrix::from_fn(m, m, |i, j| rst[(j + m - i) % m] + bij(i * zeta, j * zeta));
    let chol = k.cholesky().ok_or(Error::Breakdown { iteration: 0, curvature: f64::NAN })?;
    let x = chol.solve(&g);
    let reduction: f64 = g.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let trace_b = bst[0] * n as f64;
    Ok(((trace_b - reduction) / n as f64).sqrt())
}

/// Spectral form of [`sigma_a_opt`]:
/// `(1/n)[Σλ(B) − Σ_i λ_i(HB²Hᵀ)/(λ_i(R) + λ_i(HBHᵀ))]` with aliased averages.
pub fn sigma_a_opt_spectral(b: &CorrelationSpec, r: &CorrelationSpec, zeta: usize) -> Result<f64> {
    let hbh = log_eigenvalues_hbht(b, zeta)?;
    if r.size != hbh.len() {
        return Err(Error::Divisibility { n: b.size, zeta });
    }
    // λ_i(HB²Hᵀ) = (1/ζ)Σ_q λ_{i+qm}(B)², averaged in log-space.
    let lb = b.log_spectrum();
    let m = r.size;
    let ln_z = (zeta as f64).ln();
    let hb2h: Vec<f64> = (0..m)
        .map(|i| {
            let terms: Vec<f64> = (0..zeta).map(|q| 2.0 * lb[i + q * m]).collect();
            let mx = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln() - ln_z
        })
        .collect();
    let lr = r.log_spectrum();
    let gain: f64 = (0..m)
        .map(|i| {
            let denom = lr[i].exp() + hbh[i].exp();
            hb2h[i].exp() / denom
        })
        .sum();
    let trace_b: f64 = lb.iter().map(|l| l.exp()).sum();
    Ok(((trace_b - gain) / b.size as f64).sqrt())
}

/// Run `f` on a dedicated pool with `workers` threads (or the global pool when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::param("workers", "must be at least 1")),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map(|p| p.install(f))
            .map_err(|e| Error::Io(e.to_string())),
    }
}
