//! B-preconditioned conjugate gradient for the linearised variational problem.
//!
//! The increment is written `δx = Uδv` with `U = B^{1/2}` (the symmetric circulant root),
//! which turns the Hessian `A = B⁻¹ + HᵀR̃⁻¹H` into `S = I + UHᵀR̃⁻¹HU`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::covariance::{covariance_spectrum, CirculantOperator, CorrelationSpec, DiffusionOperator};
use crate::error::{Error, Result};

/// Gauss–Newton iterations beyond this are never needed for a linear observation operator.
pub const MAX_OUTER: usize = 9;

/// Relative residual at which the paper's experiments stop CG.
pub const DEFAULT_TOL: f64 = 1e-6;

const BREAKDOWN_RTOL: f64 = 1e-14;

/// Keep every `ζ`-th entry.
pub fn select(x: &[f64], zeta: usize) -> Vec<f64> {
    x.iter().step_by(zeta).copied().collect()
}

/// Adjoint of [`select`]: scatter onto every `ζ`-th entry of a zero vector of length `n`.
pub fn select_adjoint(y: &[f64], zeta: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, v) in y.iter().enumerate() {
        out[i * zeta] = *v;
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// The quadratic subproblem `S δv = rhs` in control-variable space.
#[derive(Debug, Clone)]
pub struct QuadraticSystem {
    zeta: usize,
    b: DiffusionOperator,
    u: CirculantOperator,
    rinv: DiffusionOperator,
    rhs: Vec<f64>,
}

impl QuadraticSystem {
    /// Assemble from `B`, the assimilation `R̃`, the innovation `d = y_o − H(x)` and the
    /// background departure `x_b − x` (zero on the first outer iteration).
    pub fn build(
        b: &CorrelationSpec,
        r: &CorrelationSpec,
        zeta: usize,
        innovation: &[f64],
        departure: &[f64],
    ) -> Result<Self> {
        let mut sys = Self::operator(b, r, zeta)?;
        sys.set_data(innovation, departure)?;
        Ok(sys)
    }

    /// The operator alone, with a zero right-hand side. Building `U` costs `O(n²)`, so
    /// ensembles build it once and call [`set_data`](Self::set_data) per member.
    pub fn operator(b: &CorrelationSpec, r: &CorrelationSpec, zeta: usize) -> Result<Self> {
        let n = b.size;
        if zeta == 0 || n != zeta * r.size {
            return Err(Error::Divisibility { n, zeta });
        }
        Ok(Self {
            zeta,
            b: DiffusionOperator::new(*b),
            u: covariance_spectrum(b).sqrt(),
            rinv: DiffusionOperator::new(*r),
            rhs: vec![0.0; n],
        })
    }

    /// Set the right-hand side `UᵀB⁻¹(x_b − x) + UᵀHᵀR̃⁻¹d`.
    pub fn set_data(&mut self, innovation: &[f64], departure: &[f64]) -> Result<()> {
        let n = self.n();
        let m = n / self.zeta;
        if innovation.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: innovation.len() });
        }
        if departure.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: departure.len() });
        }
        let w = self.rinv.apply_inverse(innovation)?;
        let mut rhs = self.u.apply(&select_adjoint(&w, self.zeta, n))?;
        if departure.iter().any(|&x| x != 0.0) {
            // UᵀB⁻¹ = U⁻¹ for the symmetric root.
            let uinv = CirculantOperator::from_spectrum(
                self.b.spec().log_spectrum().iter().map(|l| (-0.5 * l).exp()).collect(),
            );
            axpy(1.0, &uinv.apply(departure)?, &mut rhs);
        }
        self.rhs = rhs;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.rhs.len()
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// `δx = Uδv`.
    pub fn back_transform(&self, dv: &[f64]) -> Result<Vec<f64>> {
        self.u.apply(dv)
    }

    /// `S v`.
    pub fn apply_s(&self, v: &[f64]) -> Result<Vec<f64>> {
        let uv = self.u.apply(v)?;
        self.apply_s_given_u(v, &uv)
    }

    // S v when U v is already known.
    fn apply_s_given_u(&self, v: &[f64], uv: &[f64]) -> Result<Vec<f64>> {
        let w = self.rinv.apply_inverse(&select(uv, self.zeta))?;
        let mut out = self.u.apply(&select_adjoint(&w, self.zeta, self.n()))?;
        axpy(1.0, v, &mut out);
        Ok(out)
    }

    /// `A x = B⁻¹x + HᵀR̃⁻¹Hx` in state space.
    pub fn apply_a(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.b.apply_inverse(x)?;
        let w = self.rinv.apply_inverse(&select(x, self.zeta))?;
        axpy(1.0, &select_adjoint(&w, self.zeta, self.n()), &mut out);
        Ok(out)
    }
}

/// `‖e‖_A` for `e = exact − iterate`, both in state space.
pub fn anorm_error(system: &QuadraticSystem, iterate: &[f64], exact: &[f64]) -> Result<f64> {
    if iterate.len() != exact.len() {
        return Err(Error::DimensionMismatch { expected: exact.len(), got: iterate.len() });
    }
    let e: Vec<f64> = exact.iter().zip(iterate).map(|(a, b)| a - b).collect();
    Ok(dot(&e, &system.apply_a(&e)?).max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcgOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Full re-orthogonalisation of residuals. For diagnostics only: it hides the
    /// loss-of-orthogonality effects that the conditioning analysis is about.
    pub reorthogonalize: bool,
    /// Exact solution in control space; enables the `anorm_error` trace column.
    pub exact_dv: Option<Vec<f64>>,
    /// Background error `x_b − x_t`; enables the analysis-error trace column.
    pub background_error: Option<Vec<f64>>,
    /// Keep every recurrence residual `r_ℓ` in [`PcgOutcome::residuals`].
    pub keep_residuals: bool,
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: 1000,
            reorthogonalize: false,
            exact_dv: None,
            background_error: None,
            keep_residuals: false,
        }
    }
}

/// One row of the per-iteration diagnostics. Row `ℓ = 0` is the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub residual_norm: f64,
    pub rel_residual: f64,
    /// `J(δv) = ½δvᵀSδv − δvᵀrhs`.
    pub cost: f64,
    pub anorm_error: Option<f64>,
    /// `‖x_a − x_t‖²/n` for this iterate.
    pub sigma_a_contrib: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    /// CSV with columns `iter,rel_residual,cost,anorm_error,sigma_a_contrib`; optional
    /// columns are left empty when not tracked.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(["iter", "rel_residual", "cost", "anorm_error", "sigma_a_contrib"]).map_err(io)?;
        let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
        for r in &self.records {
            out.write_record([
                r.iter.to_string(),
                format!("{:e}", r.rel_residual),
                format!("{:e}", r.cost),
                opt(r.anorm_error),
                opt(r.sigma_a_contrib),
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub dx: Vec<f64>,
    pub dv: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: IterationTrace,
    /// Recurrence residuals `r_0, r_1, …` when requested, otherwise empty.
    pub residuals: Vec<Vec<f64>>,
}

/// Conjugate gradient on `S δv = rhs` from `δv_0 = 0`.
///
/// `observer(ℓ, δx_ℓ)` is called for `ℓ = 0` and after every iteration with the state-space
/// increment. Stops when `‖r_ℓ‖/‖r_0‖ ≤ tol` or after `max_iter` iterations.
pub fn pcg(
    system: &QuadraticSystem,
    opts: &PcgOptions,
    mut observer: impl FnMut(usize, &[f64]),
) -> Result<PcgOutcome> {
    if !(opts.tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    if opts.max_iter == 0 {
        return Err(Error::param("max_iter", "must be at least 1"));
    }
    let n = system.n();
    if let Some(e) = &opts.exact_dv {
        if e.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: e.len() });
        }
    }
    let b = system.rhs();
    let mut v = vec![0.0; n];
    let mut dx = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let r0 = rr.sqrt();
    let mut basis: Vec<Vec<f64>> = Vec::new();

    let mut trace = IterationTrace::default();
    let record = |iter: usize, v: &[f64], r: &[f64], dx: &[f64], trace: &mut IterationTrace| -> Result<()> {
        let rn = dot(r, r).sqrt();
        let anorm = match &opts.exact_dv {
            Some(ex) => {
                let e: Vec<f64> = ex.iter().zip(v).map(|(a, b)| a - b).collect();
                Some(dot(&e, &system.apply_s(&e)?).max(0.0).sqrt())
            }
            None => None,
        };
        let sa = opts.background_error.as_ref().map(|eb| {
            eb.iter().zip(dx).map(|(a, b)| (a + b) * (a + b)).sum::<f64>() / n as f64
        });
        trace.records.push(IterationRecord {
            iter,
            residual_norm: rn,
            rel_residual: if r0 > 0.0 { rn / r0 } else { 0.0 },
            cost: -0.5 * (dot(v, b) + dot(v, r)),
            anorm_error: anorm,
            sigma_a_contrib: sa,
        });
        Ok(())
    };

    let mut residuals = Vec::new();
    let mut keep = |r: &[f64]| {
        if opts.keep_residuals {
            residuals.push(r.to_vec());
        }
    };
    record(0, &v, &r, &dx, &mut trace)?;
    keep(&r);
    observer(0, &dx);
    if r0 == 0.0 {
        return Ok(PcgOutcome { dx, dv: v, iterations: 0, converged: true, trace, residuals });
    }
    if opts.reorthogonalize {
        basis.push(r.iter().map(|x| x / r0).collect());
    }

    let mut converged = false;
    let mut iterations = 0;
    for ell in 1..=opts.max_iter {
        let up = system.back_transform(&p)?;
        let sp = system.apply_s_given_u(&p, &up)?;
        let curv = dot(&p, &sp);
        let pp = dot(&p, &p);
        if !(curv > BREAKDOWN_RTOL * pp) {
            return Err(Error::Breakdown { iteration: ell, curvature: curv });
        }
        let alpha = rr / curv;
        axpy(alpha, &p, &mut v);
        axpy(alpha, &up, &mut dx);
        axpy(-alpha, &sp, &mut r);
        if opts.reorthogonalize {
            for q in &basis {
                let c = dot(&r, q);
                axpy(-c, q, &mut r);
            }
        }
        let rr_new = dot(&r, &r);
        iterations = ell;
        record(ell, &v, &r, &dx, &mut trace)?;
        keep(&r);
        observer(ell, &dx);
        if rr_new.sqrt() <= opts.tol * r0 {
            converged = true;
            break;
        }
        if opts.reorthogonalize {
            let nr = rr_new.sqrt();
            basis.push(r.iter().map(|x| x / nr).collect());
        }
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    Ok(PcgOutcome { dx, dv: v, iterations, converged, trace, residuals })
}

/// A linear (selection) observation problem for the outer Gauss–Newton loop.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub b: CorrelationSpec,
    pub r: CorrelationSpec,
    pub zeta: usize,
    pub x_b: Vec<f64>,
    pub y_o: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GaussNewtonResult {
    pub x: Vec<f64>,
    /// `‖δx_k‖₂` for each outer iteration.
    pub increment_norms: Vec<f64>,
    pub inner: Vec<PcgOutcome>,
}

/// Incremental (truncated Gauss–Newton) minimisation with `k_max` outer iterations.
///
/// With a linear observation operator the first increment already solves the problem to
/// the inner tolerance; later iterations only polish.
pub fn gauss_newton(problem: &LinearProblem, k_max: usize, opts: &PcgOptions) -> Result<GaussNewtonResult> {
    if k_max == 0 || k_max > MAX_OUTER {
        return Err(Error::param("K", format!("outer iterations must be in 1..={MAX_OUTER}, got {k_max}")));
    }
    let mut x = problem.x_b.clone();
    let mut increment_norms = Vec::with_capacity(k_max);
    let mut inner = Vec::with_capacity(k_max);
    for _ in 0..k_max {
        let hx = select(&x, problem.zeta);
        let d: Vec<f64> = problem.y_o.iter().zip(&hx).map(|(y, h)| y - h).collect();
        let dep: Vec<f64> = problem.x_b.iter().zip(&x).map(|(a, b)| a - b).collect();
        let sys = QuadraticSystem::build(&problem.b, &problem.r, problem.zeta, &d, &dep)?;
        let out = pcg(&sys, opts, |_, _| {})?;
        axpy(1.0, &out.dx, &mut x);
        increment_norms.push(dot(&out.dx, &out.dx).sqrt());
        inner.push(out);
    }
    Ok(GaussNewtonResult { x, increment_norms, inner })
}
