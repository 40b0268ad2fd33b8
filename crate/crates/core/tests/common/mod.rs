//! Dense reference implementations assembled directly from the model definitions.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use varcond::covariance::CorrelationSpec;
use varcond::spectral::HessianSpec;


pub fn nu_oracle(m: u32) -> f64 {
    let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
    2f64.powi(2 * m as i32 - 1) * fact(m - 1).powi(2) / fact(2 * m - 2)
}

pub fn dense_t(lt: f64, n: usize) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = 1.0 + 2.0 * lt * lt;
        t[(i, (i + 1) % n)] -= lt * lt;
        t[(i, (i + n - 1) % n)] -= lt * lt;
    }
    t
}

pub fn mat_pow(a: &DMatrix<f64>, k: u32) -> DMatrix<f64> {
    let mut out = DMatrix::identity(a.nrows(), a.ncols());
    for _ in 0..k {
        out = &out * a;
    }
    out
}

/// `σ²νL̃·T^{−M}`, or `σ²I` for `M = 0`.
pub fn oracle_cov(sigma2: f64, m: u32, lt: f64, n: usize) -> DMatrix<f64> {
    if m == 0 {
        return DMatrix::identity(n, n) * sigma2;
    }
    let tinv = dense_t(lt, n).try_inverse().expect("T is SPD");
    mat_pow(&tinv, m) * (sigma2 * nu_oracle(m) * lt)
}

/// Symmetric square root `√(σ²νL̃)·(T^{−1/2})^M` from a dense eigendecomposition of `T`.
pub fn oracle_cov_sqrt(sigma2: f64, m: u32, lt: f64, n: usize) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(dense_t(lt, n));
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.powf(-0.5)));
    let root = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    mat_pow(&root, m) * (sigma2 * nu_oracle(m) * lt).sqrt()
}

pub fn oracle_cov_inv(sigma2: f64, m: u32, lt: f64, n: usize) -> DMatrix<f64> {
    if m == 0 {
        return DMatrix::identity(n, n) / sigma2;
    }
    mat_pow(&dense_t(lt, n), m) / (sigma2 * nu_oracle(m) * lt)
}

pub fn selection(n: usize, zeta: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n / zeta, n, |i, j| if j == i * zeta { 1.0 } else { 0.0 })
}

pub fn sorted_desc(v: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = v.into_iter().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

#[derive(Debug, Clone, Copy)]
pub struct Draw {
    pub n: usize,
    pub zeta: usize,
    pub sb: f64,
    pub mb: u32,
    pub lb: f64,
    pub so: f64,
    pub mo: u32,
    pub lo: f64,
}

impl Draw {
    pub fn spec(&self) -> HessianSpec {
        let b = CorrelationSpec::new(self.sb, self.mb, self.lb, 1.0, self.n).unwrap();
        let h_o = self.zeta as f64;
        let o = if self.mo == 0 {
            CorrelationSpec::diagonal(self.so, h_o, self.n / self.zeta).unwrap()
        } else {
            CorrelationSpec::new(self.so, self.mo, self.lo * h_o, h_o, self.n / self.zeta).unwrap()
        };
        HessianSpec::new(b, o, self.zeta).unwrap()
    }

    pub fn dense_s(&self) -> DMatrix<f64> {
        let u = oracle_cov_sqrt(self.sb, self.mb, self.lb, self.n);
        let h = selection(self.n, self.zeta);
        let rinv = oracle_cov_inv(self.so, self.mo, self.lo, self.n / self.zeta);
        let hu = &h * &u;
        let mut s = hu.transpose() * rinv * hu;
        for i in 0..self.n {
            s[(i, i)] += 1.0;
        }
        (&s + s.transpose()) * 0.5
    }

    pub fn dense_hbht(&self) -> DMatrix<f64> {
        let h = selection(self.n, self.zeta);
        &h * oracle_cov(self.sb, self.mb, self.lb, self.n) * h.transpose()
    }
}


/// `T^{k/2}` for any integer `k`: repeated products when `k` is even, otherwise via a dense
/// eigendecomposition of `T`.
pub fn t_half_power(lt: f64, n: usize, k: i32) -> DMatrix<f64> {
    let t = dense_t(lt, n);
    if k % 2 == 0 {
        let base = if k >= 0 { t } else { t.try_inverse().expect("T is SPD") };
        return mat_pow(&base, k.unsigned_abs() / 2);
    }
    let eig = SymmetricEigen::new(t);
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.powf(k as f64 / 2.0)));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

impl Draw {
    /// `K = R^{−1/2} H B^{1/2}`, so that the nontrivial eigenvalues of `S` are `1 + σ(K)²`.
    ///
    /// The amplifying factor `T_o^{M_o/2}` is applied last, to an already smooth matrix, which
    /// keeps the rounding error near `ε·√(λ_max(B)/λ_min(R))` instead of `ε·λ_max(B)/λ_min(R)`.
    pub fn dense_k(&self) -> DMatrix<f64> {
        let m = self.n / self.zeta;
        let hb = selection(self.n, self.zeta) * t_half_power(self.lb, self.n, -(self.mb as i32));
        let left = if self.mo == 0 { DMatrix::identity(m, m) } else { t_half_power(self.lo, m, self.mo as i32) };
        let so = if self.mo == 0 { self.so } else { self.so * nu_oracle(self.mo) * self.lo };
        left * hb * (self.sb * nu_oracle(self.mb) * self.lb / so).sqrt()
    }

    /// Eigenvalues of `S` from the singular values of [`dense_k`](Self::dense_k), descending.
    pub fn eigenvalues_s_svd(&self) -> Vec<f64> {
        let sv = self.dense_k().singular_values();
        let mut out: Vec<f64> = sv.iter().map(|s| 1.0 + s * s).collect();
        out.resize(self.n, 1.0);
        sorted_desc(out)
    }
}
