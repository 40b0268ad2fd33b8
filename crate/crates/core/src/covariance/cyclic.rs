//! Constant-coefficient symmetric cyclic tridiagonal solver (Thomas + Sherman–Morrison).

/// Pre-factorised solver for the periodic system with diagonal `d` and off-diagonal `e`,
/// including the corner entries `A[0][n−1] = A[n−1][0] = e`.
#[derive(Debug, Clone)]
pub(crate) struct CyclicTridiagonal {
    e: f64,
    // Modified first and last diagonal entries of the tridiagonal part.
    diag: Vec<f64>,
    // Forward-elimination multipliers c'_i and pivots.
    cprime: Vec<f64>,
    pivot: Vec<f64>,
    z: Vec<f64>,
    v_last: f64,
    denom: f64,
}

impl CyclicTridiagonal {
    /// Requires `n ≥ 3` and strict diagonal dominance `d > 2|e|` (always true for `T`).
    pub(crate) fn new(d: f64, e: f64, n: usize) -> Self {
        debug_assert!(n >= 3);
        let gamma = -d;
        let mut diag = vec![d; n];
        diag[0] = d - gamma;
        diag[n - 1] = d - e * e / gamma;

        let mut cprime = vec![0.0; n];
        let mut pivot = vec![0.0; n];
        pivot[0] = diag[0];
        cprime[0] = e / pivot[0];
        for i in 1..n {
            pivot[i] = diag[i] - e * cprime[i - 1];
            cprime[i] = e / pivot[i];
        }

        let mut solver = Self {
            e,
            diag,
            cprime,
            pivot,
            z: Vec::new(),
            v_last: e / gamma,
            denom: 0.0,
        };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = e;
        solver.thomas(&mut u);
        solver.denom = 1.0 + u[0] + solver.v_last * u[n - 1];
        solver.z = u;
        solver
    }

    fn thomas(&self, x: &mut [f64]) {
        let n = x.len();
        x[0] /= self.pivot[0];
        for i in 1..n {
            x[i] = (x[i] - self.e * x[i - 1]) / self.pivot[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.cprime[i] * x[i + 1];
        }
    }

    /// Overwrite `x` with `A⁻¹x`.
    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.diag.len());
        self.thomas(x);
        let n = x.len();
        let f = (x[0] + self.v_last * x[n - 1]) / self.denom;
        for (xi, zi) in x.iter_mut().zip(&self.z) {
            *xi -= f * zi;
        }
    }
}
