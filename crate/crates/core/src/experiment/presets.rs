//! Named scenarios on the paper's geometry (2000 km, `n = 500`, `ζ = 2`, unit variances).

use super::{AssimR, Factor, Scenario, Truth};
use crate::solver::DEFAULT_TOL;
use crate::spectral::Geometry;

pub const PAPER_M_B: u32 = 8;
pub const PAPER_D_B_KM: f64 = 60.0;

const REALIZATIONS: usize = 1000;
const MAX_ITER: usize = 2000;
const SEED: u64 = 20_190_601;

fn base(name: &str, true_r: Factor, assim: AssimR) -> Scenario {
    Scenario {
        name: name.into(),
        geometry: Geometry::paper(),
        b: Factor::new(1.0, PAPER_M_B, PAPER_D_B_KM),
        true_r,
        assim,
        realizations: REALIZATIONS,
        tol: DEFAULT_TOL,
        max_iter: MAX_ITER,
        seed: SEED,
        truth: Truth::Zero,
        zero_noise: false,
    }
}

/// All named scenarios.
///
/// Scenario 1 has SOAR-like observation errors (`M_o = 2`, `D_o = 30` km); scenario 2 has
/// smooth, long-range ones (`M_o = 10`, `D_o = 120` km). The `s3_*` entries assimilate
/// scenario 2's observations with deliberately altered correlation models. The last
/// entry repeats scenario 2 with observations less accurate than the background.
pub fn scenario_presets() -> Vec<Scenario> {
    let s1 = Factor::new(1.0, 2, 30.0);
    let s2 = Factor::new(1.0, 10, 120.0);
    vec![
        base("s1_true_r", s1, AssimR::TrueR),
        base("s1_diagonal", s1, AssimR::Diagonal),
        base("s1_inflated", s1, AssimR::InflatedDiagonal { upsilon: 10.5 }),
        base("s2_true_r", s2, AssimR::TrueR),
        base("s2_diagonal", s2, AssimR::Diagonal),
        base("s2_inflated", s2, AssimR::InflatedDiagonal { upsilon: 17.0 }),
        base("s3_r3", s2, AssimR::Misspecified { sigma2: 1.0, order: 10, d_km: 50.0 }),
        base("s3_r4", s2, AssimR::Misspecified { sigma2: 1.0, order: 8, d_km: 60.0 }),
        base("s3_r5", s2, AssimR::Misspecified { sigma2: 1.0, order: 2, d_km: 120.0 }),
        base("s2_noisy_diagonal", Factor::new(4.0, 10, 120.0), AssimR::Diagonal),
    ]
}
