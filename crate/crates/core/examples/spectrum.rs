//! Exact spectrum of the preconditioned Hessian for scenario 2 of the paper geometry.

use varcond::spectral::{spectrum_report, Geometry, HessianSpec};

fn main() -> varcond::Result<()> {
    let g = Geometry::paper();
    for (label, m_o, d_o) in [("diagonal R", 0, 0.0), ("SOAR-like R", 2, 30.0), ("smooth R", 10, 120.0)] {
        let spec = HessianSpec::from_daley(&g, (1.0, 8, 60.0), (1.0, m_o, d_o))?;
        let r = spectrum_report(&spec);
        println!(
            "{label:<12} kappa(S) = {:>10.4e}  chi = {:>10.4e}  eta = {:>10.4e} ({:?})  naive = {:.4e}",
            r.kappa_s, r.chi, r.bound_eta, r.eta_case, r.bound_naive
        );
    }
    Ok(())
}
