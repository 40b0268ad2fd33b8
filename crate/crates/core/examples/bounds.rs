//! Condition number of S against its three upper bounds as the observation length varies.

use varcond::spectral::{bounds_sweep, log_space, Geometry, HessianSpec};

fn main() -> varcond::Result<()> {
    let base = HessianSpec::from_daley(&Geometry::paper(), (1.0, 8, 60.0), (1.0, 4, 60.0))?;
    let rows = bounds_sweep(&base, &log_space(0.1, 4.0, 9), true)?;
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "Lo/Lb", "kappa", "infnorm", "eta", "naive");
    for r in rows {
        println!(
            "{:>6.2} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e}",
            r.ratio_lo_lb,
            r.kappa_s,
            r.bound_infnorm.unwrap_or(f64::NAN),
            r.bound_eta,
            r.bound_naive
        );
    }
    Ok(())
}
