//! Matched AR length-scales: L, Stein ρ and Daley D for orders 2..10.

use varcond::matern::{length_scale_table, ArKernel, LengthKind};

fn main() -> varcond::Result<()> {
    println!("{:>3} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8}", "M", "L", "rho", "D", "L", "rho", "D");
    for r in length_scale_table(&[2, 4, 6, 8, 10], 1e10, 80.0, 1.0)? {
        println!(
            "{:>3} | {:>8.1} {:>8.1} {:>8.1} | {:>8.1} {:>8.1} {:>8.1}",
            r.order, r.growth_l_km, r.growth_stein_km, r.growth_daley_km, r.stein_l_km, r.stein_stein_km, r.stein_daley_km
        );
    }

    // Same Daley length, increasingly Gaussian shape.
    let r = 40.0;
    for m in [2, 4, 6, 8, 10] {
        let k = ArKernel::with_length(m, 60.0, LengthKind::Daley)?;
        println!("M={m:<2} c({r} km) = {:.4}", k.correlation(r)?);
    }
    println!("gaussian  = {:.4}", varcond::matern::gaussian_limit(r, 60.0));
    Ok(())
}
