//! Where do correlated observation errors help conditioning? Prints log10 χ on a coarse grid
//! and compares the exact row minima of κ(S) with the predicted ones.

use varcond::spectral::{chi_map, log_space, ChiMapRequest, Geometry};

fn main() -> varcond::Result<()> {
    let mut req = ChiMapRequest::with_default_axes(Geometry::paper(), 8, 60.0);
    req.d_o_values_km = log_space(10.0, 300.0, 8);
    let map = chi_map(&req)?;

    print!("M_o\\D_o");
    for d in &map.d_o_values_km {
        print!("{d:>8.0}");
    }
    println!();
    for (m, row) in map.m_o_values.iter().zip(&map.log10_chi) {
        print!("{m:>7}");
        for v in row {
            print!("{v:>8.2}");
        }
        println!();
    }
    println!("\nrow minima (D_o km): exact vs predicted, κ excess");
    for r in &map.rows {
        println!(
            "M_o={:<2} {:>7.1} {:>7.1}  {:.2e}",
            r.m_o, r.exact_d_o_km, r.predicted_d_o_km, r.relative_excess
        );
    }
    Ok(())
}
