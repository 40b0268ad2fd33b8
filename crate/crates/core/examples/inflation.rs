//! Search for the variance-inflation factor that best compensates for ignoring correlations.

use varcond::experiment::{optimal_inflation, scenario_presets, InflationSearch};

fn main() -> varcond::Result<()> {
    let mut s = scenario_presets().into_iter().find(|s| s.name == "s1_inflated").expect("preset");
    s.realizations = 100;
    let res = optimal_inflation(&s, &InflationSearch::default())?;
    for (u, e) in &res.evaluations {
        println!("upsilon {u:>8.3}  sigma_a* {e:.5}");
    }
    println!("optimum upsilon = {:.2}, sigma_a* = {:.4}", res.upsilon, res.sigma_a_star);
    Ok(())
}
