//! Monte-Carlo analysis-error convergence for scenario 1 under three assimilation choices.
//!
//! `cargo run --release --example convergence -- 200` sets the ensemble size.

use varcond::experiment::{run_ensemble, scenario_presets};

fn main() -> varcond::Result<()> {
    let realizations = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100);
    for name in ["s1_true_r", "s1_inflated", "s1_diagonal"] {
        let mut s = scenario_presets().into_iter().find(|s| s.name == name).expect("preset");
        s.realizations = realizations;
        let e = run_ensemble(&s)?;
        let show: Vec<String> = [0, 2, 5, 10, 20].iter().filter_map(|&l| e.curve.get(l)).map(|v| format!("{v:.3}")).collect();
        println!(
            "{name:<12} reduction {:>5.1}% (optimum {:.1}%)  median iters {:>4}  curve[0,2,5,10,20] {}",
            100.0 * e.reduction,
            100.0 * e.optimal_reduction,
            e.median_iterations,
            show.join(" ")
        );
    }
    Ok(())
}
