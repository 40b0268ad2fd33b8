mod common;

use common::{sorted_desc, Draw};
use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varcond::covariance::CorrelationSpec;
use varcond::matern::LengthKind;
use varcond::spectral::{
    bound_eta, bound_infnorm, bound_naive, chi, chi_map, eigenvalues_hbht, eigenvalues_s, eigenvalues_so,
    kappa_s, kappa_su, log_space, predicted_min_lo, spectrum_report, ChiMapRequest, Geometry, HessianSpec,
    MinimumStatus,
};

const GRIDS: [(usize, usize); 3] = [(64, 1), (64, 2), (60, 3)];
const PANELS: [(u32, f64); 4] = [(8, 60.0), (8, 120.0), (4, 60.0), (4, 120.0)];

fn random_draw(rng: &mut ChaCha8Rng, n: usize, zeta: usize) -> Draw {
    let orders = [2u32, 4, 8];
    Draw {
        n,
        zeta,
        sb: rng.random_range(0.5..2.0),
        mb: orders[rng.random_range(0..3)],
        lb: rng.random_range(1.0..8.0),
        so: rng.random_range(0.5..2.0),
        mo: orders[rng.random_range(0..3)],
        lo: rng.random_range(1.0..8.0),
    }
}

fn draw_strategy() -> impl Strategy<Value = Draw> {
    (0usize..3, 0.3f64..3.0, 1u32..=10, 1.0f64..8.0, 0.3f64..3.0, 0u32..=10, 1.0f64..8.0).prop_map(
        |(g, sb, mb, lb, so, mo, lo)| {
            let (n, zeta) = GRIDS[g];
            Draw { n, zeta, sb, mb, lb, so, mo, lo }
        },
    )
}

#[test]
fn eigenvalues_match_dense_oracle_on_all_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for (n, zeta) in GRIDS {
        for _ in 0..20 {
            let d = random_draw(&mut rng, n, zeta);
            let ours = sorted_desc(eigenvalues_s(&d.spec()));
            let oracle = d.eigenvalues_s_svd();
            let err = ours.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / oracle[0];
            assert!(err <= 1e-8, "{d:?}: {err:e}");
            worst = worst.max(err);
        }
    }
    assert!(worst > 0.0);
}

#[test]
fn aliased_hbht_matches_dense_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for (n, zeta) in GRIDS {
        for _ in 0..20 {
            let d = random_draw(&mut rng, n, zeta);
            let ours = sorted_desc(eigenvalues_hbht(&d.spec().b, zeta).unwrap());
            let dense = sorted_desc(SymmetricEigen::new(d.dense_hbht()).eigenvalues.iter().copied());
            for (a, b) in ours.iter().zip(&dense) {
                assert!((a - b).abs() <= 1e-10 * dense[0]);
            }
        }
    }
}

#[test]
fn eta_dominates_so_spectrum_on_sweep() {
    let g = Geometry::paper();
    let lo_axis = log_space(1.0, 60.0, 12);
    let lb_axis = log_space(1.0, 60.0, 11);
    let mut count = 0;
    for mo in 2..=10 {
        for mb in 2..=10 {
            for &lb in &lb_axis {
                let b = CorrelationSpec::new(1.0, mb, lb * g.h_b(), g.h_b(), g.n).unwrap();
                for &lo in &lo_axis {
                    let o = CorrelationSpec::new(1.0, mo, lo * g.h_o(), g.h_o(), g.m()).unwrap();
                    let s = HessianSpec::new(b, o, g.zeta).unwrap();
                    let (eta, _) = bound_eta(&s);
                    let mx = eigenvalues_so(&s).into_iter().fold(0.0, f64::max);
                    assert!(eta.is_finite() && mx.is_finite());
                    assert!(mx <= eta * (1.0 + 1e-10), "M_o={mo} M_b={mb} L̃_b={lb} L̃_o={lo}");
                    count += 1;
                }
            }
        }
    }
    assert!(count >= 10_000);
}

#[test]
fn eta_argmin_tracks_prediction() {
    let g = Geometry::paper();
    for lbo in [1.0, 2.5, 6.0] {
        for mo in 2..=10u32 {
            for mb in 2..=mo {
                let pred = predicted_min_lo(mo, mb, lbo).unwrap();
                if pred.status != MinimumStatus::Ok {
                    continue;
                }
                let grid = log_space(pred.ltilde_o / 3.0, pred.ltilde_o * 3.0, 2000);
                let step = 9f64.ln() / 1999.0;
                let b = CorrelationSpec::new(1.0, mb, lbo * g.h_o(), g.h_b(), g.n).unwrap();
                let k = grid
                    .iter()
                    .map(|&lo| {
                        let o = CorrelationSpec::new(1.0, mo, lo * g.h_o(), g.h_o(), g.m()).unwrap();
                        bound_eta(&HessianSpec::new(b, o, g.zeta).unwrap()).0
                    })
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap()
                    .0;
                assert!((grid[k].ln() - pred.ltilde_o.ln()).abs() <= step * (1.0 + 1e-9), "{mo} {mb} {lbo}");
            }
        }
    }
}

#[test]
fn kappa_unimodal_along_daley_length() {
    let g = Geometry::paper();
    for (mb, db) in PANELS {
        let map = chi_map(&ChiMapRequest::with_default_axes(g, mb, db)).unwrap();
        for (row, m_o) in map.chi.iter().zip(&map.m_o_values) {
            let falling = row.windows(2).take_while(|w| w[1] <= w[0]).count();
            assert!(
                row[falling..].windows(2).all(|w| w[1] >= w[0]),
                "panel ({mb}, {db}) M_o={m_o} has more than one local minimum"
            );
        }
    }
}

#[test]
fn chi_map_finite_over_full_axes() {
    let g = Geometry::paper();
    for (mb, db) in PANELS.into_iter().chain([(2, 10.0), (10, 300.0)]) {
        let map = chi_map(&ChiMapRequest::with_default_axes(g, mb, db)).unwrap();
        let all = map.chi.iter().flatten().chain(map.log10_chi.iter().flatten());
        assert!(all.into_iter().all(|x| x.is_finite()));
        for (c, l) in map.chi.iter().flatten().zip(map.log10_chi.iter().flatten()) {
            assert!((c.log10() - l).abs() < 1e-9 * l.abs().max(1.0));
        }
    }
    let extreme = chi_map(&ChiMapRequest::with_default_axes(g, 2, 10.0)).unwrap();
    let peak = extreme.log10_chi.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(peak > 8.0, "largest log10 χ only {peak}");
}

#[test]
fn improvement_below_background_scales() {
    // Every (M_o ≤ M_b, D_o ≤ D_b) cell improves on the uncorrelated case.
    let g = Geometry::paper();
    for (mb, db) in PANELS {
        let map = chi_map(&ChiMapRequest::with_default_axes(g, mb, db)).unwrap();
        for (row, &m_o) in map.chi.iter().zip(&map.m_o_values) {
            for (&c, &d_o) in row.iter().zip(&map.d_o_values_km) {
                if m_o <= mb && d_o <= db {
                    assert!(c < 1.0, "panel ({mb}, {db}) M_o={m_o} D_o={d_o}: χ={c}");
                }
            }
        }
    }
}

#[test]
fn scenario_two_landmark() {
    let g = Geometry::paper();
    let s = HessianSpec::from_daley(&g, (1.0, 8, 60.0), (1.0, 10, 120.0)).unwrap();
    let c = chi(&s);
    assert!((3e3..=3e4).contains(&c), "χ = {c}");
    let r = spectrum_report(&s);
    assert!(r.ones_tail && r.eigenvalues_s.len() == 500);
    assert!((r.kappa_s / r.kappa_su - r.chi).abs() < 1e-9 * r.chi);
    let via_lengths = CorrelationSpec::with_length(1.0, 10, 120.0, LengthKind::Daley, g.h_o(), g.m()).unwrap();
    assert_eq!(s.o, via_lengths);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ones_tail_is_exact(d in draw_strategy()) {
        let s = d.spec();
        let ev = eigenvalues_s(&s);
        prop_assert_eq!(ev.len(), d.n);
        let ones = ev.iter().filter(|&&x| x == 1.0).count();
        prop_assert!(ones >= d.n - d.n / d.zeta);
        prop_assert!(ev.iter().all(|&x| x >= 1.0));
    }

    #[test]
    fn dense_bounds_dominate_kappa(d in draw_strategy()) {
        let s = d.spec();
        let k = kappa_s(&s);
        prop_assert!(k <= bound_naive(&s) * (1.0 + 1e-10));
        // The dense assembly of V⁻¹HBHᵀV⁻¹ rounds at about n·ε·naive; the bound is often tight.
        let rounding = d.n as f64 * f64::EPSILON * bound_naive(&s);
        prop_assert!(k <= bound_infnorm(&s).unwrap() * (1.0 + 1e-10) + rounding);
    }

    #[test]
    fn uncorrelated_spec_has_unit_chi(mut d in draw_strategy()) {
        d.mo = 0;
        let s = d.spec();
        prop_assert!((chi(&s) - 1.0).abs() < 1e-12);
        prop_assert!((kappa_s(&s) / kappa_su(&s) - 1.0).abs() < 1e-12);
        prop_assert!((kappa_su(&d.spec().uncorrelated()) - kappa_su(&s)).abs() <= 1e-12 * kappa_su(&s));
    }
}
