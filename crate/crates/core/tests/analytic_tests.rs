use proptest::prelude::*;

use teachdim::analytic::{
    expected_visits_closed, expected_visits_recursion, sarsa_worstcase_visits, tdim_bounds, tight_theta_level3,
    BoundInputs,
};
use teachdim::harness::expected_visits_mc;
use teachdim::learner::UpdateRule;
use teachdim::teacher::Level;

const EPS_GRID: [f64; 10] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[test]
fn closed_form_agrees_with_recursion() {
    for a in 2..=10 {
        for n in 0..a {
            for eps in EPS_GRID {
                let c = expected_visits_closed(n, a, eps).unwrap();
                let r = expected_visits_recursion(n, a, eps).unwrap();
                assert!((c - r).abs() <= 1e-12, "n={n} A={a} eps={eps}");
            }
        }
    }
}

#[test]
fn worst_case_ignores_epsilon() {
    for a in 2..=10 {
        for eps in EPS_GRID {
            assert!((expected_visits_closed(a - 1, a, eps).unwrap() - (a - 1) as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn closed_form_monotone() {
    for a in 2..=10 {
        for eps in EPS_GRID {
            let vals: Vec<f64> = (0..a).map(|n| expected_visits_closed(n, a, eps).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }
        for n in 0..a - 1 {
            let vals: Vec<f64> = EPS_GRID.iter().map(|&e| expected_visits_closed(n, a, e).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}

/// Level-3 lower bound written as a plain product with a loop for the power.
fn level3_lower_by_hand(s: usize, a: usize, h: usize, d: usize, eps: f64) -> f64 {
    let mut g = 1.0;
    for _ in 0..d {
        g /= 1.0 - eps;
    }
    ((s - d - 1) * (a - 1) * h) as f64 * g
}

/// Navigation overhead as a geometric sum: `H * sum_{k=0}^{D-1} (1-eps)^-k`.
fn overhead_by_sum(h: usize, d: usize, eps: f64) -> f64 {
    (0..d).map(|k| (1.0 - eps).powi(-(k as i32))).sum::<f64>() * h as f64
}

#[test]
fn tight_bounds_match_second_coding() {
    for d in 1..=6 {
        for s in d + 2..=50 {
            for eps in EPS_GRID {
                let inp = BoundInputs::new(s, 3, 2 * d + 1, d, eps, 1.0);
                let (lo, hi) = tight_theta_level3(&inp).unwrap();
                let base = level3_lower_by_hand(s, 3, 2 * d + 1, d, eps);
                let extra = overhead_by_sum(2 * d + 1, d, eps);
                assert!((lo - (base + extra)).abs() <= 1e-9 * lo);
                assert!(lo <= hi);
                let (plain_lo, _) = tdim_bounds(Level::Three, &inp).unwrap();
                assert!((plain_lo - base).abs() <= 1e-9 * base.max(1.0));
            }
        }
    }
}

#[test]
fn tight_bounds_ratio() {
    for d in 1..=6 {
        for s in d + 2..=50 {
            for eps in EPS_GRID {
                let (lo, hi) = tight_theta_level3(&BoundInputs::new(s, 4, 10, d, eps, 1.0)).unwrap();
                // the ratio never exceeds 2 + 1/(S-D-1)
                assert!(hi / lo <= 2.0 + 1.0 / (s - d - 1) as f64 + 1e-12);
            }
        }
        for eps in EPS_GRID {
            let s = d + 101;
            let (lo, hi) = tight_theta_level3(&BoundInputs::new(s, 4, 10, d, eps, 1.0)).unwrap();
            assert!(hi / lo <= 2.01);
        }
    }
}

#[test]
fn overhead_limit_at_zero() {
    let (lo, _) = tight_theta_level3(&BoundInputs::new(8, 3, 6, 3, 0.0, 1.0)).unwrap();
    assert_eq!(lo, 48.0 + 18.0);
    let (lo_small, _) = tight_theta_level3(&BoundInputs::new(8, 3, 6, 3, 1e-8, 1.0)).unwrap();
    assert!((lo_small - 66.0).abs() < 1e-5);
}

#[test]
fn level3_upper_increasing_in_every_argument() {
    let base = BoundInputs::new(10, 3, 8, 3, 0.2, 1.0);
    let hi = |i: BoundInputs| tdim_bounds(Level::Three, &i).unwrap().1;
    let lo = |i: BoundInputs| tdim_bounds(Level::Three, &i).unwrap().0;
    let h0 = hi(base);
    assert!(hi(BoundInputs { s: 11, ..base }) > h0);
    assert!(hi(BoundInputs { a: 4, ..base }) > h0);
    assert!(hi(BoundInputs { h: 9, ..base }) > h0);
    assert!(hi(BoundInputs { d: 4, ..base }) > h0);
    assert!(hi(BoundInputs { epsilon: 0.3, ..base }) > h0);
    let l0 = lo(base);
    assert!(lo(BoundInputs { s: 11, ..base }) > l0);
    assert!(lo(BoundInputs { a: 4, ..base }) > l0);
    assert!(lo(BoundInputs { h: 9, ..base }) > l0);
    assert!(lo(BoundInputs { epsilon: 0.3, ..base }) > l0);
    // in D the lower bound grows only once exploration outweighs the lost tail
    assert!(lo(BoundInputs { d: 4, epsilon: 0.5, ..base }) > lo(BoundInputs { epsilon: 0.5, ..base }));
    assert!(lo(BoundInputs { d: 4, epsilon: 0.0, ..base }) < lo(BoundInputs { epsilon: 0.0, ..base }));
}

#[test]
fn level4_at_unit_probability() {
    for eps in EPS_GRID {
        let inp = BoundInputs::new(12, 3, 8, 4, eps, 1.0);
        let (l3, u3) = tdim_bounds(Level::Three, &inp).unwrap();
        let (l4, u4) = tdim_bounds(Level::Four, &inp).unwrap();
        assert_eq!(u3, u4);
        // lowers differ only in the state factor: (S-D)/2 against S-D-1
        assert!((l4 / l3 - 0.5 * 8.0 / 7.0).abs() < 1e-12);
    }
}

#[test]
fn level4_tree_example() {
    let (lo, hi) = tdim_bounds(Level::Four, &BoundInputs::new(9, 2, 8, 3, 0.1, 0.5)).unwrap();
    let k3 = (1.0f64 / 0.45).powi(3);
    assert!((lo - 0.5 * 6.0 * 8.0 * k3).abs() < 1e-9);
    assert!((hi - 17.0 * 8.0 * k3).abs() < 1e-9);
}

#[test]
fn sarsa_bound_dominates_simulation() {
    let bound = sarsa_worstcase_visits(4).unwrap();
    for eps in [0.0, 0.2, 0.5] {
        let m = expected_visits_mc(4, eps, 3, UpdateRule::Sarsa, 5000, 2).unwrap();
        assert!(m <= bound + 0.1, "eps {eps}: {m}");
    }
    let m = expected_visits_mc(2, 0.0, 1, UpdateRule::Sarsa, 100, 2).unwrap();
    assert!(m <= sarsa_worstcase_visits(2).unwrap());
}

#[test]
fn simulation_matches_closed_form() {
    let m = expected_visits_mc(3, 0.5, 1, UpdateRule::StandardQ, 50_000, 5).unwrap();
    assert!((m - 4.0 / 3.0).abs() < 0.02);
}

proptest! {
    #[test]
    fn bounds_ordered(s in 3usize..60, a in 2usize..8, d in 1usize..6, extra_h in 0usize..10, eps in 0.0f64..0.95, p in 0.05f64..=1.0) {
        prop_assume!(s >= d + 2);
        let inp = BoundInputs::new(s, a, d + extra_h, d, eps, p);
        for level in Level::ALL {
            let (lo, hi) = tdim_bounds(level, &inp).unwrap();
            prop_assert!(lo <= hi && lo > 0.0);
        }
    }
}
