use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use pulsebranch::{
    bessel_jy, build_table, fock_average, nbar_no_dissipation, single_photon_exact, solve_drive, wbar_exact,
    SolverOptions, SystemConfig, TimeGrid,
};

/// J₀ from its power series, summed until the terms stop mattering.
fn j0_series(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
    }
    sum
}

#[test]
fn first_zero_of_j0() {
    let (mut lo, mut hi) = (2.0, 3.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if j0_series(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    assert!((root - 2.404825557695773).abs() < 1e-12);
    assert!(bessel_jy(0.0, root).unwrap().0.abs() < 1e-9);
}

#[test]
fn wronskian_identity() {
    let d = |f: &dyn Fn(f64) -> f64, x: f64| {
        let h = 5e-4 * x.min(1.0);
        (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
    };
    for nu in [0.0, 1e-9, 0.3, 1.0, 1.0 + 1e-8, 1.5, 2.0, 4.999] {
        for x in [0.5, 2.0, 10.0, 50.0] {
            let (j, y) = bessel_jy(nu, x).unwrap();
            let dj = d(&|t| bessel_jy(nu, t).unwrap().0, x);
            let dy = d(&|t| bessel_jy(nu, t).unwrap().1, x);
            let w = j * dy - dj * y;
            assert!((w - 2.0 / (PI * x)).abs() < 1e-10, "nu={nu} x={x}: {w}");
        }
    }
}

#[test]
fn vanishes_at_both_ends_of_the_pulse() {
    for (g, e) in [(0.5, 1.0), (1.0, 2.0), (2.0, 0.7), (4.0, 3.0)] {
        let cfg = SystemConfig::from_ratio(g).unwrap();
        assert_eq!(wbar_exact(&cfg, e, 1.0).unwrap(), 0.0);
        assert!(wbar_exact(&cfg, e, 1e-4).unwrap() < 1e-3, "g={g} e={e}");
    }
}

#[test]
fn lossless_limit_is_closed_form() {
    let cfg = SystemConfig::from_ratio(0.0).unwrap();
    for e in [0.5, FRAC_PI_2, 3.0] {
        for t in [0.3, 1.0, 4.0, 11.0] {
            let w = wbar_exact(&cfg, e, (-t / 2.0f64).exp()).unwrap();
            assert!((0.5 * w - nbar_no_dissipation(e, t)).abs() < 1e-8);
        }
    }
}

#[test]
fn quadrature_agrees_with_integrator() {
    let grid = TimeGrid::uniform(12.0, 13).unwrap();
    for g in [0.25, 1.0, 4.0] {
        let cfg = SystemConfig::from_ratio(g).unwrap();
        for e in [0.2, 2.0] {
            let traj = solve_drive(&cfg, e, &grid, &SolverOptions::default()).unwrap();
            for (z, w) in traj.zeta.iter().zip(&traj.wbar) {
                assert!((wbar_exact(&cfg, e, *z).unwrap() - w).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn unit_amplitude_branch_at_matched_rates() {
    // |α| = 1, so Ẽ = √2; the population is compared with the integrator,
    // not with the single-photon value 2/e².
    let cfg = SystemConfig::from_ratio(1.0).unwrap();
    let e = 2f64.sqrt();
    let traj = solve_drive(&cfg, e, &TimeGrid::new(vec![0.0, 2.0]).unwrap(), &SolverOptions::default()).unwrap();
    let w = wbar_exact(&cfg, e, (-1.0f64).exp()).unwrap();
    assert!((0.5 * w - 0.5 * traj.wbar[1]).abs() < 1e-6);
    assert!((0.5 * w - 2.0 / 1f64.exp().powi(2)).abs() > 1e-3);
}

#[test]
fn single_photon_peak_on_dense_grid() {
    let cfg = SystemConfig::from_ratio(1.0).unwrap();
    let step = 1e-3;
    let (imax, _) = (0..10_000)
        .map(|i| (i, single_photon_exact(&cfg, i as f64 * step)))
        .fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    assert!((imax as f64 * step - 2.0).abs() <= step);
}

#[test]
fn single_photon_equals_fock_one_average() {
    let cfg = SystemConfig::from_ratio(2.0).unwrap();
    let zeta = (-0.5f64).exp();
    let table = build_table(&cfg, &[zeta], 1).unwrap();
    let f = fock_average(&cfg, &table, 1).unwrap();
    assert!((f.nbar_e[0] - single_photon_exact(&cfg, 1.0)).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn population_stays_physical(g in 0.0f64..6.0, e in 0.0f64..8.0, zeta in 1e-3f64..1.0) {
        let cfg = SystemConfig::from_ratio(g).unwrap();
        let w = wbar_exact(&cfg, e, zeta).unwrap();
        prop_assert!((0.0..=2.0).contains(&w));
    }

    #[test]
    fn half_order_pair_in_closed_form(x in 1e-6f64..1e3) {
        let (j, y) = bessel_jy(0.5, x).unwrap();
        let s = (2.0 / (PI * x)).sqrt();
        prop_assert!((j - s * x.sin()).abs() <= 1e-12 * s);
        prop_assert!((y + s * x.cos()).abs() <= 1e-12 * s);
    }
}
