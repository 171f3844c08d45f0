//! The delay model reproduces the Franson coincidence statistics, checked by
//! deterministic quadrature over the hidden variable.

use std::f64::consts::TAU;

use franson_core::lhv::quadrature::{pair_moments, QuadratureGrid};
use franson_core::lhv::{aklz_site2, aklz_strategy};
use franson_core::{HiddenVariable, Setting};

const GRID_POINTS: usize = 12;

fn grid_setting(k: usize) -> Setting {
    Setting::new(k as f64 * TAU / GRID_POINTS as f64 + 0.05)
}

#[test]
fn conditional_correlation_is_cosine_of_phase_sum() {
    let s = aklz_strategy();
    let grid = QuadratureGrid::default();
    let mut worst = 0.0f64;
    for i in 0..GRID_POINTS {
        for k in 0..GRID_POINTS {
            let (phi, psi) = (grid_setting(i), grid_setting(k));
            let m = pair_moments(&s, phi, psi, grid);
            let target = (phi.radians() + psi.radians()).cos();
            worst = worst.max((m.correlation() - target).abs());
            assert!((m.coincidence - 0.5).abs() < 1e-6, "coincidence {}", m.coincidence);
            assert!((m.early_early - 0.25).abs() < 1e-6);
            assert!((m.late_late - 0.25).abs() < 1e-6);
            assert!((m.plus_fraction1() - 0.5).abs() < 1e-6);
            assert!((m.plus_fraction2() - 0.5).abs() < 1e-6);
            assert!((m.early1 - 0.5).abs() < 1e-6);
            assert!((m.early2 - 0.5).abs() < 1e-6);
            assert!(m.coincident_mean1().abs() < 1e-6);
            assert!(m.coincident_mean2().abs() < 1e-6);
        }
    }
    assert!(worst < 1e-6, "worst deviation {worst}");
}

#[test]
fn site2_delay_is_setting_independent_on_random_points() {
    for k in 0..1000u32 {
        let theta = (f64::from(k) * 0.618_033_988_7 * TAU) % TAU;
        let r = (f64::from(k) * 0.414_213_562_3) % 1.0;
        let lambda = HiddenVariable::new(theta, r).unwrap();
        let d0 = aklz_site2(Setting::new(0.0), &lambda).delay;
        assert_eq!(aklz_site2(Setting::new(2.0), &lambda).delay, d0);
        assert_eq!(aklz_site2(Setting::new(5.5), &lambda).delay, d0);
    }
}

#[test]
fn chained_statistic_matches_quantum_value() {
    use franson_core::chain_settings;
    use franson_core::inequalities::{chained_statistic, CorrelationTable};
    use franson_core::quantum::chained_quantum_value;

    let s = aklz_strategy();
    for terms in [4, 6, 8, 10] {
        let chain = chain_settings(terms).unwrap();
        let table =
            CorrelationTable::exact(&chain, |a, b| pair_moments(&s, a, b, QuadratureGrid::default()).correlation())
                .unwrap();
        let value = chained_statistic(&table, &chain).unwrap();
        assert!((value - chained_quantum_value(terms).unwrap()).abs() < 1e-6, "{terms}: {value}");
    }
}
