//! Monte Carlo checks of the exact Franson sampler against the closed-form
//! joint distribution.

use std::f64::consts::FRAC_PI_2;

use franson_core::quantum::{franson_joint, sample_franson_event, DelayPattern, Visibility};
use franson_core::tally::{CoincidenceTally, PairSample};
use franson_core::{OutcomeValue, RandomSource, Setting};

const TRIALS: u64 = 1_000_000;

fn tally(phi: f64, psi: f64, v: f64, stream: u64) -> CoincidenceTally {
    let rs = RandomSource::new(2024, stream);
    let vis = Visibility::new(v).unwrap();
    let mut t = CoincidenceTally::default();
    for k in 0..TRIALS {
        t.record(&PairSample::from(sample_franson_event(Setting::new(phi), Setting::new(psi), vis, &rs, k)));
    }
    t
}

#[test]
fn aligned_settings() {
    let t = tally(0.0, 0.0, 1.0, 0);
    assert!((t.coincidence_fraction() - 0.5).abs() < 0.0015, "{}", t.coincidence_fraction());
    assert!((t.correlation().unwrap() - 1.0).abs() < 0.002);
}

#[test]
fn orthogonal_settings() {
    let t = tally(0.0, FRAC_PI_2, 1.0, 1);
    assert!(t.correlation().unwrap().abs() < 0.004, "{:?}", t.correlation());
}

#[test]
fn every_joint_cell_within_four_standard_errors() {
    let (phi, psi, v) = (Setting::new(0.4), Setting::new(1.1), Visibility::new(0.9).unwrap());
    let joint = franson_joint(phi, psi, v);
    let rs = RandomSource::new(77, 3);
    let mut counts = [[[0u64; 2]; 2]; 4];
    let idx = |x: OutcomeValue| usize::from(x == OutcomeValue::Minus);
    for k in 0..TRIALS {
        let e = sample_franson_event(phi, psi, v, &rs, k);
        let p = DelayPattern::ALL.iter().position(|p| p.classes() == (e.d1, e.d2)).unwrap();
        counts[p][idx(e.x1)][idx(e.x2)] += 1;
    }
    for (p, pattern) in DelayPattern::ALL.iter().enumerate() {
        for x1 in [OutcomeValue::Plus, OutcomeValue::Minus] {
            for x2 in [OutcomeValue::Plus, OutcomeValue::Minus] {
                let prob = joint.prob(*pattern, x1, x2);
                let freq = counts[p][idx(x1)][idx(x2)] as f64 / TRIALS as f64;
                let se = (prob * (1.0 - prob) / TRIALS as f64).sqrt();
                assert!((freq - prob).abs() < 4.0 * se, "{pattern:?} {x1:?} {x2:?}: {freq} vs {prob}");
            }
        }
    }
}
