//! Helpers shared by several test targets.

#![allow(dead_code)]

use franson_core::experiment::{tally_pair, LhvSource, PairSource, QuantumSource};
use franson_core::lhv::aklz_strategy;
use franson_core::quantum::Visibility;
use franson_core::setups::{SetupSource, SetupVariant};
use franson_core::tally::CoincidenceTally;
use franson_core::{RandomSource, Setting};

/// Largest |difference| / standard error between single-site outcome
/// marginals measured under two different remote settings.
#[derive(Clone, Copy, Debug)]
pub struct MarginalShift {
    pub site1_sigmas: f64,
    pub site2_sigmas: f64,
}

fn sigmas(plus_a: u64, n_a: u64, plus_b: u64, n_b: u64) -> f64 {
    let (pa, pb) = (plus_a as f64 / n_a as f64, plus_b as f64 / n_b as f64);
    let pooled = (plus_a + plus_b) as f64 / (n_a + n_b) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n_a as f64 + 1.0 / n_b as f64)).sqrt();
    (pa - pb).abs() / se
}

/// Runs `trials` at (φ0,ψ0), (φ0,ψ1) and (φ1,ψ0) and compares each site's
/// marginal across the two remote settings.
pub fn marginal_shift<P: PairSource + ?Sized>(source: &P, trials: u64, rs: &RandomSource) -> MarginalShift {
    let (phi0, phi1) = (Setting::new(0.3), Setting::new(1.9));
    let (psi0, psi1) = (Setting::new(0.8), Setting::new(2.6));
    let a: CoincidenceTally = tally_pair(source, phi0, psi0, trials, 0, rs);
    let b = tally_pair(source, phi0, psi1, trials, trials, rs);
    let c = tally_pair(source, phi1, psi0, trials, 2 * trials, rs);
    MarginalShift {
        site1_sigmas: sigmas(a.plus1, a.detections1, b.plus1, b.detections1),
        site2_sigmas: sigmas(a.plus2, a.detections2, c.plus2, c.detections2),
    }
}

/// Every source of the no-signaling suite, by name.
pub fn no_signaling_report(trials: u64) -> Vec<(String, MarginalShift)> {
    let rs = RandomSource::new(99, 0);
    let mut out = vec![
        ("quantum".to_string(), marginal_shift(&QuantumSource { visibility: Visibility::PERFECT }, trials, &rs)),
        ("delay-model".to_string(), marginal_shift(&LhvSource(&aklz_strategy()), trials, &rs.with_stream(1))),
    ];
    for (k, v) in SetupVariant::ALL.into_iter().enumerate() {
        let src = SetupSource::new(v, Visibility::PERFECT);
        out.push((v.name().to_string(), marginal_shift(&src, trials, &rs.with_stream(2 + k as u64))));
    }
    out
}
