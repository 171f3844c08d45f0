//! Closed-form quantum predictions for the Bohm-Bell and Franson setups and
//! an exact sampler of the Franson joint event distribution.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::random::RandomSource;
use crate::setting::{DelayClass, OutcomeValue, Setting};
use crate::tally::{PairSample, SiteDetection};

/// Fringe visibility, a multiplicative factor on the interference term.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Visibility(f64);

impl Visibility {
    pub const PERFECT: Visibility = Visibility(1.0);

    pub fn new(v: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&v) {
            return invalid(format!("visibility must lie in [0, 1], got {v}"));
        }
        Ok(Visibility(v))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Visibility {
    type Error = crate::Error;

    fn try_from(v: f64) -> Result<Self> {
        Visibility::new(v)
    }
}

impl From<Visibility> for f64 {
    fn from(v: Visibility) -> f64 {
        v.0
    }
}

/// Spin-singlet correlation `−cos(φ − ψ)`.
pub fn singlet_correlation(phi: Setting, psi: Setting) -> f64 {
    -(phi.radians() - psi.radians()).cos()
}

/// Franson correlation conditioned on coincidence, `v·cos(φ + ψ)`.
pub fn franson_correlation(phi: Setting, psi: Setting, vis: Visibility) -> f64 {
    vis.value() * (phi.radians() + psi.radians()).cos()
}

/// `terms·cos(π/terms)`, the quantum value of the chained statistic.
pub fn chained_quantum_value(terms: usize) -> Result<f64> {
    if terms < 4 || !terms.is_multiple_of(2) {
        return invalid(format!("chain needs an even number of terms >= 4, got {terms}"));
    }
    let t = terms as f64;
    Ok(t * (PI / t).cos())
}

/// Delay classes at the two sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DelayPattern {
    EE,
    EL,
    LE,
    LL,
}

impl DelayPattern {
    pub const ALL: [DelayPattern; 4] =
        [DelayPattern::EE, DelayPattern::EL, DelayPattern::LE, DelayPattern::LL];

    pub fn classes(self) -> (DelayClass, DelayClass) {
        use DelayClass::{Early, Late};
        match self {
            DelayPattern::EE => (Early, Early),
            DelayPattern::EL => (Early, Late),
            DelayPattern::LE => (Late, Early),
            DelayPattern::LL => (Late, Late),
        }
    }

    pub fn is_coincident(self) -> bool {
        matches!(self, DelayPattern::EE | DelayPattern::LL)
    }

    fn index(self) -> usize {
        self as usize
    }
}

fn outcome_index(x: OutcomeValue) -> usize {
    match x {
        OutcomeValue::Plus => 0,
        OutcomeValue::Minus => 1,
    }
}

/// The 16-cell table P(delay pattern, x1, x2).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FransonJointDistribution {
    probs: [[[f64; 2]; 2]; 4],
}

impl FransonJointDistribution {
    pub fn prob(&self, pattern: DelayPattern, x1: OutcomeValue, x2: OutcomeValue) -> f64 {
        self.probs[pattern.index()][outcome_index(x1)][outcome_index(x2)]
    }

    pub fn pattern_prob(&self, pattern: DelayPattern) -> f64 {
        self.probs[pattern.index()].iter().flatten().sum()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().flatten().flatten().sum()
    }

    /// Iterates all 16 cells.
    pub fn cells(&self) -> impl Iterator<Item = (DelayPattern, OutcomeValue, OutcomeValue, f64)> + '_ {
        DelayPattern::ALL.into_iter().flat_map(move |p| {
            [OutcomeValue::Plus, OutcomeValue::Minus].into_iter().flat_map(move |x1| {
                [OutcomeValue::Plus, OutcomeValue::Minus]
                    .into_iter()
                    .map(move |x2| (p, x1, x2, self.prob(p, x1, x2)))
            })
        })
    }

    /// P(x1 = +1), summed over everything else.
    pub fn marginal_plus1(&self) -> f64 {
        self.cells().filter(|c| c.1 == OutcomeValue::Plus).map(|c| c.3).sum()
    }

    /// P(x2 = +1), summed over everything else.
    pub fn marginal_plus2(&self) -> f64 {
        self.cells().filter(|c| c.2 == OutcomeValue::Plus).map(|c| c.3).sum()
    }

    /// E[x1·x2 | EE or LL].
    pub fn coincident_correlation(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (p, x1, x2, pr) in self.cells() {
            if p.is_coincident() {
                num += f64::from(x1.value() * x2.value()) * pr;
                den += pr;
            }
        }
        num / den
    }
}

/// Full joint distribution of delays and outcomes for one setting pair.
///
/// Each delay pattern carries mass 1/4. Coincident patterns carry the
/// interference term; in EL and LE the outcomes are independent and unbiased.
pub fn franson_joint(phi: Setting, psi: Setting, vis: Visibility) -> FransonJointDistribution {
    let c = franson_correlation(phi, psi, vis);
    let mut probs = [[[0.0; 2]; 2]; 4];
    for p in DelayPattern::ALL {
        for (i, x1) in [1.0, -1.0].into_iter().enumerate() {
            for (j, x2) in [1.0, -1.0].into_iter().enumerate() {
                let conditional = if p.is_coincident() { (1.0 + x1 * x2 * c) / 4.0 } else { 0.25 };
                probs[p.index()][i][j] = 0.25 * conditional;
            }
        }
    }
    FransonJointDistribution { probs }
}

/// One sampled Franson event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FransonEvent {
    pub x1: OutcomeValue,
    pub d1: DelayClass,
    pub x2: OutcomeValue,
    pub d2: DelayClass,
}

impl From<FransonEvent> for PairSample {
    fn from(e: FransonEvent) -> Self {
        PairSample::both(
            SiteDetection { outcome: e.x1, delay: e.d1 },
            SiteDetection { outcome: e.x2, delay: e.d2 },
        )
    }
}

/// Samples from [`franson_joint`] using three of the supplied uniforms.
pub fn sample_franson_from(phi: Setting, psi: Setting, vis: Visibility, u: &[f64]) -> FransonEvent {
    let pattern = DelayPattern::ALL[((u[0] * 4.0) as usize).min(3)];
    let (d1, d2) = pattern.classes();
    let x1 = if u[1] < 0.5 { OutcomeValue::Plus } else { OutcomeValue::Minus };
    let x2 = if pattern.is_coincident() {
        let p_equal = 0.5 * (1.0 + franson_correlation(phi, psi, vis));
        if u[2] < p_equal {
            x1
        } else {
            x1.flip()
        }
    } else if u[2] < 0.5 {
        OutcomeValue::Plus
    } else {
        OutcomeValue::Minus
    };
    FransonEvent { x1, d1, x2, d2 }
}

/// Exact sampler of the Franson joint distribution, keyed by trial index.
pub fn sample_franson_event(
    phi: Setting,
    psi: Setting,
    vis: Visibility,
    rs: &RandomSource,
    trial: u64,
) -> FransonEvent {
    sample_franson_from(phi, psi, vis, &rs.trial_uniforms(trial))
}
