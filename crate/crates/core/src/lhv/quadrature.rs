//! Deterministic integration of strategy statistics over the uniform hidden
//! variable `(θ, r) ∈ [0, 2π) × [0, 1)`.
//!
//! The θ axis is cut into `theta_cells` uniform cells, refined at the
//! θ-breakpoints reported by both sites, and sampled at sub-cell midpoints.
//! For every θ node the r axis is cut into `r_cells` uniform cells, refined
//! at the r-breakpoints reported by both sites. Responses are constant on
//! each r sub-cell whenever the breakpoint lists are complete, which makes
//! the r integral exact; the θ integral is a midpoint rule on pieces where
//! the responses vary smoothly.
//!
//! When both sites declare their r-breakpoints complete, runs of uniform r
//! cells between two breakpoints are evaluated once with their summed width.
//! The response is constant across such a run, so the sum is unchanged.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{run_lhv_trial, LocalStrategy, SiteModel};
use crate::setting::{reduce_angle, HiddenVariable, OutcomeValue, Setting};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub theta_cells: usize,
    pub r_cells: usize,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        QuadratureGrid { theta_cells: 4096, r_cells: 1024 }
    }
}

/// Probability masses of one setting pair under a strategy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairMoments {
    pub detected1: f64,
    pub detected2: f64,
    pub plus1: f64,
    pub plus2: f64,
    pub early1: f64,
    pub early2: f64,
    pub coincidence: f64,
    pub early_early: f64,
    pub late_late: f64,
    /// ∫ x1·x2 over the coincident region.
    pub product: f64,
    /// ∫ x1 over the coincident region.
    pub coincident1: f64,
    /// ∫ x2 over the coincident region.
    pub coincident2: f64,
}

impl PairMoments {
    /// E[x1·x2 | coincidence].
    pub fn correlation(&self) -> f64 {
        self.product / self.coincidence
    }

    pub fn coincident_mean1(&self) -> f64 {
        self.coincident1 / self.coincidence
    }

    pub fn coincident_mean2(&self) -> f64 {
        self.coincident2 / self.coincidence
    }

    /// P(x1 = +1 | site 1 detected).
    pub fn plus_fraction1(&self) -> f64 {
        self.plus1 / self.detected1
    }

    /// P(x2 = +1 | site 2 detected).
    pub fn plus_fraction2(&self) -> f64 {
        self.plus2 / self.detected2
    }
}

fn normalize_cuts(lo: f64, hi: f64, cuts: &mut Vec<f64>) {
    cuts.retain(|&c| c > lo && c < hi);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
}

/// Calls `f(midpoint, width)` for each piece of `[lo, hi)` between cuts.
pub(crate) fn for_each_segment(lo: f64, hi: f64, cuts: &mut Vec<f64>, mut f: impl FnMut(f64, f64)) {
    normalize_cuts(lo, hi, cuts);
    let mut start = lo;
    for &c in cuts.iter().chain(std::iter::once(&hi)) {
        f(0.5 * (start + c), c - start);
        start = c;
    }
}

/// Cuts `[lo, hi)` into `cells` uniform pieces plus extra cut points, and
/// calls `f(midpoint, width)` for every resulting piece.
pub(crate) fn for_each_piece(lo: f64, hi: f64, cells: usize, cuts: &mut Vec<f64>, mut f: impl FnMut(f64, f64)) {
    normalize_cuts(lo, hi, cuts);
    let width = (hi - lo) / cells as f64;
    let mut next = 0;
    for k in 0..cells {
        let cell_lo = lo + k as f64 * width;
        let cell_hi = if k + 1 == cells { hi } else { lo + (k + 1) as f64 * width };
        let mut start = cell_lo;
        while next < cuts.len() && cuts[next] < cell_hi {
            if cuts[next] > start {
                f(0.5 * (start + cuts[next]), cuts[next] - start);
                start = cuts[next];
            }
            next += 1;
        }
        if cell_hi > start {
            f(0.5 * (start + cell_hi), cell_hi - start);
        }
    }
}

/// Integrates all [`PairMoments`] for the setting pair `(φ, ψ)`.
pub fn pair_moments<S1: SiteModel, S2: SiteModel>(
    strategy: &LocalStrategy<S1, S2>,
    phi: Setting,
    psi: Setting,
    grid: QuadratureGrid,
) -> PairMoments {
    let mut theta_cuts: Vec<f64> = strategy
        .site1
        .theta_breakpoints(phi)
        .into_iter()
        .chain(strategy.site2.theta_breakpoints(psi))
        .map(reduce_angle)
        .collect();
    let coalesce = strategy.site1.r_breakpoints_complete() && strategy.site2.r_breakpoints_complete();
    let mut acc = PairMoments::default();
    let mut r_cuts = Vec::new();
    for_each_piece(0.0, TAU, grid.theta_cells, &mut theta_cuts, |theta, dtheta| {
        let w_theta = dtheta / TAU;
        r_cuts.clear();
        r_cuts.extend(strategy.site1.r_breakpoints(phi, theta));
        r_cuts.extend(strategy.site2.r_breakpoints(psi, theta));
        let mut slice = PairMoments::default();
        let mut visit = |r: f64, dr: f64| {
            // midpoints lie strictly inside the rectangle
            let lambda = HiddenVariable::new(theta, r).expect("midpoint inside rectangle");
            let t = run_lhv_trial(strategy, phi, psi, &lambda);
            let (a, b) = (t.site1, t.site2);
            if a.detected {
                slice.detected1 += dr;
                if a.outcome == OutcomeValue::Plus {
                    slice.plus1 += dr;
                }
                if a.delay.is_early() {
                    slice.early1 += dr;
                }
            }
            if b.detected {
                slice.detected2 += dr;
                if b.outcome == OutcomeValue::Plus {
                    slice.plus2 += dr;
                }
                if b.delay.is_early() {
                    slice.early2 += dr;
                }
            }
            if t.is_coincident() {
                let (x1, x2) = (f64::from(a.outcome.value()), f64::from(b.outcome.value()));
                slice.coincidence += dr;
                if a.delay.is_early() {
                    slice.early_early += dr;
                } else {
                    slice.late_late += dr;
                }
                slice.product += x1 * x2 * dr;
                slice.coincident1 += x1 * dr;
                slice.coincident2 += x2 * dr;
            }
        };
        if coalesce {
            for_each_segment(0.0, 1.0, &mut r_cuts, &mut visit);
        } else {
            for_each_piece(0.0, 1.0, grid.r_cells, &mut r_cuts, &mut visit);
        }
        acc.detected1 += w_theta * slice.detected1;
        acc.detected2 += w_theta * slice.detected2;
        acc.plus1 += w_theta * slice.plus1;
        acc.plus2 += w_theta * slice.plus2;
        acc.early1 += w_theta * slice.early1;
        acc.early2 += w_theta * slice.early2;
        acc.coincidence += w_theta * slice.coincidence;
        acc.early_early += w_theta * slice.early_early;
        acc.late_late += w_theta * slice.late_late;
        acc.product += w_theta * slice.product;
        acc.coincident1 += w_theta * slice.coincident1;
        acc.coincident2 += w_theta * slice.coincident2;
    });
    acc
}
