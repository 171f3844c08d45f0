//! Per-trial samples and integer tallies for one setting pair.

use serde::{Deserialize, Serialize};

use crate::setting::{DelayClass, OutcomeValue};

/// What one site registered in a trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteDetection {
    pub outcome: OutcomeValue,
    pub delay: DelayClass,
}

/// One trial at a fixed setting pair; `None` means no detection at that site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSample {
    pub site1: Option<SiteDetection>,
    pub site2: Option<SiteDetection>,
}

impl PairSample {
    pub fn both(site1: SiteDetection, site2: SiteDetection) -> Self {
        PairSample { site1: Some(site1), site2: Some(site2) }
    }

    /// Both sites detected with equal delay class.
    pub fn coincident(&self) -> Option<(SiteDetection, SiteDetection)> {
        match (self.site1, self.site2) {
            (Some(a), Some(b)) if a.delay == b.delay => Some((a, b)),
            _ => None,
        }
    }
}

/// Counts accumulated over trials at one setting pair. All fields are
/// integers so merging is exact and order independent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceTally {
    pub trials: u64,
    pub detections1: u64,
    pub detections2: u64,
    pub plus1: u64,
    pub plus2: u64,
    pub early1: u64,
    pub early2: u64,
    pub coincidences: u64,
    pub early_early: u64,
    pub late_late: u64,
    /// Σ x1·x2 over coincidences.
    pub product_sum: i64,
    /// Σ x1 over coincidences.
    pub coincident_sum1: i64,
    /// Σ x2 over coincidences.
    pub coincident_sum2: i64,
}

impl CoincidenceTally {
    pub fn record(&mut self, sample: &PairSample) {
        self.trials += 1;
        if let Some(d) = sample.site1 {
            self.detections1 += 1;
            self.plus1 += u64::from(d.outcome == OutcomeValue::Plus);
            self.early1 += u64::from(d.delay.is_early());
        }
        if let Some(d) = sample.site2 {
            self.detections2 += 1;
            self.plus2 += u64::from(d.outcome == OutcomeValue::Plus);
            self.early2 += u64::from(d.delay.is_early());
        }
        if let Some((a, b)) = sample.coincident() {
            self.add_coincidence(a, b);
        }
    }

    /// Records a coincident pair found by other means (e.g. a time window).
    pub fn add_coincidence(&mut self, a: SiteDetection, b: SiteDetection) {
        match (a.delay, b.delay) {
            (DelayClass::Early, DelayClass::Early) => self.early_early += 1,
            (DelayClass::Late, DelayClass::Late) => self.late_late += 1,
            _ => {}
        }
        self.add_outcome_pair(a.outcome, b.outcome);
    }

    /// Records a coincidence whose delay classes are unknown.
    pub fn add_outcome_pair(&mut self, x1: OutcomeValue, x2: OutcomeValue) {
        let (x1, x2) = (i64::from(x1.value()), i64::from(x2.value()));
        self.coincidences += 1;
        self.product_sum += x1 * x2;
        self.coincident_sum1 += x1;
        self.coincident_sum2 += x2;
    }

    pub fn merge(&mut self, other: &CoincidenceTally) {
        self.trials += other.trials;
        self.detections1 += other.detections1;
        self.detections2 += other.detections2;
        self.plus1 += other.plus1;
        self.plus2 += other.plus2;
        self.early1 += other.early1;
        self.early2 += other.early2;
        self.coincidences += other.coincidences;
        self.early_early += other.early_early;
        self.late_late += other.late_late;
        self.product_sum += other.product_sum;
        self.coincident_sum1 += other.coincident_sum1;
        self.coincident_sum2 += other.coincident_sum2;
    }

    /// E[x1·x2 | coincidence], `None` without coincidences.
    pub fn correlation(&self) -> Option<f64> {
        (self.coincidences > 0).then(|| self.product_sum as f64 / self.coincidences as f64)
    }

    pub fn coincidence_fraction(&self) -> f64 {
        ratio(self.coincidences, self.trials)
    }

    pub fn plus_fraction1(&self) -> f64 {
        ratio(self.plus1, self.detections1)
    }

    pub fn plus_fraction2(&self) -> f64 {
        ratio(self.plus2, self.detections2)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
