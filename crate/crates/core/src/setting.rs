//! Value types shared by every module: measurement settings, outcomes,
//! delay classes and the hidden variable of the delay model.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Absolute tolerance used when comparing reduced phases.
pub const ANGLE_TOLERANCE: f64 = 1e-12;

/// Reduces a phase into `[0, 2π)`.
pub fn reduce_angle(phase: f64) -> f64 {
    let r = phase.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// A local phase setting, always stored reduced modulo 2π.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct Setting(f64);

impl Setting {
    pub fn new(phase: f64) -> Self {
        Setting(reduce_angle(phase))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Circular distance to `other`, in `[0, π]`.
    pub fn distance(self, other: Setting) -> f64 {
        let d = (self.0 - other.0).abs();
        d.min(TAU - d)
    }

    pub fn approx_eq(self, other: Setting) -> bool {
        self.distance(other) <= ANGLE_TOLERANCE
    }
}

impl From<f64> for Setting {
    fn from(phase: f64) -> Self {
        Setting::new(phase)
    }
}

impl From<Setting> for f64 {
    fn from(s: Setting) -> f64 {
        s.0
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.0)
    }
}

/// A ±1 measurement outcome. Non-detection is tracked separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeValue {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
}

impl OutcomeValue {
    /// Sign of `x`, with zero mapped to `Plus`.
    pub fn from_sign(x: f64) -> Self {
        if x < 0.0 {
            OutcomeValue::Minus
        } else {
            OutcomeValue::Plus
        }
    }

    pub fn from_i8(v: i8) -> Result<Self> {
        match v {
            1 => Ok(OutcomeValue::Plus),
            -1 => Ok(OutcomeValue::Minus),
            other => invalid(format!("outcome must be +1 or -1, got {other}")),
        }
    }

    pub fn value(self) -> i8 {
        match self {
            OutcomeValue::Plus => 1,
            OutcomeValue::Minus => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            OutcomeValue::Plus => OutcomeValue::Minus,
            OutcomeValue::Minus => OutcomeValue::Plus,
        }
    }
}

impl fmt::Display for OutcomeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.value())
    }
}

/// Whether a detection happened after the short-arm or the long-arm delay.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DelayClass {
    #[serde(rename = "E")]
    Early,
    #[serde(rename = "L")]
    Late,
}

impl DelayClass {
    pub fn is_early(self) -> bool {
        self == DelayClass::Early
    }
}

/// Measurement station.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Site {
    One,
    Two,
}

impl Site {
    pub fn index(self) -> usize {
        match self {
            Site::One => 0,
            Site::Two => 1,
        }
    }

    pub fn other(self) -> Site {
        match self {
            Site::One => Site::Two,
            Site::Two => Site::One,
        }
    }
}

impl From<Site> for u8 {
    fn from(s: Site) -> u8 {
        s.index() as u8 + 1
    }
}

impl TryFrom<u8> for Site {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Site::One),
            2 => Ok(Site::Two),
            other => Err(format!("site must be 1 or 2, got {other}")),
        }
    }
}

/// Hidden variable λ = (θ, r), uniform on `[0, 2π) × [0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenVariable {
    theta: f64,
    r: f64,
}

impl HiddenVariable {
    pub fn new(theta: f64, r: f64) -> Result<Self> {
        if !(0.0..TAU).contains(&theta) {
            return invalid(format!("theta must lie in [0, 2pi), got {theta}"));
        }
        if !(0.0..1.0).contains(&r) {
            return invalid(format!("r must lie in [0, 1), got {r}"));
        }
        Ok(HiddenVariable { theta, r })
    }

    /// Maps two uniforms in `[0, 1)` onto the hidden-variable rectangle.
    pub fn from_uniforms(u_theta: f64, u_r: f64) -> Self {
        let theta = (u_theta * TAU).min(TAU - f64::EPSILON * TAU);
        HiddenVariable { theta, r: u_r }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn reduction_lands_in_range() {
        assert_eq!(Setting::new(TAU).radians(), 0.0);
        assert!((Setting::new(-PI / 2.0).radians() - 1.5 * PI).abs() < 1e-15);
        assert!(Setting::new(-1e-300).radians() < TAU);
        assert!(Setting::new(0.1).approx_eq(Setting::new(0.1 + 4.0 * TAU)));
        assert!(Setting::new(1e-13).approx_eq(Setting::new(TAU - 1e-13)));
    }

    #[test]
    fn outcome_tie_break_is_plus() {
        assert_eq!(OutcomeValue::from_sign(0.0), OutcomeValue::Plus);
        assert_eq!(OutcomeValue::from_sign(-0.0), OutcomeValue::Plus);
        assert_eq!(OutcomeValue::from_sign(-1e-300), OutcomeValue::Minus);
        assert!(OutcomeValue::from_i8(0).is_err());
    }

    #[test]
    fn hidden_variable_rejects_out_of_range() {
        assert!(HiddenVariable::new(TAU, 0.5).is_err());
        assert!(HiddenVariable::new(0.0, 1.0).is_err());
        assert!(HiddenVariable::new(-0.1, 0.5).is_err());
        assert!(HiddenVariable::new(0.0, 0.0).is_ok());
        let hv = HiddenVariable::from_uniforms(1.0 - f64::EPSILON, 0.25);
        assert!(hv.theta() < TAU);
    }

    #[test]
    fn setting_serializes_as_plain_number() {
        let s = Setting::new(1.25);
        assert_eq!(serde_json::to_string(&s).unwrap(), "1.25");
        let back: Setting = serde_json::from_str("7.5").unwrap();
        assert!((back.radians() - (7.5 - TAU)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn shift_by_full_turn_is_identity(phase in -100.0f64..100.0) {
            let a = Setting::new(phase);
            let b = Setting::new(phase + TAU);
            prop_assert!(a.approx_eq(b));
            prop_assert!((0.0..TAU).contains(&a.radians()));
        }
    }
}
