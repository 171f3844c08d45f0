//! Local hidden-variable strategies.
//!
//! A [`LocalStrategy`] pairs two [`SiteModel`]s. Each site model only ever
//! sees its own setting and the shared hidden variable, so locality holds by
//! construction.
//!
//! [`AklzSite1`] and [`AklzSite2`] form the delay-based model that reproduces
//! the Franson coincidence correlation `cos(φ+ψ)` at 50% coincidence rate.
//! With `u = θ+φ` and `h(u) = (π/4)|cos u|`, site 1 answers `sign(cos u)` and
//! is Early on `r ∈ [0, h/2) ∪ [1/2, 1 − h/2)`. Site 2 answers `sign(cos(θ−ψ))`
//! and is Early on `r ∈ [0, 1/2)`, independently of its setting. For fixed θ
//! the EE region then has r-measure `h/2`, and so does LL.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::setting::{reduce_angle, DelayClass, HiddenVariable, OutcomeValue, Setting};
use crate::tally::{PairSample, SiteDetection};

pub mod quadrature;

/// What one site does in one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalResponse {
    pub outcome: OutcomeValue,
    pub delay: DelayClass,
    pub detected: bool,
}

impl LocalResponse {
    pub fn detected(outcome: OutcomeValue, delay: DelayClass) -> Self {
        LocalResponse { outcome, delay, detected: true }
    }

    pub fn missed() -> Self {
        LocalResponse { outcome: OutcomeValue::Plus, delay: DelayClass::Early, detected: false }
    }

    pub fn detection(&self) -> Option<SiteDetection> {
        self.detected.then_some(SiteDetection { outcome: self.outcome, delay: self.delay })
    }
}

/// Response function of one site.
///
/// The breakpoint hooks are optional hints for [`quadrature`]: locations in
/// θ (for a given setting) and in r (for a given setting and θ) where the
/// response may jump. Quadrature is exact in r when every jump is listed.
pub trait SiteModel: Send + Sync {
    fn respond(&self, setting: Setting, lambda: &HiddenVariable) -> LocalResponse;

    fn theta_breakpoints(&self, _setting: Setting) -> Vec<f64> {
        Vec::new()
    }

    fn r_breakpoints(&self, _setting: Setting, _theta: f64) -> Vec<f64> {
        Vec::new()
    }

    /// True when `r_breakpoints` lists every jump of the response in r.
    fn r_breakpoints_complete(&self) -> bool {
        false
    }
}

impl<T: SiteModel + ?Sized> SiteModel for Box<T> {
    fn respond(&self, setting: Setting, lambda: &HiddenVariable) -> LocalResponse {
        (**self).respond(setting, lambda)
    }

    fn theta_breakpoints(&self, setting: Setting) -> Vec<f64> {
        (**self).theta_breakpoints(setting)
    }

    fn r_breakpoints(&self, setting: Setting, theta: f64) -> Vec<f64> {
        (**self).r_breakpoints(setting, theta)
    }

    fn r_breakpoints_complete(&self) -> bool {
        (**self).r_breakpoints_complete()
    }
}

/// Site model backed by a closure; allows `detected = false` responses.
pub struct FnSite<F>(pub F);

impl<F> SiteModel for FnSite<F>
where
    F: Fn(Setting, &HiddenVariable) -> LocalResponse + Send + Sync,
{
    fn respond(&self, setting: Setting, lambda: &HiddenVariable) -> LocalResponse {
        (self.0)(setting, lambda)
    }
}

#[derive(Clone, Debug)]
pub struct LocalStrategy<S1, S2> {
    pub site1: S1,
    pub site2: S2,
}

/// Responses of both sites in one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResponses {
    pub site1: LocalResponse,
    pub site2: LocalResponse,
}

impl TrialResponses {
    /// Both detected with equal delay class.
    pub fn is_coincident(&self) -> bool {
        self.site1.detected && self.site2.detected && self.site1.delay == self.site2.delay
    }
}

impl From<TrialResponses> for PairSample {
    fn from(t: TrialResponses) -> Self {
        PairSample { site1: t.site1.detection(), site2: t.site2.detection() }
    }
}

impl<S1: SiteModel, S2: SiteModel> LocalStrategy<S1, S2> {
    pub fn new(site1: S1, site2: S2) -> Self {
        LocalStrategy { site1, site2 }
    }
}

/// Applies each site function to its own setting only.
pub fn run_lhv_trial<S1: SiteModel, S2: SiteModel>(
    strategy: &LocalStrategy<S1, S2>,
    phi: Setting,
    psi: Setting,
    lambda: &HiddenVariable,
) -> TrialResponses {
    TrialResponses {
        site1: strategy.site1.respond(phi, lambda),
        site2: strategy.site2.respond(psi, lambda),
    }
}

#[inline]
fn early_window(u: f64) -> f64 {
    FRAC_PI_4 * u.cos().abs()
}

/// Zeros of `cos(θ + offset)` as θ values in `[0, 2π)`.
fn cosine_zeros(offset: f64) -> Vec<f64> {
    vec![reduce_angle(FRAC_PI_2 - offset), reduce_angle(1.5 * PI - offset)]
}

/// Site 1 of the delay model: setting-dependent delay.
#[derive(Clone, Copy, Debug, Default)]
pub struct AklzSite1;

/// Site 2 of the delay model: delay set by `r` alone.
#[derive(Clone, Copy, Debug, Default)]
pub struct AklzSite2;

pub fn aklz_site1(phi: Setting, lambda: &HiddenVariable) -> LocalResponse {
    // cos is 2π-periodic, so θ+φ needs no reduction here
    let u = lambda.theta() + phi.radians();
    let half = 0.5 * early_window(u);
    let r = lambda.r();
    let early = r < half || (0.5..1.0 - half).contains(&r);
    LocalResponse::detected(
        OutcomeValue::from_sign(u.cos()),
        if early { DelayClass::Early } else { DelayClass::Late },
    )
}

pub fn aklz_site2(psi: Setting, lambda: &HiddenVariable) -> LocalResponse {
    let w = lambda.theta() - psi.radians();
    let early = lambda.r() < 0.5;
    LocalResponse::detected(
        OutcomeValue::from_sign(w.cos()),
        if early { DelayClass::Early } else { DelayClass::Late },
    )
}

impl SiteModel for AklzSite1 {
    fn respond(&self, setting: Setting, lambda: &HiddenVariable) -> LocalResponse {
        aklz_site1(setting, lambda)
    }

    fn theta_breakpoints(&self, setting: Setting) -> Vec<f64> {
        cosine_zeros(setting.radians())
    }

    fn r_breakpoints(&self, setting: Setting, theta: f64) -> Vec<f64> {
        let half = 0.5 * early_window(theta + setting.radians());
        vec![half, 0.5, 1.0 - half]
    }

    fn r_breakpoints_complete(&self) -> bool {
        true
    }
}

impl SiteModel for AklzSite2 {
    fn respond(&self, setting: Setting, lambda: &HiddenVariable) -> LocalResponse {
        aklz_site2(setting, lambda)
    }

    fn theta_breakpoints(&self, setting: Setting) -> Vec<f64> {
        cosine_zeros(-setting.radians())
    }

    fn r_breakpoints(&self, _setting: Setting, _theta: f64) -> Vec<f64> {
        vec![0.5]
    }

    fn r_breakpoints_complete(&self) -> bool {
        true
    }
}

pub type AklzStrategy = LocalStrategy<AklzSite1, AklzSite2>;

pub fn aklz_strategy() -> AklzStrategy {
    LocalStrategy::new(AklzSite1, AklzSite2)
}

/// Boxed site model, for strategies chosen at runtime.
pub type DynSite = Box<dyn SiteModel>;
