//! Bound verification by search over local strategies.
//!
//! A deterministic vertex fixes, for each site, maps from setting index to
//! outcome, delay class and detection. Mixtures of vertices realize every
//! local hidden-variable model over a finite setting set. The games, with
//! `N` settings per site and chain terms `(i, j)`:
//!
//! - plain local realism: outcome map only, every run is coincident;
//! - path realism: outcome map plus one setting-independent delay per site,
//!   coincident iff the delays agree;
//! - outcomes only: outcome and delay maps keyed by the measured setting;
//! - emission-time realism: each run draws an independent early and late
//!   setting per site. The delay is keyed by the early setting; an early
//!   detection reports the early-map outcome under the early setting, a late
//!   detection reports the late-map outcome under the late setting;
//! - inefficiency and delays: outcome map plus a detection or delay map.
//!
//! Games with delays may carry an equal-mass constraint: for every term the
//! EE and LL coincidence masses agree.
//!
//! Where the statistic is linear in the mixture (plain and path realism) the
//! maximum is found by enumeration. Otherwise each term is a ratio of linear
//! functions and the sum is maximized by projected-gradient ascent from many
//! random starts, with vertices priced in between rounds.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::SettingsChain;
use crate::error::{invalid, Error, Result};
use crate::inequalities::{bound_for, ModelClass};
use crate::lhv::quadrature::{for_each_piece, for_each_segment};
use crate::lhv::{run_lhv_trial, LocalResponse, LocalStrategy, SiteModel};
use crate::random::RandomSource;
use crate::setting::{DelayClass, HiddenVariable, OutcomeValue, Setting};

/// Smallest coincidence mass a term may have in an accepted strategy.
pub const MIN_COINCIDENCE_MASS: f64 = 1e-9;
/// Largest constraint residual of an accepted strategy.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Plain,
    Path,
    OutcomesOnly,
    EmissionTime,
    Detection,
    Delayed,
}

impl Kind {
    fn of(mc: &ModelClass) -> Kind {
        match mc {
            ModelClass::PlainLocalRealism => Kind::Plain,
            ModelClass::PathRealism => Kind::Path,
            ModelClass::OutcomesOnly => Kind::OutcomesOnly,
            ModelClass::EmissionTimeRealism => Kind::EmissionTime,
            ModelClass::Inefficiency { .. } => Kind::Detection,
            ModelClass::Delays { .. } => Kind::Delayed,
        }
    }

    fn bits(self, n: usize) -> usize {
        match self {
            Kind::Plain => n,
            Kind::Path => n + 1,
            Kind::OutcomesOnly | Kind::Detection | Kind::Delayed => 2 * n,
            Kind::EmissionTime => 3 * n,
        }
    }

    fn has_delays(self) -> bool {
        !matches!(self, Kind::Plain | Kind::Detection)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    /// Per term, EE coincidence mass equals LL coincidence mass.
    pub equal_delay_mass: bool,
    /// Lower bound on P(coincidence | local detection).
    pub min_efficiency: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub model_class: ModelClass,
    pub chain: SettingsChain,
    pub constraints: ConstraintSet,
}

/// Maps of one site in a deterministic strategy, indexed by setting index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteVertex {
    pub outcomes: Vec<OutcomeValue>,
    /// Emission-time realism only: outcomes reported by late detections.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub late_outcomes: Vec<OutcomeValue>,
    /// Keyed by setting; a single entry for path realism, where the delay
    /// is setting independent.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delays: Vec<DelayClass>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detected: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicVertex {
    pub site1: SiteVertex,
    pub site2: SiteVertex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedVertex {
    pub weight: f64,
    pub vertex: DeterministicVertex,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy {
    pub components: Vec<WeightedVertex>,
}

impl MixedStrategy {
    pub fn pure(vertex: DeterministicVertex) -> Self {
        MixedStrategy { components: vec![WeightedVertex { weight: 1.0, vertex }] }
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }
}

/// Per-term masses of one vertex or mixture, as fractions of all runs at the
/// term's setting pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TermMoments {
    /// Σ x1·x2 over coincidences.
    pub product: f64,
    pub coincidence: f64,
    pub early_early: f64,
    pub late_late: f64,
}

impl TermMoments {
    fn add_scaled(&mut self, other: &TermMoments, w: f64) {
        self.product += w * other.product;
        self.coincidence += w * other.coincidence;
        self.early_early += w * other.early_early;
        self.late_late += w * other.late_late;
    }
}

fn sign(x: OutcomeValue) -> f64 {
    f64::from(x.value())
}

impl GameSpec {
    /// A game with the constraints the class calls for: equal EE/LL mass for
    /// emission-time realism and outcomes only, the efficiency bound for the
    /// inefficiency and delay classes.
    pub fn new(model_class: ModelClass, chain: SettingsChain) -> Result<Self> {
        model_class.validate()?;
        let constraints = ConstraintSet {
            equal_delay_mass: matches!(model_class, ModelClass::EmissionTimeRealism | ModelClass::OutcomesOnly),
            min_efficiency: model_class.eta(),
        };
        let game = GameSpec { model_class, chain, constraints };
        game.validate()?;
        Ok(game)
    }

    pub fn validate(&self) -> Result<()> {
        self.model_class.validate()?;
        let kind = self.kind();
        if self.constraints.equal_delay_mass && !kind.has_delays() {
            return invalid(format!("{} has no delays to balance", self.model_class.name()));
        }
        if let Some(eta) = self.constraints.min_efficiency {
            if !(eta > 0.0 && eta <= 1.0) {
                return invalid(format!("efficiency must lie in (0, 1], got {eta}"));
            }
        }
        Ok(())
    }

    fn kind(&self) -> Kind {
        Kind::of(&self.model_class)
    }

    fn n(&self) -> usize {
        self.chain.settings_per_site()
    }

    pub fn terms(&self) -> usize {
        self.chain.len()
    }

    fn site_bits(&self) -> usize {
        self.kind().bits(self.n())
    }

    /// Number of deterministic maps per site.
    pub fn site_vertex_count(&self) -> u128 {
        1u128.checked_shl(self.site_bits() as u32).unwrap_or(u128::MAX)
    }

    /// Number of joint deterministic vertices.
    pub fn vertex_count(&self) -> u128 {
        self.site_vertex_count().saturating_mul(self.site_vertex_count())
    }

    /// Decodes the `code`-th site map. Bit `k < N` set means outcome `−1` at
    /// setting `k`; the next block holds delays (set = Late) or detections
    /// (set = missed); emission-time realism appends the late outcomes.
    pub fn site_vertex(&self, code: u64) -> SiteVertex {
        let n = self.n();
        let bit = |k: usize| code >> k & 1 == 1;
        let outcome = |k: usize| if bit(k) { OutcomeValue::Minus } else { OutcomeValue::Plus };
        let delay = |k: usize| if bit(k) { DelayClass::Late } else { DelayClass::Early };
        let mut v = SiteVertex {
            outcomes: (0..n).map(outcome).collect(),
            late_outcomes: Vec::new(),
            delays: Vec::new(),
            detected: Vec::new(),
        };
        match self.kind() {
            Kind::Plain => {}
            Kind::Path => v.delays = vec![delay(n)],
            Kind::OutcomesOnly | Kind::Delayed => v.delays = (n..2 * n).map(delay).collect(),
            Kind::Detection => v.detected = (n..2 * n).map(|k| !bit(k)).collect(),
            Kind::EmissionTime => {
                v.delays = (n..2 * n).map(delay).collect();
                v.late_outcomes = (2 * n..3 * n).map(outcome).collect();
            }
        }
        v
    }

    /// Inverse of [`GameSpec::site_vertex`]; rejects maps of the wrong shape.
    pub fn encode_site(&self, v: &SiteVertex) -> Result<u64> {
        self.check_site(v)?;
        let n = self.n();
        let mut code = 0u64;
        let mut set = |k: usize, on: bool| {
            if on {
                code |= 1 << k;
            }
        };
        for (k, x) in v.outcomes.iter().enumerate() {
            set(k, *x == OutcomeValue::Minus);
        }
        for (k, d) in v.delays.iter().enumerate() {
            set(n + k, *d == DelayClass::Late);
        }
        for (k, det) in v.detected.iter().enumerate() {
            set(n + k, !det);
        }
        for (k, y) in v.late_outcomes.iter().enumerate() {
            set(2 * n + k, *y == OutcomeValue::Minus);
        }
        Ok(code)
    }

    fn check_site(&self, v: &SiteVertex) -> Result<()> {
        let n = self.n();
        let (late, delays, detected) = match self.kind() {
            Kind::Plain => (0, 0, 0),
            Kind::Path => (0, 1, 0),
            Kind::OutcomesOnly | Kind::Delayed => (0, n, 0),
            Kind::Detection => (0, 0, n),
            Kind::EmissionTime => (n, n, 0),
        };
        if v.outcomes.len() != n
            || v.late_outcomes.len() != late
            || v.delays.len() != delays
            || v.detected.len() != detected
        {
            return invalid(format!("site maps do not match a {} game with {n} settings", self.model_class.name()));
        }
        Ok(())
    }

    /// Masses of every chain term for one deterministic vertex, computed
    /// directly from the maps.
    pub fn term_moments(&self, v: &DeterministicVertex) -> Result<Vec<TermMoments>> {
        self.check_site(&v.site1)?;
        self.check_site(&v.site2)?;
        let (a, b) = (&v.site1, &v.site2);
        let kind = self.kind();
        let late_share = |s: &SiteVertex| {
            s.delays.iter().filter(|d| **d == DelayClass::Late).count() as f64 / s.delays.len() as f64
        };
        Ok(self
            .chain
            .terms()
            .iter()
            .map(|t| {
                let (i, j) = (t.site1, t.site2);
                let xx = sign(a.outcomes[i]) * sign(b.outcomes[j]);
                match kind {
                    Kind::Plain => TermMoments { product: xx, coincidence: 1.0, ..Default::default() },
                    Kind::Detection => {
                        let both = f64::from(u8::from(a.detected[i] && b.detected[j]));
                        TermMoments { product: both * xx, coincidence: both, ..Default::default() }
                    }
                    Kind::Path | Kind::OutcomesOnly | Kind::Delayed => {
                        let (d1, d2) = if kind == Kind::Path {
                            (a.delays[0], b.delays[0])
                        } else {
                            (a.delays[i], b.delays[j])
                        };
                        let ee = f64::from(u8::from(d1.is_early() && d2.is_early()));
                        let ll = f64::from(u8::from(!d1.is_early() && !d2.is_early()));
                        TermMoments { product: (ee + ll) * xx, coincidence: ee + ll, early_early: ee, late_late: ll }
                    }
                    Kind::EmissionTime => {
                        // early pair (i, j) reports early outcomes; late pair
                        // (i, j) reports late outcomes whenever the
                        // independent early settings both chose Late
                        let ee = f64::from(u8::from(a.delays[i].is_early() && b.delays[j].is_early()));
                        let ll = late_share(a) * late_share(b);
                        let yy = sign(a.late_outcomes[i]) * sign(b.late_outcomes[j]);
                        TermMoments { product: ee * xx + ll * yy, coincidence: ee + ll, early_early: ee, late_late: ll }
                    }
                }
            })
            .collect())
    }

    fn check_mixture(&self, s: &MixedStrategy) -> Result<()> {
        if s.components.is_empty() {
            return invalid("empty mixed strategy");
        }
        if s.components.iter().any(|c| !(c.weight >= 0.0) || !c.weight.is_finite()) {
            return invalid("mixture weights must be finite and >= 0");
        }
        Ok(())
    }

    /// Term masses of a mixture.
    pub fn mixture_moments(&self, s: &MixedStrategy) -> Result<Vec<TermMoments>> {
        self.check_mixture(s)?;
        let mut acc = vec![TermMoments::default(); self.terms()];
        for c in &s.components {
            for (a, m) in acc.iter_mut().zip(self.term_moments(&c.vertex)?) {
                a.add_scaled(&m, c.weight);
            }
        }
        Ok(acc)
    }

    /// Largest violation of the simplex and equal-mass constraints.
    pub fn residual(&self, s: &MixedStrategy) -> Result<f64> {
        let mut r = (s.total_weight() - 1.0).abs();
        if self.constraints.equal_delay_mass {
            for m in self.mixture_moments(s)? {
                r = r.max((m.early_early - m.late_late).abs());
            }
        }
        Ok(r)
    }

    /// Chain statistic on the coincident subensemble of a mixture.
    pub fn evaluate(&self, s: &MixedStrategy) -> Result<f64> {
        let moments = self.mixture_moments(s)?;
        let mut values = Vec::with_capacity(moments.len());
        for (k, m) in moments.iter().enumerate() {
            if m.coincidence < MIN_COINCIDENCE_MASS {
                return invalid(format!("term {k} has no coincidences"));
            }
            values.push(m.product / m.coincidence);
        }
        Ok(self.chain.combine(&values))
    }

    /// Apparent efficiency of a mixture in the single-setting games: the
    /// smallest P(coincidence | local detection) over sites and settings,
    /// with the remote setting uniform over its chain partners.
    pub fn apparent_efficiency(&self, s: &MixedStrategy) -> Result<f64> {
        self.check_mixture(s)?;
        let kind = self.kind();
        if kind == Kind::EmissionTime {
            return Err(Error::Unsupported("apparent efficiency of the two-setting game".into()));
        }
        let n = self.n();
        let mut coinc = [vec![0.0; n], vec![0.0; n]];
        let mut detected = [vec![0.0; n], vec![0.0; n]];
        let detects = |v: &SiteVertex, k: usize| v.detected.get(k).copied().unwrap_or(true);
        for c in &s.components {
            let v = &c.vertex;
            let moments = self.term_moments(v)?;
            for (t, m) in self.chain.terms().iter().zip(&moments) {
                coinc[0][t.site1] += c.weight * m.coincidence;
                coinc[1][t.site2] += c.weight * m.coincidence;
                detected[0][t.site1] += c.weight * f64::from(u8::from(detects(&v.site1, t.site1)));
                detected[1][t.site2] += c.weight * f64::from(u8::from(detects(&v.site2, t.site2)));
            }
        }
        let mut eta = 1.0f64;
        for site in 0..2 {
            for k in 0..n {
                if detected[site][k] > 0.0 {
                    eta = eta.min(coinc[site][k] / detected[site][k]);
                }
            }
        }
        Ok(eta)
    }
}

/// Lists every joint vertex, site 1 major.
pub fn enumerate_vertices(game: &GameSpec, limit: u128) -> Result<Vec<DeterministicVertex>> {
    let count = game.vertex_count();
    if count > limit {
        return Err(Error::ResourceLimit { requested: count, limit });
    }
    let per_site = game.site_vertex_count() as u64;
    let sites: Vec<SiteVertex> = (0..per_site).map(|c| game.site_vertex(c)).collect();
    let mut out = Vec::with_capacity(count as usize);
    for a in &sites {
        for b in &sites {
            out.push(DeterministicVertex { site1: a.clone(), site2: b.clone() });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// Random starts for the ratio-form games.
    pub restarts: usize,
    /// Gradient steps per pricing round.
    pub iterations: usize,
    /// Pricing rounds per start.
    pub rounds: usize,
    /// Random vertices in each starting support.
    pub support: usize,
    pub seed: u64,
    /// Largest vertex count the exact games enumerate, and the largest
    /// per-site map count the optimizer tabulates.
    pub vertex_limit: u128,
    /// Start one run from the mixture induced by the delay model.
    pub model_seed: bool,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            restarts: 64,
            iterations: 150,
            rounds: 6,
            support: 48,
            seed: 0,
            vertex_limit: 1 << 24,
            model_seed: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub value: f64,
    /// True when `value` is the exact maximum over all strategies.
    pub exact: bool,
    pub witness: MixedStrategy,
    /// Constraint residual of the witness.
    pub residual: f64,
    pub restarts: usize,
}

/// Largest chain statistic found for the game.
pub fn max_statistic(game: &GameSpec, budget: &Budget) -> Result<Optimum> {
    game.validate()?;
    match game.kind() {
        Kind::Plain | Kind::Path => exact_maximum(game, budget),
        Kind::OutcomesOnly | Kind::EmissionTime => optimize(game, budget),
        Kind::Detection | Kind::Delayed => Err(Error::Unsupported(format!(
            "{} needs efficiency inequality constraints, which the optimizer does not handle",
            game.model_class.name()
        ))),
    }
}

fn exact_maximum(game: &GameSpec, budget: &Budget) -> Result<Optimum> {
    let n = game.n();
    let outcome_maps = 1u64 << n;
    let requested = u128::from(outcome_maps) * u128::from(outcome_maps);
    if requested > budget.vertex_limit {
        return Err(Error::ResourceLimit { requested, limit: budget.vertex_limit });
    }
    let sign_of = |code: u64, k: usize| if code >> k & 1 == 1 { -1.0 } else { 1.0 };
    let mut values = vec![0.0; game.terms()];
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for a in 0..outcome_maps {
        for b in 0..outcome_maps {
            for (v, t) in values.iter_mut().zip(game.chain.terms()) {
                *v = sign_of(a, t.site1) * sign_of(b, t.site2);
            }
            let s = game.chain.combine(&values);
            if s > best.0 {
                best = (s, a, b);
            }
        }
    }
    let (_, a, b) = best;
    let witness = if game.kind() == Kind::Path {
        // same outcomes with both delays Early or both Late
        let late = 1u64 << n;
        let half = |extra: u64| WeightedVertex {
            weight: 0.5,
            vertex: DeterministicVertex { site1: game.site_vertex(a | extra), site2: game.site_vertex(b | extra) },
        };
        MixedStrategy { components: vec![half(0), half(late)] }
    } else {
        MixedStrategy::pure(DeterministicVertex { site1: game.site_vertex(a), site2: game.site_vertex(b) })
    };
    let value = game.evaluate(&witness)?;
    let residual = game.residual(&witness)?;
    Ok(Optimum { value, exact: true, witness, residual, restarts: 0 })
}

/// Site map tabulated for fast column evaluation.
struct SiteTable {
    x: Vec<f64>,
    y: Vec<f64>,
    early: Vec<bool>,
    late_share: f64,
}

struct Compiled {
    kind: Kind,
    /// (site-1 index, site-2 index, sign factor, group)
    terms: Vec<(usize, usize, f64, usize)>,
    groups: usize,
    constrained: bool,
    tables: Vec<SiteTable>,
}

impl Compiled {
    fn new(game: &GameSpec, limit: u128) -> Result<Self> {
        let count = game.site_vertex_count();
        if count > limit || count > 1 << 24 {
            return Err(Error::ResourceLimit { requested: count, limit: limit.min(1 << 24) });
        }
        let tables = (0..count as u64)
            .map(|c| {
                let v = game.site_vertex(c);
                let late = v.delays.iter().filter(|d| **d == DelayClass::Late).count();
                SiteTable {
                    x: v.outcomes.iter().map(|o| sign(*o)).collect(),
                    y: v.late_outcomes.iter().map(|o| sign(*o)).collect(),
                    early: v.delays.iter().map(|d| d.is_early()).collect(),
                    late_share: late as f64 / v.delays.len().max(1) as f64,
                }
            })
            .collect();
        let terms = game.chain.terms().iter().enumerate().map(|(k, t)| (t.site1, t.site2, t.sign.factor(), k / 2)).collect();
        Ok(Compiled {
            kind: game.kind(),
            terms,
            groups: game.terms() / 2,
            constrained: game.constraints.equal_delay_mass,
            tables,
        })
    }

    fn rows(&self) -> usize {
        1 + if self.constrained { self.terms.len() } else { 0 }
    }

    /// Writes numerator, denominator and constraint entries of vertex (a, b).
    fn column(&self, a: usize, b: usize, num: &mut [f64], den: &mut [f64], con: &mut [f64]) {
        let (p, q) = (&self.tables[a], &self.tables[b]);
        for (k, &(i, j, _, _)) in self.terms.iter().enumerate() {
            let xx = p.x[i] * q.x[j];
            let (n, d, c) = match self.kind {
                Kind::EmissionTime => {
                    let ee = f64::from(u8::from(p.early[i] && q.early[j]));
                    let ll = p.late_share * q.late_share;
                    (ee * xx + ll * p.y[i] * q.y[j], ee + ll, ee - ll)
                }
                _ => {
                    let (e1, e2) = (p.early[i], q.early[j]);
                    let co = f64::from(u8::from(e1 == e2));
                    let diff = if e1 && e2 {
                        1.0
                    } else if !e1 && !e2 {
                        -1.0
                    } else {
                        0.0
                    };
                    (co * xx, co, diff)
                }
            };
            num[k] = n;
            den[k] = d;
            con[k] = c;
        }
    }
}

/// Ratio objective over a finite support of joint vertices.
struct Problem<'a> {
    compiled: &'a Compiled,
    codes: Vec<(usize, usize)>,
    num: Vec<f64>,
    den: Vec<f64>,
    /// Constraint matrix rows, the first being the simplex row.
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

struct Point {
    value: f64,
    /// Conditional correlations per term.
    e: Vec<f64>,
    /// Coincidence masses per term.
    d: Vec<f64>,
    /// Per-term gradient weights: group sign times term sign.
    coef: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(compiled: &'a Compiled) -> Self {
        let m = compiled.rows();
        let mut rhs = vec![0.0; m];
        rhs[0] = 1.0;
        Problem { compiled, codes: Vec::new(), num: Vec::new(), den: Vec::new(), rows: vec![Vec::new(); m], rhs }
    }

    fn t(&self) -> usize {
        self.compiled.terms.len()
    }

    fn push(&mut self, a: usize, b: usize) {
        let t = self.t();
        let (mut n, mut d, mut c) = (vec![0.0; t], vec![0.0; t], vec![0.0; t]);
        self.compiled.column(a, b, &mut n, &mut d, &mut c);
        self.codes.push((a, b));
        self.num.extend_from_slice(&n);
        self.den.extend_from_slice(&d);
        self.rows[0].push(1.0);
        if self.compiled.constrained {
            for (k, ck) in c.iter().enumerate() {
                self.rows[k + 1].push(*ck);
            }
        }
    }

    fn retain(&mut self, keep: &[bool]) {
        let t = self.t();
        let mut idx = 0;
        self.codes.retain(|_| {
            idx += 1;
            keep[idx - 1]
        });
        let filter = |v: &mut Vec<f64>, width: usize| {
            let old = std::mem::take(v);
            *v = old.chunks(width).zip(keep).filter(|(_, k)| **k).flat_map(|(c, _)| c.iter().copied()).collect();
        };
        filter(&mut self.num, t);
        filter(&mut self.den, t);
        for r in &mut self.rows {
            filter(r, 1);
        }
    }

    fn point(&self, w: &[f64]) -> Option<Point> {
        let t = self.t();
        let mut nk = vec![0.0; t];
        let mut dk = vec![0.0; t];
        for (i, wi) in w.iter().enumerate() {
            if *wi == 0.0 {
                continue;
            }
            for k in 0..t {
                nk[k] += wi * self.num[i * t + k];
                dk[k] += wi * self.den[i * t + k];
            }
        }
        if dk.iter().any(|d| *d < MIN_COINCIDENCE_MASS) {
            return None;
        }
        let e: Vec<f64> = nk.iter().zip(&dk).map(|(n, d)| n / d).collect();
        let mut group = vec![0.0; self.compiled.groups];
        for (k, &(_, _, s, g)) in self.compiled.terms.iter().enumerate() {
            group[g] += s * e[k];
        }
        let value = group.iter().map(|g| g.abs()).sum();
        let coef = self
            .compiled
            .terms
            .iter()
            .map(|&(_, _, s, g)| if group[g] < 0.0 { -s } else { s })
            .collect();
        Some(Point { value, e, d: dk, coef })
    }

    fn column_gradient(&self, p: &Point, num: &[f64], den: &[f64]) -> f64 {
        (0..self.t()).map(|k| p.coef[k] * (num[k] - p.e[k] * den[k]) / p.d[k]).sum()
    }

    fn gradient(&self, p: &Point) -> Vec<f64> {
        let t = self.t();
        (0..self.codes.len())
            .map(|i| self.column_gradient(p, &self.num[i * t..(i + 1) * t], &self.den[i * t..(i + 1) * t]))
            .collect()
    }

    fn project(&self, z: &[f64], lambda: &mut [f64]) -> Option<Vec<f64>> {
        project(z, &self.rows, &self.rhs, lambda)
    }

    fn residual(&self, w: &[f64]) -> f64 {
        constraint_residual(w, &self.rows, &self.rhs)
    }

    /// Multipliers of the equality constraints fitted on the support.
    fn multipliers(&self, w: &[f64], g: &[f64]) -> Vec<f64> {
        let m = self.rows.len();
        let free: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
        let mut j = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for &i in &free {
            for r in 0..m {
                rhs[r] += self.rows[r][i] * g[i];
                for s in 0..m {
                    j[(r, s)] += self.rows[r][i] * self.rows[s][i];
                }
            }
        }
        solve_regularized(j, rhs).iter().copied().collect()
    }
}

fn constraint_residual(w: &[f64], rows: &[Vec<f64>], rhs: &[f64]) -> f64 {
    rows.iter()
        .zip(rhs)
        .map(|(row, c)| (row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() - c).abs())
        .fold(0.0, f64::max)
}

fn solve_regularized(mut j: DMatrix<f64>, rhs: DVector<f64>) -> DVector<f64> {
    let m = j.nrows();
    let scale = (0..m).map(|r| j[(r, r)]).fold(0.0, f64::max).max(1.0);
    for r in 0..m {
        j[(r, r)] += 1e-12 * scale;
    }
    match j.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => j.pseudo_inverse(1e-14).map(|p| p * &rhs).unwrap_or_else(|_| DVector::zeros(m)),
    }
}

/// Euclidean projection of `z` onto `{w ≥ 0, rows·w = rhs}` by a damped
/// Newton method on the dual, started from the multipliers in `warm`, which
/// receive the final multipliers on success.
fn project(z: &[f64], rows: &[Vec<f64>], rhs: &[f64], warm: &mut [f64]) -> Option<Vec<f64>> {
    let m = rows.len();
    let k = z.len();
    let primal = |lambda: &[f64]| -> Vec<f64> {
        (0..k).map(|i| (z[i] + (0..m).map(|r| lambda[r] * rows[r][i]).sum::<f64>()).max(0.0)).collect()
    };
    let residual = |w: &[f64]| -> Vec<f64> {
        rows.iter().zip(rhs).map(|(row, c)| c - row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()).collect()
    };
    let dual = |lambda: &[f64], w: &[f64], r: &[f64]| -> f64 {
        0.5 * w.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            + lambda.iter().zip(r).map(|(l, ri)| l * ri).sum::<f64>()
    };
    let mut lambda = warm.to_vec();
    let mut w = primal(&lambda);
    let mut r = residual(&w);
    for _ in 0..200 {
        if r.iter().all(|x| x.abs() < 1e-13) {
            break;
        }
        let mut j = DMatrix::<f64>::zeros(m, m);
        for i in (0..k).filter(|&i| w[i] > 0.0) {
            for a in 0..m {
                for b in 0..m {
                    j[(a, b)] += rows[a][i] * rows[b][i];
                }
            }
        }
        let step = solve_regularized(j, DVector::from_column_slice(&r));
        let slope: f64 = step.iter().zip(&r).map(|(s, ri)| s * ri).sum();
        let q0 = dual(&lambda, &w, &r);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = lambda.iter().zip(step.iter()).map(|(l, s)| l + t * s).collect();
            let tw = primal(&trial);
            let tr = residual(&tw);
            if dual(&trial, &tw, &tr) >= q0 + 1e-4 * t * slope || t < 1e-12 {
                lambda = trial;
                w = tw;
                r = tr;
                break;
            }
            t *= 0.5;
        }
    }
    if r.iter().any(|x| x.abs() >= 1e-11) {
        return None;
    }
    warm.copy_from_slice(&lambda);
    Some(w)
}

/// Sequential uniforms from one random stream.
struct Draws {
    rs: RandomSource,
    next: u64,
}

impl Draws {
    fn word(&mut self) -> u64 {
        self.next += 1;
        self.rs.word(self.next - 1)
    }

    fn uniform(&mut self) -> f64 {
        self.next += 1;
        self.rs.draw_uniform(self.next - 1)
    }
}

struct RunResult {
    value: f64,
    codes: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

/// Per-site map codes with every delay Early (`late = false`) or Late.
fn uniform_delay_code(game: &GameSpec, outcomes: u64, late: bool) -> usize {
    let n = game.n();
    let mask = (1u64 << n) - 1;
    let mut code = outcomes & mask;
    if late {
        code |= mask << n;
    }
    if game.kind() == Kind::EmissionTime {
        code |= (outcomes >> n & mask) << (2 * n);
    }
    code as usize
}

fn ascend(problem: &Problem, mut w: Vec<f64>, iterations: usize) -> Option<(Vec<f64>, Point)> {
    let mut p = problem.point(&w)?;
    let mut lambda = vec![0.0; problem.rows.len()];
    let mut step = 1.0;
    let mut stalled = 0;
    for _ in 0..iterations {
        let g = problem.gradient(&p);
        let mut gain = None;
        while step > 1e-10 {
            let z: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            if let Some(w2) = problem.project(&z, &mut lambda) {
                if let Some(p2) = problem.point(&w2) {
                    if p2.value > p.value + 1e-13 {
                        gain = Some(p2.value - p.value);
                        w = w2;
                        p = p2;
                        step = (step * 2.0).min(1e3);
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        match gain {
            None => break,
            Some(d) if d < 1e-10 => {
                stalled += 1;
                if stalled == 5 {
                    break;
                }
            }
            Some(_) => stalled = 0,
        }
    }
    Some((w, p))
}

/// Joint vertices as (site 1 code, site 2 code).
type Support = Vec<(usize, usize)>;

fn run_restart(
    game: &GameSpec,
    compiled: &Compiled,
    budget: &Budget,
    restart: usize,
    seed_mix: Option<&[((usize, usize), f64)]>,
) -> Option<RunResult> {
    const ENTERING: usize = 16;
    const PRICING_SAMPLE: usize = 1 << 14;
    let mut draws = Draws { rs: RandomSource::new(budget.seed, restart as u64), next: 0 };
    let count = compiled.tables.len();
    let mask = count as u64 - 1;
    let mut problem = Problem::new(compiled);
    let mut present = HashSet::new();
    let mut z = Vec::new();
    let mut add = |problem: &mut Problem, a: usize, b: usize, weight: f64, z: &mut Vec<f64>| {
        if present.insert((a, b)) {
            problem.push(a, b);
            z.push(weight);
        }
    };
    for late in [false, true] {
        let (oa, ob) = (draws.word(), draws.word());
        let a = uniform_delay_code(game, oa, late);
        let b = uniform_delay_code(game, ob, late);
        add(&mut problem, a, b, 0.0, &mut z);
    }
    match seed_mix {
        Some(mix) => {
            for &((a, b), wt) in mix {
                add(&mut problem, a, b, wt, &mut z);
            }
        }
        None => {
            for _ in 0..budget.support {
                let (a, b) = ((draws.word() & mask) as usize, (draws.word() & mask) as usize);
                let wt = -(1.0 - draws.uniform()).ln();
                add(&mut problem, a, b, wt, &mut z);
            }
        }
    }
    let total: f64 = z.iter().sum();
    if total > 0.0 {
        z.iter_mut().for_each(|v| *v /= total);
    }
    let mut lambda = vec![0.0; problem.rows.len()];
    let mut w = problem.project(&z, &mut lambda)?;
    if problem.point(&w).is_none() {
        // fall back to the balanced anchor mixture
        let mut anchor = vec![0.0; w.len()];
        anchor[0] = 0.5;
        anchor[1] = 0.5;
        w = problem.project(&anchor, &mut lambda)?;
    }
    let mut best: Option<(f64, Support, Vec<f64>)> = None;
    let t = compiled.terms.len();
    let (mut num, mut den, mut con) = (vec![0.0; t], vec![0.0; t], vec![0.0; t]);
    for round in 0..budget.rounds.max(1) {
        let (w2, p) = ascend(&problem, w, budget.iterations)?;
        w = w2;
        if best.as_ref().is_none_or(|(v, _, _)| p.value > *v) && problem.residual(&w) < FEASIBILITY_TOLERANCE {
            best = Some((p.value, problem.codes.clone(), w.clone()));
        }
        if round + 1 == budget.rounds.max(1) {
            break;
        }
        let g = problem.gradient(&p);
        let lambda = problem.multipliers(&w, &g);
        let mut score = |a: usize, b: usize| -> f64 {
            compiled.column(a, b, &mut num, &mut den, &mut con);
            let mut s = problem.column_gradient(&p, &num, &den) - lambda[0];
            if compiled.constrained {
                s -= con.iter().zip(&lambda[1..]).map(|(c, l)| c * l).sum::<f64>();
            }
            s
        };
        let mut entering: Vec<(f64, usize, usize)> = Vec::new();
        let mut consider = |s: f64, a: usize, b: usize, present: &HashSet<(usize, usize)>| {
            if s > 1e-9 && !present.contains(&(a, b)) {
                entering.push((s, a, b));
            }
        };
        if (count as u128) * (count as u128) <= (PRICING_SAMPLE as u128) * 16 {
            for a in 0..count {
                for b in 0..count {
                    let s = score(a, b);
                    consider(s, a, b, &present);
                }
            }
        } else {
            for _ in 0..PRICING_SAMPLE {
                let (a, b) = ((draws.word() & mask) as usize, (draws.word() & mask) as usize);
                let s = score(a, b);
                consider(s, a, b, &present);
            }
        }
        if entering.is_empty() {
            break;
        }
        entering.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        entering.dedup_by(|x, y| (x.1, x.2) == (y.1, y.2));
        // drop idle vertices so the support stays small
        let keep: Vec<bool> = w.iter().enumerate().map(|(i, wi)| *wi > 0.0 || i < 2).collect();
        if keep.iter().filter(|k| !**k).count() > budget.support {
            problem.retain(&keep);
            w = w.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(v, _)| v).collect();
            present = problem.codes.iter().copied().collect();
        }
        for &(_, a, b) in entering.iter().take(ENTERING) {
            if present.insert((a, b)) {
                problem.push(a, b);
                w.push(0.0);
            }
        }
    }
    let (value, codes, weights) = best?;
    Some(RunResult { value, codes, weights })
}

fn to_mixture(game: &GameSpec, codes: &[(usize, usize)], weights: &[f64]) -> MixedStrategy {
    MixedStrategy {
        components: codes
            .iter()
            .zip(weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(&(a, b), &weight)| WeightedVertex {
                weight,
                vertex: DeterministicVertex {
                    site1: game.site_vertex(a as u64),
                    site2: game.site_vertex(b as u64),
                },
            })
            .collect(),
    }
}

fn optimize(game: &GameSpec, budget: &Budget) -> Result<Optimum> {
    let compiled = Compiled::new(game, budget.vertex_limit)?;
    let seed = if budget.model_seed {
        let mix = induced_mixture(game, &crate::lhv::aklz_strategy(), 1024)?;
        let mut codes = Vec::with_capacity(mix.components.len());
        for c in &mix.components {
            let a = game.encode_site(&c.vertex.site1)? as usize;
            let b = game.encode_site(&c.vertex.site2)? as usize;
            codes.push(((a, b), c.weight));
        }
        Some(codes)
    } else {
        None
    };
    let restarts = budget.restarts.max(1);
    let results: Vec<Option<RunResult>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mix = if r == 0 { seed.as_deref() } else { None };
            run_restart(game, &compiled, budget, r, mix)
        })
        .collect();
    let best = results
        .into_iter()
        .flatten()
        .fold(None::<RunResult>, |acc, r| match acc {
            Some(a) if a.value >= r.value => Some(a),
            _ => Some(r),
        })
        .ok_or_else(|| Error::InvalidArgument("no feasible strategy found".into()))?;
    let witness = to_mixture(game, &best.codes, &best.weights);
    let value = game.evaluate(&witness)?;
    let residual = game.residual(&witness)?;
    Ok(Optimum { value, exact: false, witness, residual, restarts })
}

/// Discretizes a local strategy over the game's settings into a mixture of
/// deterministic vertices. Requires complete breakpoints at both sites; the
/// θ integral uses midpoints of `theta_cells` cells split at every
/// breakpoint, the r integral is exact.
pub fn induced_mixture<S1: SiteModel, S2: SiteModel>(
    game: &GameSpec,
    strategy: &LocalStrategy<S1, S2>,
    theta_cells: usize,
) -> Result<MixedStrategy> {
    if !(strategy.site1.r_breakpoints_complete() && strategy.site2.r_breakpoints_complete()) {
        return Err(Error::Unsupported("strategy does not declare complete breakpoints".into()));
    }
    if theta_cells == 0 {
        return invalid("need at least one θ cell");
    }
    let (s1, s2) = (game.chain.site1_settings(), game.chain.site2_settings());
    let mut theta_cuts: Vec<f64> = s1
        .iter()
        .flat_map(|s| strategy.site1.theta_breakpoints(*s))
        .chain(s2.iter().flat_map(|s| strategy.site2.theta_breakpoints(*s)))
        .map(crate::setting::reduce_angle)
        .collect();
    let mut weights: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    let mut failure = None;
    let mut r_cuts = Vec::new();
    for_each_piece(0.0, TAU, theta_cells, &mut theta_cuts, |theta, dtheta| {
        r_cuts.clear();
        for s in s1 {
            r_cuts.extend(strategy.site1.r_breakpoints(*s, theta));
        }
        for s in s2 {
            r_cuts.extend(strategy.site2.r_breakpoints(*s, theta));
        }
        for_each_segment(0.0, 1.0, &mut r_cuts, |r, dr| {
            if failure.is_some() {
                return;
            }
            let lambda = HiddenVariable::new(theta, r).expect("midpoint inside rectangle");
            let r1: Vec<LocalResponse> = s1.iter().map(|s| strategy.site1.respond(*s, &lambda)).collect();
            let r2: Vec<LocalResponse> = s2.iter().map(|s| strategy.site2.respond(*s, &lambda)).collect();
            let codes = site_from_responses(game, &r1)
                .and_then(|a| Ok((game.encode_site(&a)?, game.encode_site(&site_from_responses(game, &r2)?)?)));
            match codes {
                Ok(key) => *weights.entry(key).or_insert(0.0) += dtheta / TAU * dr,
                Err(e) => failure = Some(e),
            }
        });
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(MixedStrategy {
        components: weights
            .into_iter()
            .map(|((a, b), weight)| WeightedVertex {
                weight,
                vertex: DeterministicVertex { site1: game.site_vertex(a), site2: game.site_vertex(b) },
            })
            .collect(),
    })
}

fn site_from_responses(game: &GameSpec, responses: &[LocalResponse]) -> Result<SiteVertex> {
    let outcomes: Vec<OutcomeValue> = responses.iter().map(|r| r.outcome).collect();
    let delays: Vec<DelayClass> = responses.iter().map(|r| r.delay).collect();
    if game.kind() != Kind::Detection && responses.iter().any(|r| !r.detected) {
        return Err(Error::Unsupported(format!("{} games have no missed detections", game.model_class.name())));
    }
    let mut v = SiteVertex { outcomes: outcomes.clone(), late_outcomes: Vec::new(), delays: Vec::new(), detected: Vec::new() };
    match game.kind() {
        Kind::Plain => {}
        Kind::Path => {
            if delays.iter().any(|d| *d != delays[0]) {
                return Err(Error::Unsupported("delay depends on the setting".into()));
            }
            v.delays = vec![delays[0]];
        }
        Kind::OutcomesOnly | Kind::Delayed => v.delays = delays,
        Kind::Detection => v.detected = responses.iter().map(|r| r.detected).collect(),
        Kind::EmissionTime => {
            v.delays = delays;
            v.late_outcomes = outcomes;
        }
    }
    Ok(v)
}

/// One site of a mixture, replayed as a hidden-variable model: `r` picks the
/// component, `θ` is ignored.
#[derive(Clone, Debug)]
pub struct WitnessSite {
    settings: Vec<Setting>,
    /// Right ends of the components' r-intervals.
    cumulative: Vec<f64>,
    vertices: Vec<SiteVertex>,
}

impl SiteModel for WitnessSite {
    fn respond(&self, setting: Setting, lambda: &HiddenVariable) -> LocalResponse {
        let Some(k) = self.settings.iter().position(|s| s.approx_eq(setting)) else {
            return LocalResponse::missed();
        };
        let c = self.cumulative.partition_point(|&edge| edge <= lambda.r()).min(self.vertices.len() - 1);
        let v = &self.vertices[c];
        let delay = match v.delays.len() {
            0 => DelayClass::Early,
            1 => v.delays[0],
            _ => v.delays[k],
        };
        if !v.detected.get(k).copied().unwrap_or(true) {
            return LocalResponse::missed();
        }
        LocalResponse::detected(v.outcomes[k], delay)
    }

    fn r_breakpoints(&self, _setting: Setting, _theta: f64) -> Vec<f64> {
        self.cumulative.clone()
    }

    fn r_breakpoints_complete(&self) -> bool {
        true
    }
}

/// Turns a mixture into a local strategy for the simulator. Not available
/// for emission-time realism, whose runs carry two settings per site.
pub fn witness_strategy(game: &GameSpec, s: &MixedStrategy) -> Result<LocalStrategy<WitnessSite, WitnessSite>> {
    if game.kind() == Kind::EmissionTime {
        return Err(Error::Unsupported("two-setting strategies cannot be replayed by the simulator".into()));
    }
    game.check_mixture(s)?;
    let total = s.total_weight();
    let mut acc = 0.0;
    let mut cumulative = Vec::with_capacity(s.components.len());
    for c in &s.components {
        acc += c.weight / total;
        cumulative.push(acc);
    }
    let site = |settings: &[Setting], pick: fn(&DeterministicVertex) -> &SiteVertex| WitnessSite {
        settings: settings.to_vec(),
        cumulative: cumulative.clone(),
        vertices: s.components.iter().map(|c| pick(&c.vertex).clone()).collect(),
    };
    Ok(LocalStrategy::new(
        site(game.chain.site1_settings(), |v| &v.site1),
        site(game.chain.site2_settings(), |v| &v.site2),
    ))
}

/// Plays one run of a replayed witness.
pub fn replay_trial(
    strategy: &LocalStrategy<WitnessSite, WitnessSite>,
    phi: Setting,
    psi: Setting,
    lambda: &HiddenVariable,
) -> (LocalResponse, LocalResponse) {
    let t = run_lhv_trial(strategy, phi, psi, lambda);
    (t.site1, t.site2)
}

/// Self-contained witness file for independent re-evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessExport {
    pub model_class: ModelClass,
    pub site1_settings: Vec<Setting>,
    pub site2_settings: Vec<Setting>,
    pub constraints: ConstraintSet,
    pub value: f64,
    pub residual: f64,
    pub strategy: MixedStrategy,
}

impl WitnessExport {
    pub fn new(game: &GameSpec, strategy: &MixedStrategy) -> Result<Self> {
        Ok(WitnessExport {
            model_class: game.model_class,
            site1_settings: game.chain.site1_settings().to_vec(),
            site2_settings: game.chain.site2_settings().to_vec(),
            constraints: game.constraints.clone(),
            value: game.evaluate(strategy)?,
            residual: game.residual(strategy)?,
            strategy: strategy.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("witness serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("bad witness file: {e}")))
    }

    /// Rebuilds the game the witness was exported from.
    pub fn game(&self) -> Result<GameSpec> {
        let chain = SettingsChain::with_settings(self.site1_settings.clone(), self.site2_settings.clone())?;
        let game = GameSpec { model_class: self.model_class, chain, constraints: self.constraints.clone() };
        game.validate()?;
        Ok(game)
    }
}

/// Formalization notes printed with emission-time reports.
pub const EMISSION_TIME_GAME: &str = "each run draws independent early and late settings per site; \
the delay depends on the early setting; early detections report the early-setting outcome, \
late detections the late-setting outcome; EE and LL coincidence masses agree for every term";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub model_class: ModelClass,
    pub terms: usize,
    pub bound: f64,
    pub best: f64,
    /// `bound − best`.
    pub margin: f64,
    pub exact: bool,
    pub pass: bool,
    pub residual: f64,
    pub restarts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formalization: Option<String>,
}

/// Compares the best strategy found with the closed-form bound. Exact games
/// pass when the maximum equals the bound; searched games pass when nothing
/// above the bound was found.
pub fn verify_bound(game: &GameSpec, budget: &Budget) -> Result<BoundReport> {
    let bound = bound_for(&game.model_class, game.terms())?;
    let opt = max_statistic(game, budget)?;
    let pass = if opt.exact {
        (opt.value - bound).abs() <= 1e-9
    } else {
        opt.value <= bound + 1e-6 && opt.residual < FEASIBILITY_TOLERANCE
    };
    Ok(BoundReport {
        model_class: game.model_class,
        terms: game.terms(),
        bound,
        best: opt.value,
        margin: bound - opt.value,
        exact: opt.exact,
        pass,
        residual: opt.residual,
        restarts: opt.restarts,
        formalization: (game.kind() == Kind::EmissionTime).then(|| EMISSION_TIME_GAME.to_string()),
    })
}

/// A chain with uniformly random settings, one per `index`.
pub fn random_chain(terms: usize, rs: &RandomSource, index: u64) -> Result<SettingsChain> {
    if terms < 4 || !terms.is_multiple_of(2) {
        return invalid(format!("chain needs an even number of terms >= 4, got {terms}"));
    }
    let n = terms / 2;
    let draw = |k: usize| Setting::new(TAU * rs.draw_uniform(index * 2 * n as u64 + k as u64));
    SettingsChain::with_settings((0..n).map(draw).collect(), (n..2 * n).map(draw).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::chain_settings;
    use std::f64::consts::SQRT_2;

    fn game(mc: ModelClass, terms: usize) -> GameSpec {
        GameSpec::new(mc, chain_settings(terms).unwrap()).unwrap()
    }

    fn small_budget() -> Budget {
        Budget { restarts: 8, ..Budget::default() }
    }

    #[test]
    fn vertex_counts() {
        let g = game(ModelClass::PlainLocalRealism, 4);
        assert_eq!((g.site_vertex_count(), g.vertex_count()), (4, 16));
        assert_eq!(game(ModelClass::PathRealism, 4).site_vertex_count(), 8);
        assert_eq!(game(ModelClass::EmissionTimeRealism, 4).site_vertex_count(), 64);
        assert_eq!(game(ModelClass::OutcomesOnly, 4).site_vertex_count(), 16);
        assert_eq!(game(ModelClass::EmissionTimeRealism, 6).vertex_count(), 262_144);
        let all = enumerate_vertices(&game(ModelClass::PathRealism, 4), 1 << 10).unwrap();
        assert_eq!(all.len(), 64);
        assert_eq!(all.iter().collect::<HashSet<_>>().len(), 64);
    }

    #[test]
    fn enumeration_limit() {
        let g = game(ModelClass::EmissionTimeRealism, 6);
        match enumerate_vertices(&g, 1000) {
            Err(Error::ResourceLimit { requested, limit }) => assert_eq!((requested, limit), (262_144, 1000)),
            other => panic!("expected resource limit, got {other:?}"),
        }
    }

    #[test]
    fn codes_round_trip() {
        for mc in [
            ModelClass::PlainLocalRealism,
            ModelClass::PathRealism,
            ModelClass::OutcomesOnly,
            ModelClass::EmissionTimeRealism,
            ModelClass::Inefficiency { eta: 0.9 },
            ModelClass::Delays { eta: 0.9 },
        ] {
            let g = game(mc, 6);
            for code in 0..g.site_vertex_count() as u64 {
                assert_eq!(g.encode_site(&g.site_vertex(code)).unwrap(), code);
            }
        }
    }

    #[test]
    fn plain_and_path_maxima() {
        for terms in [4, 6, 8, 10] {
            let opt = max_statistic(&game(ModelClass::PlainLocalRealism, terms), &Budget::default()).unwrap();
            assert!(opt.exact);
            assert_eq!(opt.value, terms as f64 - 2.0);
        }
        let g = game(ModelClass::PathRealism, 4);
        let r = verify_bound(&g, &Budget::default()).unwrap();
        assert!(r.pass && r.exact);
        assert_eq!(r.best, 2.0);
        let opt = max_statistic(&g, &Budget::default()).unwrap();
        let m = g.mixture_moments(&opt.witness).unwrap();
        assert!(m.iter().all(|t| t.early_early == 0.5 && t.late_late == 0.5));
    }

    #[test]
    fn plain_maximum_matches_brute_force_over_vertices() {
        let g = game(ModelClass::PlainLocalRealism, 6);
        let brute = enumerate_vertices(&g, 1 << 12)
            .unwrap()
            .into_iter()
            .map(|v| g.evaluate(&MixedStrategy::pure(v)).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(brute, 4.0);
    }

    #[test]
    fn emission_time_vertex_moments() {
        let g = game(ModelClass::EmissionTimeRealism, 4);
        // site 1: Early at setting 0 only; site 2: always Late
        let mut a = g.site_vertex(0);
        a.delays[1] = DelayClass::Late;
        let mut b = g.site_vertex(0);
        b.delays = vec![DelayClass::Late; 2];
        b.late_outcomes[0] = OutcomeValue::Minus;
        let m = g.term_moments(&DeterministicVertex { site1: a, site2: b }).unwrap();
        for (t, mt) in g.chain.terms().iter().zip(&m) {
            assert_eq!(mt.early_early, 0.0);
            assert_eq!(mt.late_late, 0.5);
            let yy = if t.site2 == 0 { -1.0 } else { 1.0 };
            assert_eq!(mt.product, 0.5 * yy);
        }
    }

    #[test]
    fn projection_lands_on_constraints() {
        let rows = vec![vec![1.0; 4], vec![1.0, -1.0, 0.5, 0.0]];
        let w = project(&[0.9, 0.1, 0.3, -0.2], &rows, &[1.0, 0.0], &mut [0.0; 2]).unwrap();
        assert!(w.iter().all(|x| *x >= 0.0));
        assert!(constraint_residual(&w, &rows, &[1.0, 0.0]) < 1e-12);
        // a feasible point projects onto itself
        let p = [0.25, 0.25, 0.0, 0.5];
        let q = project(&p, &rows, &[1.0, 0.0], &mut [0.0; 2]).unwrap();
        assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn delay_model_is_a_feasible_outcomes_only_point() {
        let g = game(ModelClass::OutcomesOnly, 4);
        let mix = induced_mixture(&g, &crate::lhv::aklz_strategy(), 4096).unwrap();
        assert!((mix.total_weight() - 1.0).abs() < 1e-12);
        assert!(g.residual(&mix).unwrap() < 1e-12);
        assert!((g.evaluate(&mix).unwrap() - 2.0 * SQRT_2).abs() < 1e-5);
    }

    #[test]
    fn searched_games_stay_below_bounds() {
        let etr = verify_bound(&game(ModelClass::EmissionTimeRealism, 4), &small_budget()).unwrap();
        assert!(etr.pass, "{etr:?}");
        assert!(etr.best >= 2.0 - 1e-9);
        assert!(etr.formalization.is_some());
        let oo = verify_bound(&game(ModelClass::OutcomesOnly, 4), &small_budget()).unwrap();
        assert!(oo.pass, "{oo:?}");
        assert!(oo.best >= 2.0 * SQRT_2 - 1e-6);
    }

    #[test]
    fn efficiency_games_are_not_searched() {
        let g = game(ModelClass::Inefficiency { eta: 0.9 }, 4);
        assert!(matches!(max_statistic(&g, &Budget::default()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn witness_json_round_trip() {
        let g = game(ModelClass::OutcomesOnly, 4);
        let opt = max_statistic(&g, &small_budget()).unwrap();
        let export = WitnessExport::new(&g, &opt.witness).unwrap();
        let back = WitnessExport::from_json(&export.to_json()).unwrap();
        let g2 = back.game().unwrap();
        assert_eq!(g2.evaluate(&back.strategy).unwrap(), opt.value);
        assert!(g2.residual(&back.strategy).unwrap() < FEASIBILITY_TOLERANCE);
    }

    #[test]
    fn random_chains_are_reproducible() {
        let rs = RandomSource::new(4, 9);
        assert_eq!(random_chain(6, &rs, 3).unwrap(), random_chain(6, &rs, 3).unwrap());
        assert_ne!(random_chain(6, &rs, 3).unwrap(), random_chain(6, &rs, 4).unwrap());
        assert!(random_chain(5, &rs, 0).is_err());
    }
}
