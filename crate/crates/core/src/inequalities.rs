//! Correlation tables, CHSH and chained Bell statistics, the bound for each
//! local-realist model class, and verdicts comparing the two.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chain::SettingsChain;
use crate::error::{invalid, Result};
use crate::setting::Setting;
use crate::tally::CoincidenceTally;

/// One conditional correlation estimate.
///
/// `count` is the number of coincidences behind the estimate. Analytic
/// entries carry `count = 0` and `std_error = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub setting1: Setting,
    pub setting2: Setting,
    pub estimate: f64,
    pub count: u64,
    pub std_error: f64,
}

impl CorrelationEntry {
    pub fn new(setting1: Setting, setting2: Setting, estimate: f64, count: u64) -> Result<Self> {
        if !(estimate.abs() <= 1.0) {
            return invalid(format!("correlation estimate must lie in [-1, 1], got {estimate}"));
        }
        let std_error = if count > 0 { ((1.0 - estimate * estimate) / count as f64).sqrt() } else { 0.0 };
        Ok(CorrelationEntry { setting1, setting2, estimate, count, std_error })
    }

    pub fn from_tally(setting1: Setting, setting2: Setting, tally: &CoincidenceTally) -> Result<Self> {
        match tally.correlation() {
            Some(e) => Self::new(setting1, setting2, e, tally.coincidences),
            None => invalid(format!("no coincidences recorded at settings ({setting1}, {setting2})")),
        }
    }
}

/// Conditional correlations keyed by setting pair.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    entries: Vec<CorrelationEntry>,
}

impl CorrelationTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces the entry for the entry's setting pair.
    pub fn insert(&mut self, entry: CorrelationEntry) {
        match self
            .entries
            .iter_mut()
            .find(|e| e.setting1.approx_eq(entry.setting1) && e.setting2.approx_eq(entry.setting2))
        {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
    }

    pub fn get(&self, setting1: Setting, setting2: Setting) -> Option<&CorrelationEntry> {
        self.entries.iter().find(|e| e.setting1.approx_eq(setting1) && e.setting2.approx_eq(setting2))
    }

    pub fn entries(&self) -> &[CorrelationEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Analytic table over the chain's pairs.
    pub fn exact(chain: &SettingsChain, correlation: impl Fn(Setting, Setting) -> f64) -> Result<Self> {
        let mut table = Self::new();
        for (a, b) in chain.pairs() {
            table.insert(CorrelationEntry::new(a, b, correlation(a, b), 0)?);
        }
        Ok(table)
    }

    fn chain_entries(&self, chain: &SettingsChain) -> Result<Vec<CorrelationEntry>> {
        chain
            .pairs()
            .map(|(a, b)| {
                self.get(a, b)
                    .copied()
                    .ok_or_else(|| crate::Error::InvalidArgument(format!("table has no entry for settings ({a}, {b})")))
            })
            .collect()
    }
}

/// The two-absolute-value CHSH sum for a four-term chain.
pub fn chsh_statistic(table: &CorrelationTable, chain: &SettingsChain) -> Result<f64> {
    if chain.len() != 4 {
        return invalid(format!("CHSH needs a 4-term chain, got {} terms", chain.len()));
    }
    chained_statistic(table, chain)
}

/// Grouped absolute-value sum over all terms of the chain.
pub fn chained_statistic(table: &CorrelationTable, chain: &SettingsChain) -> Result<f64> {
    let values: Vec<f64> = table.chain_entries(chain)?.iter().map(|e| e.estimate).collect();
    Ok(chain.combine(&values))
}

/// Local-realist model classes, from the weakest to the strongest premises.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum ModelClass {
    /// Outcomes are local functions of setting and hidden variable.
    PlainLocalRealism,
    /// As above, with detection on a subset; `eta` is the efficiency.
    Inefficiency { eta: f64 },
    /// As above, with local delays and a coincidence window; `eta` is the
    /// apparent efficiency.
    Delays { eta: f64 },
    /// The arm taken is a setting-independent realist property.
    PathRealism,
    /// The delay is realist and fixed before the late setting is read off.
    EmissionTimeRealism,
    /// Only outcomes are constrained; delays may depend on the setting.
    OutcomesOnly,
}

impl ModelClass {
    pub fn name(&self) -> &'static str {
        match self {
            ModelClass::PlainLocalRealism => "plain-local-realism",
            ModelClass::Inefficiency { .. } => "inefficiency",
            ModelClass::Delays { .. } => "delays",
            ModelClass::PathRealism => "path-realism",
            ModelClass::EmissionTimeRealism => "emission-time-realism",
            ModelClass::OutcomesOnly => "outcomes-only",
        }
    }

    pub fn eta(&self) -> Option<f64> {
        match *self {
            ModelClass::Inefficiency { eta } | ModelClass::Delays { eta } => Some(eta),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.eta() {
            Some(eta) if !(eta > 0.0 && eta <= 1.0) => invalid(format!("efficiency must lie in (0, 1], got {eta}")),
            _ => Ok(()),
        }
    }

    /// Parses a class name; `eta` is required for the efficiency classes.
    pub fn parse(name: &str, eta: Option<f64>) -> Result<Self> {
        let need_eta = || eta.ok_or_else(|| crate::Error::InvalidArgument(format!("model class {name} needs an efficiency")));
        let mc = match name {
            "plain-local-realism" => ModelClass::PlainLocalRealism,
            "inefficiency" => ModelClass::Inefficiency { eta: need_eta()? },
            "delays" => ModelClass::Delays { eta: need_eta()? },
            "path-realism" => ModelClass::PathRealism,
            "emission-time-realism" => ModelClass::EmissionTimeRealism,
            "outcomes-only" => ModelClass::OutcomesOnly,
            other => return invalid(format!("unknown model class {other}")),
        };
        mc.validate()?;
        Ok(mc)
    }
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.eta() {
            Some(eta) => write!(f, "{}(eta={eta})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

fn check_terms(terms: usize) -> Result<()> {
    if terms < 4 || !terms.is_multiple_of(2) {
        return invalid(format!("chain needs an even number of terms >= 4, got {terms}"));
    }
    Ok(())
}

/// Upper bound of the statistic with `terms` terms under `mc`, clipped at the
/// algebraic maximum `terms`.
pub fn bound_for(mc: &ModelClass, terms: usize) -> Result<f64> {
    mc.validate()?;
    check_terms(terms)?;
    let t = terms as f64;
    let raw = match *mc {
        ModelClass::PlainLocalRealism | ModelClass::PathRealism => t - 2.0,
        ModelClass::Inefficiency { .. } | ModelClass::Delays { .. } if terms != 4 => {
            return invalid(format!("{} bound is defined for 4 terms only, got {terms}", mc.name()));
        }
        ModelClass::Inefficiency { eta } => 4.0 / eta - 2.0,
        ModelClass::Delays { eta } => 6.0 / eta - 4.0,
        ModelClass::EmissionTimeRealism => t - 1.0,
        ModelClass::OutcomesOnly => t,
    };
    Ok(raw.min(t))
}

/// Efficiency at which the class bound equals the quantum CHSH value `2√2`.
pub fn threshold_efficiency(mc: &ModelClass) -> Result<f64> {
    let q = 2.0 * SQRT_2;
    match mc {
        // 4/η − 2 = 2√2
        ModelClass::Inefficiency { .. } => Ok(4.0 / (q + 2.0)),
        // 6/η − 4 = 2√2
        ModelClass::Delays { .. } => Ok(6.0 / (q + 4.0)),
        other => invalid(format!("no efficiency threshold for {}", other.name())),
    }
}

/// Smallest visibility at which the quantum chained value exceeds the
/// emission-time-realism bound: `(terms − 1) / (terms·cos(π/terms))`.
pub fn critical_visibility(terms: usize) -> Result<f64> {
    check_terms(terms)?;
    let t = terms as f64;
    Ok((t - 1.0) / (t * (PI / t).cos()))
}

/// Outcome of comparing a statistic with a class bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub model_class: ModelClass,
    pub terms: usize,
    pub statistic: f64,
    pub bound: f64,
    pub excess: f64,
    /// Quadrature sum of the per-term standard errors.
    pub std_error: f64,
    /// `excess / std_error` under a Gaussian approximation; absent for
    /// analytic tables.
    pub significance: Option<f64>,
    pub violated: bool,
    /// Coincidences summed over all terms.
    pub coincidences: u64,
}

pub fn evaluate(table: &CorrelationTable, chain: &SettingsChain, mc: &ModelClass) -> Result<Verdict> {
    let entries = table.chain_entries(chain)?;
    let bound = bound_for(mc, chain.len())?;
    let values: Vec<f64> = entries.iter().map(|e| e.estimate).collect();
    let statistic = chain.combine(&values);
    let std_error = entries.iter().map(|e| e.std_error * e.std_error).sum::<f64>().sqrt();
    let excess = statistic - bound;
    Ok(Verdict {
        model_class: *mc,
        terms: chain.len(),
        statistic,
        bound,
        excess,
        std_error,
        significance: (std_error > 0.0).then(|| excess / std_error),
        violated: excess > 0.0,
        coincidences: entries.iter().map(|e| e.count).sum(),
    })
}
