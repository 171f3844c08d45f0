//! Modified interferometer layouts, modelled by their selection structure.
//!
//! Every variant has the same coincident correlation `v·cos(φ+ψ)`; they
//! differ in which trials end up coincident and hence in which model class
//! applies.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chain::SettingsChain;
use crate::error::{invalid, Result};
use crate::experiment::{run_chain_experiment, PairSource};
use crate::inequalities::{evaluate, CorrelationTable, ModelClass, Verdict};
use crate::lhv::LocalResponse;
use crate::quantum::{franson_correlation, sample_franson_from, Visibility};
use crate::random::{RandomSource, DRAWS_PER_TRIAL};
use crate::setting::{DelayClass, OutcomeValue, Setting};
use crate::tally::CoincidenceTally;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetupVariant {
    Franson,
    PolarizationEntangled,
    SwitchedMirrors,
    CrossCoupled,
}

impl SetupVariant {
    pub const ALL: [SetupVariant; 4] = [
        SetupVariant::Franson,
        SetupVariant::PolarizationEntangled,
        SetupVariant::SwitchedMirrors,
        SetupVariant::CrossCoupled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SetupVariant::Franson => "franson",
            SetupVariant::PolarizationEntangled => "polarization-entangled",
            SetupVariant::SwitchedMirrors => "switched-mirrors",
            SetupVariant::CrossCoupled => "cross-coupled",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .map_or_else(|| invalid(format!("unknown setup variant '{name}'")), Ok)
    }

    pub fn model_class(self) -> ModelClass {
        match self {
            SetupVariant::Franson => ModelClass::EmissionTimeRealism,
            SetupVariant::PolarizationEntangled | SetupVariant::SwitchedMirrors => ModelClass::PlainLocalRealism,
            SetupVariant::CrossCoupled => ModelClass::PathRealism,
        }
    }

    /// Whether the path taken is an EPR element of reality in this layout.
    pub fn path_is_epr_real(self) -> bool {
        !matches!(self, SetupVariant::Franson)
    }
}

impl fmt::Display for SetupVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn coin(u: f64) -> OutcomeValue {
    if u < 0.5 {
        OutcomeValue::Plus
    } else {
        OutcomeValue::Minus
    }
}

fn delay_bit(u: f64) -> DelayClass {
    if u < 0.5 {
        DelayClass::Early
    } else {
        DelayClass::Late
    }
}

/// Trial source for one layout.
///
/// Draw usage: `[0]` delay bit, `[1]`/`[2]` outcomes, `[3]` routing,
/// `[4]` receiving site for misrouted pairs.
#[derive(Clone, Copy, Debug)]
pub struct SetupSource {
    pub variant: SetupVariant,
    pub visibility: Visibility,
}

impl SetupSource {
    pub fn new(variant: SetupVariant, visibility: Visibility) -> Self {
        SetupSource { variant, visibility }
    }

    fn correlated(&self, phi: Setting, psi: Setting, draws: &[f64; DRAWS_PER_TRIAL]) -> (LocalResponse, LocalResponse) {
        let delay = delay_bit(draws[0]);
        let x1 = coin(draws[1]);
        let p_equal = 0.5 * (1.0 + franson_correlation(phi, psi, self.visibility));
        let x2 = if draws[2] < p_equal { x1 } else { x1.flip() };
        (LocalResponse::detected(x1, delay), LocalResponse::detected(x2, delay))
    }
}

impl PairSource for SetupSource {
    fn responses(&self, phi: Setting, psi: Setting, draws: &[f64; DRAWS_PER_TRIAL]) -> (LocalResponse, LocalResponse) {
        match self.variant {
            SetupVariant::Franson => {
                let e = sample_franson_from(phi, psi, self.visibility, draws);
                (LocalResponse::detected(e.x1, e.d1), LocalResponse::detected(e.x2, e.d2))
            }
            SetupVariant::PolarizationEntangled | SetupVariant::SwitchedMirrors => self.correlated(phi, psi, draws),
            SetupVariant::CrossCoupled => {
                if draws[3] < 0.5 {
                    self.correlated(phi, psi, draws)
                } else {
                    // both photons reach one station, which registers a single click
                    let hit = LocalResponse::detected(coin(draws[1]), delay_bit(draws[0]));
                    if draws[4] < 0.5 {
                        (hit, LocalResponse::missed())
                    } else {
                        (LocalResponse::missed(), hit)
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetupRun {
    pub variant: SetupVariant,
    pub tallies: Vec<CoincidenceTally>,
    pub table: CorrelationTable,
    pub coincidence_fraction: f64,
    pub verdict: Verdict,
}

/// Runs `trials_per_pair` trials at every chain term and judges the result
/// against the variant's model class.
pub fn simulate_setup(
    variant: SetupVariant,
    chain: &SettingsChain,
    vis: Visibility,
    trials_per_pair: u64,
    rs: &RandomSource,
) -> Result<SetupRun> {
    let source = SetupSource::new(variant, vis);
    let result = run_chain_experiment(&source, chain, trials_per_pair, rs)?;
    let verdict = evaluate(&result.table, chain, &variant.model_class())?;
    Ok(SetupRun {
        variant,
        coincidence_fraction: result.coincidence_fraction(),
        tallies: result.tallies,
        table: result.table,
        verdict,
    })
}
