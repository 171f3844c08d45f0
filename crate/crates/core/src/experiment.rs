//! Batch runners: draw trials for every term of a chain from a pair source
//! and reduce them into a [`CorrelationTable`].
//!
//! Trial `t` of term `p` is keyed as `p·trials_per_pair + t`, so results do
//! not depend on how batches are scheduled over threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::SettingsChain;
use crate::error::{invalid, Result};
use crate::inequalities::{CorrelationEntry, CorrelationTable};
use crate::lhv::{run_lhv_trial, LocalResponse, LocalStrategy, SiteModel};
use crate::quantum::{sample_franson_from, Visibility};
use crate::random::{RandomSource, DRAWS_PER_TRIAL};
use crate::setting::{HiddenVariable, Setting};
use crate::tally::{CoincidenceTally, PairSample};
use crate::timing::{emit_events, postselect, EfficiencyReport, InterferometerTiming, TrialRecord};

const BATCH: u64 = 1 << 15;

/// Anything that produces both sites' responses for one trial.
///
/// `draws` are the uniforms reserved for the trial.
pub trait PairSource: Sync {
    fn responses(&self, phi: Setting, psi: Setting, draws: &[f64; DRAWS_PER_TRIAL]) -> (LocalResponse, LocalResponse);

    fn sample(&self, phi: Setting, psi: Setting, draws: &[f64; DRAWS_PER_TRIAL]) -> PairSample {
        let (a, b) = self.responses(phi, psi, draws);
        PairSample { site1: a.detection(), site2: b.detection() }
    }
}

/// Exact Franson sampler.
#[derive(Clone, Copy, Debug)]
pub struct QuantumSource {
    pub visibility: Visibility,
}

impl PairSource for QuantumSource {
    fn responses(&self, phi: Setting, psi: Setting, draws: &[f64; DRAWS_PER_TRIAL]) -> (LocalResponse, LocalResponse) {
        let e = sample_franson_from(phi, psi, self.visibility, draws);
        (LocalResponse::detected(e.x1, e.d1), LocalResponse::detected(e.x2, e.d2))
    }
}

/// A local strategy fed with uniformly drawn hidden variables.
pub struct LhvSource<'a, S1, S2>(pub &'a LocalStrategy<S1, S2>);

impl<S1: SiteModel, S2: SiteModel> PairSource for LhvSource<'_, S1, S2> {
    fn responses(&self, phi: Setting, psi: Setting, draws: &[f64; DRAWS_PER_TRIAL]) -> (LocalResponse, LocalResponse) {
        let lambda = HiddenVariable::from_uniforms(draws[0], draws[1]);
        let t = run_lhv_trial(self.0, phi, psi, &lambda);
        (t.site1, t.site2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    /// One tally per chain term, in term order.
    pub tallies: Vec<CoincidenceTally>,
    pub table: CorrelationTable,
}

impl ExperimentResult {
    pub fn total(&self) -> CoincidenceTally {
        let mut all = CoincidenceTally::default();
        for t in &self.tallies {
            all.merge(t);
        }
        all
    }

    pub fn coincidence_fraction(&self) -> f64 {
        self.total().coincidence_fraction()
    }
}

fn batches(trials: u64) -> impl ParallelIterator<Item = (u64, u64)> {
    let n = trials.div_ceil(BATCH);
    (0..n).into_par_iter().map(move |b| (b * BATCH, ((b + 1) * BATCH).min(trials)))
}

/// Tallies `trials` trials of `source` at one setting pair.
pub fn tally_pair<P: PairSource + ?Sized>(
    source: &P,
    phi: Setting,
    psi: Setting,
    trials: u64,
    first_trial: u64,
    rs: &RandomSource,
) -> CoincidenceTally {
    let parts: Vec<CoincidenceTally> = batches(trials)
        .map(|(lo, hi)| {
            let mut t = CoincidenceTally::default();
            for k in lo..hi {
                let draws = rs.trial_uniforms(first_trial + k);
                t.record(&source.sample(phi, psi, &draws));
            }
            t
        })
        .collect();
    let mut total = CoincidenceTally::default();
    for p in &parts {
        total.merge(p);
    }
    total
}

fn table_from_tallies(chain: &SettingsChain, tallies: &[CoincidenceTally]) -> Result<CorrelationTable> {
    let mut table = CorrelationTable::new();
    for ((a, b), t) in chain.pairs().zip(tallies) {
        table.insert(CorrelationEntry::from_tally(a, b, t)?);
    }
    Ok(table)
}

/// Runs `trials_per_pair` trials at every term of the chain, counting a
/// coincidence whenever both sites detect with equal delay class.
pub fn run_chain_experiment<P: PairSource + ?Sized>(
    source: &P,
    chain: &SettingsChain,
    trials_per_pair: u64,
    rs: &RandomSource,
) -> Result<ExperimentResult> {
    if trials_per_pair == 0 {
        return invalid("need at least one trial per setting pair");
    }
    let tallies: Vec<CoincidenceTally> = chain
        .pairs()
        .enumerate()
        .map(|(p, (a, b))| tally_pair(source, a, b, trials_per_pair, p as u64 * trials_per_pair, rs))
        .collect();
    let table = table_from_tallies(chain, &tallies)?;
    Ok(ExperimentResult { tallies, table })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedExperimentResult {
    /// Per-term tallies built from window coincidences; EE/LL splits are not
    /// observable from timestamps and stay zero.
    pub tallies: Vec<CoincidenceTally>,
    pub table: CorrelationTable,
    pub efficiency: EfficiencyReport,
}

/// Like [`run_chain_experiment`], but coincidences are found by converting
/// responses into timestamps and applying the coincidence window.
pub fn run_timed_experiment<P: PairSource + ?Sized>(
    source: &P,
    chain: &SettingsChain,
    trials_per_pair: u64,
    rs: &RandomSource,
    timing: &InterferometerTiming,
) -> Result<TimedExperimentResult> {
    timing.validate()?;
    if trials_per_pair == 0 {
        return invalid("need at least one trial per setting pair");
    }
    let spacing = 3.0 * timing.path_difference_ns;
    let mut tallies = Vec::with_capacity(chain.len());
    let mut efficiency = EfficiencyReport::default();
    for (p, (a, b)) in chain.pairs().enumerate() {
        let first = p as u64 * trials_per_pair;
        let parts: Vec<Result<(CoincidenceTally, EfficiencyReport)>> = batches(trials_per_pair)
            .map(|(lo, hi)| {
                let records: Vec<TrialRecord> = (lo..hi)
                    .map(|k| {
                        let trial = first + k;
                        let (r1, r2) = source.responses(a, b, &rs.trial_uniforms(trial));
                        TrialRecord {
                            trial,
                            emission_ns: trial as f64 * spacing,
                            setting1: a,
                            setting2: b,
                            response1: r1,
                            response2: r2,
                        }
                    })
                    .collect();
                let events = emit_events(&records, timing)?;
                let selection = postselect(&events, timing);
                let mut t = CoincidenceTally { trials: hi - lo, ..Default::default() };
                for e in &events {
                    match e.site {
                        crate::Site::One => t.detections1 += 1,
                        crate::Site::Two => t.detections2 += 1,
                    }
                }
                for pair in &selection.pairs {
                    t.add_outcome_pair(pair.site1.outcome, pair.site2.outcome);
                }
                Ok((t, selection.efficiency))
            })
            .collect();
        let mut tally = CoincidenceTally::default();
        for part in parts {
            let (t, eff) = part?;
            tally.merge(&t);
            efficiency.merge(&eff);
        }
        tallies.push(tally);
    }
    let table = table_from_tallies(chain, &tallies)?;
    Ok(TimedExperimentResult { tallies, table, efficiency })
}
