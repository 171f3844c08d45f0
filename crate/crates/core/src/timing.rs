//! Time-tagged detections and coincidence-window postselection.
//!
//! Times are in nanoseconds with `c = 1`, so path lengths appear directly as
//! delays. A photon emitted at `t` is detected at `t + short_arm_delay` when
//! Early and `ΔT` later when Late. Two detections at different sites form a
//! coincidence when `|t1 − t2| < W`.

use std::collections::VecDeque;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lhv::LocalResponse;
use crate::setting::{DelayClass, OutcomeValue, Setting, Site};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterferometerTiming {
    pub short_arm_delay_ns: f64,
    pub path_difference_ns: f64,
    pub window_ns: f64,
}

impl InterferometerTiming {
    pub fn new(short_arm_delay_ns: f64, path_difference_ns: f64, window_ns: f64) -> Result<Self> {
        let t = InterferometerTiming { short_arm_delay_ns, path_difference_ns, window_ns };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.short_arm_delay_ns >= 0.0 && self.short_arm_delay_ns.is_finite()) {
            return invalid(format!("short-arm delay must be >= 0, got {}", self.short_arm_delay_ns));
        }
        if !(self.path_difference_ns > 0.0 && self.path_difference_ns.is_finite()) {
            return invalid(format!("path difference must be > 0, got {}", self.path_difference_ns));
        }
        if !(self.window_ns > 0.0 && self.window_ns < self.path_difference_ns) {
            return invalid(format!(
                "coincidence window must satisfy 0 < W < path difference, got W={} dT={}",
                self.window_ns, self.path_difference_ns
            ));
        }
        Ok(())
    }

    /// Detection time for an emission at `emission_ns`.
    pub fn detection_time(&self, emission_ns: f64, delay: DelayClass) -> f64 {
        let t = emission_ns + self.short_arm_delay_ns;
        match delay {
            DelayClass::Early => t,
            DelayClass::Late => t + self.path_difference_ns,
        }
    }

    /// Smallest emission spacing accepted by [`emit_events`] is anything
    /// strictly above this.
    pub fn min_emission_gap(&self) -> f64 {
        2.0 * self.path_difference_ns
    }
}

impl Default for InterferometerTiming {
    fn default() -> Self {
        InterferometerTiming { short_arm_delay_ns: 10.0, path_difference_ns: 100.0, window_ns: 5.0 }
    }
}

/// Responses of both sites for one emitted pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub emission_ns: f64,
    pub setting1: Setting,
    pub setting2: Setting,
    pub response1: LocalResponse,
    pub response2: LocalResponse,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub site: Site,
    pub trial: u64,
    pub timestamp_ns: f64,
    pub outcome: OutcomeValue,
    pub setting: Setting,
}

/// Converts per-trial responses into time-ordered detection events.
///
/// Emission times must increase by more than `2·ΔT` between consecutive
/// trials so that no detection can pair across trials.
pub fn emit_events(records: &[TrialRecord], timing: &InterferometerTiming) -> Result<Vec<DetectionEvent>> {
    timing.validate()?;
    let gap = timing.min_emission_gap();
    for w in records.windows(2) {
        if !(w[1].emission_ns - w[0].emission_ns > gap) {
            return invalid(format!(
                "emissions of trials {} and {} are {} ns apart, need more than {gap} ns",
                w[0].trial,
                w[1].trial,
                w[1].emission_ns - w[0].emission_ns
            ));
        }
    }
    let mut events = Vec::with_capacity(2 * records.len());
    for rec in records {
        let mut local = [None, None];
        for (slot, site, resp, setting) in [
            (0, Site::One, &rec.response1, rec.setting1),
            (1, Site::Two, &rec.response2, rec.setting2),
        ] {
            if resp.detected {
                local[slot] = Some(DetectionEvent {
                    site,
                    trial: rec.trial,
                    timestamp_ns: timing.detection_time(rec.emission_ns, resp.delay),
                    outcome: resp.outcome,
                    setting,
                });
            }
        }
        match local {
            [Some(a), Some(b)] if b.timestamp_ns < a.timestamp_ns => events.extend([b, a]),
            _ => events.extend(local.into_iter().flatten()),
        }
    }
    Ok(events)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoincidentPair {
    pub site1: DetectionEvent,
    pub site2: DetectionEvent,
}

/// Detection and coincidence counts for one (site, setting).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyEntry {
    pub site: Site,
    pub setting: Setting,
    pub detections: u64,
    pub coincident: u64,
    /// P(coincidence | local detection).
    pub probability: f64,
}

/// Apparent efficiency: `eta` is the minimum of P(coincidence | local
/// detection) over sites and settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub entries: Vec<EfficiencyEntry>,
    pub eta: f64,
}

impl EfficiencyReport {
    fn entry_mut(&mut self, site: Site, setting: Setting) -> &mut EfficiencyEntry {
        let pos = self.entries.iter().position(|e| e.site == site && e.setting.approx_eq(setting));
        let idx = pos.unwrap_or_else(|| {
            self.entries.push(EfficiencyEntry { site, setting, detections: 0, coincident: 0, probability: 0.0 });
            self.entries.len() - 1
        });
        &mut self.entries[idx]
    }

    fn count(&mut self, event: &DetectionEvent, coincident: bool) {
        let e = self.entry_mut(event.site, event.setting);
        e.detections += 1;
        e.coincident += u64::from(coincident);
    }

    fn refresh(&mut self) {
        self.entries.sort_by(|a, b| (a.site, a.setting.radians()).partial_cmp(&(b.site, b.setting.radians())).unwrap());
        for e in &mut self.entries {
            e.probability = if e.detections == 0 { 0.0 } else { e.coincident as f64 / e.detections as f64 };
        }
        self.eta = self.entries.iter().map(|e| e.probability).fold(f64::INFINITY, f64::min);
        if self.entries.is_empty() {
            self.eta = 0.0;
        }
    }

    /// Adds the counts of another report, e.g. from a later batch.
    pub fn merge(&mut self, other: &EfficiencyReport) {
        for o in &other.entries {
            let e = self.entry_mut(o.site, o.setting);
            e.detections += o.detections;
            e.coincident += o.coincident;
        }
        self.refresh();
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Postselection {
    pub pairs: Vec<CoincidentPair>,
    pub efficiency: EfficiencyReport,
}

/// Pairs detections from opposite sites closer than the window.
///
/// Events are expected in timestamp order; unsorted input is sorted first.
/// Each detection joins at most one pair, matched to the earliest open
/// detection of the other site.
pub fn postselect(events: &[DetectionEvent], timing: &InterferometerTiming) -> Postselection {
    let sorted_storage;
    let events = if events.windows(2).all(|w| w[0].timestamp_ns <= w[1].timestamp_ns) {
        events
    } else {
        let mut v = events.to_vec();
        v.sort_by(|a, b| a.timestamp_ns.total_cmp(&b.timestamp_ns));
        sorted_storage = v;
        &sorted_storage
    };
    let w = timing.window_ns;
    let mut open: [VecDeque<usize>; 2] = [VecDeque::new(), VecDeque::new()];
    let mut matched = vec![false; events.len()];
    let mut pairs = Vec::new();
    for (i, e) in events.iter().enumerate() {
        let other = &mut open[e.site.other().index()];
        while let Some(&j) = other.front() {
            if e.timestamp_ns - events[j].timestamp_ns >= w {
                other.pop_front();
            } else {
                break;
            }
        }
        if let Some(j) = other.pop_front() {
            matched[i] = true;
            matched[j] = true;
            let (a, b) = if e.site == Site::One { (*e, events[j]) } else { (events[j], *e) };
            pairs.push(CoincidentPair { site1: a, site2: b });
        } else {
            open[e.site.index()].push_back(i);
        }
    }
    let mut efficiency = EfficiencyReport::default();
    for (e, &m) in events.iter().zip(&matched) {
        efficiency.count(e, m);
    }
    efficiency.refresh();
    Postselection { pairs, efficiency }
}

#[derive(Serialize, Deserialize)]
struct CsvEvent {
    site: u8,
    trial: u64,
    timestamp_ns: f64,
    outcome: i8,
    setting_rad: f64,
}

/// Writes events as CSV with columns `site,trial,timestamp_ns,outcome,setting_rad`.
pub fn write_events_csv<W: Write>(writer: W, events: &[DetectionEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for e in events {
        w.serialize(CsvEvent {
            site: e.site.into(),
            trial: e.trial,
            timestamp_ns: e.timestamp_ns,
            outcome: e.outcome.value(),
            setting_rad: e.setting.radians(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads events written by [`write_events_csv`].
pub fn read_events_csv<R: Read>(reader: R) -> Result<Vec<DetectionEvent>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut events = Vec::new();
    for row in r.deserialize() {
        let row: CsvEvent = row?;
        events.push(DetectionEvent {
            site: Site::try_from(row.site).map_err(crate::Error::InvalidArgument)?,
            trial: row.trial,
            timestamp_ns: row.timestamp_ns,
            outcome: OutcomeValue::from_i8(row.outcome)?,
            setting: Setting::new(row.setting_rad),
        });
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resp(x: i8, delay: DelayClass) -> LocalResponse {
        LocalResponse::detected(OutcomeValue::from_i8(x).unwrap(), delay)
    }

    fn record(trial: u64, emission: f64, d1: DelayClass, d2: DelayClass) -> TrialRecord {
        TrialRecord {
            trial,
            emission_ns: emission,
            setting1: Setting::new(0.0),
            setting2: Setting::new(1.0),
            response1: resp(1, d1),
            response2: resp(-1, d2),
        }
    }

    #[test]
    fn timing_validation() {
        assert!(InterferometerTiming::new(10.0, 100.0, 5.0).is_ok());
        assert!(InterferometerTiming::new(10.0, 100.0, 100.0).is_err());
        assert!(InterferometerTiming::new(10.0, 0.0, 5.0).is_err());
        assert!(InterferometerTiming::new(-1.0, 100.0, 5.0).is_err());
        assert!(InterferometerTiming::new(0.0, 100.0, 0.0).is_err());
    }

    #[test]
    fn early_early_timestamps() {
        let timing = InterferometerTiming::new(10.0, 100.0, 5.0).unwrap();
        let ev = emit_events(&[record(0, 0.0, DelayClass::Early, DelayClass::Early)], &timing).unwrap();
        assert_eq!(ev.len(), 2);
        assert_eq!((ev[0].timestamp_ns, ev[1].timestamp_ns), (10.0, 10.0));
    }

    #[test]
    fn mixed_delays_differ_by_path_difference() {
        let timing = InterferometerTiming::new(10.0, 100.0, 5.0).unwrap();
        let ev = emit_events(&[record(0, 0.0, DelayClass::Late, DelayClass::Early)], &timing).unwrap();
        assert_eq!(ev[0].site, Site::Two);
        assert_eq!(ev[1].timestamp_ns - ev[0].timestamp_ns, 100.0);
        let ps = postselect(&ev, &timing);
        assert!(ps.pairs.is_empty());
    }

    #[test]
    fn undetected_response_emits_nothing() {
        let timing = InterferometerTiming::default();
        let mut rec = record(0, 0.0, DelayClass::Early, DelayClass::Early);
        rec.response2 = LocalResponse::missed();
        let ev = emit_events(&[rec], &timing).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].site, Site::One);
    }

    #[test]
    fn emission_gap_is_enforced() {
        let timing = InterferometerTiming::new(10.0, 100.0, 5.0).unwrap();
        let ok = [record(0, 0.0, DelayClass::Early, DelayClass::Early), record(1, 200.5, DelayClass::Late, DelayClass::Late)];
        assert!(emit_events(&ok, &timing).is_ok());
        let tight = [record(0, 0.0, DelayClass::Early, DelayClass::Early), record(1, 200.0, DelayClass::Late, DelayClass::Late)];
        assert!(emit_events(&tight, &timing).is_err());
        let backwards = [record(0, 500.0, DelayClass::Early, DelayClass::Early), record(1, 0.0, DelayClass::Late, DelayClass::Late)];
        assert!(emit_events(&backwards, &timing).is_err());
    }

    #[test]
    fn hand_built_fixture_has_eta_three_quarters() {
        // four trials; the last one is EL, so each site has 4 detections, 3 coincident
        let timing = InterferometerTiming::new(10.0, 100.0, 5.0).unwrap();
        let recs = [
            record(0, 0.0, DelayClass::Early, DelayClass::Early),
            record(1, 1000.0, DelayClass::Late, DelayClass::Late),
            record(2, 2000.0, DelayClass::Early, DelayClass::Early),
            record(3, 3000.0, DelayClass::Early, DelayClass::Late),
        ];
        let ev = emit_events(&recs, &timing).unwrap();
        assert_eq!(ev.len(), 8);
        let ps = postselect(&ev, &timing);
        assert_eq!(ps.pairs.len(), 3);
        assert_eq!(ps.efficiency.entries.len(), 2);
        for e in &ps.efficiency.entries {
            assert_eq!((e.detections, e.coincident), (4, 3));
        }
        assert_eq!(ps.efficiency.eta, 0.75);
    }

    #[test]
    fn window_boundary_is_strict() {
        let timing = InterferometerTiming::new(0.0, 100.0, 5.0).unwrap();
        let mk = |site, t| DetectionEvent {
            site,
            trial: 0,
            timestamp_ns: t,
            outcome: OutcomeValue::Plus,
            setting: Setting::new(0.0),
        };
        assert!(postselect(&[mk(Site::One, 0.0), mk(Site::Two, 5.0)], &timing).pairs.is_empty());
        assert_eq!(postselect(&[mk(Site::One, 0.0), mk(Site::Two, 4.999)], &timing).pairs.len(), 1);
        // unsorted input is handled
        assert_eq!(postselect(&[mk(Site::Two, 4.0), mk(Site::One, 1.0)], &timing).pairs.len(), 1);
        // same-site detections never pair
        assert!(postselect(&[mk(Site::One, 0.0), mk(Site::One, 1.0)], &timing).pairs.is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let timing = InterferometerTiming::default();
        let recs = [
            record(0, 0.0, DelayClass::Early, DelayClass::Late),
            record(1, 1000.0, DelayClass::Late, DelayClass::Late),
        ];
        let ev = emit_events(&recs, &timing).unwrap();
        let mut buf = Vec::new();
        write_events_csv(&mut buf, &ev).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("site,trial,timestamp_ns,outcome,setting_rad\n"));
        let back = read_events_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ev);
    }
}
