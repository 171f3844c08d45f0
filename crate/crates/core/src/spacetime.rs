//! Causal-ordering checks for the emission-time premise.
//!
//! One spatial dimension with `c = 1`: the phase modulator sits at `x = 0`
//! and the detectors at `x = d`, where `d` is the modulator-to-detector light
//! travel time. The photon passing the modulator on the short arm reads off
//! the early setting at `t = 0`; on the long arm it reads off the late
//! setting at `t = ΔT`. The premise holds when a fresh setting is chosen
//! strictly between the early detection and the late-setting readoff.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationGeometry {
    pub path_difference_ns: f64,
    pub modulator_to_detector_ns: f64,
    /// May be infinite for static settings.
    pub setting_switch_period_ns: f64,
    #[serde(default)]
    pub detector_latency_ns: f64,
}

impl StationGeometry {
    pub fn new(path_difference_ns: f64, modulator_to_detector_ns: f64, setting_switch_period_ns: f64) -> Result<Self> {
        let g = StationGeometry {
            path_difference_ns,
            modulator_to_detector_ns,
            setting_switch_period_ns,
            detector_latency_ns: 0.0,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_latency(mut self, latency_ns: f64) -> Result<Self> {
        self.detector_latency_ns = latency_ns;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_positive = |v: f64| v > 0.0 && v.is_finite();
        if !finite_positive(self.path_difference_ns) || !finite_positive(self.modulator_to_detector_ns) {
            return invalid("path difference and modulator-to-detector delay must be finite and > 0");
        }
        if !(self.setting_switch_period_ns > 0.0) {
            return invalid("setting switch period must be > 0");
        }
        if !(self.detector_latency_ns >= 0.0 && self.detector_latency_ns.is_finite()) {
            return invalid("detector latency must be finite and >= 0");
        }
        Ok(())
    }

    /// Time from a setting readoff to the detection it can influence.
    pub fn setting_delay_ns(&self) -> f64 {
        self.modulator_to_detector_ns + self.detector_latency_ns
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PremiseCheck {
    pub satisfied: bool,
    /// `ΔT − setting delay − switch period`.
    pub margin_ns: f64,
}

pub fn check_emission_time_premise(g: &StationGeometry) -> PremiseCheck {
    let room = g.path_difference_ns - g.setting_delay_ns();
    let margin_ns = room - g.setting_switch_period_ns;
    PremiseCheck { satisfied: room > 0.0 && g.setting_switch_period_ns < room, margin_ns }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    EarlySettingReadoff,
    EarlyDetection,
    /// Latest moment a fresh setting can be chosen for the late readoff.
    LateSettingChoice,
    LateSettingReadoff,
    LateDetection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineEvent {
    pub kind: EventKind,
    pub time_ns: f64,
    pub position_ns: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CausalRelation {
    /// First event is in the causal past of the second.
    Before,
    /// First event is in the causal future of the second.
    After,
    Spacelike,
    Coincident,
}

impl CausalRelation {
    pub fn reversed(self) -> Self {
        match self {
            CausalRelation::Before => CausalRelation::After,
            CausalRelation::After => CausalRelation::Before,
            other => other,
        }
    }
}

fn relation(a: &TimelineEvent, b: &TimelineEvent) -> CausalRelation {
    let dt = b.time_ns - a.time_ns;
    let dx = (b.position_ns - a.position_ns).abs();
    if dt == 0.0 && dx == 0.0 {
        CausalRelation::Coincident
    } else if dt >= dx {
        CausalRelation::Before
    } else if -dt >= dx {
        CausalRelation::After
    } else {
        CausalRelation::Spacelike
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRelation {
    pub first: EventKind,
    pub second: EventKind,
    pub relation: CausalRelation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventTimeline {
    /// Sorted by time.
    pub events: Vec<TimelineEvent>,
    /// One entry per unordered pair, `first` earlier in `events`.
    pub relations: Vec<PairRelation>,
    pub premise: PremiseCheck,
}

impl EventTimeline {
    pub fn event(&self, kind: EventKind) -> &TimelineEvent {
        self.events.iter().find(|e| e.kind == kind).expect("timeline lists every event kind")
    }

    /// Light-cone relation of `a` to `b`.
    pub fn relation(&self, a: EventKind, b: EventKind) -> CausalRelation {
        relation(self.event(a), self.event(b))
    }
}

pub fn classify_event_order(g: &StationGeometry) -> EventTimeline {
    let d = g.modulator_to_detector_ns;
    let lag = g.setting_delay_ns();
    let mut events = vec![
        TimelineEvent { kind: EventKind::EarlySettingReadoff, time_ns: 0.0, position_ns: 0.0 },
        TimelineEvent { kind: EventKind::EarlyDetection, time_ns: lag, position_ns: d },
        TimelineEvent {
            kind: EventKind::LateSettingChoice,
            time_ns: g.path_difference_ns - g.setting_switch_period_ns,
            position_ns: 0.0,
        },
        TimelineEvent { kind: EventKind::LateSettingReadoff, time_ns: g.path_difference_ns, position_ns: 0.0 },
        TimelineEvent { kind: EventKind::LateDetection, time_ns: g.path_difference_ns + lag, position_ns: d },
    ];
    events.sort_by(|a, b| a.time_ns.total_cmp(&b.time_ns).then(a.kind.cmp(&b.kind)));
    let mut relations = Vec::new();
    for i in 0..events.len() {
        for j in i + 1..events.len() {
            relations.push(PairRelation {
                first: events[i].kind,
                second: events[j].kind,
                relation: relation(&events[i], &events[j]),
            });
        }
    }
    EventTimeline { events, relations, premise: check_emission_time_premise(g) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(dt: f64, md: f64, sw: f64) -> StationGeometry {
        StationGeometry::new(dt, md, sw).unwrap()
    }

    #[test]
    fn worked_examples() {
        let c = check_emission_time_premise(&geom(100.0, 20.0, 50.0));
        assert_eq!(c, PremiseCheck { satisfied: true, margin_ns: 30.0 });
        let c = check_emission_time_premise(&geom(10.0, 20.0, 1.0));
        assert_eq!(c, PremiseCheck { satisfied: false, margin_ns: -11.0 });
        let c = check_emission_time_premise(&geom(100.0, 20.0, 80.0));
        assert_eq!(c, PremiseCheck { satisfied: false, margin_ns: 0.0 });
    }

    #[test]
    fn latency_eats_into_margin() {
        let g = geom(100.0, 20.0, 50.0).with_latency(30.0).unwrap();
        assert_eq!(check_emission_time_premise(&g), PremiseCheck { satisfied: false, margin_ns: 0.0 });
        assert!(geom(100.0, 20.0, 50.0).with_latency(-1.0).is_err());
    }

    #[test]
    fn invalid_geometries() {
        assert!(StationGeometry::new(0.0, 1.0, 1.0).is_err());
        assert!(StationGeometry::new(1.0, -1.0, 1.0).is_err());
        assert!(StationGeometry::new(1.0, 1.0, 0.0).is_err());
        assert!(StationGeometry::new(f64::INFINITY, 1.0, 1.0).is_err());
        assert!(StationGeometry::new(1.0, 1.0, f64::INFINITY).is_ok());
    }

    #[test]
    fn static_settings_never_satisfy() {
        for dt in [1.0, 1e3, 1e9] {
            let g = geom(dt, 0.5, f64::INFINITY);
            let c = check_emission_time_premise(&g);
            assert!(!c.satisfied);
            assert_eq!(c.margin_ns, f64::NEG_INFINITY);
            let tl = classify_event_order(&g);
            assert_eq!(tl.relation(EventKind::LateSettingChoice, EventKind::EarlyDetection), CausalRelation::Before);
        }
    }

    #[test]
    fn satisfied_geometry_orders_late_readoff_after_early_detection() {
        let tl = classify_event_order(&geom(100.0, 20.0, 50.0));
        let order: Vec<EventKind> = tl.events.iter().map(|e| e.kind).collect();
        assert_eq!(
            order,
            vec![
                EventKind::EarlySettingReadoff,
                EventKind::EarlyDetection,
                EventKind::LateSettingChoice,
                EventKind::LateSettingReadoff,
                EventKind::LateDetection
            ]
        );
        assert!(tl.premise.satisfied);
        assert_eq!(tl.relation(EventKind::EarlySettingReadoff, EventKind::EarlyDetection), CausalRelation::Before);
        assert_eq!(tl.relation(EventKind::LateSettingReadoff, EventKind::LateDetection), CausalRelation::Before);
        // 30 ns after the early detection, 20 ns away: inside its forward cone
        assert_eq!(tl.relation(EventKind::EarlyDetection, EventKind::LateSettingChoice), CausalRelation::Before);
    }

    #[test]
    fn margin_grows_with_path_difference() {
        let mut prev = f64::NEG_INFINITY;
        for k in 1..20 {
            let dt = 100.0 * 2f64.powi(k);
            let tl = classify_event_order(&geom(dt, 20.0, 50.0));
            assert!(tl.premise.satisfied);
            assert!(tl.premise.margin_ns > prev);
            prev = tl.premise.margin_ns;
            assert_eq!(tl.events[1].kind, EventKind::EarlyDetection);
        }
    }
}
