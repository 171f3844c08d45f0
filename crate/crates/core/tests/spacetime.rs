//! Properties of the emission-time premise checker over random geometries.

use franson_core::spacetime::{check_emission_time_premise, classify_event_order, CausalRelation, EventKind, StationGeometry};
use proptest::prelude::*;

fn geometry() -> impl Strategy<Value = StationGeometry> {
    (0.1f64..1e4, 0.1f64..1e3, 0.1f64..1e4, 0.0f64..50.0).prop_map(|(dt, md, sw, lat)| {
        StationGeometry::new(dt, md, sw).unwrap().with_latency(lat).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn premise_is_monotone(g in geometry(), grow in 0.0f64..1e3, shrink in 0.0f64..1.0) {
        let base = check_emission_time_premise(&g);
        let longer = StationGeometry { path_difference_ns: g.path_difference_ns + grow, ..g };
        let closer = StationGeometry { modulator_to_detector_ns: g.modulator_to_detector_ns * (1.0 - shrink).max(1e-3), ..g };
        let faster = StationGeometry { setting_switch_period_ns: g.setting_switch_period_ns * (1.0 - shrink).max(1e-3), ..g };
        for better in [longer, closer, faster] {
            let c = check_emission_time_premise(&better);
            prop_assert!(c.margin_ns >= base.margin_ns);
            prop_assert!(!base.satisfied || c.satisfied);
        }
    }

    #[test]
    fn relations_are_antisymmetric_and_follow_the_margin(g in geometry()) {
        let tl = classify_event_order(&g);
        for pr in &tl.relations {
            prop_assert_eq!(tl.relation(pr.second, pr.first), pr.relation.reversed());
            prop_assert_eq!(tl.relation(pr.first, pr.second), pr.relation);
        }
        let choice = tl.event(EventKind::LateSettingChoice).time_ns;
        let detection = tl.event(EventKind::EarlyDetection).time_ns;
        prop_assert_eq!(choice > detection, tl.premise.margin_ns > 0.0);
        if tl.premise.satisfied {
            prop_assert!(tl.event(EventKind::LateSettingReadoff).time_ns > detection);
        }
        prop_assert_eq!(
            tl.relation(EventKind::EarlySettingReadoff, EventKind::EarlyDetection),
            CausalRelation::Before
        );
    }
}
