use cxflow_core::config::{parse_config, ScenarioConfig};
use cxflow_core::control::{ControllerKind, EventKind, EventSpec};
use cxflow_core::demand::geh;
use cxflow_core::metrics::congestion_level;
use cxflow_core::rng::{substream, Substream};
use cxflow_core::sim::{RandomPolicy, Simulation};
use cxflow_core::stream::Mode;
use cxflow_core::vehicle::VehicleId;
use proptest::prelude::*;
use std::collections::BTreeMap;

fn scenario(demand: f64, rv_rate: f64, controller: &str) -> ScenarioConfig {
    parse_config(&format!(
        "controller = {controller}\ndemand.count = {demand}\ndemand.rv_rate = {rv_rate}\nrun.horizon = 250\n"
    ))
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn no_overlap_or_conflict_under_any_controller(
        seed in 0u64..1_000,
        demand in 50.0f64..400.0,
        rv_rate in 0.0f64..=1.0,
        which in 0usize..3,
    ) {
        let controller = ["tl", "notl", "policy"][which];
        let c = scenario(demand, rv_rate, controller);
        let mut sim = Simulation::new(c.sim_config(), seed).unwrap();
        sim.record = false;
        let mut p = RandomPolicy(substream(seed, Substream::Exploration));
        let mut zones: BTreeMap<VehicleId, (f64, cxflow_core::vehicle::Zone)> = BTreeMap::new();
        while !sim.done() {
            sim.step(Some(&mut p)).unwrap();
            prop_assert!(sim.world.overlaps().is_empty());
            prop_assert!(sim.world.conflicts().is_empty());
            for v in &sim.world.vehicles {
                if let Some(&(s, z)) = zones.get(&v.id) {
                    prop_assert!(v.s >= s);
                    prop_assert!(v.zone >= z);
                }
                prop_assert!(v.v >= 0.0);
                zones.insert(v.id, (v.s, v.zone));
            }
        }
    }

    #[test]
    fn geh_is_symmetric_and_zero_only_on_match(m in 0.0f64..5_000.0, c in 0.0f64..5_000.0) {
        prop_assert_eq!(geh(m, c), geh(c, m));
        prop_assert!(geh(m, c) >= 0.0);
        prop_assert_eq!(geh(m, m), 0.0);
        if (m - c).abs() > 1e-9 {
            prop_assert!(geh(m, c) > 0.0);
        }
    }

    #[test]
    fn congestion_level_is_bounded_and_monotone(a in 0.0f64..1_000.0, b in 0.0f64..1_000.0, t in 0.1f64..500.0) {
        let (ca, cb) = (congestion_level(a, t), congestion_level(b, t));
        prop_assert!((0.0..=1.0).contains(&ca));
        if a <= b {
            prop_assert!(ca <= cb);
        }
    }

    #[test]
    fn config_survives_manifest_roundtrip(
        demand in prop::collection::vec(0.0f64..900.0, 12),
        rv_rate in 0.0f64..=1.0,
        twelve in any::<bool>(),
        per in 0.0f64..=1.0,
        horizon in 1u64..100_000,
        seed in any::<u64>(),
        drop_at in prop::option::of(0u64..5_000),
        gamma in 0.0f64..0.999,
    ) {
        let mut c = ScenarioConfig::with_controller(ControllerKind::Tl);
        if twelve {
            c.mode = Mode::TwelveDirection;
            c.lanes = cxflow_core::intersection::IntersectionSpec::uniform_lanes(c.mode, 1);
        }
        for s in c.mode.streams() {
            c.demand.counts[s.index()] = demand[s.index()];
        }
        c.demand.rv_rate = rv_rate;
        c.comm.per = per;
        c.horizon = horizon;
        c.seed = seed;
        c.learn.gamma = gamma;
        if let Some(at) = drop_at {
            c.events.push(EventSpec { kind: EventKind::RvDrop { target_rate: rv_rate / 2.0 }, at_step: at });
        }
        let back = parse_config(&c.manifest()).unwrap();
        prop_assert_eq!(&back, &c);
    }
}
