use cxflow_core::config::{parse_config, ScenarioConfig};
use cxflow_core::control::{EventKind, EventSpec};
use cxflow_core::experiment::{rollout_csv, run_rollout, summarize};
use cxflow_core::learn::{network_dims, Mlp};
use cxflow_core::rng::{substream, Substream};
use cxflow_core::runlog::RunLog;
use cxflow_core::sim::Simulation;

fn cfg(text: &str) -> ScenarioConfig {
    parse_config(text).unwrap()
}

fn untrained(c: &ScenarioConfig) -> Mlp {
    let input = Simulation::new(c.sim_config(), 0).unwrap().input_width();
    Mlp::new(&network_dims(input), &mut substream(5, Substream::NetInit))
}

#[test]
fn rv_drop_to_current_rate_changes_nothing() {
    let base = cfg("controller = tl\ndemand.count = 250\ndemand.rv_rate = 0.9\nrun.horizon = 400\nrun.seed = 4\n");
    let mut with_event = base.clone();
    with_event.events.push(EventSpec { kind: EventKind::RvDrop { target_rate: 0.9 }, at_step: 150 });
    let a = run_rollout(&base, None, 0).unwrap();
    let b = run_rollout(&with_event, None, 0).unwrap();
    assert_eq!(a.log.steps.len(), b.log.steps.len());
    for (x, y) in a.log.steps.iter().zip(&b.log.steps) {
        assert_eq!(x.vehicles, y.vehicles);
    }
}

#[test]
fn heavy_demand_congests_notl_but_not_light_tl() {
    let heavy = cfg("controller = notl\ndemand.count = 600\nrun.horizon = 1500\nrun.seed = 2\n");
    assert!(run_rollout(&heavy, None, 0).unwrap().summary.congested);
    let light = cfg("controller = tl\ndemand.count = 60\nrun.horizon = 1500\nrun.seed = 2\n");
    assert!(!run_rollout(&light, None, 0).unwrap().summary.congested);
}

#[test]
fn greedy_policy_never_explores() {
    let c = cfg("controller = policy\ndemand.count = 200\ndemand.rv_rate = 1.0\nrun.horizon = 300\n");
    let net = untrained(&c);
    let r = run_rollout(&c, Some(&net), 0).unwrap();
    let decisions: Vec<_> = r.log.steps.iter().flat_map(|s| &s.decisions).collect();
    assert!(!decisions.is_empty());
    assert!(decisions.iter().all(|d| !d.explored));

    let mut c = c;
    c.policy_epsilon = 1.0;
    let r = run_rollout(&c, Some(&net), 0).unwrap();
    assert!(r.log.steps.iter().flat_map(|s| &s.decisions).all(|d| d.explored));
}

#[test]
fn metrics_from_persisted_log_match_live_values() {
    let c = cfg("controller = policy\npolicy.epsilon = 0.2\ndemand.count = 220\ndemand.rv_rate = 0.6\nrun.horizon = 400\nrun.seed = 8\n");
    let net = untrained(&c);
    let r = run_rollout(&c, Some(&net), 0).unwrap();
    let mut buf = Vec::new();
    r.log.write_jsonl(&mut buf).unwrap();
    let back = RunLog::read_jsonl(&buf[..]).unwrap();
    assert_eq!(summarize(&c, r.summary.seed, &back), r.summary);
    assert_eq!(rollout_csv(&c, &back), rollout_csv(&c, &r.log));
}

#[test]
fn rollouts_are_reproducible() {
    let c = cfg("controller = notl\ndemand.count = 300\ndemand.rv_rate = 0.3\nrun.horizon = 300\nrun.seed = 13\n");
    let a = run_rollout(&c, None, 1).unwrap();
    let b = run_rollout(&c, None, 1).unwrap();
    assert_eq!(rollout_csv(&c, &a.log), rollout_csv(&c, &b.log));
    let other = run_rollout(&c, None, 2).unwrap();
    assert_ne!(rollout_csv(&c, &a.log), rollout_csv(&c, &other.log));
}
