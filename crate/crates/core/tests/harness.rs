use mmsched_core::env::{run_episode, Controlled, SimEnv};
use mmsched_core::harness::{evaluate, run_baseline, run_exhaustive_bike, run_greedy_bike, Baseline};
use mmsched_core::scenario::ScenarioFile;
use mmsched_core::Error;
use proptest::prelude::*;
use serde_json::json;

fn scripted(docks: &[u32], load: u32, script: serde_json::Value, episode_length: usize) -> ScenarioFile {
    let ids = ["A", "B", "C", "D", "E", "F"];
    let stations: Vec<_> = docks
        .iter()
        .enumerate()
        .map(|(i, &d)| json!({"id": ids[i], "x": i as f64, "y": 0.0, "docks": d, "initial_bikes": 0}))
        .collect();
    let doc = json!({
        "name": "tiny",
        "stations": stations,
        "vehicles": [{"id": "v", "capacity": load.max(1), "start_station": "A", "initial_load": load}],
        "clock": {"segment_minutes": 15, "episode_length": episode_length, "episode_start": 0},
        "bike_demand": {"script": script},
    });
    ScenarioFile::from_json(&doc.to_string()).unwrap()
}

#[test]
fn fig1a_oracle_greedy_and_idle() {
    let s = ScenarioFile::bundled("fig1a").unwrap().unwrap();
    let best = run_exhaustive_bike(&s).unwrap();
    assert_eq!(best.served, 20);
    assert_eq!(best.placement, vec![10, 0, 0]);
    assert_eq!(best.describe(), "A:10");
    assert_eq!(best.evaluated, 66);
    let greedy = run_greedy_bike(&s).unwrap();
    assert_eq!(greedy.served, 10);
    assert_eq!(greedy.served + greedy.lost, 35);
    assert_eq!(run_baseline(&s, Controlled::Bike, Baseline::NoReposition, 0).unwrap().served, 0);
}

#[test]
fn zero_bikes_serve_nothing() {
    let s = scripted(&[10, 10], 0, json!([{"segment": 0, "trips": [{"origin": "A", "destination": "B", "count": 3}]}]), 1);
    let best = run_exhaustive_bike(&s).unwrap();
    assert_eq!(best.served, 0);
    assert_eq!(best.describe(), "none");
}

#[test]
fn single_origin_demand_gets_every_bike() {
    let s = scripted(
        &[10, 10, 10],
        5,
        json!([{"segment": 0, "trips": [{"origin": "C", "destination": "A", "count": 5}]}]),
        1,
    );
    let best = run_exhaustive_bike(&s).unwrap();
    assert_eq!(best.placement, vec![0, 0, 5]);
    assert_eq!(best.served, 5);
    assert_eq!(run_greedy_bike(&s).unwrap().served, 5);
}

#[test]
fn zero_demand_greedy_serves_nothing() {
    let s = scripted(&[10, 10], 4, json!([]), 2);
    assert_eq!(run_greedy_bike(&s).unwrap().served, 0);
}

#[test]
fn single_station_greedy_unloads_there() {
    let s = scripted(&[10], 4, json!([]), 1);
    let mut env = SimEnv::new(&s, Controlled::Bike).unwrap();
    run_episode(&mut env, &mut Baseline::GreedyFirstSegment, 0).unwrap();
    assert_eq!(env.world().bike_stations[0].available, 4);
}

#[test]
fn oversized_instances_are_refused() {
    let s = scripted(&[200; 6], 150, json!([]), 1);
    assert!(matches!(run_exhaustive_bike(&s), Err(Error::TooLarge { .. })));
}

#[test]
fn profile_demand_has_no_oracle() {
    let s = ScenarioFile::bundled("tidal5").unwrap().unwrap();
    assert!(run_exhaustive_bike(&s).unwrap_err().is_validation());
}

#[test]
fn scripted_evaluation_is_deterministic() {
    let s = ScenarioFile::bundled("fig1a").unwrap().unwrap();
    let mut env = SimEnv::new(&s, Controlled::Bike).unwrap();
    let a = evaluate(&mut env, &mut Baseline::GreedyFirstSegment, &[0, 1]).unwrap();
    let b = evaluate(&mut env, &mut Baseline::GreedyFirstSegment, &[0, 1]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.reports[0].served, a.reports[1].served);
    let idle = evaluate(&mut env, &mut Baseline::NoReposition, &[0, 1, 2]).unwrap();
    assert_eq!(idle.aggregate("served").unwrap().max, 0.0);
}

#[test]
fn headway_on_empty_route_has_no_wait() {
    let doc = json!({
        "name": "quiet",
        "routes": [{"id": "R", "stops": [{"id": "P1", "x": 0.0, "y": 0.0}, {"id": "P2", "x": 1.0, "y": 0.0}], "bus_count": 1, "capacity": 5}],
        "clock": {"segment_minutes": 15, "episode_length": 4, "episode_start": 0},
        "bus_demand": [{"route": "R", "forward": [[0.0], [0.0]], "backward": [[0.0], [0.0]]}],
    });
    let s = ScenarioFile::from_json(&doc.to_string()).unwrap();
    let r = run_baseline(&s, Controlled::Bus, Baseline::StaticBusHeadway, 3).unwrap();
    assert_eq!(r.mean_wait, 0.0);
    assert!(r.drive_time > 0.0);
}

#[test]
fn evaluate_needs_a_seed() {
    let s = ScenarioFile::bundled("fig1a").unwrap().unwrap();
    let mut env = SimEnv::new(&s, Controlled::Bike).unwrap();
    assert!(evaluate(&mut env, &mut Baseline::NoReposition, &[]).unwrap_err().is_validation());
}

fn tiny_instance() -> impl Strategy<Value = ScenarioFile> {
    let ids = ["A", "B", "C"];
    (2usize..=3, 0u32..=6, 1usize..=3).prop_flat_map(move |(n, load, len)| {
        let trip = (0..len, 0..n, 0..n, 1u32..=4);
        prop::collection::vec(trip, 0..6).prop_map(move |trips| {
            let mut by_segment: Vec<Vec<serde_json::Value>> = vec![Vec::new(); len];
            for (seg, o, d, c) in trips {
                if o != d {
                    by_segment[seg].push(json!({"origin": ids[o], "destination": ids[d], "count": c}));
                }
            }
            let script: Vec<_> = by_segment
                .into_iter()
                .enumerate()
                .map(|(s, t)| json!({"segment": s, "trips": t}))
                .collect();
            scripted(&vec![40; n], load, json!(script), len)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oracle_dominates_greedy_dominates_idle(s in tiny_instance()) {
        let best = run_exhaustive_bike(&s).unwrap().served;
        let greedy = run_greedy_bike(&s).unwrap();
        let idle = run_baseline(&s, Controlled::Bike, Baseline::NoReposition, 0).unwrap();
        prop_assert!(best >= greedy.served);
        prop_assert!(greedy.served >= idle.served);
        prop_assert_eq!(greedy.served + greedy.lost, greedy.demand);
        prop_assert_eq!(idle.served + idle.lost, idle.demand);
    }
}
