use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{BikeDemand, ScenarioFile};

/// Largest instance the exhaustive search will take on.
pub const PLACEMENT_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementResult {
    pub station_ids: Vec<String>,
    /// Extra bikes put at each station before the first segment.
    pub placement: Vec<u32>,
    pub served: u64,
    /// Placements that fit the docks and were simulated.
    pub evaluated: u64,
}

impl PlacementResult {
    /// `A:10` style listing of the stations that received bikes.
    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .station_ids
            .iter()
            .zip(&self.placement)
            .filter(|(_, &k)| k > 0)
            .map(|(id, k)| format!("{id}:{k}"))
            .collect();
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join(",")
        }
    }
}

/// Number of ways to split `bikes` identical bikes over `stations` stations.
pub fn placement_count(bikes: u64, stations: u64) -> u128 {
    if stations == 0 {
        return if bikes == 0 { 1 } else { 0 };
    }
    // C(bikes + stations - 1, stations - 1), stopping once past the limit
    let k = (stations - 1).min(bikes) as u128;
    let n = (bikes + stations - 1) as u128;
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) / (i + 1);
        if c > PLACEMENT_LIMIT * 1_000 {
            return c;
        }
    }
    c
}

fn next_composition(v: &mut [u32]) -> bool {
    // reverse lexicographic order over compositions with a fixed sum
    let n = v.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| v[i] > 0) else {
        return false;
    };
    v[i] -= 1;
    let tail: u32 = v[i + 1..].iter().sum::<u32>() + 1;
    v[i + 1..].iter_mut().for_each(|x| *x = 0);
    v[i + 1] = tail;
    true
}

/// Tries every split of the vehicles' bikes over the stations, runs the
/// script with no further repositioning, and keeps the first split that
/// serves the most trips.
pub fn run_exhaustive_bike(scenario: &ScenarioFile) -> Result<PlacementResult> {
    scenario.validate()?;
    let base = scenario.build_world()?;
    let BikeDemand::Script(script) = scenario.resolve_bike_demand(&base)? else {
        return Err(Error::validation("bike_demand", "exhaustive placement needs a scripted demand"));
    };
    let vehicles = base.vehicles();
    let bikes: u64 = vehicles.iter().map(|&v| base.agents[v].occupied as u64).sum();
    let n = base.bike_stations.len();
    let count = placement_count(bikes, n as u64);
    if count > PLACEMENT_LIMIT {
        return Err(Error::TooLarge {
            count,
            limit: PLACEMENT_LIMIT,
        });
    }
    let mut empty = base.clone();
    for &v in &vehicles {
        let a = &mut empty.agents[v];
        a.remaining += a.occupied;
        a.occupied = 0;
    }
    let mut split = vec![0u32; n];
    if n > 0 {
        split[0] = bikes as u32;
    }
    let mut best: Option<(u64, Vec<u32>)> = None;
    let mut evaluated = 0;
    loop {
        let fits = split
            .iter()
            .zip(&empty.bike_stations)
            .all(|(&k, s)| s.available + k <= s.docks);
        if fits {
            let mut world = empty.clone();
            for (s, &k) in world.bike_stations.iter_mut().zip(&split) {
                s.available += k;
            }
            let mut served = 0u64;
            for offset in 0..world.clock.episode_length() {
                served += world.step_bike_world(script.segment(offset))?.served as u64;
            }
            evaluated += 1;
            if best.as_ref().is_none_or(|(b, _)| served > *b) {
                best = Some((served, split.clone()));
            }
        }
        if !next_composition(&mut split) {
            break;
        }
    }
    let Some((served, placement)) = best else {
        return Err(Error::validation("docks", "no placement of the vehicles' bikes fits the free docks"));
    };
    Ok(PlacementResult {
        station_ids: scenario.station_ids(),
        placement,
        served,
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compositions_are_enumerated_once() {
        let mut v = vec![4, 0, 0];
        let mut seen = vec![v.clone()];
        while next_composition(&mut v) {
            seen.push(v.clone());
        }
        assert_eq!(seen.len() as u128, placement_count(4, 3));
        assert!(seen.iter().all(|s| s.iter().sum::<u32>() == 4));
        let mut dedup = seen.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), seen.len());
    }

    #[test]
    fn placement_counts() {
        assert_eq!(placement_count(10, 3), 66);
        assert_eq!(placement_count(0, 5), 1);
        assert_eq!(placement_count(7, 1), 1);
        assert!(placement_count(100, 10) > PLACEMENT_LIMIT);
    }
}
