//! Scenario files: the world schema plus demand, forecast horizon, reward
//! weights and the joint-scheduling toggles.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::demand::{BusDemandProfile, DemandProfile, DemandScript, HistoryLog, RouteDemandSpec, ScriptEntry};
use crate::env::{JointConfig, RewardConfig};
use crate::error::{Error, Result};
use crate::world::{ScenarioSpec, WorldState};

/// Bike demand as an explicit per-segment script or a Poisson profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BikeDemandSpec {
    Script(Vec<ScriptEntry>),
    Profile(DemandProfile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    #[serde(flatten)]
    pub world: ScenarioSpec,
    #[serde(default)]
    pub bike_demand: Option<BikeDemandSpec>,
    #[serde(default)]
    pub bus_demand: Vec<RouteDemandSpec>,
    /// Forecast horizon L.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub joint: JointConfig,
    /// Chance that each route is out of service for a whole episode, on
    /// top of routes marked `outage`.
    #[serde(default)]
    pub outage_probability: f64,
    /// Segments of synthetic history generated for forecaster fitting.
    #[serde(default = "default_history")]
    pub history_segments: usize,
}

fn default_horizon() -> usize {
    1
}

fn default_history() -> usize {
    96 * 7
}

/// Demand resolved against a built world.
#[derive(Debug, Clone, PartialEq)]
pub enum BikeDemand {
    None,
    Script(DemandScript),
    Profile(DemandProfile),
}

const BUNDLED: &[(&str, &str)] = &[
    ("fig1a.json", include_str!("../scenarios/fig1a.json")),
    ("tidal5.json", include_str!("../scenarios/tidal5.json")),
    ("outage.json", include_str!("../scenarios/outage.json")),
    ("busline.json", include_str!("../scenarios/busline.json")),
];

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        file.validate()?;
        Ok(file)
    }

    /// Reads a scenario. A missing path whose file name matches a bundled
    /// scenario loads the bundled copy.
    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::from_json(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                match Self::bundled(name) {
                    Some(file) => file,
                    None => Err(Error::File {
                        path: path.display().to_string(),
                        source: e,
                    }),
                }
            }
            Err(source) => Err(Error::File {
                path: path.display().to_string(),
                source,
            }),
        }
    }

    pub fn bundled(name: &str) -> Option<Result<Self>> {
        BUNDLED.iter().find(|(n, _)| *n == name || n.trim_end_matches(".json") == name).map(|(_, text)| Self::from_json(text))
    }

    pub fn bundled_names() -> Vec<&'static str> {
        BUNDLED.iter().map(|(n, _)| *n).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.reward.validate()?;
        if self.horizon == 0 {
            return Err(Error::validation("horizon", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.outage_probability) {
            return Err(Error::validation("outage_probability", "must lie in [0, 1]"));
        }
        if self.joint.enabled && self.joint.k == 0 {
            return Err(Error::validation("joint.k", "joint mode needs k >= 1"));
        }
        let world = WorldState::build(&self.world)?;
        self.resolve_bike_demand(&world)?;
        self.resolve_bus_demand(&world)?;
        Ok(())
    }

    pub fn build_world(&self) -> Result<WorldState> {
        WorldState::build(&self.world)
    }

    pub fn station_ids(&self) -> Vec<String> {
        self.world.stations.iter().map(|s| s.id.clone()).collect()
    }

    pub fn resolve_bike_demand(&self, world: &WorldState) -> Result<BikeDemand> {
        match &self.bike_demand {
            None => Ok(BikeDemand::None),
            Some(BikeDemandSpec::Script(entries)) => Ok(BikeDemand::Script(DemandScript::new(
                entries,
                &self.station_ids(),
                world.clock.episode_length(),
            )?)),
            Some(BikeDemandSpec::Profile(p)) => {
                p.validate(world.bike_stations.len())?;
                Ok(BikeDemand::Profile(p.clone()))
            }
        }
    }

    /// Samples `history_segments` of demand ending right before a segment
    /// congruent to the episode start, so daily profiles line up.
    pub fn generate_history(&self, seed: u64) -> Result<HistoryLog> {
        let world = self.build_world()?;
        let bus = self.resolve_bus_demand(&world)?;
        let profile = match self.resolve_bike_demand(&world)? {
            BikeDemand::Profile(p) => p,
            BikeDemand::Script(_) => {
                return Err(Error::validation("bike_demand", "history needs a demand profile, not a script"))
            }
            BikeDemand::None => DemandProfile {
                rates: Vec::new(),
                od_weights: Vec::new(),
                noise_seed: 0,
            },
        };
        let len = self.history_segments;
        let bus_day = bus
            .as_ref()
            .and_then(|b| b.routes.iter().flat_map(|r| r.forward.iter().chain(&r.backward)).map(Vec::len).max())
            .unwrap_or(1);
        let day = profile.day_length().max(bus_day).max(1);
        let start = world.clock.episode_start() + day * (len / day + 1) - len;
        Ok(HistoryLog::generate(&profile, bus.as_ref(), world.bus_stops.len(), start, len, seed))
    }

    pub fn resolve_bus_demand(&self, world: &WorldState) -> Result<Option<BusDemandProfile>> {
        if self.bus_demand.is_empty() {
            return Ok(None);
        }
        BusDemandProfile::resolve(&self.bus_demand, world).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse_and_build() {
        for name in ScenarioFile::bundled_names() {
            let s = ScenarioFile::bundled(name).unwrap().unwrap_or_else(|e| panic!("{name}: {e}"));
            let w = s.build_world().unwrap();
            w.check_invariants().unwrap();
        }
    }

    #[test]
    fn fig1a_is_the_three_station_instance() {
        let s = ScenarioFile::bundled("fig1a").unwrap().unwrap();
        let w = s.build_world().unwrap();
        assert_eq!(w.bike_stations.iter().map(|s| s.available).collect::<Vec<_>>(), vec![0, 0, 0]);
        assert_eq!(w.vehicles().len(), 1);
        assert_eq!(w.agents[w.vehicles()[0]].occupied, 10);
        let BikeDemand::Script(script) = s.resolve_bike_demand(&w).unwrap() else {
            panic!("fig1a is scripted")
        };
        assert_eq!(script.total_demand(), 35);
        assert_eq!(script.segment(0).len(), 2);
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = ScenarioFile::load(Path::new("/nonexistent/dir/nothing.json")).unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("/nonexistent/dir/nothing.json"));
        assert!(ScenarioFile::load(Path::new("/nonexistent/fig1a.json")).is_ok());
    }

    #[test]
    fn bad_toggles_are_named() {
        let mut s = ScenarioFile::bundled("fig1a").unwrap().unwrap();
        s.horizon = 0;
        assert!(s.validate().unwrap_err().to_string().contains("horizon"));
        let mut s = ScenarioFile::bundled("fig1a").unwrap().unwrap();
        s.outage_probability = 2.0;
        assert!(s.validate().unwrap_err().to_string().contains("outage_probability"));
    }
}
