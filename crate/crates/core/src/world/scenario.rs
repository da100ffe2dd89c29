//! JSON schema for the physical world: stations, routes, vehicles, clock
//! and the environment vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub stations: Vec<StationSpec>,
    #[serde(default)]
    pub routes: Vec<RouteSpec>,
    #[serde(default)]
    pub vehicles: Vec<VehicleSpec>,
    pub clock: ClockSpec,
    /// The environment factor vector (weather, temperature, ...).
    #[serde(default)]
    pub environment: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StationSpec {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub docks: u32,
    #[serde(default)]
    pub initial_bikes: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RouteSpec {
    pub id: String,
    pub stops: Vec<StopEntry>,
    pub bus_count: usize,
    pub capacity: u32,
    /// Buses on this route never run; recency timers report the sentinel.
    #[serde(default)]
    pub outage: bool,
}

/// A route stop given either as a bare id or with coordinates and the
/// bike station it sits next to.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum StopEntry {
    Id(String),
    Full {
        id: String,
        #[serde(default)]
        x: f64,
        #[serde(default)]
        y: f64,
        #[serde(default)]
        bike_station: Option<String>,
    },
}

impl StopEntry {
    pub fn id(&self) -> &str {
        match self {
            StopEntry::Id(id) => id,
            StopEntry::Full { id, .. } => id,
        }
    }

    pub fn coord(&self) -> [f64; 2] {
        match self {
            StopEntry::Id(_) => [0.0, 0.0],
            StopEntry::Full { x, y, .. } => [*x, *y],
        }
    }

    pub fn bike_station(&self) -> Option<&str> {
        match self {
            StopEntry::Id(_) => None,
            StopEntry::Full { bike_station, .. } => bike_station.as_deref(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VehicleSpec {
    #[serde(default)]
    pub id: Option<String>,
    pub capacity: u32,
    pub start_station: String,
    /// Bikes on board before the first segment (the dispatchable stock).
    #[serde(default)]
    pub initial_load: u32,
}

fn default_segment_minutes() -> f64 {
    15.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClockSpec {
    #[serde(default = "default_segment_minutes")]
    pub segment_minutes: f64,
    pub episode_length: usize,
    #[serde(default)]
    pub episode_start: usize,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks every precondition of world construction, naming the first
    /// offending field.
    pub fn validate(&self) -> Result<()> {
        let c = &self.clock;
        if !(c.segment_minutes > 0.0) || !c.segment_minutes.is_finite() {
            return Err(Error::validation("clock.segment_minutes", "must be positive and finite"));
        }
        if self.stations.is_empty() && self.routes.is_empty() {
            return Err(Error::validation("stations", "scenario has neither stations nor routes"));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, s) in self.stations.iter().enumerate() {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::validation(format!("stations[{i}].id"), format!("duplicate id {:?}", s.id)));
            }
            if !s.x.is_finite() {
                return Err(Error::validation(format!("stations[{i}].x"), "coordinate must be finite"));
            }
            if !s.y.is_finite() {
                return Err(Error::validation(format!("stations[{i}].y"), "coordinate must be finite"));
            }
            if s.initial_bikes > s.docks {
                return Err(Error::validation(
                    format!("stations[{i}].initial_bikes"),
                    format!("{} exceeds {} docks", s.initial_bikes, s.docks),
                ));
            }
        }
        let mut stop_ids = std::collections::HashSet::new();
        for (r, route) in self.routes.iter().enumerate() {
            if route.stops.len() < 2 {
                return Err(Error::validation(format!("routes[{r}].stops"), "a route needs at least 2 stops"));
            }
            if route.capacity == 0 {
                return Err(Error::validation(format!("routes[{r}].capacity"), "must be positive"));
            }
            for (j, stop) in route.stops.iter().enumerate() {
                if !stop_ids.insert(stop.id().to_string()) {
                    return Err(Error::validation(
                        format!("routes[{r}].stops[{j}]"),
                        format!("duplicate stop id {:?}", stop.id()),
                    ));
                }
                let [x, y] = stop.coord();
                if !x.is_finite() || !y.is_finite() {
                    return Err(Error::validation(format!("routes[{r}].stops[{j}]"), "coordinate must be finite"));
                }
                if let Some(b) = stop.bike_station() {
                    if !seen.contains(b) {
                        return Err(Error::validation(
                            format!("routes[{r}].stops[{j}].bike_station"),
                            format!("unknown station {b:?}"),
                        ));
                    }
                }
            }
        }
        for (v, veh) in self.vehicles.iter().enumerate() {
            if veh.capacity == 0 {
                return Err(Error::validation(format!("vehicles[{v}].capacity"), "must be positive"));
            }
            if veh.initial_load > veh.capacity {
                return Err(Error::validation(
                    format!("vehicles[{v}].initial_load"),
                    format!("{} exceeds capacity {}", veh.initial_load, veh.capacity),
                ));
            }
            if !seen.contains(veh.start_station.as_str()) {
                return Err(Error::validation(
                    format!("vehicles[{v}].start_station"),
                    format!("unknown station {:?}", veh.start_station),
                ));
            }
        }
        if let Some(i) = self.environment.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("environment[{i}]"), "must be finite"));
        }
        Ok(())
    }
}
