//! Flattened agent observations and the cross-system feature matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{BusForecast, FlowEncoding};
use crate::world::{AgentKind, AgentState, WorldState};

/// Position, occupancy, free capacity and last operation of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentFeatures {
    pub d: Vec<f64>,
    pub e: f64,
    pub f: f64,
    pub v: f64,
}

impl AgentFeatures {
    pub fn of(agent: &AgentState) -> Self {
        AgentFeatures {
            d: agent.location.clone(),
            e: agent.occupied as f64,
            f: agent.remaining as f64,
            v: agent.operation as f64,
        }
    }

    fn push_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.d);
        out.extend([self.e, self.f, self.v]);
    }
}

/// Forecasts for the next `L` segments of the bike system: departures and
/// arrivals per station plus the flow encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BikeForecast {
    pub departures: Vec<Vec<f64>>,
    pub arrivals: Vec<Vec<f64>>,
    pub flows: Vec<FlowEncoding>,
}

impl BikeForecast {
    pub fn horizon(&self) -> usize {
        self.departures.len().min(self.arrivals.len()).min(self.flows.len())
    }

    pub fn zeros(stations: usize, horizon: usize) -> Self {
        BikeForecast {
            departures: vec![vec![0.0; stations]; horizon],
            arrivals: vec![vec![0.0; stations]; horizon],
            flows: vec![FlowEncoding { g: vec![0.0; 2 * stations] }; horizon],
        }
    }

    /// Marginals and encodings of a sequence of flow matrices.
    pub fn from_flows(flows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let mut out = BikeForecast {
            departures: Vec::new(),
            arrivals: Vec::new(),
            flows: Vec::new(),
        };
        for g in flows {
            let enc = crate::forecast::encode_flow(g)?;
            let n = g.len();
            out.departures.push(enc.g[..n].to_vec());
            out.arrivals.push(enc.g[n..].to_vec());
            out.flows.push(enc);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BikeObservation {
    /// Available bikes per station.
    pub b1: Vec<f64>,
    /// Free docks per station.
    pub b2: Vec<f64>,
    /// Forecast departures, `[t][station]`.
    pub c1: Vec<Vec<f64>>,
    /// Forecast arrivals, `[t][station]`.
    pub c2: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub own: AgentFeatures,
    pub others: Vec<AgentFeatures>,
    pub h: Vec<f64>,
    /// `rows x k`, empty when the joint channel is off.
    pub o: Vec<Vec<f64>>,
}

impl BikeObservation {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.b2);
        for (c1, c2) in self.c1.iter().zip(&self.c2) {
            out.extend_from_slice(c1);
            out.extend_from_slice(c2);
        }
        for g in &self.g {
            out.extend_from_slice(g);
        }
        self.own.push_into(&mut out);
        for a in &self.others {
            a.push_into(&mut out);
        }
        out.extend_from_slice(&self.h);
        out.extend(self.o.iter().flatten());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusObservation {
    /// Segments since the last forward bus, per stop of the route.
    pub b1: Vec<f64>,
    /// Segments since the last backward bus.
    pub b2: Vec<f64>,
    /// Forecast forward demand, `[t][route stop]`.
    pub c1: Vec<Vec<f64>>,
    /// Forecast backward demand.
    pub c2: Vec<Vec<f64>>,
    pub own: AgentFeatures,
    pub others: Vec<AgentFeatures>,
    pub h: Vec<f64>,
    pub o: Vec<Vec<f64>>,
}

impl BusObservation {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.b2);
        for (c1, c2) in self.c1.iter().zip(&self.c2) {
            out.extend_from_slice(c1);
            out.extend_from_slice(c2);
        }
        self.own.push_into(&mut out);
        for a in &self.others {
            a.push_into(&mut out);
        }
        out.extend_from_slice(&self.h);
        out.extend(self.o.iter().flatten());
        out
    }
}

fn fit_columns(row: &[f64], k: usize) -> Vec<f64> {
    let mut out: Vec<f64> = row.iter().copied().take(k).collect();
    out.resize(k, 0.0);
    out
}

/// Bus-system features seen by bike agents: per stop the two recency
/// timers and the two queue lengths, cut or zero-padded to `k` columns.
/// Stops on a route in outage report `episode_length` for both timers.
pub fn bike_side_features(world: &WorldState, k: usize) -> Vec<Vec<f64>> {
    if k == 0 {
        return Vec::new();
    }
    let sentinel = world.clock.episode_length() as f64;
    world
        .bus_stops
        .iter()
        .map(|s| {
            let (f, b) = if world.routes[s.route].outage {
                (sentinel, sentinel)
            } else {
                (s.last_bus_fwd as f64, s.last_bus_bwd as f64)
            };
            fit_columns(&[f, b, s.queue_fwd.len() as f64, s.queue_bwd.len() as f64], k)
        })
        .collect()
}

/// Bike-system features seen by buses: per station the available bikes
/// and free docks, cut or zero-padded to `k` columns.
pub fn bus_side_features(world: &WorldState, k: usize) -> Vec<Vec<f64>> {
    if k == 0 {
        return Vec::new();
    }
    world
        .bike_stations
        .iter()
        .map(|s| fit_columns(&[s.available as f64, s.free_docks() as f64], k))
        .collect()
}

fn check_horizon(have: usize, need: usize) -> Result<()> {
    if have < need {
        return Err(Error::validation("forecasts", format!("cover {have} segments, need {need}")));
    }
    Ok(())
}

/// Observation of dispatch vehicle `vehicle` (agent index).
pub fn bike_observe(
    world: &WorldState,
    forecast: &BikeForecast,
    horizon: usize,
    vehicle: usize,
    other_system: &[Vec<f64>],
) -> Result<BikeObservation> {
    match world.agents.get(vehicle) {
        Some(a) if a.kind == AgentKind::DispatchVehicle => {}
        _ => return Err(Error::validation("vehicle", format!("agent {vehicle} is not a dispatch vehicle"))),
    }
    check_horizon(forecast.horizon(), horizon)?;
    let n = world.bike_stations.len();
    for t in 0..horizon {
        if forecast.departures[t].len() != n || forecast.arrivals[t].len() != n || forecast.flows[t].g.len() != 2 * n {
            return Err(Error::shape(format!("bike forecast step {t}"), n, forecast.departures[t].len()));
        }
    }
    let nonneg = |v: &Vec<f64>| v.iter().map(|x| x.max(0.0)).collect::<Vec<f64>>();
    Ok(BikeObservation {
        b1: world.bike_stations.iter().map(|s| s.available as f64).collect(),
        b2: world.bike_stations.iter().map(|s| s.free_docks() as f64).collect(),
        c1: forecast.departures[..horizon].iter().map(nonneg).collect(),
        c2: forecast.arrivals[..horizon].iter().map(nonneg).collect(),
        g: forecast.flows[..horizon].iter().map(|f| nonneg(&f.g)).collect(),
        own: AgentFeatures::of(&world.agents[vehicle]),
        others: world
            .vehicles()
            .into_iter()
            .filter(|&v| v != vehicle)
            .map(|v| AgentFeatures::of(&world.agents[v]))
            .collect(),
        h: world.env_features.clone(),
        o: other_system.to_vec(),
    })
}

/// Observation of bus `bus` (agent index). Forecasts are indexed by global
/// stop; the observation keeps the bus's own route.
pub fn bus_observe(
    world: &WorldState,
    forecast: &BusForecast,
    horizon: usize,
    bus: usize,
    other_system: &[Vec<f64>],
) -> Result<BusObservation> {
    let route = match world.agents.get(bus).map(|a| a.kind) {
        Some(AgentKind::Bus { route }) => route,
        _ => return Err(Error::validation("bus", format!("agent {bus} is not a bus"))),
    };
    check_horizon(forecast.horizon().min(forecast.backward.len()), horizon)?;
    let stops = &world.routes[route].stops;
    let pick = |rows: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        rows[..horizon]
            .iter()
            .map(|row| {
                if row.len() != world.bus_stops.len() {
                    return Err(Error::shape("bus forecast", world.bus_stops.len(), row.len()));
                }
                Ok(stops.iter().map(|&s| row[s].max(0.0)).collect())
            })
            .collect()
    };
    Ok(BusObservation {
        b1: stops.iter().map(|&s| world.bus_stops[s].last_bus_fwd as f64).collect(),
        b2: stops.iter().map(|&s| world.bus_stops[s].last_bus_bwd as f64).collect(),
        c1: pick(&forecast.forward)?,
        c2: pick(&forecast.backward)?,
        own: AgentFeatures::of(&world.agents[bus]),
        others: world
            .buses()
            .into_iter()
            .filter(|&b| b != bus && world.agents[b].kind == AgentKind::Bus { route })
            .map(|b| AgentFeatures::of(&world.agents[b]))
            .collect(),
        h: world.env_features.clone(),
        o: other_system.to_vec(),
    })
}
