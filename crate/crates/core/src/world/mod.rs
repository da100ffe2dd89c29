//! The simulated world: bike stations, bus stops and routes, agents, and
//! the segment clock. All transitions are deterministic functions of the
//! world and their inputs.

mod bike;
mod bus;
mod scenario;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bike::{BikeStepOutcome, RepositionOutcome};
pub use bus::{BusCommand, BusStepOutcome};
pub use scenario::{ClockSpec, RouteSpec, ScenarioSpec, StationSpec, StopEntry, VehicleSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentClock {
    episode_start: usize,
    episode_length: usize,
    current: usize,
    segment_minutes: f64,
}

impl SegmentClock {
    pub fn new(episode_start: usize, episode_length: usize, segment_minutes: f64) -> Result<Self> {
        if !(segment_minutes > 0.0) || !segment_minutes.is_finite() {
            return Err(Error::validation("clock.segment_minutes", "must be positive and finite"));
        }
        Ok(SegmentClock {
            episode_start,
            episode_length,
            current: episode_start,
            segment_minutes,
        })
    }

    pub fn episode_start(&self) -> usize {
        self.episode_start
    }

    pub fn episode_length(&self) -> usize {
        self.episode_length
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn segment_minutes(&self) -> f64 {
        self.segment_minutes
    }

    /// Segments elapsed since the episode started.
    pub fn offset(&self) -> usize {
        self.current - self.episode_start
    }

    pub fn is_finished(&self) -> bool {
        self.current >= self.episode_start + self.episode_length
    }

    /// Moves to the next segment; saturates at the episode end.
    pub fn advance(&mut self) -> bool {
        if self.is_finished() {
            return false;
        }
        self.current += 1;
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BikeStation {
    pub id: String,
    pub coord: [f64; 2],
    pub docks: u32,
    pub available: u32,
    pub cluster_id: usize,
}

impl BikeStation {
    pub fn free_docks(&self) -> u32 {
        self.docks - self.available
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Toward the terminal stop s_n.
    Forward,
    /// Toward the origin stop s_1.
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passenger {
    pub origin: usize,
    pub destination: usize,
    pub arrival_segment: usize,
    pub boarded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusStop {
    pub id: String,
    pub route: usize,
    /// 1-based position along the route.
    pub route_position: usize,
    pub coord: [f64; 2],
    pub bike_station: Option<usize>,
    pub queue_fwd: VecDeque<Passenger>,
    pub queue_bwd: VecDeque<Passenger>,
    pub last_bus_fwd: usize,
    pub last_bus_bwd: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub id: String,
    /// Global stop indices in route order.
    pub stops: Vec<usize>,
    pub capacity: u32,
    pub outage: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentKind {
    Bus { route: usize },
    DispatchVehicle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: String,
    pub kind: AgentKind,
    /// One-hot position over the agent's cluster (route stops for a bus,
    /// bike stations for a dispatch vehicle).
    pub location: Vec<f64>,
    pub occupied: u32,
    pub remaining: u32,
    /// Last realized operation: -1/0/1 for buses (-1 toward s_n), signed
    /// bike count for vehicles (positive loads).
    pub operation: i32,
    pub capacity: u32,
    /// Passengers riding a bus; empty for dispatch vehicles.
    pub onboard: Vec<Passenger>,
}

impl AgentState {
    pub fn position(&self) -> usize {
        self.location.iter().position(|&v| v == 1.0).unwrap_or(0)
    }

    fn move_to(&mut self, index: usize) {
        self.location.iter_mut().for_each(|v| *v = 0.0);
        self.location[index] = 1.0;
    }

    pub fn is_bus(&self) -> bool {
        matches!(self.kind, AgentKind::Bus { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub clock: SegmentClock,
    pub bike_stations: Vec<BikeStation>,
    pub bus_stops: Vec<BusStop>,
    pub routes: Vec<Route>,
    pub agents: Vec<AgentState>,
    pub in_transit_bikes: u32,
    pub env_features: Vec<f64>,
    bike_total: u64,
}

impl WorldState {
    /// Builds a world from a validated scenario; the clock sits at the
    /// episode start and no bike is riding.
    pub fn build(spec: &ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let clock = SegmentClock::new(
            spec.clock.episode_start,
            spec.clock.episode_length,
            spec.clock.segment_minutes,
        )?;
        let bike_stations: Vec<BikeStation> = spec
            .stations
            .iter()
            .map(|s| BikeStation {
                id: s.id.clone(),
                coord: [s.x, s.y],
                docks: s.docks,
                available: s.initial_bikes,
                cluster_id: 0,
            })
            .collect();
        let station_of = |id: &str| bike_stations.iter().position(|s| s.id == id);

        let mut bus_stops = Vec::new();
        let mut routes = Vec::new();
        let mut agents = Vec::new();
        for (r, route) in spec.routes.iter().enumerate() {
            let mut stops = Vec::with_capacity(route.stops.len());
            for (j, stop) in route.stops.iter().enumerate() {
                stops.push(bus_stops.len());
                bus_stops.push(BusStop {
                    id: stop.id().to_string(),
                    route: r,
                    route_position: j + 1,
                    coord: stop.coord(),
                    bike_station: stop.bike_station().and_then(station_of),
                    queue_fwd: VecDeque::new(),
                    queue_bwd: VecDeque::new(),
                    last_bus_fwd: 0,
                    last_bus_bwd: 0,
                });
            }
            let n = stops.len();
            for b in 0..route.bus_count {
                // spread buses evenly along the route
                let start = b * n / route.bus_count.max(1);
                let mut location = vec![0.0; n];
                location[start] = 1.0;
                agents.push(AgentState {
                    id: format!("{}-bus{}", route.id, b + 1),
                    kind: AgentKind::Bus { route: r },
                    location,
                    occupied: 0,
                    remaining: route.capacity,
                    operation: 0,
                    capacity: route.capacity,
                    onboard: Vec::new(),
                });
            }
            routes.push(Route {
                id: route.id.clone(),
                stops,
                capacity: route.capacity,
                outage: route.outage,
            });
        }
        for (v, veh) in spec.vehicles.iter().enumerate() {
            let start = station_of(&veh.start_station).expect("validated");
            let mut location = vec![0.0; bike_stations.len()];
            location[start] = 1.0;
            agents.push(AgentState {
                id: veh.id.clone().unwrap_or_else(|| format!("vehicle{}", v + 1)),
                kind: AgentKind::DispatchVehicle,
                location,
                occupied: veh.initial_load,
                remaining: veh.capacity - veh.initial_load,
                operation: 0,
                capacity: veh.capacity,
                onboard: Vec::new(),
            });
        }
        let bike_total = bike_stations.iter().map(|s| s.available as u64).sum::<u64>()
            + spec.vehicles.iter().map(|v| v.initial_load as u64).sum::<u64>();
        Ok(WorldState {
            clock,
            bike_stations,
            bus_stops,
            routes,
            agents,
            in_transit_bikes: 0,
            env_features: spec.environment.clone(),
            bike_total,
        })
    }

    pub fn station_index(&self, id: &str) -> Option<usize> {
        self.bike_stations.iter().position(|s| s.id == id)
    }

    pub fn stop_index(&self, id: &str) -> Option<usize> {
        self.bus_stops.iter().position(|s| s.id == id)
    }

    /// Indices of the dispatch vehicles, in id order.
    pub fn vehicles(&self) -> Vec<usize> {
        self.agents
            .iter()
            .enumerate()
            .filter(|(_, a)| a.kind == AgentKind::DispatchVehicle)
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices of the buses, in id order.
    pub fn buses(&self) -> Vec<usize> {
        self.agents
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_bus())
            .map(|(i, _)| i)
            .collect()
    }

    /// Total bikes in the system; constant for the episode.
    pub fn bike_total(&self) -> u64 {
        self.bike_total
    }

    pub fn assign_clusters(&mut self, labels: &[usize]) -> Result<()> {
        if labels.len() != self.bike_stations.len() {
            return Err(Error::shape("cluster labels", self.bike_stations.len(), labels.len()));
        }
        for (s, &c) in self.bike_stations.iter_mut().zip(labels) {
            s.cluster_id = c;
        }
        Ok(())
    }

    /// Longest wait, in segments, among passengers still queued.
    pub fn max_queue_wait(&self) -> usize {
        let now = self.clock.current();
        self.bus_stops
            .iter()
            .flat_map(|s| s.queue_fwd.iter().chain(s.queue_bwd.iter()))
            .map(|p| now.saturating_sub(p.arrival_segment))
            .max()
            .unwrap_or(0)
    }

    pub fn queued_passengers(&self) -> usize {
        self.bus_stops
            .iter()
            .map(|s| s.queue_fwd.len() + s.queue_bwd.len())
            .sum()
    }

    /// Verifies every structural invariant, describing the first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let c = &self.clock;
        if c.current < c.episode_start || c.current > c.episode_start + c.episode_length {
            return Err(format!("clock {} outside episode", c.current));
        }
        for s in &self.bike_stations {
            if s.available > s.docks {
                return Err(format!("station {} holds {} > {} docks", s.id, s.available, s.docks));
            }
        }
        let mut on_vehicles = 0u64;
        for a in &self.agents {
            let ones = a.location.iter().filter(|&&v| v == 1.0).count();
            let zeros = a.location.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != a.location.len() {
                return Err(format!("agent {} location is not one-hot", a.id));
            }
            if a.occupied + a.remaining != a.capacity {
                return Err(format!("agent {} capacity identity broken", a.id));
            }
            match a.kind {
                AgentKind::Bus { .. } => {
                    if !(-1..=1).contains(&a.operation) {
                        return Err(format!("bus {} operation {}", a.id, a.operation));
                    }
                    if a.onboard.len() as u32 != a.occupied {
                        return Err(format!("bus {} manifest disagrees with occupancy", a.id));
                    }
                }
                AgentKind::DispatchVehicle => {
                    if a.operation.unsigned_abs() > a.capacity {
                        return Err(format!("vehicle {} operation {}", a.id, a.operation));
                    }
                    on_vehicles += a.occupied as u64;
                }
            }
        }
        let total = self.bike_stations.iter().map(|s| s.available as u64).sum::<u64>()
            + self.in_transit_bikes as u64
            + on_vehicles;
        if total != self.bike_total {
            return Err(format!("bike count {} != {}", total, self.bike_total));
        }
        for s in &self.bus_stops {
            for q in [&s.queue_fwd, &s.queue_bwd] {
                if q.iter().zip(q.iter().skip(1)).any(|(a, b)| a.arrival_segment > b.arrival_segment) {
                    return Err(format!("queue at {} not FIFO", s.id));
                }
            }
        }
        Ok(())
    }
}

/// Planar Euclidean distance.
pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
