//! The scheduling environment: one segment per step, learners act in agent
//! order, then both systems settle under one clock tick.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{JointConfig, RewardConfig, RewardMode};
use super::observe::{bike_observe, bike_side_features, bus_observe, bus_side_features, AgentFeatures, BikeForecast, BikeObservation, BusObservation};
use crate::demand::{sample_bus, sample_segment, BusArrival, BusDemandProfile, Trip};
use crate::error::{Error, Result};
use crate::forecast::{forecast_bus, BikeFlowForecaster, BikeForecastConfig, BusForecast, FlowEncoding};
use crate::rng::Rng64;
use crate::scenario::{BikeDemand, ScenarioFile};
use crate::world::{AgentKind, BusCommand, Direction, WorldState};

/// Which agent kind the environment hands to the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controlled {
    Bike,
    Bus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentAction {
    /// -1 toward s_n, 0 halt, +1 toward s_1.
    Bus(i32),
    /// Drive to `station`, then load (`quantity > 0`) or unload bikes.
    Bike { station: usize, quantity: i32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSpace {
    Bus,
    Bike { stations: usize, capacity: u32 },
}

impl ActionSpace {
    /// Width of the raw score vector a policy emits.
    pub fn score_len(&self) -> usize {
        match self {
            ActionSpace::Bus => 3,
            ActionSpace::Bike { stations, .. } => stations + 1,
        }
    }
}

/// Ping-pong service: keep driving the current way, turn at either end.
pub fn static_headway_command(world: &WorldState, bus: usize) -> BusCommand {
    let agent = &world.agents[bus];
    let AgentKind::Bus { route } = agent.kind else {
        return BusCommand { bus, operation: 0 };
    };
    let last = world.routes[route].stops.len() - 1;
    let pos = agent.position();
    let operation = match agent.operation {
        1 if pos > 0 => 1,
        1 => -1,
        _ if pos < last => -1,
        _ => 1,
    };
    BusCommand { bus, operation }
}

/// Forecasters fitted on synthetic history, updated with realized demand
/// as the episode runs.
#[derive(Debug, Clone)]
pub struct LearnedForecasts {
    pub bike: Option<BikeFlowForecaster>,
    pub bus_window: usize,
    bike_history: Vec<Vec<f64>>,
    bus_history: (Vec<Vec<f64>>, Vec<Vec<f64>>),
}

impl LearnedForecasts {
    /// Generates `scenario.history_segments` of demand ending right before
    /// the episode start and fits the forecasters on it.
    pub fn fit(scenario: &ScenarioFile, config: &BikeForecastConfig, bus_window: usize, seed: u64) -> Result<Self> {
        let world = scenario.build_world()?;
        let log = scenario.generate_history(seed)?;
        let bike = if world.bike_stations.is_empty() || log.stations == 0 {
            None
        } else {
            let coords: Vec<[f64; 2]> = world.bike_stations.iter().map(|s| s.coord).collect();
            Some(BikeFlowForecaster::fit(&log, &coords, config)?)
        };
        let bike_history = (0..log.stations).map(|s| log.departure_series(s)).collect();
        Ok(LearnedForecasts {
            bike,
            bus_window: bus_window.max(2),
            bike_history,
            bus_history: log.bus_series(&world),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub steps: usize,
    pub served: u64,
    pub lost: u64,
    /// All bike trip requests, including converted bus passengers.
    pub demand: u64,
    /// Bus passengers turned into bike trips by an outage.
    pub converted: u64,
    /// Bus passengers of an outage route with no bike station at both ends.
    pub stranded: u64,
    pub distance: f64,
    pub overflow: u64,
    pub reduced_wait: f64,
    pub drive_time: f64,
    pub boarded: u64,
    /// Episode value for the learners (see [`SimEnv::step`]).
    pub episode_return: f64,
    /// The bus episode ended because a passenger ran out of patience.
    pub failed: bool,
    pub outage: bool,
}

impl EpisodeSummary {
    /// Average minutes waited by passengers that boarded.
    pub fn mean_wait(&self) -> f64 {
        if self.boarded == 0 {
            0.0
        } else {
            self.reduced_wait / self.boarded as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// One reward per learner, in learner order.
    pub rewards: Vec<f64>,
    pub done: bool,
    /// Terminal by failure rather than by running out of segments.
    pub failed: bool,
    pub served: u32,
    pub lost: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub segment: usize,
    pub agent: String,
    pub action: String,
    pub reward: f64,
    pub served: u32,
    pub lost: u32,
    pub distance: f64,
    pub overflow: u32,
    pub reduced_wait: f64,
    pub drive_time: f64,
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SimEnv {
    base: WorldState,
    world: WorldState,
    bike_demand: BikeDemand,
    bus_demand: Option<BusDemandProfile>,
    horizon: usize,
    reward: RewardConfig,
    joint: JointConfig,
    outage_probability: f64,
    controlled: Controlled,
    learners: Vec<usize>,
    learned: Option<LearnedForecasts>,
    recent_bike: Vec<Vec<f64>>,
    recent_bus: (Vec<Vec<f64>>, Vec<Vec<f64>>),
    rng: Rng64,
    done: bool,
    summary: EpisodeSummary,
    record_trace: bool,
    trace: Vec<TraceRow>,
    scale: Vec<f64>,
}

impl SimEnv {
    pub fn new(scenario: &ScenarioFile, controlled: Controlled) -> Result<Self> {
        scenario.validate()?;
        let base = scenario.build_world()?;
        let learners = match controlled {
            Controlled::Bike => base.vehicles(),
            Controlled::Bus => base.buses(),
        };
        if learners.is_empty() {
            let what = if controlled == Controlled::Bike { "dispatch vehicles" } else { "buses" };
            return Err(Error::validation("agents", format!("scenario has no {what} to control")));
        }
        let mut env = SimEnv {
            bike_demand: scenario.resolve_bike_demand(&base)?,
            bus_demand: scenario.resolve_bus_demand(&base)?,
            world: base.clone(),
            base,
            horizon: scenario.horizon,
            reward: scenario.reward,
            joint: scenario.joint,
            outage_probability: scenario.outage_probability,
            controlled,
            learners,
            learned: None,
            recent_bike: Vec::new(),
            recent_bus: (Vec::new(), Vec::new()),
            rng: Rng64::new(0),
            done: false,
            summary: EpisodeSummary::default(),
            record_trace: false,
            trace: Vec::new(),
            scale: Vec::new(),
        };
        env.reset(0)?;
        Ok(env)
    }

    pub fn with_learned_forecasts(mut self, learned: LearnedForecasts) -> Result<Self> {
        self.learned = Some(learned);
        self.reset(self.summary.seed)?;
        Ok(self)
    }

    pub fn set_joint(&mut self, joint: JointConfig) -> Result<()> {
        if joint.enabled && joint.k == 0 {
            return Err(Error::validation("joint.k", "joint mode needs k >= 1"));
        }
        self.joint = joint;
        self.reset(self.summary.seed)
    }

    pub fn set_reward(&mut self, reward: RewardConfig) -> Result<()> {
        reward.validate()?;
        self.reward = reward;
        Ok(())
    }

    pub fn set_record_trace(&mut self, on: bool) {
        self.record_trace = on;
    }

    pub fn controlled(&self) -> Controlled {
        self.controlled
    }

    pub fn joint(&self) -> JointConfig {
        self.joint
    }

    pub fn reward_config(&self) -> RewardConfig {
        self.reward
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    #[cfg(test)]
    pub(crate) fn world_mut(&mut self) -> &mut WorldState {
        &mut self.world
    }

    /// Agent indices of the learners, in acting order.
    pub fn learners(&self) -> &[usize] {
        &self.learners
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn summary(&self) -> &EpisodeSummary {
        &self.summary
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn action_space(&self) -> ActionSpace {
        match self.controlled {
            Controlled::Bus => ActionSpace::Bus,
            Controlled::Bike => ActionSpace::Bike {
                stations: self.world.bike_stations.len(),
                capacity: self.world.agents[self.learners[0]].capacity,
            },
        }
    }

    /// Starts a new episode. The seed fixes outages and sampled demand.
    pub fn reset(&mut self, seed: u64) -> Result<()> {
        self.world = self.base.clone();
        self.rng = Rng64::new(seed);
        let mut outage = false;
        for r in 0..self.world.routes.len() {
            let draw = self.rng.next_f64();
            if draw < self.outage_probability {
                self.world.routes[r].outage = true;
            }
            outage |= self.world.routes[r].outage;
        }
        self.done = false;
        self.summary = EpisodeSummary {
            seed,
            outage,
            ..Default::default()
        };
        self.trace.clear();
        if let Some(l) = &self.learned {
            self.recent_bike = l.bike_history.clone();
            self.recent_bus = l.bus_history.clone();
        }
        self.scale = self.build_scale()?;
        Ok(())
    }

    fn other_system(&self) -> Vec<Vec<f64>> {
        let k = self.joint.columns();
        match self.controlled {
            Controlled::Bike => bike_side_features(&self.world, k),
            Controlled::Bus => bus_side_features(&self.world, k),
        }
    }

    /// Bike forecasts for the current segment and the `L - 1` after it.
    pub fn bike_forecast(&self) -> Result<BikeForecast> {
        let n = self.world.bike_stations.len();
        let clock = &self.world.clock;
        if let Some(model) = self.learned.as_ref().and_then(|l| l.bike.as_ref()) {
            let flows = model.forecast(&self.recent_bike, clock.current(), self.horizon)?;
            return BikeForecast::from_flows(&flows.into_iter().map(|f| f.g).collect::<Vec<_>>());
        }
        let flows: Vec<Vec<Vec<f64>>> = (0..self.horizon)
            .map(|t| {
                let offset = clock.offset() + t;
                if offset >= clock.episode_length() {
                    return vec![vec![0.0; n]; n];
                }
                match &self.bike_demand {
                    BikeDemand::None => vec![vec![0.0; n]; n],
                    BikeDemand::Script(s) => s.flow(offset, n),
                    BikeDemand::Profile(p) => p.expected_flow(clock.current() + t),
                }
            })
            .collect();
        if n == 0 {
            return Ok(BikeForecast {
                departures: vec![Vec::new(); self.horizon],
                arrivals: vec![Vec::new(); self.horizon],
                flows: vec![FlowEncoding { g: Vec::new() }; self.horizon],
            });
        }
        BikeForecast::from_flows(&flows)
    }

    /// Bus demand forecasts per global stop.
    pub fn bus_forecast(&self) -> Result<BusForecast> {
        let stops = self.world.bus_stops.len();
        let Some(bus) = &self.bus_demand else {
            return Ok(BusForecast::zeros(stops, self.horizon));
        };
        if let Some(l) = &self.learned {
            if stops > 0 && self.recent_bus.0.first().map_or(0, Vec::len) >= 2 {
                return forecast_bus(&self.recent_bus.0, &self.recent_bus.1, self.horizon, l.bus_window);
            }
        }
        let clock = &self.world.clock;
        let mut out = BusForecast::zeros(stops, self.horizon);
        for t in 0..self.horizon {
            if clock.offset() + t < clock.episode_length() {
                out.forward[t] = bus.expected(stops, Direction::Forward, clock.current() + t);
                out.backward[t] = bus.expected(stops, Direction::Backward, clock.current() + t);
            }
        }
        Ok(out)
    }

    pub fn observe_bike(&self, vehicle: usize) -> Result<BikeObservation> {
        bike_observe(&self.world, &self.bike_forecast()?, self.horizon, vehicle, &self.other_system())
    }

    pub fn observe_bus(&self, bus: usize) -> Result<BusObservation> {
        bus_observe(&self.world, &self.bus_forecast()?, self.horizon, bus, &self.other_system())
    }

    /// Flattened observation of every learner, each divided entry-wise by
    /// [`SimEnv::observation_scale`].
    pub fn observe_all(&self) -> Result<Vec<Vec<f64>>> {
        let other = self.other_system();
        let raw: Vec<Vec<f64>> = match self.controlled {
            Controlled::Bike => {
                let f = self.bike_forecast()?;
                self.learners
                    .iter()
                    .map(|&v| Ok(bike_observe(&self.world, &f, self.horizon, v, &other)?.flatten()))
                    .collect::<Result<_>>()?
            }
            Controlled::Bus => {
                let f = self.bus_forecast()?;
                self.learners
                    .iter()
                    .map(|&b| Ok(bus_observe(&self.world, &f, self.horizon, b, &other)?.flatten()))
                    .collect::<Result<_>>()?
            }
        };
        Ok(raw
            .into_iter()
            .map(|o| o.iter().zip(&self.scale).map(|(v, s)| v / s).collect())
            .collect())
    }

    pub fn observation_len(&self) -> usize {
        self.scale.len()
    }

    /// Typical magnitude of each flattened entry.
    pub fn observation_scale(&self) -> &[f64] {
        &self.scale
    }

    fn build_scale(&self) -> Result<Vec<f64>> {
        let w = &self.world;
        let k = self.joint.columns();
        let l = self.horizon;
        let agent = |a: usize| {
            let ag = &w.agents[a];
            let cap = ag.capacity.max(1) as f64;
            AgentFeatures {
                d: vec![1.0; ag.location.len()],
                e: cap,
                f: cap,
                v: if ag.is_bus() { 1.0 } else { cap },
            }
        };
        let ep = w.clock.episode_length().max(1) as f64;
        match self.controlled {
            Controlled::Bike => {
                let docks: Vec<f64> = w.bike_stations.iter().map(|s| s.docks.max(1) as f64).collect();
                let n = docks.len();
                let flow = (docks.iter().sum::<f64>() / (2.0 * n.max(1) as f64)).max(1.0);
                let bus_cap = w.routes.iter().map(|r| r.capacity).max().unwrap_or(1).max(1) as f64;
                let me = self.learners[0];
                let obs = BikeObservation {
                    b1: docks.clone(),
                    b2: docks,
                    c1: vec![vec![flow; n]; l],
                    c2: vec![vec![flow; n]; l],
                    g: vec![vec![flow; 2 * n]; l],
                    own: agent(me),
                    others: w.vehicles().into_iter().filter(|&v| v != me).map(agent).collect(),
                    h: w.env_features.iter().map(|v| v.abs().max(1.0)).collect(),
                    o: (0..w.bus_stops.len()).map(|_| [ep, ep, bus_cap, bus_cap].into_iter().take(k).chain(std::iter::repeat(1.0)).take(k).collect()).collect(),
                };
                Ok(obs.flatten())
            }
            Controlled::Bus => {
                let me = self.learners[0];
                let AgentKind::Bus { route } = w.agents[me].kind else { unreachable!() };
                let stops = w.routes[route].stops.len();
                let demand = (w.routes[route].capacity as f64 / 4.0).max(1.0);
                let obs = BusObservation {
                    b1: vec![ep; stops],
                    b2: vec![ep; stops],
                    c1: vec![vec![demand; stops]; l],
                    c2: vec![vec![demand; stops]; l],
                    own: agent(me),
                    others: w
                        .buses()
                        .into_iter()
                        .filter(|&b| b != me && w.agents[b].kind == AgentKind::Bus { route })
                        .map(agent)
                        .collect(),
                    h: w.env_features.iter().map(|v| v.abs().max(1.0)).collect(),
                    o: w
                        .bike_stations
                        .iter()
                        .map(|s| {
                            let d = s.docks.max(1) as f64;
                            [d, d].into_iter().take(k).chain(std::iter::repeat(1.0)).take(k).collect()
                        })
                        .collect(),
                };
                let same_shape = self.learners.iter().all(|&b| {
                    let AgentKind::Bus { route: r } = w.agents[b].kind else { return false };
                    let peers = w.buses().into_iter().filter(|&o| w.agents[o].kind == AgentKind::Bus { route: r }).count();
                    w.routes[r].stops.len() == stops && peers == obs.others.len() + 1
                });
                if !same_shape {
                    return Err(Error::validation("routes", "learning buses must share one route shape"));
                }
                Ok(obs.flatten())
            }
        }
    }

    fn draw_demand(&mut self) -> (Vec<Trip>, Vec<BusArrival>) {
        let clock = &self.world.clock;
        let (segment, offset) = (clock.current(), clock.offset());
        match &self.bike_demand {
            BikeDemand::Profile(p) => {
                let d = sample_segment(p, self.bus_demand.as_ref(), segment, &mut self.rng);
                (d.trips, d.bus_arrivals)
            }
            other => {
                let trips = match other {
                    BikeDemand::Script(s) => s.segment(offset).to_vec(),
                    _ => Vec::new(),
                };
                let arrivals = self.bus_demand.as_ref().map(|b| sample_bus(b, segment, &mut self.rng)).unwrap_or_default();
                (trips, arrivals)
            }
        }
    }

    /// Applies one action per learner and settles the segment.
    ///
    /// Bike learners share a team reward of served trips minus `beta` per
    /// distance unit driven minus `gamma_overflow` per overflowing bike. In
    /// terminal mode the episode total arrives on the last step and every
    /// other step pays zero. Each bus earns its own boarded waiting minutes
    /// minus `alpha` per driven minute; a bus episode also ends, as a
    /// failure, once some queued passenger has waited `patience` segments.
    pub fn step(&mut self, actions: &[AgentAction]) -> Result<StepReport> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        if actions.len() != self.learners.len() {
            return Err(Error::shape("actions", self.learners.len(), actions.len()));
        }
        let n = self.world.bike_stations.len();
        for a in actions {
            match (self.controlled, a) {
                (Controlled::Bike, AgentAction::Bike { station, .. }) if *station < n => {}
                (Controlled::Bike, AgentAction::Bike { station, .. }) => {
                    return Err(Error::validation("action.station", format!("unknown station {station}")))
                }
                (Controlled::Bus, AgentAction::Bus(op)) if (-1..=1).contains(op) => {}
                (Controlled::Bus, AgentAction::Bus(op)) => {
                    return Err(Error::validation("bus action", format!("{op} not in {{-1, 0, 1}}")))
                }
                _ => return Err(Error::validation("action", "action kind does not match the controlled agents")),
            }
        }
        let segment = self.world.clock.current();
        let mut per_agent = Vec::with_capacity(actions.len());
        let mut commands = Vec::new();
        let (mut distance, mut overflow) = (0.0, 0u32);
        match self.controlled {
            Controlled::Bike => {
                for (&agent, a) in self.learners.iter().zip(actions) {
                    let AgentAction::Bike { station, quantity } = *a else { unreachable!() };
                    let r = self.world.apply_reposition(agent, station, quantity)?;
                    distance += r.distance;
                    overflow += r.overflow;
                    per_agent.push(r);
                }
                commands = self.world.buses().into_iter().map(|b| static_headway_command(&self.world, b)).collect();
            }
            Controlled::Bus => {
                for (&bus, a) in self.learners.iter().zip(actions) {
                    let AgentAction::Bus(operation) = *a else { unreachable!() };
                    commands.push(BusCommand { bus, operation });
                }
            }
        }

        let (mut trips, arrivals) = self.draw_demand();
        let regular = trips.len();
        let mut kept = Vec::with_capacity(arrivals.len());
        let (mut converted, mut stranded) = (0u64, 0u64);
        for a in arrivals {
            let stop = &self.world.bus_stops[a.stop];
            if !self.world.routes[stop.route].outage {
                kept.push(a);
                continue;
            }
            match (stop.bike_station, self.world.bus_stops[a.destination].bike_station) {
                (Some(o), Some(d)) => {
                    trips.push(Trip { origin: o, destination: d, count: a.count });
                    converted += a.count as u64;
                }
                _ => stranded += a.count as u64,
            }
        }
        if self.learned.is_some() {
            self.record_realized(&trips, &kept);
        }
        let (bike, bus) = self.world.step_segment(&trips, &commands, &kept)?;
        debug_assert!(bike.served_per_trip.len() >= regular);

        let finished = self.world.clock.is_finished();
        let seg_value = bike.served as f64 - self.reward.beta * distance - self.reward.gamma_overflow * overflow as f64;
        let s = &mut self.summary;
        s.steps += 1;
        s.served += bike.served as u64;
        s.lost += bike.lost as u64;
        s.demand += (bike.served + bike.lost) as u64;
        s.converted += converted;
        s.stranded += stranded;
        s.distance += distance;
        s.overflow += overflow as u64;
        s.reduced_wait += bus.reduced_wait;
        s.drive_time += bus.drive_time;
        s.boarded += bus.boarded as u64;

        let (rewards, failed) = match self.controlled {
            Controlled::Bike => {
                s.episode_return += seg_value;
                let r = match self.reward.mode {
                    RewardMode::Segment => seg_value,
                    RewardMode::Terminal if finished => s.episode_return,
                    RewardMode::Terminal => 0.0,
                };
                (vec![r; self.learners.len()], false)
            }
            Controlled::Bus => {
                let rewards: Vec<f64> = self
                    .learners
                    .iter()
                    .map(|&b| {
                        bus.legs
                            .iter()
                            .find(|l| l.bus == b)
                            .map_or(0.0, |l| if l.operation == 0 { 0.0 } else { l.reduced_wait - self.reward.alpha * l.drive_time })
                    })
                    .collect();
                s.episode_return += rewards.iter().sum::<f64>();
                (rewards, self.world.max_queue_wait() >= self.reward.patience)
            }
        };
        s.failed |= failed;
        self.done = finished || failed;

        if self.record_trace {
            for (i, &agent) in self.learners.iter().enumerate() {
                let id = self.world.agents[agent].id.clone();
                let (action, dist, ovf, rw, dt) = match self.controlled {
                    Controlled::Bike => {
                        let r = per_agent[i];
                        let AgentAction::Bike { station, quantity } = actions[i] else { unreachable!() };
                        (
                            format!("{}:{}->{}", self.world.bike_stations[station].id, quantity, r.realized),
                            r.distance,
                            r.overflow,
                            0.0,
                            0.0,
                        )
                    }
                    Controlled::Bus => {
                        let leg = bus.legs.iter().find(|l| l.bus == agent).cloned().unwrap_or_default();
                        (leg.operation.to_string(), 0.0, 0, leg.reduced_wait, leg.drive_time)
                    }
                };
                self.trace.push(TraceRow {
                    segment,
                    agent: id,
                    action,
                    reward: rewards[i],
                    served: bike.served,
                    lost: bike.lost,
                    distance: dist,
                    overflow: ovf,
                    reduced_wait: rw,
                    drive_time: dt,
                });
            }
        }
        Ok(StepReport {
            rewards,
            done: self.done,
            failed,
            served: bike.served,
            lost: bike.lost,
        })
    }

    fn record_realized(&mut self, trips: &[Trip], arrivals: &[BusArrival]) {
        for (s, series) in self.recent_bike.iter_mut().enumerate() {
            series.push(trips.iter().filter(|t| t.origin == s).map(|t| t.count as f64).sum());
        }
        let (fwd, bwd) = &mut self.recent_bus;
        for series in fwd.iter_mut().chain(bwd.iter_mut()) {
            series.push(0.0);
        }
        for a in arrivals {
            let (o, d) = (&self.world.bus_stops[a.stop], &self.world.bus_stops[a.destination]);
            let series = if d.route_position > o.route_position { &mut fwd[a.stop] } else { &mut bwd[a.stop] };
            *series.last_mut().expect("pushed above") += a.count as f64;
        }
    }
}
