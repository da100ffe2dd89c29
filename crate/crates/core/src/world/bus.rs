use serde::{Deserialize, Serialize};

use super::{AgentKind, BikeStepOutcome, Direction, Passenger, WorldState};
use crate::demand::{BusArrival, Trip};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusCommand {
    /// Agent index of the bus.
    pub bus: usize,
    /// -1 drives toward s_n, +1 toward s_1, 0 halts.
    pub operation: i32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BusLeg {
    pub bus: usize,
    pub operation: i32,
    pub boarded: u32,
    pub alighted: u32,
    pub reduced_wait: f64,
    pub drive_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BusStepOutcome {
    /// Minutes of waiting ended by boarding this segment.
    pub reduced_wait: f64,
    pub drive_time: f64,
    pub boarded: u32,
    pub alighted: u32,
    pub legs: Vec<BusLeg>,
}

impl WorldState {
    /// Advances every bus by one segment.
    ///
    /// New arrivals join their direction queue first. Each moving bus then,
    /// in agent order, boards FIFO at its current stop up to its free
    /// capacity, advances one stop, and drops passengers bound for the stop
    /// it reaches. Buses without a command halt; a bus asked to drive past
    /// either end of its route halts too, as does every bus on a route in
    /// outage.
    pub fn step_bus_world(&mut self, commands: &[BusCommand], arrivals: &[BusArrival]) -> Result<BusStepOutcome> {
        let out = self.move_buses(commands, arrivals)?;
        self.clock.advance();
        Ok(out)
    }

    /// One segment of both systems under a single clock tick: buses move
    /// first, then bike trips settle. Nothing changes if either input is
    /// invalid.
    pub fn step_segment(
        &mut self,
        trips: &[Trip],
        commands: &[BusCommand],
        arrivals: &[BusArrival],
    ) -> Result<(BikeStepOutcome, BusStepOutcome)> {
        self.check_trips(trips)?;
        let bus = self.move_buses(commands, arrivals)?;
        let bike = self.settle_trips(trips)?;
        self.clock.advance();
        Ok((bike, bus))
    }

    fn move_buses(&mut self, commands: &[BusCommand], arrivals: &[BusArrival]) -> Result<BusStepOutcome> {
        let mut ops = vec![0i32; self.agents.len()];
        let mut commanded = vec![false; self.agents.len()];
        for c in commands {
            match self.agents.get(c.bus) {
                Some(a) if a.is_bus() => {}
                _ => return Err(Error::validation("bus", format!("unknown bus id {}", c.bus))),
            }
            if !(-1..=1).contains(&c.operation) {
                return Err(Error::validation("bus action", format!("{} not in {{-1, 0, 1}}", c.operation)));
            }
            if std::mem::replace(&mut commanded[c.bus], true) {
                return Err(Error::validation("bus", format!("bus {} commanded twice", c.bus)));
            }
            ops[c.bus] = c.operation;
        }
        for a in arrivals {
            self.arrival_direction(a)?;
        }

        let now = self.clock.current();
        let minutes = self.clock.segment_minutes();
        for a in arrivals {
            let dir = self.arrival_direction(a)?;
            let stop = &mut self.bus_stops[a.stop];
            let queue = match dir {
                Direction::Forward => &mut stop.queue_fwd,
                Direction::Backward => &mut stop.queue_bwd,
            };
            for _ in 0..a.count {
                queue.push_back(Passenger {
                    origin: a.stop,
                    destination: a.destination,
                    arrival_segment: now,
                    boarded: false,
                });
            }
        }
        for stop in &mut self.bus_stops {
            stop.last_bus_fwd += 1;
            stop.last_bus_bwd += 1;
        }

        let mut out = BusStepOutcome::default();
        for bus in 0..self.agents.len() {
            let AgentKind::Bus { route } = self.agents[bus].kind else {
                continue;
            };
            let route = &self.routes[route];
            let pos = self.agents[bus].position();
            let last = route.stops.len() - 1;
            let op = match ops[bus] {
                _ if route.outage => 0,
                -1 if pos < last => -1,
                1 if pos > 0 => 1,
                _ => 0,
            };
            let mut leg = BusLeg {
                bus,
                operation: op,
                ..Default::default()
            };
            if op != 0 {
                let (dir, next) = if op == -1 {
                    (Direction::Forward, pos + 1)
                } else {
                    (Direction::Backward, pos - 1)
                };
                let here = route.stops[pos];
                let there = route.stops[next];
                let agent = &mut self.agents[bus];
                let stop = &mut self.bus_stops[here];
                let queue = match dir {
                    Direction::Forward => {
                        stop.last_bus_fwd = 0;
                        &mut stop.queue_fwd
                    }
                    Direction::Backward => {
                        stop.last_bus_bwd = 0;
                        &mut stop.queue_bwd
                    }
                };
                while agent.remaining > 0 {
                    let Some(mut p) = queue.pop_front() else { break };
                    leg.reduced_wait += (now - p.arrival_segment) as f64 * minutes;
                    p.boarded = true;
                    agent.onboard.push(p);
                    agent.remaining -= 1;
                    agent.occupied += 1;
                    leg.boarded += 1;
                }
                agent.move_to(next);
                let before = agent.onboard.len();
                agent.onboard.retain(|p| p.destination != there);
                leg.alighted = (before - agent.onboard.len()) as u32;
                agent.occupied = agent.onboard.len() as u32;
                agent.remaining = agent.capacity - agent.occupied;
                leg.drive_time = minutes;
            }
            self.agents[bus].operation = op;
            out.reduced_wait += leg.reduced_wait;
            out.drive_time += leg.drive_time;
            out.boarded += leg.boarded;
            out.alighted += leg.alighted;
            out.legs.push(leg);
        }
        Ok(out)
    }

    fn arrival_direction(&self, a: &BusArrival) -> Result<Direction> {
        let (Some(o), Some(d)) = (self.bus_stops.get(a.stop), self.bus_stops.get(a.destination)) else {
            return Err(Error::validation("bus arrival", format!("unknown stop {}->{}", a.stop, a.destination)));
        };
        if o.route != d.route || a.stop == a.destination {
            return Err(Error::validation(
                "bus arrival",
                format!("{} -> {} is not a trip along one route", o.id, d.id),
            ));
        }
        Ok(if d.route_position > o.route_position {
            Direction::Forward
        } else {
            Direction::Backward
        })
    }
}
