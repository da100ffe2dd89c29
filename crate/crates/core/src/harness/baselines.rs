use serde::{Deserialize, Serialize};

use crate::env::{run_episode, static_headway_command, AgentAction, Controlled, Policy, SimEnv};
use crate::error::Result;
use crate::scenario::ScenarioFile;

use super::metrics::MetricsReport;

/// Hand-written schedulers used as yardsticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// Vehicles stay put and move nothing; buses halt.
    NoReposition,
    /// Before the first segment every vehicle unloads all its bikes at the
    /// station with the largest forecast departures, then stays idle.
    GreedyFirstSegment,
    /// Buses ping-pong along their route.
    StaticBusHeadway,
}

impl Baseline {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "none" | "no-reposition" => Some(Baseline::NoReposition),
            "greedy" | "greedy-first-segment" => Some(Baseline::GreedyFirstSegment),
            "headway" | "static-bus-headway" => Some(Baseline::StaticBusHeadway),
            _ => None,
        }
    }

    fn idle(env: &SimEnv) -> Vec<AgentAction> {
        let world = env.world();
        env.learners()
            .iter()
            .map(|&a| match env.controlled() {
                Controlled::Bus => AgentAction::Bus(0),
                Controlled::Bike => AgentAction::Bike {
                    station: world.agents[a].position(),
                    quantity: 0,
                },
            })
            .collect()
    }
}

impl Policy for Baseline {
    fn name(&self) -> String {
        match self {
            Baseline::NoReposition => "no-reposition",
            Baseline::GreedyFirstSegment => "greedy-first-segment",
            Baseline::StaticBusHeadway => "static-bus-headway",
        }
        .into()
    }

    fn act(&mut self, env: &SimEnv) -> Result<Vec<AgentAction>> {
        let world = env.world();
        match (self, env.controlled()) {
            (Baseline::StaticBusHeadway, Controlled::Bus) => Ok(env
                .learners()
                .iter()
                .map(|&b| AgentAction::Bus(static_headway_command(world, b).operation))
                .collect()),
            (Baseline::GreedyFirstSegment, Controlled::Bike) if world.clock.offset() == 0 => {
                let forecast = env.bike_forecast()?;
                let first = forecast.departures.first().cloned().unwrap_or_default();
                let mut best = 0;
                for (i, &v) in first.iter().enumerate() {
                    if v > first[best] {
                        best = i;
                    }
                }
                Ok(env
                    .learners()
                    .iter()
                    .map(|&a| AgentAction::Bike {
                        station: best,
                        quantity: -(world.agents[a].occupied as i32),
                    })
                    .collect())
            }
            _ => Ok(Baseline::idle(env)),
        }
    }
}

/// One greedy episode of the scenario's vehicles, seed 0.
pub fn run_greedy_bike(scenario: &ScenarioFile) -> Result<MetricsReport> {
    run_baseline(scenario, Controlled::Bike, Baseline::GreedyFirstSegment, 0)
}

pub fn run_baseline(scenario: &ScenarioFile, controlled: Controlled, baseline: Baseline, seed: u64) -> Result<MetricsReport> {
    let mut env = SimEnv::new(scenario, controlled)?;
    let mut policy = baseline;
    let summary = run_episode(&mut env, &mut policy, seed)?;
    Ok(MetricsReport::from_summary(&summary))
}
