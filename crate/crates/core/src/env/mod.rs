//! The bus and bike decision processes built on the simulator.

mod config;
mod observe;
mod policy;
mod sim;

pub use config::{JointConfig, RewardConfig, RewardMode};
pub use observe::{
    bike_observe, bike_side_features, bus_observe, bus_side_features, AgentFeatures, BikeForecast, BikeObservation,
    BusObservation,
};
pub use policy::{run_episode, Policy};
pub use sim::{
    static_headway_command, write_trace_csv, ActionSpace, AgentAction, Controlled, EpisodeSummary, LearnedForecasts, SimEnv,
    StepReport, TraceRow,
};
