//! Multi-modal urban traffic scheduling: a segment-clocked simulator of bus
//! routes and bike-sharing stations, demand forecasters, and a DDPG
//! scheduler that dispatches buses and repositions bikes.

pub mod ddpg;
pub mod demand;
pub mod env;
pub mod error;
pub mod forecast;
pub mod harness;
pub mod nn;
pub mod rng;
pub mod scenario;
pub mod world;

pub use error::{Error, Result};
pub use rng::Rng64;
