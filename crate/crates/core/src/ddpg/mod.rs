//! Deep deterministic policy gradient scheduling.

mod decode;
mod learner;
mod nets;
mod noise;
mod replay;
mod train;

pub use decode::decode_action;
pub use learner::{soft_update, Ddpg, LearnerConfig, TrainStats};
pub use nets::{ActorNet, ActorTape, CriticNet};
pub use noise::OuNoise;
pub use replay::{Experience, ReplayBuffer};
pub use train::{episode_seed, train, validation_seed, write_curve_csv, CurveRow, DdpgPolicy, PolicyMeta, TrainConfig, TrainOutcome};
