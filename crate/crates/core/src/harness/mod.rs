//! Baselines, the exhaustive placement oracle and evaluation reports.

mod baselines;
mod metrics;
mod oracle;

pub use baselines::{run_baseline, run_greedy_bike, Baseline};
pub use metrics::{evaluate, Aggregate, Evaluation, MetricsReport};
pub use oracle::{placement_count, run_exhaustive_bike, PlacementResult, PLACEMENT_LIMIT};
