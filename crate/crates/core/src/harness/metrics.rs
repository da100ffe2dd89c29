use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{run_episode, EpisodeSummary, Policy, SimEnv};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub served: u64,
    pub lost: u64,
    pub demand: u64,
    /// Minutes per boarded passenger.
    pub mean_wait: f64,
    pub distance: f64,
    pub drive_time: f64,
    pub episode_return: f64,
    pub converted: u64,
    pub stranded: u64,
    pub failed: bool,
    pub outage: bool,
}

impl MetricsReport {
    pub fn from_summary(s: &EpisodeSummary) -> Self {
        MetricsReport {
            seed: s.seed,
            served: s.served,
            lost: s.lost,
            demand: s.demand,
            mean_wait: s.mean_wait(),
            distance: s.distance,
            drive_time: s.drive_time,
            episode_return: s.episode_return,
            converted: s.converted,
            stranded: s.stranded,
            failed: s.failed,
            outage: s.outage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub metric: String,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Aggregate {
    pub fn of(metric: &str, values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = match n {
            0 => f64::NAN,
            _ if n % 2 == 1 => v[n / 2],
            _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
        };
        Aggregate {
            metric: metric.into(),
            mean: v.iter().sum::<f64>() / n as f64,
            median,
            min: v.first().copied().unwrap_or(f64::NAN),
            max: v.last().copied().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub policy: String,
    pub reports: Vec<MetricsReport>,
    pub aggregates: Vec<Aggregate>,
}

impl Evaluation {
    pub fn aggregate(&self, metric: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.metric == metric)
    }

    pub fn write_reports_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.reports {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_aggregates_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for a in &self.aggregates {
            w.serialize(a)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `policy` once per seed and summarizes every metric.
pub fn evaluate(env: &mut SimEnv, policy: &mut dyn Policy, seeds: &[u64]) -> Result<Evaluation> {
    if seeds.is_empty() {
        return Err(Error::validation("episodes", "need at least one seed"));
    }
    let reports = seeds
        .iter()
        .map(|&s| run_episode(env, policy, s).map(|sum| MetricsReport::from_summary(&sum)))
        .collect::<Result<Vec<_>>>()?;
    let column = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    let aggregates = vec![
        Aggregate::of("served", &column(|r| r.served as f64)),
        Aggregate::of("lost", &column(|r| r.lost as f64)),
        Aggregate::of("demand", &column(|r| r.demand as f64)),
        Aggregate::of("mean_wait", &column(|r| r.mean_wait)),
        Aggregate::of("distance", &column(|r| r.distance)),
        Aggregate::of("drive_time", &column(|r| r.drive_time)),
        Aggregate::of("episode_return", &column(|r| r.episode_return)),
    ];
    Ok(Evaluation {
        policy: policy.name(),
        reports,
        aggregates,
    })
}
