//! Hierarchical bus passenger forecasts: a least-squares line per stop and
//! for the system total, reconciled through the summing matrix so stop
//! forecasts add up to the total.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The `(1 + n) x n` summing matrix of a two-level hierarchy: a row of ones
/// for the total above the identity for the stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SummingMatrix {
    stops: usize,
}

impl SummingMatrix {
    pub fn new(stops: usize) -> Result<Self> {
        if stops == 0 {
            return Err(Error::validation("summing matrix", "needs at least one bottom series"));
        }
        Ok(SummingMatrix { stops })
    }

    pub fn bottom_len(&self) -> usize {
        self.stops
    }

    pub fn matrix(&self) -> Array2<f64> {
        let n = self.stops;
        Array2::from_shape_fn((n + 1, n), |(r, c)| if r == 0 || r - 1 == c { 1.0 } else { 0.0 })
    }

    /// `S β`.
    pub fn aggregate(&self, bottom: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(bottom.len() + 1);
        out.push(bottom.iter().sum());
        out.extend_from_slice(bottom);
        out
    }

    /// Least-squares bottom level `β = (SᵀS)⁻¹ Sᵀ b`. Here `SᵀS = I + 11ᵀ`,
    /// whose inverse is `I - 11ᵀ/(n+1)`, so the solve is closed-form.
    pub fn project(&self, base: &[f64]) -> Result<Vec<f64>> {
        let n = self.stops;
        if base.len() != n + 1 {
            return Err(Error::shape("base forecasts", n + 1, base.len()));
        }
        if base.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("base forecasts".into()));
        }
        let total = base[0];
        let st_b: Vec<f64> = base[1..].iter().map(|b| b + total).collect();
        let mean_term = st_b.iter().sum::<f64>() / (n as f64 + 1.0);
        Ok(st_b.into_iter().map(|v| v - mean_term).collect())
    }
}

/// Reconciles stacked base forecasts `[total; stops]` into a coherent
/// vector. Negative stop values clamp to zero and the total is re-summed.
pub fn reconcile(base: &[f64]) -> Result<Vec<f64>> {
    if base.len() < 2 {
        return Err(Error::shape("base forecasts", "at least 2", base.len()));
    }
    let s = SummingMatrix::new(base.len() - 1)?;
    let bottom: Vec<f64> = s.project(base)?.into_iter().map(|v| v.max(0.0)).collect();
    Ok(s.aggregate(&bottom))
}

/// Least-squares line over a trailing window; `t = 0` is the window start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearBaseModel {
    pub slope: f64,
    pub intercept: f64,
    /// Points actually used in the fit.
    pub window: usize,
}

impl LinearBaseModel {
    pub fn fit(series: &[f64], window: usize) -> Result<Self> {
        if window < 2 {
            return Err(Error::validation("window", "needs at least 2 observations"));
        }
        if series.len() < 2 {
            return Err(Error::validation("history", format!("{} observations, need at least 2", series.len())));
        }
        let tail = &series[series.len().saturating_sub(window)..];
        let m = tail.len() as f64;
        let t_mean = (m - 1.0) / 2.0;
        let y_mean = tail.iter().sum::<f64>() / m;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (t, y) in tail.iter().enumerate() {
            let dt = t as f64 - t_mean;
            sxy += dt * (y - y_mean);
            sxx += dt * dt;
        }
        let slope = sxy / sxx;
        Ok(LinearBaseModel {
            slope,
            intercept: y_mean - slope * t_mean,
            window: tail.len(),
        })
    }

    /// Value `steps` segments past the last fitted point.
    pub fn extrapolate(&self, steps: usize) -> f64 {
        self.intercept + self.slope * ((self.window - 1 + steps) as f64)
    }
}

/// Fits one line per bottom series plus one for their sum; the aggregate
/// model comes first, matching the `[total; stops]` stacking.
pub fn fit_base(bottom: &[Vec<f64>], window: usize) -> Result<Vec<LinearBaseModel>> {
    let len = bottom.first().map(Vec::len).unwrap_or(0);
    if let Some(bad) = bottom.iter().position(|s| s.len() != len) {
        return Err(Error::shape(format!("series {bad}"), len, bottom[bad].len()));
    }
    let total: Vec<f64> = (0..len).map(|t| bottom.iter().map(|s| s[t]).sum()).collect();
    std::iter::once(&total)
        .chain(bottom)
        .map(|s| LinearBaseModel::fit(s, window))
        .collect()
}

/// Per-stop demand forecasts for `L` segments: `forward[t][stop]` is the
/// first-type (toward s_n) demand `t + 1` segments ahead, `backward` the
/// second type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusForecast {
    pub forward: Vec<Vec<f64>>,
    pub backward: Vec<Vec<f64>>,
}

impl BusForecast {
    pub fn horizon(&self) -> usize {
        self.forward.len()
    }

    pub fn zeros(stops: usize, horizon: usize) -> Self {
        BusForecast {
            forward: vec![vec![0.0; stops]; horizon],
            backward: vec![vec![0.0; stops]; horizon],
        }
    }

    /// Writes `segment,stop,direction,value` rows; `first_segment` labels
    /// the first forecast step.
    pub fn write_csv(&self, path: &Path, stop_ids: &[String], first_segment: usize) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["segment", "stop", "direction", "value"])?;
        for (dir, rows) in [("forward", &self.forward), ("backward", &self.backward)] {
            for (t, row) in rows.iter().enumerate() {
                for (s, v) in row.iter().enumerate() {
                    w.write_record([(first_segment + t).to_string(), stop_ids[s].clone(), dir.to_string(), format!("{v}")])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn forecast_direction(series: &[Vec<f64>], horizon: usize, window: usize) -> Result<Vec<Vec<f64>>> {
    let models = fit_base(series, window)?;
    (1..=horizon)
        .map(|h| {
            let base: Vec<f64> = models.iter().map(|m| m.extrapolate(h)).collect();
            Ok(reconcile(&base)?[1..].to_vec())
        })
        .collect()
}

/// Reconciled forecasts for both directions from per-stop arrival series
/// (`[stop][segment]`).
pub fn forecast_bus(forward: &[Vec<f64>], backward: &[Vec<f64>], horizon: usize, window: usize) -> Result<BusForecast> {
    if horizon == 0 {
        return Err(Error::validation("horizon", "must be at least 1"));
    }
    Ok(BusForecast {
        forward: forecast_direction(forward, horizon, window)?,
        backward: forecast_direction(backward, horizon, window)?,
    })
}
