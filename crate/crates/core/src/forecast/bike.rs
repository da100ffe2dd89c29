//! Bike flow forecasts: per-station LSTM departure forecasts split across
//! destinations by historical OD frequency, plus the marginal encoding.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::cluster::{cluster_stations, ClusterAssignment};
use crate::demand::HistoryLog;
use crate::error::{Error, Result};
use crate::nn::{
    visit_mut_prefixed, visit_prefixed, Activation, Checkpoint, LstmParams, MlpParams, Optimizer, OptimizerConfig, ParamSet,
};
use crate::rng::Rng64;

/// Predicted bike movements for one future segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMatrix {
    pub g: Vec<Vec<f64>>,
    pub segment: usize,
}

impl FlowMatrix {
    pub fn zeros(n: usize, segment: usize) -> Self {
        FlowMatrix {
            g: vec![vec![0.0; n]; n],
            segment,
        }
    }

    pub fn size(&self) -> usize {
        self.g.len()
    }

    pub fn total(&self) -> f64 {
        self.g.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdFrequencyTable {
    pub counts: Vec<Vec<f64>>,
    pub probabilities: Vec<Vec<f64>>,
}

impl OdFrequencyTable {
    /// Normalizes OD counts row by row after adding `alpha` to every
    /// same-cluster pair. Rows without history spread uniformly over the
    /// other stations of the origin's cluster, or over all other stations
    /// when the origin is alone in its cluster.
    pub fn from_counts(counts: Vec<Vec<f64>>, clusters: &ClusterAssignment, alpha: f64) -> Result<Self> {
        let n = counts.len();
        if clusters.labels.len() != n {
            return Err(Error::shape("cluster labels", n, clusters.labels.len()));
        }
        if let Some(i) = counts.iter().position(|r| r.len() != n) {
            return Err(Error::shape(format!("counts[{i}]"), n, counts[i].len()));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::validation("alpha", "must be finite and >= 0"));
        }
        let probabilities = (0..n)
            .map(|i| {
                let same = |j: usize| j != i && clusters.labels[j] == clusters.labels[i];
                let row: Vec<f64> = (0..n)
                    .map(|j| if j == i { 0.0 } else { counts[i][j] + if same(j) { alpha } else { 0.0 } })
                    .collect();
                let total: f64 = row.iter().sum();
                if total > 0.0 {
                    return row.iter().map(|c| c / total).collect();
                }
                let mut peers: Vec<usize> = (0..n).filter(|&j| same(j)).collect();
                if peers.is_empty() {
                    peers = (0..n).filter(|&j| j != i).collect();
                }
                let mut row = vec![0.0; n];
                for &j in &peers {
                    row[j] = 1.0 / peers.len() as f64;
                }
                row
            })
            .collect();
        Ok(OdFrequencyTable { counts, probabilities })
    }

    pub fn size(&self) -> usize {
        self.counts.len()
    }
}

/// Builds the OD table from realized trips (self-loops excluded).
pub fn od_probabilities(history: &HistoryLog, clusters: &ClusterAssignment, alpha: f64) -> Result<OdFrequencyTable> {
    let mut counts = history.od_counts();
    for (i, row) in counts.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    OdFrequencyTable::from_counts(counts, clusters, alpha)
}

/// `G[i][j] = departures[i] * p[i][j]`, with departures clamped at zero.
pub fn predict_flow(departures: &[f64], od: &OdFrequencyTable, segment: usize) -> Result<FlowMatrix> {
    if departures.len() != od.size() {
        return Err(Error::shape("departures", od.size(), departures.len()));
    }
    let g = departures
        .iter()
        .zip(&od.probabilities)
        .map(|(&d, row)| row.iter().map(|p| d.max(0.0) * p).collect())
        .collect();
    Ok(FlowMatrix { g, segment })
}

/// Row sums followed by column sums, so `l = 2n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEncoding {
    pub g: Vec<f64>,
}

pub fn encode_flow(g: &[Vec<f64>]) -> Result<FlowEncoding> {
    let n = g.len();
    if let Some(i) = g.iter().position(|r| r.len() != n) {
        return Err(Error::shape(format!("G[{i}]"), n, g[i].len()));
    }
    let mut out = vec![0.0; 2 * n];
    for (i, row) in g.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[i] += v;
            out[n + j] += v;
        }
    }
    Ok(FlowEncoding { g: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DepartureConfig {
    pub hidden: usize,
    pub window: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for DepartureConfig {
    fn default() -> Self {
        DepartureConfig {
            hidden: 16,
            window: 24,
            epochs: 40,
            batch_size: 32,
            learning_rate: 0.01,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

/// LSTM over the normalized departure window with a linear head on the
/// last hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceModel {
    pub lstm: LstmParams,
    pub head: MlpParams,
}

impl ParamSet for SequenceModel {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        visit_prefixed("lstm", &self.lstm, f);
        visit_prefixed("head", &self.head, f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        visit_mut_prefixed("lstm", &mut self.lstm, f);
        visit_mut_prefixed("head", &mut self.head, f);
    }
}

impl SequenceModel {
    pub fn new(hidden: usize, rng: &mut Rng64) -> Self {
        SequenceModel {
            lstm: LstmParams::new(1, hidden, rng),
            head: MlpParams::new(&[hidden, 1], Activation::Identity, Activation::Identity, rng),
        }
    }

    fn inputs(windows: &[&[f64]]) -> Vec<Array2<f64>> {
        let len = windows[0].len();
        (0..len)
            .map(|t| Array2::from_shape_fn((windows.len(), 1), |(b, _)| windows[b][t]))
            .collect()
    }

    /// One output per window; all windows have equal length.
    pub fn predict(&self, windows: &[&[f64]]) -> Result<Vec<f64>> {
        let (hs, _) = self.lstm.forward(&Self::inputs(windows))?;
        Ok(self.head.infer(hs.last().expect("non-empty"))?.column(0).to_vec())
    }

    /// Mean squared error and its gradient.
    pub fn loss_and_grad(&self, windows: &[&[f64]], targets: &[f64]) -> Result<(f64, SequenceModel)> {
        let (hs, tape) = self.lstm.forward(&Self::inputs(windows))?;
        let (out, head_tape) = self.head.forward(hs.last().expect("non-empty"))?;
        let b = targets.len() as f64;
        let mut dout = Array2::zeros((targets.len(), 1));
        let mut loss = 0.0;
        for (k, &y) in targets.iter().enumerate() {
            let e = out[[k, 0]] - y;
            loss += e * e / b;
            dout[[k, 0]] = 2.0 * e / b;
        }
        let (head, dh) = self.head.backward(&head_tape, &dout)?;
        let (lstm, _) = self.lstm.backward_last(&tape, &dh)?;
        Ok((loss, SequenceModel { lstm, head }))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Fitted {
    Constant(f64),
    Model { model: SequenceModel, mean: f64, std: f64 },
}

/// One station's departure forecaster.
#[derive(Debug, Clone, PartialEq)]
pub struct DepartureForecaster {
    pub config: DepartureConfig,
    fitted: Option<Fitted>,
    final_loss: Option<f64>,
}

impl DepartureForecaster {
    pub fn new(config: DepartureConfig) -> Self {
        DepartureForecaster {
            config,
            fitted: None,
            final_loss: None,
        }
    }

    pub fn is_trained(&self) -> bool {
        self.fitted.is_some()
    }

    /// Mean training loss of the last epoch in normalized units.
    pub fn final_loss(&self) -> Option<f64> {
        self.final_loss
    }

    pub fn model(&self) -> Option<&SequenceModel> {
        match &self.fitted {
            Some(Fitted::Model { model, .. }) => Some(model),
            _ => None,
        }
    }

    pub fn checkpoint(&self) -> Option<Checkpoint> {
        self.model().map(Checkpoint::from_params)
    }

    /// Trains on every length-`window` slice of `series` with the value
    /// that follows it as target. A series with no variation is kept as a
    /// constant.
    pub fn fit(&mut self, series: &[f64]) -> Result<()> {
        let cfg = self.config;
        if cfg.window == 0 || cfg.hidden == 0 || cfg.batch_size == 0 {
            return Err(Error::validation("departure config", "window, hidden and batch_size must be positive"));
        }
        if series.len() <= cfg.window {
            return Err(Error::validation(
                "history",
                format!("{} segments, need more than the window of {}", series.len(), cfg.window),
            ));
        }
        if series.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("departure history".into()));
        }
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / series.len() as f64;
        if var.sqrt() <= 1e-12 * mean.abs().max(1.0) {
            self.fitted = Some(Fitted::Constant(mean));
            self.final_loss = Some(0.0);
            return Ok(());
        }
        let std = var.sqrt();
        let z: Vec<f64> = series.iter().map(|v| (v - mean) / std).collect();
        let samples = z.len() - cfg.window;
        let mut rng = Rng64::new(cfg.seed);
        let mut model = SequenceModel::new(cfg.hidden, &mut rng);
        let mut opt = Optimizer::new(OptimizerConfig::adam(cfg.learning_rate).with_clip(cfg.clip_norm));
        let mut order: Vec<usize> = (0..samples).collect();
        let mut last = 0.0;
        for _ in 0..cfg.epochs {
            for i in (1..order.len()).rev() {
                order.swap(i, rng.below(i + 1));
            }
            let mut total = 0.0;
            for chunk in order.chunks(cfg.batch_size) {
                let windows: Vec<&[f64]> = chunk.iter().map(|&s| &z[s..s + cfg.window]).collect();
                let targets: Vec<f64> = chunk.iter().map(|&s| z[s + cfg.window]).collect();
                let (loss, grads) = model.loss_and_grad(&windows, &targets)?;
                if !loss.is_finite() {
                    return Err(Error::NonFinite("departure training loss".into()));
                }
                opt.step(&mut model, &grads)?;
                total += loss * chunk.len() as f64;
            }
            last = total / samples as f64;
        }
        self.fitted = Some(Fitted::Model { model, mean, std });
        self.final_loss = Some(last);
        Ok(())
    }

    /// Rolls the model forward `horizon` segments from the most recent
    /// `window` observations, feeding predictions back in.
    pub fn predict(&self, recent: &[f64], horizon: usize) -> Result<Vec<f64>> {
        let fitted = self.fitted.as_ref().ok_or(Error::Untrained)?;
        if horizon == 0 {
            return Ok(Vec::new());
        }
        let (model, mean, std) = match fitted {
            Fitted::Constant(c) => return Ok(vec![c.max(0.0); horizon]),
            Fitted::Model { model, mean, std } => (model, *mean, *std),
        };
        let w = self.config.window;
        if recent.len() < w {
            return Err(Error::validation("recent", format!("{} segments, need {w}", recent.len())));
        }
        let mut buf: Vec<f64> = recent[recent.len() - w..].iter().map(|v| (v - mean) / std).collect();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let next = model.predict(&[&buf[buf.len() - w..]])?[0];
            out.push((mean + std * next).max(0.0));
            buf.push(next);
        }
        Ok(out)
    }
}

/// Fits a forecaster on `history` and predicts the `horizon` segments that
/// follow it.
pub fn forecast_departures(history: &[f64], horizon: usize, config: DepartureConfig) -> Result<Vec<f64>> {
    let mut f = DepartureForecaster::new(config);
    f.fit(history)?;
    f.predict(history, horizon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BikeForecastConfig {
    pub clusters: usize,
    pub cluster_seed: u64,
    pub alpha: f64,
    pub departures: DepartureConfig,
}

impl Default for BikeForecastConfig {
    fn default() -> Self {
        BikeForecastConfig {
            clusters: 1,
            cluster_seed: 0,
            alpha: 0.0,
            departures: DepartureConfig::default(),
        }
    }
}

/// The fitted flow pipeline for a set of stations.
#[derive(Debug, Clone)]
pub struct BikeFlowForecaster {
    pub clusters: ClusterAssignment,
    pub od: OdFrequencyTable,
    pub stations: Vec<DepartureForecaster>,
}

impl BikeFlowForecaster {
    pub fn fit(history: &HistoryLog, coords: &[[f64; 2]], config: &BikeForecastConfig) -> Result<Self> {
        if coords.len() != history.stations {
            return Err(Error::shape("station coordinates", history.stations, coords.len()));
        }
        let clusters = cluster_stations(coords, config.clusters, config.cluster_seed)?;
        let od = od_probabilities(history, &clusters, config.alpha)?;
        let stations = (0..history.stations)
            .map(|s| {
                let mut cfg = config.departures;
                cfg.seed = cfg.seed.wrapping_add(s as u64);
                let mut f = DepartureForecaster::new(cfg);
                f.fit(&history.departure_series(s))?;
                Ok(f)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BikeFlowForecaster { clusters, od, stations })
    }

    /// Flow matrices for the `horizon` segments after `recent`, which holds
    /// each station's latest departures. Segments are labelled from
    /// `first_segment`.
    pub fn forecast(&self, recent: &[Vec<f64>], first_segment: usize, horizon: usize) -> Result<Vec<FlowMatrix>> {
        if recent.len() != self.stations.len() {
            return Err(Error::shape("recent departures", self.stations.len(), recent.len()));
        }
        let per_station = self
            .stations
            .iter()
            .zip(recent)
            .map(|(f, r)| f.predict(r, horizon))
            .collect::<Result<Vec<_>>>()?;
        (0..horizon)
            .map(|t| {
                let deps: Vec<f64> = per_station.iter().map(|p| p[t]).collect();
                predict_flow(&deps, &self.od, first_segment + t)
            })
            .collect()
    }
}

/// `segment,origin,destination,value` rows for each matrix.
pub fn write_flows_csv(path: &Path, flows: &[FlowMatrix], station_ids: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["segment", "origin", "destination", "value"])?;
    for f in flows {
        for (i, row) in f.g.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if i != j {
                    w.write_record([f.segment.to_string(), station_ids[i].clone(), station_ids[j].clone(), format!("{v}")])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `segment,index,value` rows of each encoding.
pub fn write_encodings_csv(path: &Path, flows: &[FlowMatrix]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["segment", "index", "value"])?;
    for f in flows {
        for (k, v) in encode_flow(&f.g)?.g.iter().enumerate() {
            w.write_record([f.segment.to_string(), k.to_string(), format!("{v}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_cluster(n: usize) -> ClusterAssignment {
        ClusterAssignment::single(&vec![[0.0, 0.0]; n])
    }

    #[test]
    fn frequency_table_examples() {
        let counts = vec![vec![0.0, 3.0, 1.0], vec![0.0, 0.0, 0.0], vec![0.0, 5.0, 0.0]];
        let od = OdFrequencyTable::from_counts(counts, &one_cluster(3), 0.0).unwrap();
        assert_eq!(od.probabilities[0], vec![0.0, 0.75, 0.25]);
        assert_eq!(od.probabilities[1], vec![0.5, 0.0, 0.5]);
        assert_eq!(od.probabilities[2], vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn fallback_stays_in_cluster() {
        let clusters = ClusterAssignment {
            labels: vec![0, 0, 1, 1, 2],
            centroids: vec![[0.0, 0.0]; 3],
        };
        let od = OdFrequencyTable::from_counts(vec![vec![0.0; 5]; 5], &clusters, 0.0).unwrap();
        assert_eq!(od.probabilities[0], vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(od.probabilities[3], vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(od.probabilities[4], vec![0.25, 0.25, 0.25, 0.25, 0.0]);
    }

    #[test]
    fn smoothing_adds_to_same_cluster_pairs() {
        let counts = vec![vec![0.0, 2.0, 0.0], vec![0.0; 3], vec![0.0; 3]];
        let od = OdFrequencyTable::from_counts(counts, &one_cluster(3), 1.0).unwrap();
        assert_eq!(od.probabilities[0], vec![0.0, 0.75, 0.25]);
        assert!(OdFrequencyTable::from_counts(vec![vec![0.0; 2]; 2], &one_cluster(2), -1.0).is_err());
    }

    #[test]
    fn product_rule() {
        let counts = vec![vec![0.0, 3.0, 1.0], vec![0.0; 3], vec![0.0; 3]];
        let od = OdFrequencyTable::from_counts(counts, &one_cluster(3), 0.0).unwrap();
        let g = predict_flow(&[8.0, 0.0, 0.0], &od, 5).unwrap();
        assert_eq!(g.g[0], vec![0.0, 6.0, 2.0]);
        assert_eq!(g.segment, 5);
        assert_eq!(predict_flow(&[0.0; 3], &od, 0).unwrap(), FlowMatrix::zeros(3, 0));
        let uniform = OdFrequencyTable::from_counts(vec![vec![0.0; 3]; 3], &one_cluster(3), 0.0).unwrap();
        let g = predict_flow(&[4.0, 0.0, 0.0], &uniform, 0).unwrap();
        assert_eq!(g.g[0].iter().sum::<f64>(), 4.0);
        assert!(g.g[1..].iter().flatten().all(|&v| v == 0.0));
        assert!(predict_flow(&[1.0], &od, 0).is_err());
    }

    #[test]
    fn encoding_examples() {
        assert_eq!(encode_flow(&[vec![0.0, 2.0], vec![3.0, 0.0]]).unwrap().g, vec![2.0, 3.0, 3.0, 2.0]);
        assert_eq!(encode_flow(&FlowMatrix::zeros(3, 0).g).unwrap().g, vec![0.0; 6]);
        assert!(encode_flow(&[vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn untrained_and_empty_horizon() {
        let f = DepartureForecaster::new(DepartureConfig::default());
        assert!(matches!(f.predict(&[0.0; 30], 2), Err(Error::Untrained)));
        let cfg = DepartureConfig {
            window: 4,
            epochs: 2,
            ..Default::default()
        };
        let series: Vec<f64> = (0..20).map(|t| (t % 5) as f64).collect();
        assert!(forecast_departures(&series, 0, cfg).unwrap().is_empty());
        assert!(forecast_departures(&series[..4], 1, cfg).unwrap_err().is_validation());
    }

    #[test]
    fn zero_history_predicts_zero() {
        let out = forecast_departures(&[0.0; 40], 3, DepartureConfig::default()).unwrap();
        assert_eq!(out, vec![0.0; 3]);
    }

    #[test]
    fn predictions_are_nonnegative_and_deterministic() {
        let series: Vec<f64> = (0..60).map(|t| if t % 6 == 0 { 9.0 } else { 0.0 }).collect();
        let cfg = DepartureConfig {
            window: 6,
            epochs: 5,
            hidden: 4,
            ..Default::default()
        };
        let a = forecast_departures(&series, 8, cfg).unwrap();
        let b = forecast_departures(&series, 8, cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn sequence_model_gradient_matches_finite_differences() {
        let mut rng = Rng64::new(3);
        let model = SequenceModel::new(3, &mut rng);
        let w1 = [0.3, -0.2, 0.5, 1.0];
        let w2 = [-1.0, 0.0, 0.4, 0.1];
        let windows: Vec<&[f64]> = vec![&w1, &w2];
        let targets = [0.7, -0.4];
        let (_, grads) = model.loss_and_grad(&windows, &targets).unwrap();
        let err = crate::nn::grad_check(&model, &grads, |m| Ok(m.loss_and_grad(&windows, &targets)?.0), 1e-5).unwrap();
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn pipeline_rows_match_departures() {
        let mut log = HistoryLog::new(3, 0);
        for s in 0..40 {
            let trips = vec![
                crate::demand::Trip { origin: 0, destination: 1, count: (s % 4) as u32 },
                crate::demand::Trip { origin: 1, destination: 2, count: 2 },
            ];
            log.record(s, &crate::demand::SegmentDemand { trips, bus_arrivals: vec![] });
        }
        let cfg = BikeForecastConfig {
            departures: DepartureConfig {
                window: 8,
                epochs: 3,
                hidden: 4,
                ..Default::default()
            },
            ..Default::default()
        };
        let f = BikeFlowForecaster::fit(&log, &[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], &cfg).unwrap();
        let recent: Vec<Vec<f64>> = (0..3).map(|s| log.departure_series(s)).collect();
        let flows = f.forecast(&recent, 40, 2).unwrap();
        assert_eq!(flows.len(), 2);
        assert_eq!(flows[1].segment, 41);
        // the second station always sends 2 bikes to the third
        assert!((flows[0].g[1][2] - 2.0).abs() < 1e-9);
        let dir = tempfile::tempdir().unwrap();
        let ids: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        write_flows_csv(&dir.path().join("g.csv"), &flows, &ids).unwrap();
        write_encodings_csv(&dir.path().join("enc.csv"), &flows).unwrap();
        let text = std::fs::read_to_string(dir.path().join("enc.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 6);
    }

    proptest! {
        #[test]
        fn flow_rows_and_encoding_conserve(
            n in 2usize..7,
            deps in proptest::collection::vec(0.0f64..50.0, 7),
            raw in proptest::collection::vec(0u32..6, 49),
        ) {
            let counts: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| if i == j { 0.0 } else { raw[i * 7 + j] as f64 }).collect())
                .collect();
            let od = OdFrequencyTable::from_counts(counts, &one_cluster(n), 0.0).unwrap();
            for row in &od.probabilities {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            let g = predict_flow(&deps[..n], &od, 0).unwrap();
            for (i, row) in g.g.iter().enumerate() {
                prop_assert!((row.iter().sum::<f64>() - deps[i]).abs() <= 1e-12 * deps[i].max(1.0));
                prop_assert_eq!(row[i], 0.0);
            }
            let e = encode_flow(&g.g).unwrap().g;
            let total = g.total();
            prop_assert!((e[..n].iter().sum::<f64>() - total).abs() < 1e-9);
            prop_assert!((e[n..].iter().sum::<f64>() - total).abs() < 1e-9);
        }

        #[test]
        fn encoding_is_permutation_equivariant(
            vals in proptest::collection::vec(0.0f64..10.0, 16),
            shift in 1usize..4,
        ) {
            let n = 4;
            let g: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { vals[i * n + j] }).collect()).collect();
            let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let gp: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| g[perm[i]][perm[j]]).collect()).collect();
            let e = encode_flow(&g).unwrap().g;
            let ep = encode_flow(&gp).unwrap().g;
            for i in 0..n {
                prop_assert!((ep[i] - e[perm[i]]).abs() < 1e-12);
                prop_assert!((ep[n + i] - e[n + perm[i]]).abs() < 1e-12);
            }
        }
    }
}
