//! Demand forecasting for both systems.

pub mod bike;
pub mod bus;
pub mod cluster;

pub use bike::{
    encode_flow, forecast_departures, od_probabilities, predict_flow, write_encodings_csv, write_flows_csv, BikeFlowForecaster,
    BikeForecastConfig, DepartureConfig, DepartureForecaster, FlowEncoding, FlowMatrix, OdFrequencyTable, SequenceModel,
};
pub use bus::{fit_base, forecast_bus, reconcile, BusForecast, LinearBaseModel, SummingMatrix};
pub use cluster::{cluster_stations, ClusterAssignment};
