//! Synthetic demand: periodic Poisson profiles, scripted trip lists, and the
//! history log the forecasters learn from.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng64;
use crate::world::{Direction, WorldState};

/// `count` riders wanting a bike from `origin` to `destination` (station
/// indices) within one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trip {
    pub origin: usize,
    pub destination: usize,
    pub count: u32,
}

/// `count` passengers joining the queue at bus stop `stop` bound for
/// `destination` (global stop indices on one route).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusArrival {
    pub stop: usize,
    pub destination: usize,
    pub count: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentDemand {
    pub trips: Vec<Trip>,
    pub bus_arrivals: Vec<BusArrival>,
}

impl SegmentDemand {
    pub fn total_trips(&self) -> u32 {
        self.trips.iter().map(|t| t.count).sum()
    }
}

/// Periodic bike demand: expected departures per station per segment of the
/// day, and destination propensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    /// `rates[station][segment_of_day]`; a row of length 1 is constant.
    pub rates: Vec<Vec<f64>>,
    /// Nonnegative, zero diagonal.
    pub od_weights: Vec<Vec<f64>>,
    #[serde(default)]
    pub noise_seed: u64,
}

impl DemandProfile {
    pub fn validate(&self, stations: usize) -> Result<()> {
        if self.rates.len() != stations {
            return Err(Error::validation("demand.rates", format!("{} rows for {stations} stations", self.rates.len())));
        }
        if self.od_weights.len() != stations || self.od_weights.iter().any(|r| r.len() != stations) {
            return Err(Error::validation("demand.od_weights", format!("must be {stations}x{stations}")));
        }
        let day = self.day_length();
        for (i, row) in self.rates.iter().enumerate() {
            if row.is_empty() || (row.len() != 1 && row.len() != day) {
                return Err(Error::validation(format!("demand.rates[{i}]"), format!("length must be 1 or {day}")));
            }
            if row.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
                return Err(Error::validation(format!("demand.rates[{i}]"), "rates must be finite and >= 0"));
            }
        }
        for (i, row) in self.od_weights.iter().enumerate() {
            if row.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                return Err(Error::validation(format!("demand.od_weights[{i}]"), "weights must be finite and >= 0"));
            }
            if row[i] != 0.0 {
                return Err(Error::validation(format!("demand.od_weights[{i}][{i}]"), "diagonal must be zero"));
            }
            let has_rate = self.rates[i].iter().any(|r| *r > 0.0);
            if has_rate && row.iter().sum::<f64>() <= 0.0 {
                return Err(Error::validation(format!("demand.od_weights[{i}]"), "station has departures but no destinations"));
            }
        }
        Ok(())
    }

    pub fn day_length(&self) -> usize {
        self.rates.iter().map(Vec::len).max().unwrap_or(1).max(1)
    }

    pub fn rate(&self, station: usize, segment: usize) -> f64 {
        let row = &self.rates[station];
        row[segment % row.len()]
    }

    /// Destination probabilities of one origin (zeros when it has none).
    pub fn od_probabilities(&self, origin: usize) -> Vec<f64> {
        let row = &self.od_weights[origin];
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter().map(|w| w / total).collect()
        } else {
            vec![0.0; row.len()]
        }
    }

    /// Expected trip matrix of a segment: rate times destination probability.
    pub fn expected_flow(&self, segment: usize) -> Vec<Vec<f64>> {
        (0..self.rates.len())
            .map(|i| {
                let rate = self.rate(i, segment);
                self.od_probabilities(i).into_iter().map(|p| rate * p).collect()
            })
            .collect()
    }
}

/// Bus passenger demand on one route, resolved to global stop indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteDemand {
    pub stops: Vec<usize>,
    /// `forward[position][segment_of_day]`, toward s_n.
    pub forward: Vec<Vec<f64>>,
    /// `backward[position][segment_of_day]`, toward s_1.
    pub backward: Vec<Vec<f64>>,
}

/// JSON form of [`RouteDemand`], keyed by route id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteDemandSpec {
    pub route: String,
    pub forward: Vec<Vec<f64>>,
    pub backward: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BusDemandProfile {
    pub routes: Vec<RouteDemand>,
}

fn periodic(row: &[f64], segment: usize) -> f64 {
    if row.is_empty() {
        0.0
    } else {
        row[segment % row.len()]
    }
}

impl BusDemandProfile {
    pub fn resolve(specs: &[RouteDemandSpec], world: &WorldState) -> Result<Self> {
        let mut routes = Vec::new();
        for (k, spec) in specs.iter().enumerate() {
            let route = world
                .routes
                .iter()
                .find(|r| r.id == spec.route)
                .ok_or_else(|| Error::validation(format!("bus_demand[{k}].route"), format!("unknown route {:?}", spec.route)))?;
            let n = route.stops.len();
            for (name, rows) in [("forward", &spec.forward), ("backward", &spec.backward)] {
                if rows.len() != n {
                    return Err(Error::validation(format!("bus_demand[{k}].{name}"), format!("{} rows for {n} stops", rows.len())));
                }
                if rows.iter().flatten().any(|r| !(*r >= 0.0) || !r.is_finite()) {
                    return Err(Error::validation(format!("bus_demand[{k}].{name}"), "rates must be finite and >= 0"));
                }
            }
            routes.push(RouteDemand {
                stops: route.stops.clone(),
                forward: spec.forward.clone(),
                backward: spec.backward.clone(),
            });
        }
        Ok(BusDemandProfile { routes })
    }

    /// Expected arrivals per global stop for one direction.
    pub fn expected(&self, stops: usize, direction: Direction, segment: usize) -> Vec<f64> {
        let mut out = vec![0.0; stops];
        for r in &self.routes {
            let rows = match direction {
                Direction::Forward => &r.forward,
                Direction::Backward => &r.backward,
            };
            for (pos, &stop) in r.stops.iter().enumerate() {
                out[stop] += periodic(&rows[pos], segment);
            }
        }
        out
    }
}

/// Draws one segment of demand. Departures are Poisson with the profile
/// rate; each departure picks a destination from the OD weights. Bus
/// passengers pick uniformly among the stops ahead of them.
pub fn sample_segment(
    profile: &DemandProfile,
    bus: Option<&BusDemandProfile>,
    segment: usize,
    rng: &mut Rng64,
) -> SegmentDemand {
    let n = profile.rates.len();
    let mut out = SegmentDemand::default();
    for origin in 0..n {
        let departures = rng.poisson(profile.rate(origin, segment));
        if departures == 0 {
            continue;
        }
        let probs = profile.od_probabilities(origin);
        let mut counts = vec![0u32; n];
        for _ in 0..departures {
            if let Some(d) = rng.categorical(&probs) {
                counts[d] += 1;
            }
        }
        out.trips.extend(
            counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(destination, &count)| Trip { origin, destination, count }),
        );
    }
    if let Some(bus) = bus {
        out.bus_arrivals = sample_bus(bus, segment, rng);
    }
    out
}

/// Draws one segment of bus passenger arrivals.
pub fn sample_bus(bus: &BusDemandProfile, segment: usize, rng: &mut Rng64) -> Vec<BusArrival> {
    let mut arrivals = Vec::new();
    for r in &bus.routes {
        let n = r.stops.len();
        for pos in 0..n {
            for dir in [Direction::Forward, Direction::Backward] {
                let (rate, ahead): (f64, Vec<usize>) = match dir {
                    Direction::Forward => (periodic(&r.forward[pos], segment), (pos + 1..n).collect()),
                    Direction::Backward => (periodic(&r.backward[pos], segment), (0..pos).rev().collect()),
                };
                if ahead.is_empty() {
                    continue;
                }
                let count = rng.poisson(rate);
                let mut per_dest = vec![0u32; ahead.len()];
                for _ in 0..count {
                    per_dest[rng.below(ahead.len())] += 1;
                }
                arrivals.extend(per_dest.iter().zip(&ahead).filter(|(c, _)| **c > 0).map(|(&count, &d)| BusArrival {
                    stop: r.stops[pos],
                    destination: r.stops[d],
                    count,
                }));
            }
        }
    }
    arrivals
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedTrip {
    pub origin: String,
    pub destination: String,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    /// Segment offset from the episode start.
    pub segment: usize,
    pub trips: Vec<ScriptedTrip>,
}

/// An explicit, validated per-segment trip list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandScript {
    segments: Vec<Vec<Trip>>,
}

impl DemandScript {
    pub fn new(entries: &[ScriptEntry], station_ids: &[String], episode_length: usize) -> Result<Self> {
        let index = |id: &str, field: String| {
            station_ids
                .iter()
                .position(|s| s == id)
                .ok_or_else(|| Error::validation(field, format!("unknown station {id:?}")))
        };
        let mut segments = vec![Vec::new(); episode_length];
        for (e, entry) in entries.iter().enumerate() {
            if entry.segment >= episode_length {
                return Err(Error::validation(
                    format!("script[{e}].segment"),
                    format!("segment {} beyond episode of {episode_length}", entry.segment),
                ));
            }
            for (t, trip) in entry.trips.iter().enumerate() {
                segments[entry.segment].push(Trip {
                    origin: index(&trip.origin, format!("script[{e}].trips[{t}].origin"))?,
                    destination: index(&trip.destination, format!("script[{e}].trips[{t}].destination"))?,
                    count: trip.count,
                });
            }
        }
        Ok(DemandScript { segments })
    }

    /// Trips of one segment offset (empty beyond the script).
    pub fn segment(&self, offset: usize) -> &[Trip] {
        self.segments.get(offset).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.iter().all(Vec::is_empty)
    }

    pub fn total_demand(&self) -> u64 {
        self.segments.iter().flatten().map(|t| t.count as u64).sum()
    }

    /// Trip counts as an `n x n` matrix for one segment offset.
    pub fn flow(&self, offset: usize, stations: usize) -> Vec<Vec<f64>> {
        let mut g = vec![vec![0.0; stations]; stations];
        for t in self.segment(offset) {
            g[t.origin][t.destination] += t.count as f64;
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySegment {
    pub segment: usize,
    pub departures: Vec<u32>,
    pub trips: Vec<Trip>,
    pub bus_arrivals: Vec<BusArrival>,
}

/// Realized demand, segment by segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryLog {
    pub stations: usize,
    pub stops: usize,
    pub segments: Vec<HistorySegment>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HistoryRow {
    segment: usize,
    origin: String,
    destination: String,
    count: u32,
}

impl HistoryLog {
    pub fn new(stations: usize, stops: usize) -> Self {
        HistoryLog {
            stations,
            stops,
            segments: Vec::new(),
        }
    }

    pub fn record(&mut self, segment: usize, demand: &SegmentDemand) {
        let mut departures = vec![0u32; self.stations];
        for t in &demand.trips {
            departures[t.origin] += t.count;
        }
        self.segments.push(HistorySegment {
            segment,
            departures,
            trips: demand.trips.clone(),
            bus_arrivals: demand.bus_arrivals.clone(),
        });
    }

    /// Samples `segments` consecutive segments starting at `start`.
    pub fn generate(
        profile: &DemandProfile,
        bus: Option<&BusDemandProfile>,
        stops: usize,
        start: usize,
        segments: usize,
        seed: u64,
    ) -> Self {
        let mut rng = Rng64::new(seed ^ profile.noise_seed);
        let mut log = HistoryLog::new(profile.rates.len(), stops);
        for s in start..start + segments {
            let demand = sample_segment(profile, bus, s, &mut rng);
            log.record(s, &demand);
        }
        log
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn departure_series(&self, station: usize) -> Vec<f64> {
        self.segments.iter().map(|s| s.departures[station] as f64).collect()
    }

    pub fn od_counts(&self) -> Vec<Vec<f64>> {
        let mut counts = vec![vec![0.0; self.stations]; self.stations];
        for t in self.segments.iter().flat_map(|s| &s.trips) {
            counts[t.origin][t.destination] += t.count as f64;
        }
        counts
    }

    /// Passenger arrivals per stop and direction: `(forward, backward)`,
    /// each indexed `[stop][segment]`.
    pub fn bus_series(&self, world: &WorldState) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let len = self.segments.len();
        let mut fwd = vec![vec![0.0; len]; self.stops];
        let mut bwd = vec![vec![0.0; len]; self.stops];
        for (t, seg) in self.segments.iter().enumerate() {
            for a in &seg.bus_arrivals {
                let (o, d) = (&world.bus_stops[a.stop], &world.bus_stops[a.destination]);
                if d.route_position > o.route_position {
                    fwd[a.stop][t] += a.count as f64;
                } else {
                    bwd[a.stop][t] += a.count as f64;
                }
            }
        }
        (fwd, bwd)
    }

    /// Writes bike trips as `segment,origin,destination,count` rows.
    pub fn write_bike_csv(&self, path: &Path, station_ids: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for seg in &self.segments {
            for t in &seg.trips {
                w.serialize(HistoryRow {
                    segment: seg.segment,
                    origin: station_ids[t.origin].clone(),
                    destination: station_ids[t.destination].clone(),
                    count: t.count,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes bus arrivals with the same four columns, keyed by stop id.
    pub fn write_bus_csv(&self, path: &Path, stop_ids: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for seg in &self.segments {
            for a in &seg.bus_arrivals {
                w.serialize(HistoryRow {
                    segment: seg.segment,
                    origin: stop_ids[a.stop].clone(),
                    destination: stop_ids[a.destination].clone(),
                    count: a.count,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a bike trip CSV (and optionally a bus CSV) back. Segments span
    /// `first..first + segments`; when `segments` is `None` the range ends
    /// at the last segment with a row.
    pub fn read_csv(
        bike: &Path,
        bus: Option<&Path>,
        station_ids: &[String],
        stop_ids: &[String],
        segments: Option<usize>,
    ) -> Result<Self> {
        let bike_rows = read_rows(bike)?;
        let bus_rows = match bus {
            Some(p) => read_rows(p)?,
            None => Vec::new(),
        };
        let first = bike_rows.iter().chain(&bus_rows).map(|r| r.segment).min().unwrap_or(0);
        let last = bike_rows.iter().chain(&bus_rows).map(|r| r.segment + 1).max().unwrap_or(first);
        let span = segments.unwrap_or(last - first);
        let mut log = HistoryLog::new(station_ids.len(), stop_ids.len());
        let mut demand = vec![SegmentDemand::default(); span];
        let lookup = |ids: &[String], id: &str, what: &str| {
            ids.iter()
                .position(|s| s == id)
                .ok_or_else(|| Error::validation(what.to_string(), format!("unknown id {id:?}")))
        };
        for r in bike_rows {
            let Some(slot) = demand.get_mut(r.segment - first) else { continue };
            slot.trips.push(Trip {
                origin: lookup(station_ids, &r.origin, "history.origin")?,
                destination: lookup(station_ids, &r.destination, "history.destination")?,
                count: r.count,
            });
        }
        for r in bus_rows {
            let Some(slot) = demand.get_mut(r.segment - first) else { continue };
            slot.bus_arrivals.push(BusArrival {
                stop: lookup(stop_ids, &r.origin, "history.origin")?,
                destination: lookup(stop_ids, &r.destination, "history.destination")?,
                count: r.count,
            });
        }
        for (k, d) in demand.iter().enumerate() {
            log.record(first + k, d);
        }
        Ok(log)
    }
}

fn read_rows(path: &Path) -> Result<Vec<HistoryRow>> {
    let file = std::fs::File::open(path).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })?;
    let mut rows = Vec::new();
    for r in csv::Reader::from_reader(file).deserialize() {
        rows.push(r?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(rate: f64) -> DemandProfile {
        DemandProfile {
            rates: vec![vec![rate], vec![rate], vec![0.0]],
            od_weights: vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]],
            noise_seed: 0,
        }
    }

    fn ids(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn zero_rate_means_no_trips() {
        let p = profile(0.0);
        let mut rng = Rng64::new(1);
        for s in 0..50 {
            assert!(sample_segment(&p, None, s, &mut rng).trips.is_empty());
        }
    }

    #[test]
    fn fixed_seed_repeats() {
        let p = profile(3.0);
        let a: Vec<_> = {
            let mut rng = Rng64::new(11);
            (0..20).map(|s| sample_segment(&p, None, s, &mut rng)).collect()
        };
        let b: Vec<_> = {
            let mut rng = Rng64::new(11);
            (0..20).map(|s| sample_segment(&p, None, s, &mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn long_run_mean_matches_rate() {
        let p = DemandProfile {
            rates: vec![vec![4.0], vec![0.0]],
            od_weights: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            noise_seed: 0,
        };
        let log = HistoryLog::generate(&p, None, 0, 0, 10_000, 42);
        let mean = log.departure_series(0).iter().sum::<f64>() / 10_000.0;
        assert!((3.9..=4.1).contains(&mean), "mean {mean}");
    }

    #[test]
    fn od_rows_sum_to_departures() {
        let log = HistoryLog::generate(&profile(5.0), None, 0, 0, 200, 3);
        for seg in &log.segments {
            for i in 0..3 {
                let row: u32 = seg.trips.iter().filter(|t| t.origin == i).map(|t| t.count).sum();
                assert_eq!(row, seg.departures[i]);
            }
        }
    }

    #[test]
    fn fig1a_script_replays_exactly() {
        let entries: Vec<ScriptEntry> = serde_json::from_value(serde_json::json!([
            {"segment": 0, "trips": [
                {"origin": "A", "destination": "B", "count": 10},
                {"origin": "B", "destination": "C", "count": 15}]},
            {"segment": 1, "trips": [{"origin": "B", "destination": "C", "count": 10}]}
        ]))
        .unwrap();
        let s = DemandScript::new(&entries, &ids(&["A", "B", "C"]), 2).unwrap();
        assert_eq!(
            s.segment(0),
            &[Trip { origin: 0, destination: 1, count: 10 }, Trip { origin: 1, destination: 2, count: 15 }]
        );
        assert_eq!(s.segment(1), &[Trip { origin: 1, destination: 2, count: 10 }]);
        assert_eq!(s.total_demand(), 35);
    }

    #[test]
    fn empty_script_is_zero_demand() {
        let s = DemandScript::new(&[], &ids(&["A", "B"]), 4).unwrap();
        assert!(s.is_empty());
        assert!(s.segment(2).is_empty());
    }

    #[test]
    fn script_errors() {
        let late = ScriptEntry { segment: 5, trips: vec![] };
        assert!(DemandScript::new(&[late], &ids(&["A"]), 2).is_err());
        let unknown = ScriptEntry {
            segment: 0,
            trips: vec![ScriptedTrip { origin: "Z".into(), destination: "A".into(), count: 1 }],
        };
        let err = DemandScript::new(&[unknown], &ids(&["A"]), 2).unwrap_err();
        assert!(err.to_string().contains("origin"));
    }

    #[test]
    fn profile_validation() {
        let mut p = profile(1.0);
        p.od_weights[0][0] = 1.0;
        assert!(p.validate(3).is_err());
        let mut p = profile(1.0);
        p.od_weights[1] = vec![0.0; 3];
        assert!(p.validate(3).is_err());
        assert!(profile(1.0).validate(3).is_ok());
    }

    #[test]
    fn bike_csv_round_trip() {
        let log = HistoryLog::generate(&profile(2.0), None, 0, 0, 30, 9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bike.csv");
        let names = ids(&["A", "B", "C"]);
        log.write_bike_csv(&path, &names).unwrap();
        let back = HistoryLog::read_csv(&path, None, &names, &[], Some(30)).unwrap();
        assert_eq!(back.od_counts(), log.od_counts());
        assert_eq!(back.departure_series(0), log.departure_series(0));
    }
}
