use serde::{Deserialize, Serialize};

use super::{distance, AgentKind, WorldState};
use crate::demand::Trip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BikeStepOutcome {
    pub served: u32,
    pub lost: u32,
    /// Served count for each input trip, in input order.
    pub served_per_trip: Vec<u32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RepositionOutcome {
    /// Clipped signed bike count actually moved (positive loads).
    pub realized: i32,
    pub distance: f64,
    /// Bikes of the request that would have exceeded a capacity: the
    /// vehicle's free space on loads, the station's free docks on unloads.
    pub overflow: u32,
}

impl WorldState {
    /// Settles one segment of bike trips and advances the clock.
    ///
    /// Trips are served in the given order. A rider needs a bike at the
    /// origin now and a free dock at the destination once every earlier
    /// rider of the segment has docked; bikes picked up during the segment
    /// only land at its end. Whatever cannot be served is lost.
    pub fn step_bike_world(&mut self, trips: &[Trip]) -> Result<BikeStepOutcome> {
        let out = self.settle_trips(trips)?;
        self.clock.advance();
        Ok(out)
    }

    pub(crate) fn check_trips(&self, trips: &[Trip]) -> Result<()> {
        let n = self.bike_stations.len();
        if let Some(t) = trips.iter().find(|t| t.origin >= n || t.destination >= n) {
            return Err(Error::validation(
                "trip",
                format!("station index {}->{} out of {} stations", t.origin, t.destination, n),
            ));
        }
        Ok(())
    }

    /// [`WorldState::step_bike_world`] without touching the clock.
    pub(crate) fn settle_trips(&mut self, trips: &[Trip]) -> Result<BikeStepOutcome> {
        self.check_trips(trips)?;
        let n = self.bike_stations.len();
        let mut pending = vec![0u32; n];
        let mut out = BikeStepOutcome {
            served_per_trip: Vec::with_capacity(trips.len()),
            ..Default::default()
        };
        for t in trips {
            let origin = &self.bike_stations[t.origin];
            let served = if t.origin == t.destination {
                t.count.min(origin.available)
            } else {
                let dest = &self.bike_stations[t.destination];
                let free = dest.docks - dest.available - pending[t.destination];
                t.count.min(origin.available).min(free)
            };
            self.bike_stations[t.origin].available -= served;
            pending[t.destination] += served;
            self.in_transit_bikes += served;
            out.served += served;
            out.lost += t.count - served;
            out.served_per_trip.push(served);
        }
        for (station, arriving) in self.bike_stations.iter_mut().zip(&pending) {
            station.available += arriving;
            self.in_transit_bikes -= arriving;
        }
        Ok(out)
    }

    /// Moves a dispatch vehicle to `target` and loads (`quantity > 0`) or
    /// unloads (`quantity < 0`) bikes there, clipped to what is feasible.
    pub fn apply_reposition(&mut self, vehicle: usize, target: usize, quantity: i32) -> Result<RepositionOutcome> {
        match self.agents.get(vehicle) {
            Some(a) if a.kind == AgentKind::DispatchVehicle => {}
            Some(_) => return Err(Error::validation("vehicle", format!("agent {vehicle} is not a dispatch vehicle"))),
            None => return Err(Error::validation("vehicle", format!("unknown agent {vehicle}"))),
        }
        if target >= self.bike_stations.len() {
            return Err(Error::validation("target_station", format!("unknown station {target}")));
        }
        let agent = &mut self.agents[vehicle];
        let station = &mut self.bike_stations[target];
        let from = agent.position();
        let mut out = RepositionOutcome::default();
        let want = quantity.unsigned_abs();
        if quantity > 0 {
            let reachable = want.min(station.available);
            let moved = reachable.min(agent.remaining);
            out.overflow = reachable - moved;
            station.available -= moved;
            agent.occupied += moved;
            agent.remaining -= moved;
            out.realized = moved as i32;
        } else if quantity < 0 {
            let reachable = want.min(agent.occupied);
            let moved = reachable.min(station.free_docks());
            out.overflow = reachable - moved;
            station.available += moved;
            agent.occupied -= moved;
            agent.remaining += moved;
            out.realized = -(moved as i32);
        }
        agent.operation = out.realized;
        agent.move_to(target);
        out.distance = distance(self.bike_stations[from].coord, self.bike_stations[target].coord);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::fig1a_spec;
    use super::*;
    use proptest::prelude::*;

    fn trip(o: usize, d: usize, c: u32) -> Trip {
        Trip { origin: o, destination: d, count: c }
    }

    fn world_with(bikes: [u32; 3]) -> WorldState {
        let mut spec = fig1a_spec();
        spec.vehicles[0].initial_load = 0;
        for (s, b) in spec.stations.iter_mut().zip(bikes) {
            s.initial_bikes = b;
        }
        WorldState::build(&spec).unwrap()
    }

    /// Rider-by-rider settlement: each customer checks out one bike and
    /// reserves one dock at the destination, in scenario order.
    fn settle_one_by_one(stations: &[(u32, u32)], trips: &[Trip]) -> (u32, u32, Vec<u32>) {
        let mut avail: Vec<u32> = stations.iter().map(|s| s.0).collect();
        let mut reserved = vec![0u32; stations.len()];
        let (mut served, mut lost) = (0, 0);
        for t in trips {
            for _ in 0..t.count {
                let dock_ok = t.origin == t.destination
                    || avail[t.destination] + reserved[t.destination] < stations[t.destination].1;
                if avail[t.origin] > 0 && dock_ok {
                    avail[t.origin] -= 1;
                    reserved[t.destination] += 1;
                    served += 1;
                } else {
                    lost += 1;
                }
            }
        }
        let end = avail.iter().zip(&reserved).map(|(a, r)| a + r).collect();
        (served, lost, end)
    }

    #[test]
    fn ride_a_to_b() {
        let mut w = world_with([10, 0, 0]);
        let out = w.step_bike_world(&[trip(0, 1, 10)]).unwrap();
        assert_eq!((out.served, out.lost), (10, 0));
        assert_eq!(w.bike_stations[0].available, 0);
        assert_eq!(w.bike_stations[1].available, 10);
        assert_eq!(w.clock.offset(), 1);
    }

    #[test]
    fn empty_station_loses_everything() {
        let mut w = world_with([0, 0, 0]);
        let out = w.step_bike_world(&[trip(0, 1, 15)]).unwrap();
        assert_eq!((out.served, out.lost), (0, 15));
    }

    #[test]
    fn inflow_lands_at_segment_end() {
        let trips = [trip(0, 1, 10), trip(1, 2, 15)];
        let (served, lost, end) = settle_one_by_one(&[(10, 20), (0, 20), (0, 20)], &trips);
        assert_eq!((served, lost), (10, 15));
        let mut w = world_with([10, 0, 0]);
        let out = w.step_bike_world(&trips).unwrap();
        assert_eq!(out.served_per_trip, vec![10, 0]);
        assert_eq!((out.served, out.lost), (served, lost));
        let avail: Vec<u32> = w.bike_stations.iter().map(|s| s.available).collect();
        assert_eq!(avail, end);
    }

    #[test]
    fn full_destination_converts_to_lost() {
        let mut spec = fig1a_spec();
        spec.vehicles[0].initial_load = 0;
        spec.stations[0].initial_bikes = 5;
        spec.stations[1].docks = 3;
        spec.stations[1].initial_bikes = 1;
        let mut w = WorldState::build(&spec).unwrap();
        let out = w.step_bike_world(&[trip(0, 1, 5)]).unwrap();
        assert_eq!((out.served, out.lost), (2, 3));
        assert_eq!(w.bike_stations[1].available, 3);
    }

    #[test]
    fn unknown_station_is_rejected() {
        let mut w = world_with([1, 0, 0]);
        assert!(w.step_bike_world(&[trip(0, 7, 1)]).is_err());
    }

    #[test]
    fn load_ten_bikes() {
        let mut w = world_with([10, 0, 0]);
        let r = w.apply_reposition(0, 0, 10).unwrap();
        assert_eq!(r.realized, 10);
        assert_eq!(w.bike_stations[0].available, 0);
        assert_eq!(w.agents[0].occupied, 10);
        w.check_invariants().unwrap();
    }

    #[test]
    fn zero_quantity_only_moves() {
        let mut w = world_with([4, 0, 0]);
        let r = w.apply_reposition(0, 2, 0).unwrap();
        assert_eq!(r.realized, 0);
        assert_eq!(w.agents[0].location, vec![0.0, 0.0, 1.0]);
        assert_eq!(r.distance, 2.0);
        assert_eq!(w.bike_stations[0].available, 4);
    }

    #[test]
    fn unload_clips_to_free_docks() {
        let mut spec = fig1a_spec();
        spec.vehicles[0].initial_load = 7;
        spec.stations[1].docks = 5;
        spec.stations[1].initial_bikes = 3;
        let mut w = WorldState::build(&spec).unwrap();
        let r = w.apply_reposition(0, 1, -7).unwrap();
        assert_eq!(r.realized, -2);
        assert_eq!(r.overflow, 5);
        assert_eq!(w.agents[0].operation, -2);
        assert_eq!(w.agents[0].occupied, 5);
        w.check_invariants().unwrap();
    }

    #[test]
    fn unknown_vehicle_or_station_errors() {
        let mut w = world_with([0, 0, 0]);
        assert!(w.apply_reposition(3, 0, 1).is_err());
        assert!(w.apply_reposition(0, 3, 1).is_err());
    }

    proptest! {
        #[test]
        fn settlement_matches_rider_by_rider(
            bikes in proptest::collection::vec(0u32..6, 3),
            docks_extra in proptest::collection::vec(0u32..4, 3),
            trips in proptest::collection::vec((0usize..3, 0usize..3, 0u32..6), 0..6),
        ) {
            let mut spec = fig1a_spec();
            spec.vehicles[0].initial_load = 0;
            let mut stations = Vec::new();
            for i in 0..3 {
                spec.stations[i].initial_bikes = bikes[i];
                spec.stations[i].docks = bikes[i] + docks_extra[i];
                stations.push((bikes[i], bikes[i] + docks_extra[i]));
            }
            let trips: Vec<Trip> = trips.into_iter().map(|(o, d, c)| trip(o, d, c)).collect();
            let (served, lost, end) = settle_one_by_one(&stations, &trips);
            let mut w = WorldState::build(&spec).unwrap();
            let out = w.step_bike_world(&trips).unwrap();
            prop_assert_eq!((out.served, out.lost), (served, lost));
            let avail: Vec<u32> = w.bike_stations.iter().map(|s| s.available).collect();
            prop_assert_eq!(avail, end);
            prop_assert!(w.check_invariants().is_ok());
        }

        #[test]
        fn steps_are_deterministic(bikes in proptest::collection::vec(0u32..8, 3), q in -12i32..12, target in 0usize..3) {
            let w0 = world_with([bikes[0], bikes[1], bikes[2]]);
            let run = |mut w: WorldState| {
                let r = w.apply_reposition(0, target, q).unwrap();
                let o = w.step_bike_world(&[trip(0, 1, 3), trip(2, 0, 2)]).unwrap();
                (w, r, o)
            };
            prop_assert_eq!(run(w0.clone()), run(w0));
        }
    }
}
