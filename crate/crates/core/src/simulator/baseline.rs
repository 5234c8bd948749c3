//! Fixed-route bus baseline and fleet-sizing arithmetic.
//!
//! Timetables are anchored at t = 0: every `headway` a bus leaves each
//! terminal (one terminal for circular routes) and reaches the stop `i`
//! segments along after `i` segment times. Segment time is the one-way time
//! spread evenly over the route's stops.

use serde::{Deserialize, Serialize};

use crate::network::TravelNetwork;
use crate::types::{Seconds, Stop, StopId, TripRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteShape {
    TwoWay,
    Circular,
}

/// Times are in minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedRoute {
    #[serde(default)]
    pub name: String,
    pub one_way_time: f64,
    pub headway: f64,
    pub shape: RouteShape,
    #[serde(default)]
    pub served_stops: Vec<StopId>,
}

/// Route list for `fleetcalc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutesFile {
    pub routes: Vec<FixedRoute>,
}

impl FixedRoute {
    pub fn new(
        one_way_time: f64,
        headway: f64,
        shape: RouteShape,
        served_stops: Vec<StopId>,
    ) -> Self {
        Self {
            name: String::new(),
            one_way_time,
            headway,
            shape,
            served_stops,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.one_way_time > 0.0 && self.one_way_time.is_finite()) {
            return Err(format!(
                "route {:?}: one_way_time must be positive",
                self.name
            ));
        }
        if !(self.headway > 0.0 && self.headway.is_finite()) {
            return Err(format!("route {:?}: headway must be positive", self.name));
        }
        Ok(())
    }

    /// Buses needed to keep the headway.
    pub fn buses(&self) -> u32 {
        // Tolerance keeps exact ratios such as 35/35 from rounding up.
        let per_direction = (self.one_way_time / self.headway - 1e-9).ceil().max(1.0) as u32;
        match self.shape {
            RouteShape::TwoWay => per_direction * 2,
            RouteShape::Circular => per_direction,
        }
    }

    fn headway_s(&self) -> f64 {
        self.headway * 60.0
    }

    /// In-vehicle time between adjacent stops, in seconds.
    pub fn segment_time(&self) -> f64 {
        let n = self.served_stops.len();
        let segments = match self.shape {
            RouteShape::TwoWay => n.saturating_sub(1),
            RouteShape::Circular => n,
        };
        self.one_way_time * 60.0 / segments.max(1) as f64
    }

    /// Earliest departure from stop index `i` at or after `t` on a bus
    /// travelling `forward` (towards higher indices).
    pub fn next_departure(&self, i: usize, forward: bool, t: f64) -> f64 {
        let n = self.served_stops.len();
        let hops = if forward || self.shape == RouteShape::Circular {
            i
        } else {
            n - 1 - i
        };
        let offset = hops as f64 * self.segment_time();
        let h = self.headway_s();
        let k = ((t - offset) / h - 1e-9).ceil().max(0.0);
        offset + k * h
    }

    /// Boarding time and arrival time for a ride from stop index `from` to `to`
    /// when reaching `from` at `t`.
    pub fn ride(&self, from: usize, to: usize, t: f64) -> (f64, f64) {
        let n = self.served_stops.len();
        let (forward, hops) = match self.shape {
            RouteShape::TwoWay => (to > from, from.abs_diff(to)),
            RouteShape::Circular => (true, (to + n - from) % n),
        };
        let board = self.next_departure(from, forward, t);
        (board, board + hops as f64 * self.segment_time())
    }
}

/// Σ over routes of ⌈one_way / headway⌉, doubled for two-way routes.
pub fn min_fleet_fixed_routes(routes: &[FixedRoute]) -> u32 {
    routes.iter().map(FixedRoute::buses).sum()
}

/// Operating-cost reduction in percent from replacing `buses` with `shuttles`.
pub fn cost_reduction(buses: u32, shuttles: u32) -> f64 {
    assert!(buses > 0, "cost_reduction needs at least one bus");
    (buses as f64 - shuttles as f64) / buses as f64 * 100.0
}

/// A passenger's fixed-route journey.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineTrip {
    /// Boarding time (request time plus walk plus headway wait).
    pub board: Seconds,
    /// Arrival at the destination stop.
    pub arrive: Seconds,
}

fn nearest(route: &FixedRoute, network: &TravelNetwork, at: &Stop) -> Option<(usize, f64)> {
    route
        .served_stops
        .iter()
        .enumerate()
        .filter_map(|(i, s)| network.stop(*s).ok().map(|s| (i, at.distance_to(s))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Walks to the route stop nearest the origin, rides to the stop nearest the
/// destination and walks on; the fastest route wins. `None` when no route has
/// distinct stops within `max_walk` of both ends.
pub fn baseline_trip(
    request: &TripRequest,
    routes: &[FixedRoute],
    network: &TravelNetwork,
    walk_speed: f64,
    max_walk: Option<f64>,
) -> Option<BaselineTrip> {
    let origin = network.stop(request.pickup).ok()?;
    let dest = network.stop(request.dropoff).ok()?;
    let within = |d: f64| max_walk.is_none_or(|m| d <= m + 1e-9);
    let t0 = request.request_time as f64;
    let mut best: Option<(f64, f64)> = None;
    for route in routes.iter().filter(|r| r.served_stops.len() >= 2) {
        let Some((i, d1)) = nearest(route, network, origin) else {
            continue;
        };
        let Some((j, d2)) = nearest(route, network, dest) else {
            continue;
        };
        if i == j || !within(d1) || !within(d2) {
            continue;
        }
        let (board, off) = route.ride(i, j, t0 + d1 / walk_speed);
        let arrive = off + d2 / walk_speed;
        if best.is_none_or(|(_, a)| arrive < a) {
            best = Some((board, arrive));
        }
    }
    best.map(|(board, arrive)| BaselineTrip {
        board: board.round() as Seconds,
        arrive: arrive.round() as Seconds,
    })
}
