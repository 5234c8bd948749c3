//! Independent reference implementations and instance generators.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use odmts_core::demand::DemandTrip;
use odmts_core::network::Mode;
use odmts_core::{
    DispatchProblem, RequestId, Seconds, ShuttleState, Stop, StopId, TravelNetwork, TripRecord,
    TripRequest, VehicleId,
};
use rand::Rng;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

/// One pick-up or drop-off of one request.
#[derive(Clone, Copy)]
struct Action {
    request: usize,
    pickup: bool,
}

/// Exhaustive sequencing oracle.
///
/// Tries every ordering of the pick-up and drop-off actions in which each
/// pick-up precedes its drop-off. Driving to an action's stop performs every
/// action due there (drop-offs, then pick-ups); the shuttle waits for a
/// pick-up that is not yet requested. Orderings that overfill the shuttle are
/// discarded. Returns the minimum total waiting and, among minimizers, the
/// smallest visited-stop sequence; `None` when no ordering fits.
pub fn sequencing_oracle(
    shuttle: &ShuttleState,
    new_requests: &[TripRequest],
    network: &TravelNetwork,
    weight_by_party: bool,
) -> Option<(Seconds, Vec<StopId>)> {
    let mut reqs: Vec<(TripRequest, bool)> = Vec::new();
    for r in &shuttle.pending_dropoffs {
        reqs.push((*r, true));
    }
    for r in shuttle.pending_pickups.iter().chain(new_requests) {
        reqs.push((*r, false));
    }
    let mut actions = Vec::new();
    for (i, (_, onboard)) in reqs.iter().enumerate() {
        if !onboard {
            actions.push(Action {
                request: i,
                pickup: true,
            });
        }
        actions.push(Action {
            request: i,
            pickup: false,
        });
    }
    let state = OracleState {
        stop: shuttle.heading_stop,
        time: shuttle.arrival_time,
        picked: reqs.iter().map(|(_, on)| *on).collect(),
        dropped: vec![false; reqs.len()],
        load: shuttle.onboard,
        waiting: 0,
        path: Vec::new(),
    };
    let mut best: Option<(Seconds, Vec<StopId>)> = None;
    explore(
        &reqs,
        &actions,
        network,
        shuttle.capacity,
        weight_by_party,
        state,
        &mut best,
    );
    best
}

#[derive(Clone)]
struct OracleState {
    stop: StopId,
    time: Seconds,
    picked: Vec<bool>,
    dropped: Vec<bool>,
    load: u32,
    waiting: Seconds,
    path: Vec<StopId>,
}

fn explore(
    reqs: &[(TripRequest, bool)],
    actions: &[Action],
    network: &TravelNetwork,
    capacity: u32,
    weight_by_party: bool,
    state: OracleState,
    best: &mut Option<(Seconds, Vec<StopId>)>,
) {
    if state.dropped.iter().all(|&d| d) {
        let better = match best {
            None => true,
            Some((w, p)) => (state.waiting, &state.path) < (*w, p),
        };
        if better {
            *best = Some((state.waiting, state.path));
        }
        return;
    }
    for a in actions {
        let done = if a.pickup {
            state.picked[a.request]
        } else {
            state.dropped[a.request]
        };
        if done || (!a.pickup && !state.picked[a.request]) {
            continue;
        }
        let r = &reqs[a.request].0;
        let target = if a.pickup { r.pickup } else { r.dropoff };
        let mut next = state.clone();
        let arrival = state.time + network.travel_time(state.stop, target).unwrap();
        next.stop = target;
        next.time = arrival;
        next.path.push(target);
        for (i, (q, _)) in reqs.iter().enumerate() {
            if next.picked[i] && !next.dropped[i] && q.dropoff == target {
                next.dropped[i] = true;
                next.load -= q.passengers;
            }
        }
        for (i, (q, _)) in reqs.iter().enumerate() {
            if !next.picked[i] && q.pickup == target {
                next.picked[i] = true;
                next.load += q.passengers;
                let weight = if weight_by_party {
                    q.passengers as Seconds
                } else {
                    1
                };
                next.waiting += weight * (arrival - q.request_time).max(0);
                next.time = next.time.max(q.request_time);
            }
        }
        if next.load > capacity {
            continue;
        }
        explore(
            reqs,
            actions,
            network,
            capacity,
            weight_by_party,
            next,
            best,
        );
    }
}

/// Exact set-partitioning optimum by memoized recursion over vehicles and
/// the set of requests already served.
pub fn dispatch_oracle(problem: &DispatchProblem) -> Seconds {
    let index: BTreeMap<RequestId, usize> = problem
        .requests
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id, i))
        .collect();
    let mut by_vehicle: BTreeMap<VehicleId, Vec<(u64, Seconds)>> = BTreeMap::new();
    for p in problem.plan_set.plans() {
        let mask = p.request_ids().fold(0u64, |m, id| m | 1 << index[&id]);
        by_vehicle
            .entry(p.vehicle)
            .or_default()
            .push((mask, p.cost));
    }
    let vehicles: Vec<Vec<(u64, Seconds)>> = by_vehicle.into_values().collect();
    let penalties: Vec<Seconds> = problem
        .requests
        .iter()
        .map(|r| problem.miss_penalty.get(&r.id).copied().unwrap_or(0))
        .collect();
    let mut memo = HashMap::new();
    best_from(0, 0, &vehicles, &penalties, &mut memo)
}

fn best_from(
    d: usize,
    used: u64,
    vehicles: &[Vec<(u64, Seconds)>],
    penalties: &[Seconds],
    memo: &mut HashMap<(usize, u64), Seconds>,
) -> Seconds {
    if d == vehicles.len() {
        return (0..penalties.len())
            .filter(|i| used & (1 << i) == 0)
            .map(|i| penalties[i])
            .sum();
    }
    if let Some(&v) = memo.get(&(d, used)) {
        return v;
    }
    let v = vehicles[d]
        .iter()
        .filter(|(m, _)| m & used == 0)
        .map(|&(m, c)| c + best_from(d + 1, used | m, vehicles, penalties, memo))
        .min()
        .expect("every vehicle has an empty plan");
    memo.insert((d, used), v);
    v
}

/// Random stops in a 1 km square, Euclidean or Manhattan.
pub fn random_network(rng: &mut impl Rng, n: u32) -> TravelNetwork {
    let stops = (0..n)
        .map(|i| {
            Stop::new(
                StopId(i),
                rng.random_range(0.0..1000.0f64).round(),
                rng.random_range(0.0..1000.0f64).round(),
            )
            .unwrap()
        })
        .collect();
    let speed = rng.random_range(5.0..15.0f64);
    let mode = if rng.random_bool(0.5) {
        Mode::Euclidean { speed }
    } else {
        Mode::Manhattan { speed }
    };
    TravelNetwork::new(stops, mode).unwrap()
}

pub fn random_request(rng: &mut impl Rng, id: u64, stops: u32, max_party: u32) -> TripRequest {
    let p = rng.random_range(0..stops);
    let mut d = rng.random_range(0..stops - 1);
    if d >= p {
        d += 1;
    }
    TripRequest::new(
        RequestId(id),
        StopId(p),
        StopId(d),
        rng.random_range(0..400),
        rng.random_range(1..=max_party),
    )
    .unwrap()
}

/// A shuttle with up to `committed` requests already assigned (waiting for
/// pick-up or onboard) and `fresh` new requests for it.
pub fn random_costing_instance(
    rng: &mut impl Rng,
    committed: usize,
    fresh: usize,
) -> (ShuttleState, Vec<TripRequest>, TravelNetwork) {
    let n = rng.random_range(3..=7);
    let network = random_network(rng, n);
    let max_party = rng.random_range(1..=2);
    let capacity = rng.random_range(1..=4).max(max_party);
    let mut pickups = Vec::new();
    let mut dropoffs = Vec::new();
    let mut onboard = 0;
    for i in 0..committed {
        let r = random_request(rng, i as u64, n, max_party);
        if rng.random_bool(0.5) && onboard + r.passengers <= capacity {
            onboard += r.passengers;
            dropoffs.push(r);
        } else {
            pickups.push(r);
        }
    }
    let shuttle = ShuttleState::new(
        VehicleId(0),
        StopId(rng.random_range(0..n)),
        rng.random_range(0..200),
        pickups,
        dropoffs,
        capacity,
    )
    .unwrap();
    let fresh = (0..fresh)
        .map(|i| random_request(rng, 100 + i as u64, n, max_party))
        .collect();
    (shuttle, fresh, network)
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Largest onboard count of any shuttle, rebuilt from the trip records:
/// a passenger occupies a seat from pick-up until drop-off.
pub fn peak_load(records: &[TripRecord], demand: &[DemandTrip]) -> u32 {
    let party = |id: RequestId| {
        demand
            .iter()
            .find(|t| t.request.id == id)
            .map_or(0, |t| t.request.passengers)
    };
    let mut events: Vec<(VehicleId, Seconds, i64)> = Vec::new();
    for r in records {
        let (Some(v), Some(p)) = (r.vehicle, r.pickup_time) else {
            continue;
        };
        let n = party(r.id) as i64;
        events.push((v, p, n));
        events.push((v, r.dropoff_time.unwrap_or(Seconds::MAX), -n));
    }
    // Drop-offs at an instant free seats before pick-ups at that instant.
    events.sort_by_key(|&(v, t, d)| (v, t, d));
    let (mut peak, mut load, mut current) = (0i64, 0i64, None);
    for (v, _, d) in events {
        if current != Some(v) {
            current = Some(v);
            load = 0;
        }
        load += d;
        peak = peak.max(load);
    }
    peak as u32
}
