//! Rolling-horizon discrete-event simulation and the fixed-route baseline.
//!
//! Every `dispatch_interval` the open requests and the shuttles' committed
//! states are fed to [`enumerate_plans`] and [`solve_dispatch`]. A selected
//! non-empty plan commits its requests to the shuttle for good and replaces
//! the rest of its route with the plan's visit schedule. Shuttles only change
//! course at stops: a moving shuttle finishes its current leg first.

pub mod baseline;
pub mod config;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use crate::costing::CostingOptions;
use crate::demand::{generate_demand, DemandTrip};
use crate::dispatch::{solve_dispatch, DispatchProblem};
use crate::enumeration::{enumerate_plans, subsets_up_to, EnumerationOptions, DEFAULT_MAX_PLANS};
use crate::error::{ConfigError, EnumerationError};
use crate::network::TravelNetwork;
use crate::reporting::{summarize_with, SummaryOptions, SummaryStats, TripRecord, TripStatus};
use crate::types::{RequestId, Seconds, ShuttleState, StopId, StopVisit, TripRequest, VehicleId};

pub use baseline::{
    baseline_trip, cost_reduction, min_fleet_fixed_routes, BaselineTrip, FixedRoute, RouteShape,
    RoutesFile,
};
pub use config::{BaselineConfig, DemandSource, ScenarioConfig, Section, World};

/// What happens at an event. Variant order is the tie-break priority at equal
/// times; within a variant, ids break ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    ShuttleArrives { vehicle: VehicleId, stop: StopId },
    RequestArrival(RequestId),
    DispatchTick,
    SimulationEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Event {
    pub time: Seconds,
    pub kind: EventKind,
}

/// Min-queue of events in (time, priority, id) order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
}

impl EventQueue {
    pub fn push(&mut self, time: Seconds, kind: EventKind) {
        self.heap.push(Reverse(Event { time, kind }));
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|Reverse(e)| e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Counters gathered during a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub generated: usize,
    pub ticks: usize,
    /// Ticks that ran the dispatch model.
    pub dispatches: usize,
    pub plans_evaluated: usize,
    pub max_onboard: u32,
    /// Stop visits that left a shuttle over capacity.
    pub capacity_violations: usize,
    /// Total shuttle driving time.
    pub busy_time: Seconds,
    pub end_time: Seconds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    /// One record per request, ascending id.
    pub records: Vec<TripRecord>,
    pub summary: SummaryStats,
    pub stats: RunStats,
}

/// Requests a scenario runs on, sorted by (time, id) and clipped to the horizon.
pub fn scenario_demand(
    config: &ScenarioConfig,
    world: &World,
) -> Result<Vec<DemandTrip>, ConfigError> {
    let mut trips = match &config.demand {
        DemandSource::Profile(p) => {
            let mut p = p.clone();
            p.seed = config.rng_seed;
            generate_demand(&p, &world.region, &world.network, config.horizon)
                .map_err(|e| ConfigError::Invalid(format!("demand: {e}")))?
        }
        DemandSource::Trips(t) => t.clone(),
        DemandSource::File(p) => {
            return Err(ConfigError::Invalid(format!(
                "demand file {} was not loaded",
                p.display()
            )))
        }
    };
    trips.retain(|t| (0..config.horizon).contains(&t.request.request_time));
    for t in &trips {
        world.network.stop(t.request.pickup)?;
        world.network.stop(t.request.dropoff)?;
        if t.request.passengers > config.shuttle_capacity {
            return Err(ConfigError::Invalid(format!(
                "request {} has {} passengers, more than a shuttle seats",
                t.request.id, t.request.passengers
            )));
        }
    }
    trips.sort_by_key(|t| (t.request.request_time, t.request.id));
    Ok(trips)
}

struct Shuttle {
    id: VehicleId,
    capacity: u32,
    /// Current stop when idle, the stop being driven to otherwise.
    heading: StopId,
    eta: Seconds,
    moving: bool,
    route: VecDeque<StopVisit>,
    assigned: Vec<TripRequest>,
    onboard: Vec<TripRequest>,
}

impl Shuttle {
    fn state(&self, now: Seconds) -> ShuttleState {
        let mut pickups = self.assigned.clone();
        pickups.sort_by_key(|r| r.id);
        let mut dropoffs = self.onboard.clone();
        dropoffs.sort_by_key(|r| r.id);
        ShuttleState {
            id: self.id,
            heading_stop: self.heading,
            arrival_time: if self.moving { self.eta } else { now },
            onboard: dropoffs.iter().map(|r| r.passengers).sum(),
            pending_pickups: pickups,
            pending_dropoffs: dropoffs,
            capacity: self.capacity,
        }
    }
}

struct Engine<'a> {
    config: &'a ScenarioConfig,
    network: &'a TravelNetwork,
    events: EventQueue,
    requests: BTreeMap<RequestId, TripRequest>,
    records: BTreeMap<RequestId, TripRecord>,
    /// Open, uncommitted requests, oldest first.
    queue: Vec<TripRequest>,
    shuttles: Vec<Shuttle>,
    stats: RunStats,
    options: EnumerationOptions,
}

impl Engine<'_> {
    fn run(&mut self) {
        let end = self.config.horizon + self.config.drain;
        self.events.push(0, EventKind::DispatchTick);
        self.events.push(end, EventKind::SimulationEnd);
        while let Some(ev) = self.events.pop() {
            let now = ev.time;
            self.stats.end_time = now;
            match ev.kind {
                EventKind::RequestArrival(id) => self.queue.push(self.requests[&id]),
                EventKind::ShuttleArrives { vehicle, stop } => {
                    let v = &mut self.shuttles[vehicle.0 as usize];
                    debug_assert_eq!(v.heading, stop);
                    v.moving = false;
                    self.advance(vehicle.0 as usize, now);
                }
                EventKind::DispatchTick => {
                    self.stats.ticks += 1;
                    self.dispatch(now);
                    if self.finished(now) {
                        break;
                    }
                    let next = now + self.config.dispatch_interval;
                    if next < end {
                        self.events.push(next, EventKind::DispatchTick);
                    }
                }
                EventKind::SimulationEnd => break,
            }
        }
    }

    /// Past the horizon with nothing left to serve.
    fn finished(&self, now: Seconds) -> bool {
        now >= self.config.horizon
            && self.queue.is_empty()
            && self
                .shuttles
                .iter()
                .all(|v| !v.moving && v.route.is_empty())
    }

    fn dispatch(&mut self, now: Seconds) {
        let max_defer = self.config.max_defer;
        let records = &mut self.records;
        self.queue.retain(|r| {
            let keep = now - r.request_time <= max_defer;
            if !keep {
                records.get_mut(&r.id).expect("record").status = TripStatus::Abandoned;
            }
            keep
        });
        if self.queue.is_empty() {
            return;
        }
        let states: Vec<ShuttleState> = self.shuttles.iter().map(|v| v.state(now)).collect();
        let fit = (0..=self.queue.len())
            .rev()
            .find(|&n| {
                (states.len() as u128).saturating_mul(subsets_up_to(n, self.options.k))
                    <= self.options.max_plans as u128
            })
            .unwrap_or(0);
        let n = self
            .queue
            .len()
            .min(self.config.max_requests_per_tick)
            .min(fit);
        if n == 0 {
            return;
        }
        let batch = self.queue[..n].to_vec();
        let plan_set = match enumerate_plans(&states, &batch, self.network, &self.options) {
            Ok(p) => p,
            Err(EnumerationError::TooLarge { .. }) => unreachable!("batch sized to the plan limit"),
            Err(e) => panic!("plan enumeration failed on a consistent state: {e}"),
        };
        self.stats.dispatches += 1;
        self.stats.plans_evaluated += plan_set.len();
        let problem =
            DispatchProblem::with_uniform_penalty(batch, plan_set, self.config.miss_penalty);
        let solution = solve_dispatch(&problem).expect("simulator plan sets are well formed");
        for &i in &solution.selected {
            let plan = problem.plan_set.plan(i);
            if plan.is_empty() {
                continue;
            }
            let v = plan.vehicle.0 as usize;
            for r in &plan.requests {
                self.records.get_mut(&r.id).expect("record").vehicle = Some(plan.vehicle);
            }
            self.queue.retain(|q| !plan.serves(q.id));
            let shuttle = &mut self.shuttles[v];
            shuttle.assigned.extend(plan.requests.iter().copied());
            shuttle.route = plan.visits.iter().cloned().collect();
            if !shuttle.moving {
                self.advance(v, now);
            }
        }
    }

    /// Serves the shuttle's current stop, then sets off towards the next visit
    /// that still has something to do.
    ///
    /// Passengers alight whenever the shuttle stops at their destination, even
    /// if the plan lists the drop-off later: sequencing only prices waiting, so
    /// a plan may defer a drop-off that costs nothing to do now.
    fn advance(&mut self, v: usize, now: Seconds) {
        let shuttle = &mut self.shuttles[v];
        let here = shuttle.heading;
        let records = &mut self.records;
        shuttle.onboard.retain(|r| {
            let alight = r.dropoff == here;
            if alight {
                let rec = records.get_mut(&r.id).expect("record");
                rec.dropoff_time = Some(now);
                rec.status = TripStatus::Completed;
            }
            !alight
        });
        if let Some(visit) = shuttle.route.pop_front_if(|s| s.stop == here) {
            for id in &visit.pickups {
                if let Some(pos) = shuttle.assigned.iter().position(|r| r.id == *id) {
                    let r = shuttle.assigned.swap_remove(pos);
                    shuttle.onboard.push(r);
                    records.get_mut(id).expect("record").pickup_time = Some(now);
                }
            }
        }
        let load: u32 = shuttle.onboard.iter().map(|r| r.passengers).sum();
        self.stats.max_onboard = self.stats.max_onboard.max(load);
        if load > shuttle.capacity {
            self.stats.capacity_violations += 1;
        }
        while let Some(front) = shuttle.route.front() {
            let pending = front
                .pickups
                .iter()
                .any(|id| shuttle.assigned.iter().any(|r| r.id == *id))
                || front
                    .dropoffs
                    .iter()
                    .any(|id| shuttle.onboard.iter().any(|r| r.id == *id));
            if pending {
                break;
            }
            shuttle.route.pop_front();
        }
        if let Some(next) = shuttle.route.front() {
            let tt = self
                .network
                .travel_time(shuttle.heading, next.stop)
                .expect("route stops are in the network");
            shuttle.heading = next.stop;
            shuttle.eta = now + tt;
            shuttle.moving = true;
            self.stats.busy_time += tt;
            self.events.push(
                shuttle.eta,
                EventKind::ShuttleArrives {
                    vehicle: shuttle.id,
                    stop: shuttle.heading,
                },
            );
        }
    }
}

fn summary_options(config: &ScenarioConfig) -> SummaryOptions {
    SummaryOptions {
        bin: config.bin,
        impute_abandoned: config.impute_abandoned.then_some(config.max_defer),
    }
}

/// Simulates the on-demand service over a fixed demand stream.
pub fn run_with_demand(
    config: &ScenarioConfig,
    world: &World,
    demand: &[DemandTrip],
) -> Result<SimulationOutput, ConfigError> {
    config.validate()?;
    let mut engine = Engine {
        config,
        network: &world.network,
        events: EventQueue::default(),
        requests: BTreeMap::new(),
        records: BTreeMap::new(),
        queue: Vec::new(),
        shuttles: config
            .depot_stops()
            .into_iter()
            .enumerate()
            .map(|(i, stop)| Shuttle {
                id: VehicleId(i as u32),
                capacity: config.shuttle_capacity,
                heading: stop,
                eta: 0,
                moving: false,
                route: VecDeque::new(),
                assigned: Vec::new(),
                onboard: Vec::new(),
            })
            .collect(),
        stats: RunStats {
            generated: demand.len(),
            ..RunStats::default()
        },
        options: EnumerationOptions {
            k: config.k,
            max_plans: DEFAULT_MAX_PLANS,
            max_outstanding: Some(config.max_outstanding),
            costing: CostingOptions {
                weight_by_party_size: config.weight_by_party_size,
            },
        },
    };
    for t in demand {
        let r = t.request;
        if engine.requests.insert(r.id, r).is_some() {
            return Err(ConfigError::Invalid(format!(
                "request {} listed twice",
                r.id
            )));
        }
        engine
            .records
            .insert(r.id, TripRecord::open(r.id, r.request_time, t.trip_type));
        engine
            .events
            .push(r.request_time, EventKind::RequestArrival(r.id));
    }
    engine.run();
    let stats = engine.stats;
    let records: Vec<TripRecord> = engine.records.into_values().collect();
    let mut summary = summarize_with(&records, summary_options(config))
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let span = config.fleet_size as f64 * stats.end_time.max(config.horizon) as f64;
    summary.utilization = Some(stats.busy_time as f64 / span);
    Ok(SimulationOutput {
        records,
        summary,
        stats,
    })
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<SimulationOutput, ConfigError> {
    let world = config.world()?;
    let demand = scenario_demand(config, &world)?;
    run_with_demand(config, &world, &demand)
}

/// Fixed-route journeys for the scenario's demand.
pub fn run_baseline_with_demand(
    config: &ScenarioConfig,
    world: &World,
    demand: &[DemandTrip],
) -> Result<SimulationOutput, ConfigError> {
    let base = config
        .baseline
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("scenario has no baseline routes".into()))?;
    let mut records: Vec<TripRecord> = demand
        .iter()
        .map(|t| {
            let r = &t.request;
            let mut rec = TripRecord::open(r.id, r.request_time, t.trip_type);
            match baseline_trip(
                r,
                &base.routes,
                &world.network,
                base.walk_speed,
                base.max_walk,
            ) {
                Some(trip) => {
                    rec.pickup_time = Some(trip.board);
                    rec.dropoff_time = Some(trip.arrive);
                    rec.status = TripStatus::Completed;
                }
                None => rec.status = TripStatus::Unserved,
            }
            rec
        })
        .collect();
    records.sort_by_key(|r| r.id);
    let summary = summarize_with(&records, summary_options(config))
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(SimulationOutput {
        stats: RunStats {
            generated: records.len(),
            ..RunStats::default()
        },
        records,
        summary,
    })
}

pub fn run_baseline(config: &ScenarioConfig) -> Result<SimulationOutput, ConfigError> {
    let world = config.world()?;
    let demand = scenario_demand(config, &world)?;
    run_baseline_with_demand(config, &world, &demand)
}

/// Runs the scenario once per fleet size on one shared demand stream.
pub fn sweep_fleet_sizes(
    config: &ScenarioConfig,
    sizes: &[u32],
) -> Result<Vec<(u32, SimulationOutput)>, ConfigError> {
    if sizes.is_empty() {
        return Err(ConfigError::Invalid("no fleet sizes to sweep".into()));
    }
    let world = config.world()?;
    let demand = scenario_demand(config, &world)?;
    sizes
        .iter()
        .map(|&n| {
            Ok((
                n,
                run_with_demand(&config.with_fleet_size(n), &world, &demand)?,
            ))
        })
        .collect()
}
