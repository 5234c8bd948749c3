//! Dispatching and simulation for on-demand shuttle fleets in low-ridership
//! regions.
//!
//! Every dispatch interval the open requests are combined with each shuttle
//! into assignment plans of at most `k` requests ([`enumeration`]), each plan
//! is priced by the waiting time its optimal pick-up/drop-off sequence adds
//! ([`costing`]), and a set-partitioning program selects one plan per shuttle
//! ([`dispatch`]). [`simulator`] runs this on a rolling horizon next to a
//! fixed-route baseline; [`reporting`] turns the trip records into comparison
//! tables.

pub mod costing;
pub mod demand;
pub mod dispatch;
pub mod enumeration;
pub mod error;
pub mod formats;
pub mod network;
pub mod reporting;
pub mod simulator;
pub mod types;

pub use costing::{
    assignment_plan_cost, evaluate_assignment_plan, CostingOptions, PlanCoster, SearchContext,
    Sequencing, TravelSearchNode,
};
pub use dispatch::{
    brute_force_dispatch, check_solution, solve_dispatch, DispatchProblem, Violation,
};
pub use enumeration::{enumerate_plans, EnumerationOptions, PlanSet};
pub use network::{classify_trip, select_gateway, Mode, Region, TravelNetwork, TripType};
pub use reporting::{compare, summarize, Comparison, SummaryStats, TripRecord, TripStatus};
pub use simulator::{
    cost_reduction, min_fleet_fixed_routes, run_baseline, run_scenario, sweep_fleet_sizes,
    FixedRoute, ScenarioConfig, SimulationOutput,
};
pub use types::*;
