mod common;

use std::collections::BTreeSet;

use odmts_core::demand::{DemandProfile, TripMix};
use odmts_core::enumeration::{enumerate_plans, subsets_up_to, EnumerationOptions};
use odmts_core::network::{Mode, NetworkSpec, RegionSpec};
use odmts_core::simulator::{run_with_demand, scenario_demand, DemandSource, ScenarioConfig};
use odmts_core::{
    assignment_plan_cost, brute_force_dispatch, check_solution, evaluate_assignment_plan,
    solve_dispatch, CostingOptions, DispatchProblem, ShuttleState, Stop, StopId, TripStatus,
    VehicleId,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn sequence_is_the_smallest_optimal_one(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let committed = rng.random_range(0..=2);
        let fresh = rng.random_range(0..=3);
        let (shuttle, new, network) = random_costing_instance(&mut rng, committed, fresh);
        let got = evaluate_assignment_plan(&shuttle, &new, &network, CostingOptions::default())
            .unwrap()
            .map(|s| (s.waiting, s.sequence()));
        prop_assert_eq!(got, sequencing_oracle(&shuttle, &new, &network, false));
    }

    #[test]
    fn marginal_cost_is_non_negative(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let (shuttle, new, network) = random_costing_instance(&mut rng, 2, 3);
        let opts = CostingOptions::default();
        let base = evaluate_assignment_plan(&shuttle, &[], &network, opts).unwrap();
        prop_assume!(base.is_some());
        let base = base.unwrap().waiting;
        prop_assert_eq!(assignment_plan_cost(&shuttle, &[], &network, opts).unwrap(), Some(0));
        let full = evaluate_assignment_plan(&shuttle, &new, &network, opts).unwrap();
        let cost = assignment_plan_cost(&shuttle, &new, &network, opts).unwrap();
        prop_assert_eq!(cost, full.map(|s| s.waiting - base));
        if let Some(c) = cost {
            prop_assert!(c >= 0);
        }
    }

    #[test]
    fn request_order_does_not_matter(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let (shuttle, new, network) = random_costing_instance(&mut rng, 1, 4);
        let mut reversed = new.clone();
        reversed.reverse();
        let opts = CostingOptions::default();
        prop_assert_eq!(
            evaluate_assignment_plan(&shuttle, &new, &network, opts).unwrap(),
            evaluate_assignment_plan(&shuttle, &reversed, &network, opts).unwrap()
        );
    }

    #[test]
    fn plan_sets_are_bounded_and_indexed(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let network = random_network(&mut rng, 6);
        let nv = rng.random_range(1..=3);
        let nr = rng.random_range(0..=6);
        let k = rng.random_range(1..=3);
        let shuttles: Vec<_> = (0..nv)
            .map(|v| ShuttleState::idle(VehicleId(v), StopId(v), 0, rng.random_range(1..=2)))
            .collect();
        let requests: Vec<_> = (0..nr).map(|i| random_request(&mut rng, i, 6, 1)).collect();
        let plans = enumerate_plans(&shuttles, &requests, &network, &EnumerationOptions::with_k(k)).unwrap();
        prop_assert!(plans.len() as u128 <= nv as u128 * subsets_up_to(nr as usize, k));
        let mut seen = BTreeSet::new();
        for v in plans.vehicles() {
            let bucket = plans.plans_for(v);
            prop_assert!(bucket.iter().any(|&i| plans.plan(i).is_empty()));
            for &i in bucket {
                prop_assert_eq!(plans.plan(i).vehicle, v);
                prop_assert!(seen.insert(i));
                prop_assert!(plans.plan(i).requests.len() <= k);
            }
        }
        prop_assert_eq!(seen.len(), plans.len());
    }

    #[test]
    fn dispatch_is_optimal_on_mid_sized_problems(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let network = random_network(&mut rng, 8);
        let shuttles: Vec<_> = (0..rng.random_range(2..=5))
            .map(|v| ShuttleState::idle(VehicleId(v), StopId(v), rng.random_range(0..400), rng.random_range(1..=3)))
            .collect();
        let requests: Vec<_> = (0..rng.random_range(6..=12)).map(|i| random_request(&mut rng, i, 8, 1)).collect();
        let plans = enumerate_plans(&shuttles, &requests, &network, &EnumerationOptions::with_k(3)).unwrap();
        let penalty = rng.random_range(0..2000);
        let problem = DispatchProblem::with_uniform_penalty(requests, plans, penalty);
        let solution = solve_dispatch(&problem).unwrap();
        prop_assert_eq!(solution.objective, dispatch_oracle(&problem));
        prop_assert!(check_solution(&problem, &solution).is_ok());
        if let Ok(brute) = brute_force_dispatch(&problem) {
            prop_assert_eq!(solution, brute);
        }
    }

    /// Raising a served request's penalty never makes the solver drop it.
    #[test]
    fn higher_penalty_keeps_a_served_request_served(seed in any::<u64>(), bump in 1i64..5000) {
        let mut rng = rng(seed);
        let network = random_network(&mut rng, 6);
        let shuttles: Vec<_> = (0..rng.random_range(1..=3))
            .map(|v| ShuttleState::idle(VehicleId(v), StopId(v), 0, rng.random_range(1..=2)))
            .collect();
        let requests: Vec<_> = (0..rng.random_range(1..=6)).map(|i| random_request(&mut rng, i, 6, 1)).collect();
        let plans = enumerate_plans(&shuttles, &requests, &network, &EnumerationOptions::with_k(2)).unwrap();
        let penalties: std::collections::BTreeMap<_, _> =
            requests.iter().map(|r| (r.id, rng.random_range(0..800))).collect();
        let before = solve_dispatch(&DispatchProblem::new(requests.clone(), plans.clone(), penalties.clone())).unwrap();
        for r in &requests {
            let mut raised = penalties.clone();
            *raised.get_mut(&r.id).unwrap() += bump;
            let after = solve_dispatch(&DispatchProblem::new(requests.clone(), plans.clone(), raised)).unwrap();
            if !before.missed.contains(&r.id) {
                prop_assert!(!after.missed.contains(&r.id));
            }
            prop_assert!(after.objective >= before.objective);
        }
    }
}

fn small_scenario(rng: &mut ChaCha8Rng) -> ScenarioConfig {
    let side = rng.random_range(2..=3u32);
    let mut stops: Vec<Stop> = (0..side * side)
        .map(|i| {
            Stop::new(
                StopId(i),
                (i % side) as f64 * 600.0,
                (i / side) as f64 * 600.0,
            )
            .unwrap()
        })
        .collect();
    stops.push(Stop::new(StopId(50), -500.0, 0.0).unwrap());
    let horizon = 3600;
    let mut profile = DemandProfile::constant(rng.random_range(5.0..60.0), horizon, 0);
    profile.mix = TripMix {
        intra: 0.6,
        outbound: 0.2,
        inbound: 0.2,
    };
    profile.max_party = rng.random_range(1..=2);
    ScenarioConfig {
        horizon,
        dispatch_interval: rng.random_range(10..=60),
        fleet_size: rng.random_range(1..=4),
        shuttle_capacity: rng.random_range(2..=4),
        k: rng.random_range(1..=3),
        miss_penalty: rng.random_range(0..=3600),
        max_defer: rng.random_range(200..=1800),
        rng_seed: rng.random(),
        drain: rng.random_range(0..=1800),
        max_requests_per_tick: rng.random_range(1..=12),
        max_outstanding: rng.random_range(1..=6),
        weight_by_party_size: rng.random_bool(0.3),
        impute_abandoned: false,
        bin: 900,
        depots: vec![],
        network: NetworkSpec {
            stops,
            mode: Mode::Manhattan { speed: 8.0 },
        },
        region: RegionSpec {
            members: (0..side * side).map(StopId).collect(),
            gateways: vec![StopId(50)],
            downstream: vec![],
        },
        demand: DemandSource::Profile(profile),
        baseline: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn simulations_conserve_requests_and_seats(seed in any::<u64>()) {
        let config = small_scenario(&mut rng(seed));
        let world = config.world().unwrap();
        let demand = scenario_demand(&config, &world).unwrap();
        let out = run_with_demand(&config, &world, &demand).unwrap();
        let s = &out.summary;
        prop_assert_eq!(s.generated, demand.len());
        prop_assert_eq!(s.completed + s.abandoned + s.pending, demand.len());
        prop_assert_eq!(out.stats.capacity_violations, 0);
        prop_assert!(peak_load(&out.records, &demand) <= config.shuttle_capacity);
        for r in &out.records {
            if r.status == TripStatus::Completed {
                prop_assert!(r.request_time <= r.pickup_time.unwrap());
                prop_assert!(r.pickup_time <= r.dropoff_time);
            }
        }
        let again = run_with_demand(&config, &world, &demand).unwrap();
        prop_assert_eq!(&again.records, &out.records);
    }
}

#[test]
fn sweep_scenario_runs_from_file() {
    let config = ScenarioConfig::from_file(scenario_path("peak_demand.toml")).unwrap();
    let out = odmts_core::sweep_fleet_sizes(&config, &[5, 30]).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[0].1.stats.generated, out[1].1.stats.generated);
    assert!(out[1].1.summary.waiting.mean <= out[0].1.summary.waiting.mean);
}
