//! Construction of the assignment-plan set: every shuttle paired with every
//! subset of at most `k` open requests, priced by the sequencer.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;

use crate::costing::{CostingOptions, PlanCoster};
use crate::error::EnumerationError;
use crate::network::TravelNetwork;
use crate::types::{AssignmentPlan, ShuttleState, TripRequest, VehicleId};

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_MAX_PLANS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationOptions {
    /// Largest number of new requests in one plan.
    pub k: usize,
    /// Upper limit on `|V| * sum_{j<=k} C(|R|, j)`.
    pub max_plans: usize,
    /// Plans that would leave a shuttle responsible for more than this many
    /// requests (committed plus new) are treated as infeasible.
    pub max_outstanding: Option<usize>,
    pub costing: CostingOptions,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            max_plans: DEFAULT_MAX_PLANS,
            max_outstanding: None,
            costing: CostingOptions::default(),
        }
    }
}

impl EnumerationOptions {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }
}

/// Priced plans in canonical order (vehicle id, then request subsets in
/// lexicographic id order, empty subset first).
#[derive(Debug, Clone, PartialEq)]
pub struct PlanSet {
    plans: Vec<AssignmentPlan>,
    k: usize,
    per_vehicle: BTreeMap<VehicleId, Vec<usize>>,
}

impl PlanSet {
    /// Wraps an explicit plan list, indexing it by vehicle.
    pub fn from_plans(plans: Vec<AssignmentPlan>, k: usize) -> Self {
        let mut per_vehicle: BTreeMap<VehicleId, Vec<usize>> = BTreeMap::new();
        for (i, p) in plans.iter().enumerate() {
            per_vehicle.entry(p.vehicle).or_default().push(i);
        }
        Self {
            plans,
            k,
            per_vehicle,
        }
    }

    pub fn plans(&self) -> &[AssignmentPlan] {
        &self.plans
    }

    pub fn plan(&self, i: usize) -> &AssignmentPlan {
        &self.plans[i]
    }

    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn per_vehicle(&self) -> &BTreeMap<VehicleId, Vec<usize>> {
        &self.per_vehicle
    }

    pub fn vehicles(&self) -> impl Iterator<Item = VehicleId> + '_ {
        self.per_vehicle.keys().copied()
    }

    pub fn plans_for(&self, v: VehicleId) -> &[usize] {
        self.per_vehicle.get(&v).map_or(&[], Vec::as_slice)
    }
}

/// `sum_{j=0}^{k} C(n, j)`, saturating.
pub fn subsets_up_to(n: usize, k: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for j in 0..=k.min(n) {
        total = total.saturating_add(binom);
        binom = binom.saturating_mul((n - j) as u128) / (j as u128 + 1);
    }
    total
}

pub fn enumerate_plans(
    shuttles: &[ShuttleState],
    requests: &[TripRequest],
    network: &TravelNetwork,
    options: &EnumerationOptions,
) -> Result<PlanSet, EnumerationError> {
    if options.k == 0 {
        return Err(EnumerationError::ZeroCap);
    }
    let mut requests = requests.to_vec();
    requests.sort_by_key(|r| r.id);
    if let Some(w) = requests.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(EnumerationError::DuplicateRequest(w[0].id));
    }
    let offered: HashSet<_> = requests.iter().map(|r| r.id).collect();
    for v in shuttles {
        if let Some(r) = v
            .pending_pickups
            .iter()
            .chain(&v.pending_dropoffs)
            .find(|r| offered.contains(&r.id))
        {
            return Err(EnumerationError::AlreadyCommitted {
                request: r.id,
                vehicle: v.id,
            });
        }
    }

    let bound = (shuttles.len() as u128).saturating_mul(subsets_up_to(requests.len(), options.k));
    if bound > options.max_plans as u128 {
        return Err(EnumerationError::TooLarge {
            vehicles: shuttles.len(),
            requests: requests.len(),
            k: options.k,
            plans: bound,
            limit: options.max_plans,
        });
    }

    let mut order: Vec<&ShuttleState> = shuttles.iter().collect();
    order.sort_by_key(|v| v.id);
    let per_vehicle: Vec<Vec<AssignmentPlan>> = order
        .par_iter()
        .map(|v| plans_for_vehicle(v, &requests, network, options))
        .collect::<Result<_, _>>()?;
    Ok(PlanSet::from_plans(
        per_vehicle.into_iter().flatten().collect(),
        options.k,
    ))
}

fn plans_for_vehicle(
    shuttle: &ShuttleState,
    requests: &[TripRequest],
    network: &TravelNetwork,
    options: &EnumerationOptions,
) -> Result<Vec<AssignmentPlan>, EnumerationError> {
    let coster = PlanCoster::new(shuttle, network, options.costing)?;
    let room = options
        .max_outstanding
        .map_or(options.k, |m| m.saturating_sub(shuttle.outstanding()));
    let mut walk = SubsetWalk {
        coster: &coster,
        requests,
        limit: options.k.min(room),
        chosen: Vec::new(),
        infeasible: Vec::new(),
        plans: Vec::new(),
        vehicle: shuttle.id,
    };
    walk.visit(0)?;
    Ok(walk.plans)
}

/// Depth-first subset generation in lexicographic order. Supersets of an
/// infeasible subset are skipped: dropping a request from a feasible sequence
/// never overfills the shuttle, so infeasibility is inherited upward.
struct SubsetWalk<'a> {
    coster: &'a PlanCoster<'a>,
    requests: &'a [TripRequest],
    limit: usize,
    chosen: Vec<usize>,
    infeasible: Vec<Vec<usize>>,
    plans: Vec<AssignmentPlan>,
    vehicle: VehicleId,
}

impl SubsetWalk<'_> {
    fn contains_infeasible(&self) -> bool {
        self.infeasible
            .iter()
            .any(|bad| bad.iter().all(|i| self.chosen.contains(i)))
    }

    fn visit(&mut self, from: usize) -> Result<(), EnumerationError> {
        let group: Vec<TripRequest> = self.chosen.iter().map(|&i| self.requests[i]).collect();
        match self.coster.cost(&group)? {
            Some((cost, seq)) => self.plans.push(AssignmentPlan {
                vehicle: self.vehicle,
                requests: group,
                cost,
                visits: seq.visits,
            }),
            None => {
                self.infeasible.push(self.chosen.clone());
                return Ok(());
            }
        }
        if self.chosen.len() == self.limit {
            return Ok(());
        }
        for next in from..self.requests.len() {
            self.chosen.push(next);
            if !self.contains_infeasible() {
                self.visit(next + 1)?;
            }
            self.chosen.pop();
        }
        Ok(())
    }
}
