//! Exact set-partitioning dispatch: each shuttle takes exactly one plan, each
//! request is served by exactly one selected plan or marked missed, and the
//! sum of miss penalties plus plan costs is minimized.
//!
//! Ties are resolved toward fewer missed requests, then toward the
//! lexicographically smallest vector of selected plan indices (vehicles in id
//! order). [`solve_dispatch`] and [`brute_force_dispatch`] implement the same
//! ordering, so their results are identical, not just equally good.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enumeration::PlanSet;
use crate::error::DispatchError;
use crate::types::{DispatchSolution, RequestId, Seconds, TripRequest, VehicleId};

/// Default cost of leaving a request unserved for one interval.
pub const DEFAULT_MISS_PENALTY: Seconds = 3600;

/// Subgradient steps per search node.
const LAGRANGIAN_STEPS: usize = 30;

/// Combination limit for [`brute_force_dispatch`].
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchProblem {
    pub requests: Vec<TripRequest>,
    pub plan_set: PlanSet,
    pub miss_penalty: BTreeMap<RequestId, Seconds>,
}

impl DispatchProblem {
    pub fn new(
        requests: Vec<TripRequest>,
        plan_set: PlanSet,
        miss_penalty: BTreeMap<RequestId, Seconds>,
    ) -> Self {
        Self {
            requests,
            plan_set,
            miss_penalty,
        }
    }

    /// Same penalty for every request.
    pub fn with_uniform_penalty(
        requests: Vec<TripRequest>,
        plan_set: PlanSet,
        penalty: Seconds,
    ) -> Self {
        let miss_penalty = requests.iter().map(|r| (r.id, penalty)).collect();
        Self::new(requests, plan_set, miss_penalty)
    }

    fn penalty(&self, r: RequestId) -> Seconds {
        self.miss_penalty.get(&r).copied().unwrap_or(0)
    }

    fn validate(&self) -> Result<(), DispatchError> {
        for r in &self.requests {
            match self.miss_penalty.get(&r.id) {
                Some(&m) if m < 0 => return Err(DispatchError::NegativePenalty(r.id)),
                Some(_) => {}
                None => return Err(DispatchError::MissingPenalty(r.id)),
            }
        }
        let known: BTreeSet<RequestId> = self.requests.iter().map(|r| r.id).collect();
        for (i, p) in self.plan_set.plans().iter().enumerate() {
            if let Some(r) = p.request_ids().find(|r| !known.contains(r)) {
                return Err(DispatchError::UnknownRequest {
                    plan: i,
                    request: r,
                });
            }
        }
        for (&v, idx) in self.plan_set.per_vehicle() {
            if !idx.iter().any(|&i| self.plan_set.plan(i).is_empty()) {
                return Err(DispatchError::MissingEmptyPlan(v));
            }
        }
        Ok(())
    }

    /// Objective of selecting `plans`, missing the uncovered requests; `None`
    /// when two plans cover the same request.
    fn evaluate(&self, plans: &[usize]) -> Option<(Seconds, BTreeSet<RequestId>)> {
        let mut covered = BTreeSet::new();
        let mut cost = 0;
        for &i in plans {
            let p = self.plan_set.plan(i);
            cost += p.cost;
            for r in p.request_ids() {
                if !covered.insert(r) {
                    return None;
                }
            }
        }
        let missed: BTreeSet<RequestId> = self
            .requests
            .iter()
            .map(|r| r.id)
            .filter(|r| !covered.contains(r))
            .collect();
        let penalty: Seconds = missed.iter().map(|&r| self.penalty(r)).sum();
        Some((cost + penalty, missed))
    }
}

/// Total order used for tie-breaking: objective, missed count, selection.
fn key_cmp(a: (Seconds, usize, &[usize]), b: (Seconds, usize, &[usize])) -> Ordering {
    a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then_with(|| a.2.cmp(b.2))
}

fn lcm_up_to(k: usize) -> Seconds {
    fn gcd(a: Seconds, b: Seconds) -> Seconds {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    (1..=k.max(1) as Seconds).fold(1, |acc, j| acc / gcd(acc, j) * j)
}

/// Exact solve by depth-first branch-and-bound over requests.
///
/// Each node takes the lowest open request and either assigns it to a plan of
/// an unused shuttle that touches no decided request, or misses it. The bound
/// adds, for every open request, the smaller of its miss penalty and the
/// cheapest per-request share `c_i / |G_i|` of any plan still available to it.
pub fn solve_dispatch(problem: &DispatchProblem) -> Result<DispatchSolution, DispatchError> {
    problem.validate()?;
    let plan_set = &problem.plan_set;
    let vehicles: Vec<VehicleId> = plan_set.vehicles().collect();
    let index: HashMap<RequestId, usize> = problem
        .requests
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id, i))
        .collect();
    let n = problem.requests.len();
    if n > 128 {
        return Err(DispatchError::TooManyRequests(n));
    }

    let largest = plan_set
        .plans()
        .iter()
        .map(|p| p.requests.len())
        .max()
        .unwrap_or(1);
    let scale = lcm_up_to(largest);
    let masks: Vec<u128> = plan_set
        .plans()
        .iter()
        .map(|p| p.request_ids().fold(0u128, |m, r| m | 1 << index[&r]))
        .collect();
    let penalty: Vec<Seconds> = problem
        .requests
        .iter()
        .map(|r| problem.penalty(r.id))
        .collect();
    let mut owner = vec![0; masks.len()];
    let mut by_vehicle = vec![Vec::new(); vehicles.len()];
    let mut idle = Vec::with_capacity(vehicles.len());
    for (d, &v) in vehicles.iter().enumerate() {
        for &i in plan_set.plans_for(v) {
            owner[i] = d;
            if masks[i] != 0 {
                by_vehicle[d].push(i);
            }
        }
        let empty = plan_set
            .plans_for(v)
            .iter()
            .copied()
            .filter(|&i| masks[i] == 0)
            .min()
            .expect("validated");
        idle.push(empty);
    }

    // Per request: plans containing it, cheapest share first, for the bound,
    // and most penalty saved per cost first, for branching.
    let mut by_share = vec![Vec::new(); n];
    let mut by_gain = vec![Vec::new(); n];
    for (i, p) in plan_set.plans().iter().enumerate() {
        if masks[i] == 0 {
            continue;
        }
        let share = p.cost * scale / p.requests.len() as Seconds;
        let saved: Seconds = p.request_ids().map(|r| penalty[index[&r]]).sum();
        for r in p.request_ids() {
            by_share[index[&r]].push((share, i));
            by_gain[index[&r]].push((p.cost - saved, i));
        }
    }
    for list in by_share.iter_mut().chain(by_gain.iter_mut()) {
        list.sort_unstable();
    }

    let mut search = PartitionSearch {
        masks: &masks,
        costs: plan_set.plans().iter().map(|p| p.cost).collect(),
        owner,
        by_vehicle,
        members: plan_set
            .plans()
            .iter()
            .map(|p| p.request_ids().map(|r| index[&r]).collect())
            .collect(),
        lambda: penalty.iter().map(|&m| m as f64 / 2.0).collect(),
        penalty: &penalty,
        by_share,
        by_gain,
        scale,
        all: if n == 128 {
            u128::MAX
        } else {
            (1u128 << n) - 1
        },
        assigned: idle.clone(),
        used: vec![false; vehicles.len()],
        memo: vehicles.len() <= 128,
        idle,
        best: None,
        seen: HashMap::new(),
        used_mask: 0,
    };
    search.descend(0, 0, 0);
    let (_, _, selection) = search
        .best
        .expect("all-missed assignment is always reachable");
    let (objective, missed) = problem
        .evaluate(&selection)
        .expect("search only combines disjoint plans");
    let mut selected = selection;
    selected.sort_unstable();
    Ok(DispatchSolution {
        selected,
        missed,
        objective,
    })
}

struct PartitionSearch<'a> {
    masks: &'a [u128],
    costs: Vec<Seconds>,
    owner: Vec<usize>,
    /// Non-empty plans per vehicle and the request indices each serves.
    by_vehicle: Vec<Vec<usize>>,
    members: Vec<Vec<usize>>,
    lambda: Vec<f64>,
    penalty: &'a [Seconds],
    by_share: Vec<Vec<(Seconds, usize)>>,
    by_gain: Vec<Vec<(Seconds, usize)>>,
    scale: Seconds,
    all: u128,
    /// Plan per vehicle, in vehicle order; unused vehicles keep their empty plan.
    assigned: Vec<usize>,
    used: Vec<bool>,
    idle: Vec<usize>,
    best: Option<(Seconds, usize, Vec<usize>)>,
    /// Best (cost, missed, assignment) seen per (decided, used vehicles).
    /// Equal states have equal completions, so a worse arrival is dominated.
    seen: HashMap<(u128, u128), (Seconds, usize, Vec<usize>)>,
    used_mask: u128,
    memo: bool,
}

impl PartitionSearch<'_> {
    fn dominated(&mut self, decided: u128, cost: Seconds, missed: usize) -> bool {
        if !self.memo {
            return false;
        }
        let key = (decided, self.used_mask);
        if let Some((c, m, a)) = self.seen.get(&key) {
            if key_cmp((cost, missed, &self.assigned), (*c, *m, a)) != Ordering::Less {
                return true;
            }
        }
        self.seen.insert(key, (cost, missed, self.assigned.clone()));
        false
    }

    fn available(&self, i: usize, decided: u128) -> bool {
        !self.used[self.owner[i]] && self.masks[i] & decided == 0
    }

    fn pruned(&mut self, decided: u128, cost: Seconds, missed: usize) -> bool {
        let Some((best_obj, best_missed, _)) = &self.best else {
            return false;
        };
        let mut lb = cost * self.scale;
        let mut missed_lb = missed;
        let target = best_obj * self.scale;
        let mut open = self.all & !decided;
        while open != 0 {
            let r = open.trailing_zeros() as usize;
            open &= open - 1;
            let miss = self.penalty[r] * self.scale;
            match self.by_share[r]
                .iter()
                .find(|&&(_, i)| self.available(i, decided))
            {
                Some(&(s, _)) => lb += s.min(miss),
                None => {
                    lb += miss;
                    missed_lb += 1;
                }
            }
            if lb > target {
                return true;
            }
        }
        // Objective integral: lb above (best - 1) means no strict improvement.
        if lb > target - self.scale && missed_lb > *best_missed {
            return true;
        }
        self.lagrangian_prunes(decided, cost)
    }

    /// Relaxes the coverage constraints with multipliers `lambda`, so each
    /// unused shuttle independently takes its plan of least reduced cost
    /// `c_i - lambda(G_i)`. Any multipliers give a valid bound; a few
    /// subgradient steps, warm-started from the previous node, tighten it.
    fn lagrangian_prunes(&mut self, decided: u128, cost: Seconds) -> bool {
        let Some((best_obj, _, _)) = &self.best else {
            return false;
        };
        let target = (best_obj - cost) as f64;
        let eps = 1e-6 * (1.0 + best_obj.abs() as f64);
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for v in (0..self.used.len()).filter(|&v| !self.used[v]) {
            let group: Vec<usize> = self.by_vehicle[v]
                .iter()
                .copied()
                .filter(|&i| self.masks[i] & decided == 0)
                .collect();
            if !group.is_empty() {
                groups.push(group);
            }
        }
        let mut open = Vec::new();
        let mut rest = self.all & !decided;
        while rest != 0 {
            open.push(rest.trailing_zeros() as usize);
            rest &= rest - 1;
        }
        let lambda = &mut self.lambda;
        let mut g = vec![0.0; lambda.len()];
        let mut theta = 1.0;
        let mut best_bound = f64::MIN;
        let mut stalled = 0;
        for _ in 0..LAGRANGIAN_STEPS {
            let mut bound = 0.0;
            for &r in &open {
                let miss = self.penalty[r] as f64 - lambda[r];
                bound += lambda[r] + miss.min(0.0);
                g[r] = if miss < 0.0 { 0.0 } else { 1.0 };
            }
            for group in &groups {
                let mut pick = None;
                let mut least = 0.0;
                for &i in group {
                    let reduced = self.costs[i] as f64
                        - self.members[i].iter().map(|&r| lambda[r]).sum::<f64>();
                    if reduced < least {
                        least = reduced;
                        pick = Some(i);
                    }
                }
                bound += least;
                if let Some(i) = pick {
                    for &r in &self.members[i] {
                        g[r] -= 1.0;
                    }
                }
            }
            if bound > target + eps {
                return true;
            }
            if bound > best_bound + eps {
                best_bound = bound;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= 3 {
                    theta /= 2.0;
                    stalled = 0;
                }
            }
            let norm: f64 = open.iter().map(|&r| g[r] * g[r]).sum();
            if norm == 0.0 {
                return false;
            }
            let t = theta * (target + 1.0 - bound) / norm;
            for &r in &open {
                lambda[r] += t * g[r];
            }
        }
        false
    }

    fn descend(&mut self, decided: u128, cost: Seconds, missed: usize) {
        if self.pruned(decided, cost, missed) || self.dominated(decided, cost, missed) {
            return;
        }
        let open = self.all & !decided;
        if open == 0 {
            let better = self.best.as_ref().is_none_or(|(o, m, s)| {
                key_cmp((cost, missed, &self.assigned), (*o, *m, s)) == Ordering::Less
            });
            if better {
                self.best = Some((cost, missed, self.assigned.clone()));
            }
            return;
        }
        let r = open.trailing_zeros() as usize;
        let mut tried_miss = false;
        for k in 0..self.by_gain[r].len() {
            let (gain, i) = self.by_gain[r][k];
            if !tried_miss && gain >= 0 {
                tried_miss = true;
                self.miss(r, decided, cost, missed);
            }
            if !self.available(i, decided) {
                continue;
            }
            let v = self.owner[i];
            self.used[v] = true;
            self.used_mask ^= 1u128.wrapping_shl(v as u32);
            self.assigned[v] = i;
            self.descend(decided | self.masks[i], cost + self.costs[i], missed);
            self.assigned[v] = self.idle[v];
            self.used_mask ^= 1u128.wrapping_shl(v as u32);
            self.used[v] = false;
        }
        if !tried_miss {
            self.miss(r, decided, cost, missed);
        }
    }

    fn miss(&mut self, r: usize, decided: u128, cost: Seconds, missed: usize) {
        self.descend(decided | 1 << r, cost + self.penalty[r], missed + 1);
    }
}

/// Exhaustive search over one-plan-per-vehicle selections.
pub fn brute_force_dispatch(problem: &DispatchProblem) -> Result<DispatchSolution, DispatchError> {
    problem.validate()?;
    let buckets: Vec<&[usize]> = problem
        .plan_set
        .vehicles()
        .map(|v| problem.plan_set.plans_for(v))
        .collect();
    let combinations = buckets
        .iter()
        .fold(1u128, |acc, b| acc.saturating_mul(b.len() as u128));
    if combinations > BRUTE_FORCE_LIMIT {
        return Err(DispatchError::GuardExceeded {
            combinations,
            limit: BRUTE_FORCE_LIMIT,
        });
    }

    let mut digits = vec![0usize; buckets.len()];
    let mut best: Option<(Seconds, BTreeSet<RequestId>, Vec<usize>)> = None;
    loop {
        let selection: Vec<usize> = digits.iter().zip(&buckets).map(|(&d, b)| b[d]).collect();
        if let Some((obj, missed)) = problem.evaluate(&selection) {
            let better = best.as_ref().is_none_or(|(o, m, s)| {
                key_cmp((obj, missed.len(), &selection), (*o, m.len(), s)) == Ordering::Less
            });
            if better {
                best = Some((obj, missed, selection));
            }
        }
        // Mixed-radix increment.
        let mut pos = 0;
        loop {
            if pos == digits.len() {
                let (objective, missed, mut selected) =
                    best.expect("all-empty selection is always feasible");
                selected.sort_unstable();
                return Ok(DispatchSolution {
                    selected,
                    missed,
                    objective,
                });
            }
            digits[pos] += 1;
            if digits[pos] < buckets[pos].len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// A broken constraint found by [`check_solution`].
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum Violation {
    #[error("request {request} is served {served} times and missed {missed}")]
    Coverage {
        request: RequestId,
        served: usize,
        missed: bool,
    },
    #[error("shuttle {vehicle} selects {count} plans")]
    PlanCount { vehicle: VehicleId, count: usize },
    #[error("plan index {0} does not exist")]
    UnknownPlan(usize),
    #[error("plan {0} is selected more than once")]
    RepeatedPlan(usize),
    #[error("missed request {0} is not part of the problem")]
    UnknownMissed(RequestId),
    #[error("reported objective {reported} but selection costs {recomputed}")]
    Objective {
        reported: Seconds,
        recomputed: Seconds,
    },
}

/// Verifies partitioning, plan counts, binary selection and the objective.
pub fn check_solution(
    problem: &DispatchProblem,
    solution: &DispatchSolution,
) -> Result<(), Vec<Violation>> {
    let plans = problem.plan_set.plans();
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    let mut served: BTreeMap<RequestId, usize> = BTreeMap::new();
    let mut per_vehicle: BTreeMap<VehicleId, usize> =
        problem.plan_set.vehicles().map(|v| (v, 0)).collect();
    let mut cost = 0;
    for &i in &solution.selected {
        let Some(p) = plans.get(i) else {
            violations.push(Violation::UnknownPlan(i));
            continue;
        };
        if !seen.insert(i) {
            violations.push(Violation::RepeatedPlan(i));
        }
        *per_vehicle.entry(p.vehicle).or_default() += 1;
        cost += p.cost;
        for r in p.request_ids() {
            *served.entry(r).or_default() += 1;
        }
    }
    for (&vehicle, &count) in &per_vehicle {
        if count != 1 {
            violations.push(Violation::PlanCount { vehicle, count });
        }
    }
    let known: BTreeSet<RequestId> = problem.requests.iter().map(|r| r.id).collect();
    for &r in &solution.missed {
        if !known.contains(&r) {
            violations.push(Violation::UnknownMissed(r));
        }
    }
    for &r in &known {
        let s = served.get(&r).copied().unwrap_or(0);
        let m = solution.missed.contains(&r);
        if s + usize::from(m) != 1 {
            violations.push(Violation::Coverage {
                request: r,
                served: s,
                missed: m,
            });
        }
    }
    let recomputed = cost
        + solution
            .missed
            .iter()
            .filter(|r| known.contains(r))
            .map(|&r| problem.penalty(r))
            .sum::<Seconds>();
    if recomputed != solution.objective {
        violations.push(Violation::Objective {
            reported: solution.objective,
            recomputed,
        });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
