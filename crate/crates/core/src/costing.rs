//! Waiting-time cost of an assignment plan.
//!
//! A plan `(v, G)` is priced as the minimum total passenger waiting over all
//! pick-up/drop-off sequences serving `v`'s commitments plus `G`, minus the
//! same minimum without `G`. The minimum is found by depth-first
//! branch-and-bound over travel search nodes: a node is a shuttle at a stop at
//! some time with the requests still awaiting pick-up and drop-off and the
//! waiting accumulated so far. Extending a node to a stop performs every
//! drop-off and every pick-up due at that stop.
//!
//! Seat limits are enforced per extension; a stop whose combined action would
//! overfill the shuttle is not a candidate. When no sequence survives the plan
//! is infeasible.

use std::cmp::Ordering;

use crate::error::CostingError;
use crate::network::TravelNetwork;
use crate::types::{RequestId, Seconds, ShuttleState, StopId, StopVisit, TripRequest};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CostingOptions {
    /// Multiply each request's waiting by its party size.
    pub weight_by_party_size: bool,
}

/// Subset of a search's requests, as a bitmask over their canonical indices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct RequestSet(u64);

impl RequestSet {
    pub const EMPTY: RequestSet = RequestSet(0);

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            (bits != 0).then(|| {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                i
            })
        })
    }
}

/// Search state: the shuttle is at `stop` at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TravelSearchNode {
    pub stop: StopId,
    pub time: Seconds,
    pub awaiting_pickup: RequestSet,
    pub awaiting_dropoff: RequestSet,
    pub waiting: Seconds,
    pub onboard: u32,
    at: usize,
}

impl TravelSearchNode {
    /// Nothing left to pick up or drop off.
    pub fn is_terminal(&self) -> bool {
        self.awaiting_pickup.is_empty() && self.awaiting_dropoff.is_empty()
    }
}

/// Optimal sequence found by [`evaluate_assignment_plan`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequencing {
    pub waiting: Seconds,
    pub visits: Vec<StopVisit>,
}

impl Sequencing {
    pub fn sequence(&self) -> Vec<StopId> {
        self.visits.iter().map(|v| v.stop).collect()
    }
}

/// Requests, stops and travel times of one `(v, G)` evaluation in canonical
/// order: requests by id, stops by id.
#[derive(Debug, Clone)]
pub struct SearchContext {
    requests: Vec<TripRequest>,
    stops: Vec<StopId>,
    times: Vec<Seconds>,
    pickup_at: Vec<usize>,
    pickups_here: Vec<u64>,
    dropoffs_here: Vec<u64>,
    weight: Vec<Seconds>,
    capacity: u32,
    root: TravelSearchNode,
}

impl SearchContext {
    pub fn new(
        shuttle: &ShuttleState,
        new_requests: &[TripRequest],
        network: &TravelNetwork,
        options: CostingOptions,
    ) -> Result<Self, CostingError> {
        // Tag each request by whether it is already onboard.
        let mut tagged: Vec<(TripRequest, bool)> = shuttle
            .pending_pickups
            .iter()
            .chain(new_requests)
            .map(|r| (*r, false))
            .chain(shuttle.pending_dropoffs.iter().map(|r| (*r, true)))
            .collect();
        if tagged.len() > 64 {
            return Err(CostingError::TooManyRequests(tagged.len()));
        }
        tagged.sort_by_key(|(r, _)| r.id);
        if let Some(w) = tagged.windows(2).find(|w| w[0].0.id == w[1].0.id) {
            return Err(CostingError::DuplicateRequest(w[0].0.id));
        }

        let mut stops: Vec<StopId> = tagged
            .iter()
            .flat_map(|(r, _)| [r.pickup, r.dropoff])
            .chain([shuttle.heading_stop])
            .collect();
        stops.sort_unstable();
        stops.dedup();
        let net_idx = stops
            .iter()
            .map(|&s| network.index_of(s))
            .collect::<Result<Vec<_>, _>>()?;
        let k = stops.len();
        let mut times = vec![0; k * k];
        for (i, &a) in net_idx.iter().enumerate() {
            for (j, &b) in net_idx.iter().enumerate() {
                times[i * k + j] = network.time_by_index(a, b);
            }
        }
        let local = |s: StopId| stops.binary_search(&s).expect("stop collected above");

        let mut pickups_here = vec![0u64; k];
        let mut dropoffs_here = vec![0u64; k];
        let mut pickup_at = Vec::with_capacity(tagged.len());
        let mut awaiting_pickup = 0u64;
        let mut awaiting_dropoff = 0u64;
        for (i, (r, onboard)) in tagged.iter().enumerate() {
            let p = local(r.pickup);
            pickup_at.push(p);
            pickups_here[p] |= 1 << i;
            dropoffs_here[local(r.dropoff)] |= 1 << i;
            if *onboard {
                awaiting_dropoff |= 1 << i;
            } else {
                awaiting_pickup |= 1 << i;
            }
        }
        let weight = tagged
            .iter()
            .map(|(r, _)| {
                if options.weight_by_party_size {
                    r.passengers as Seconds
                } else {
                    1
                }
            })
            .collect();
        let at = local(shuttle.heading_stop);
        let root = TravelSearchNode {
            stop: shuttle.heading_stop,
            time: shuttle.arrival_time,
            awaiting_pickup: RequestSet(awaiting_pickup),
            awaiting_dropoff: RequestSet(awaiting_dropoff),
            waiting: 0,
            onboard: shuttle.onboard,
            at,
        };
        Ok(Self {
            requests: tagged.into_iter().map(|(r, _)| r).collect(),
            stops,
            times,
            pickup_at,
            pickups_here,
            dropoffs_here,
            weight,
            capacity: shuttle.capacity,
            root,
        })
    }

    pub fn request(&self, i: usize) -> &TripRequest {
        &self.requests[i]
    }

    pub fn request_ids(&self, set: RequestSet) -> Vec<RequestId> {
        set.iter().map(|i| self.requests[i].id).collect()
    }

    #[inline]
    fn time(&self, a: usize, b: usize) -> Seconds {
        self.times[a * self.stops.len() + b]
    }

    /// The shuttle's heading stop and arrival time with its committed pick-ups
    /// plus the new requests awaiting pick-up and its onboard requests
    /// awaiting drop-off; no waiting yet.
    pub fn create_root_node(&self) -> TravelSearchNode {
        self.root
    }

    /// Distinct stops with a pick-up or drop-off due, in ascending id order,
    /// excluding stops whose combined action would exceed the seat limit.
    pub fn get_possible_next_stops(&self, node: &TravelSearchNode) -> Vec<StopId> {
        (0..self.stops.len())
            .filter(|&s| self.extend_at(node, s).is_some())
            .map(|s| self.stops[s])
            .collect()
    }

    /// Moves the shuttle to `stop` and applies every action due there.
    ///
    /// Returns `Ok(None)` when the stop has nothing due or the action would
    /// overfill the shuttle.
    pub fn extend_node(
        &self,
        node: &TravelSearchNode,
        stop: StopId,
    ) -> Result<Option<TravelSearchNode>, CostingError> {
        let s = self
            .stops
            .binary_search(&stop)
            .map_err(|_| CostingError::StopNotInSearch(stop))?;
        Ok(self.extend_at(node, s))
    }

    fn passengers(&self, set: u64) -> u32 {
        RequestSet(set)
            .iter()
            .map(|i| self.requests[i].passengers)
            .sum()
    }

    #[inline]
    fn extend_at(&self, node: &TravelSearchNode, s: usize) -> Option<TravelSearchNode> {
        let picks = node.awaiting_pickup.0 & self.pickups_here[s];
        let drops = node.awaiting_dropoff.0 & self.dropoffs_here[s];
        if picks == 0 && drops == 0 {
            return None;
        }
        let onboard = node.onboard - self.passengers(drops) + self.passengers(picks);
        if onboard > self.capacity {
            return None;
        }
        let arrival = node.time + self.time(node.at, s);
        let mut waiting = node.waiting;
        let mut departure = arrival;
        for i in RequestSet(picks).iter() {
            let release = self.requests[i].request_time;
            waiting += self.weight[i] * (arrival - release).max(0);
            departure = departure.max(release);
        }
        Some(TravelSearchNode {
            stop: self.stops[s],
            time: departure,
            awaiting_pickup: RequestSet(node.awaiting_pickup.0 & !picks),
            awaiting_dropoff: RequestSet((node.awaiting_dropoff.0 & !drops) | picks),
            waiting,
            onboard,
            at: s,
        })
    }

    /// Admissible bound: every remaining pick-up happens no earlier than a
    /// direct trip from the node's stop would reach it.
    fn lower_bound(&self, node: &TravelSearchNode) -> Seconds {
        node.waiting
            + node
                .awaiting_pickup
                .iter()
                .map(|i| {
                    let reach = node.time + self.time(node.at, self.pickup_at[i]);
                    self.weight[i] * (reach - self.requests[i].request_time).max(0)
                })
                .sum::<Seconds>()
    }

    fn visit(&self, from: &TravelSearchNode, to: &TravelSearchNode) -> StopVisit {
        let picked = RequestSet(from.awaiting_pickup.0 & !to.awaiting_pickup.0);
        let dropped = RequestSet(from.awaiting_dropoff.0 & !to.awaiting_dropoff.0 & !picked.0);
        StopVisit {
            stop: to.stop,
            arrival: from.time + self.time(from.at, to.at),
            departure: to.time,
            pickups: self.request_ids(picked),
            dropoffs: self.request_ids(dropped),
        }
    }

    /// Finds the minimum-waiting sequence; ties go to the lexicographically
    /// smallest stop sequence.
    pub fn solve(&self) -> Option<Sequencing> {
        let mut search = Search {
            ctx: self,
            path: Vec::new(),
            best: None,
        };
        search.descend(self.root);
        search.best.map(|(waiting, path)| {
            let mut visits = Vec::with_capacity(path.len());
            let mut prev = self.root;
            for node in path {
                visits.push(self.visit(&prev, &node));
                prev = node;
            }
            Sequencing { waiting, visits }
        })
    }
}

struct Search<'a> {
    ctx: &'a SearchContext,
    path: Vec<TravelSearchNode>,
    best: Option<(Seconds, Vec<TravelSearchNode>)>,
}

impl Search<'_> {
    /// Lexicographic comparison of the current path (plus `next`) with the
    /// incumbent's stop sequence truncated to the same length.
    fn prefix_cmp(&self, next: StopId) -> Ordering {
        let Some((_, best)) = &self.best else {
            return Ordering::Less;
        };
        let mine = self.path.iter().map(|n| n.stop).chain([next]);
        let theirs = best.iter().map(|n| n.stop).take(self.path.len() + 1);
        mine.cmp(theirs)
    }

    fn pruned(&self, child: &TravelSearchNode) -> bool {
        let Some((best, _)) = &self.best else {
            return false;
        };
        match self.ctx.lower_bound(child).cmp(best) {
            Ordering::Greater => true,
            Ordering::Equal => self.prefix_cmp(child.stop) == Ordering::Greater,
            Ordering::Less => false,
        }
    }

    fn descend(&mut self, node: TravelSearchNode) {
        if node.awaiting_pickup.is_empty() {
            self.finish(node);
            return;
        }
        let ctx = self.ctx;
        let mut children: Vec<TravelSearchNode> = (0..ctx.stops.len())
            .filter_map(|s| ctx.extend_at(&node, s))
            .collect();
        // Stops are indexed in id order, so a stable sort keeps id order on ties.
        children.sort_by_key(|c| c.waiting);
        for child in children {
            if self.pruned(&child) {
                continue;
            }
            self.path.push(child);
            self.descend(child);
            self.path.pop();
        }
    }

    /// Nothing left to pick up: drop-offs cost nothing, so the remaining
    /// drop-off stops are visited in ascending id order.
    fn finish(&mut self, mut node: TravelSearchNode) {
        let ctx = self.ctx;
        let start = self.path.len();
        while !node.awaiting_dropoff.is_empty() {
            let s = (0..ctx.stops.len())
                .find(|&s| node.awaiting_dropoff.0 & ctx.dropoffs_here[s] != 0)
                .expect("every onboard request has a drop-off stop");
            node = ctx
                .extend_at(&node, s)
                .expect("drop-offs never exceed capacity");
            self.path.push(node);
        }
        let better = match &self.best {
            None => true,
            Some((w, seq)) => {
                node.waiting < *w
                    || (node.waiting == *w
                        && self
                            .path
                            .iter()
                            .map(|n| n.stop)
                            .lt(seq.iter().map(|n| n.stop)))
            }
        };
        if better {
            self.best = Some((node.waiting, self.path.clone()));
        }
        self.path.truncate(start);
    }
}

/// Minimum total waiting to serve `shuttle`'s commitments plus `new_requests`,
/// with the realizing visit schedule. `None` when no sequence respects the
/// seat limit.
pub fn evaluate_assignment_plan(
    shuttle: &ShuttleState,
    new_requests: &[TripRequest],
    network: &TravelNetwork,
    options: CostingOptions,
) -> Result<Option<Sequencing>, CostingError> {
    Ok(SearchContext::new(shuttle, new_requests, network, options)?.solve())
}

/// Marginal waiting caused by adding `new_requests` to `shuttle`.
pub fn assignment_plan_cost(
    shuttle: &ShuttleState,
    new_requests: &[TripRequest],
    network: &TravelNetwork,
    options: CostingOptions,
) -> Result<Option<Seconds>, CostingError> {
    Ok(PlanCoster::new(shuttle, network, options)?
        .cost(new_requests)?
        .map(|(cost, _)| cost))
}

/// Prices many request sets against one shuttle, evaluating its
/// commitments-only baseline once.
#[derive(Debug, Clone)]
pub struct PlanCoster<'a> {
    shuttle: &'a ShuttleState,
    network: &'a TravelNetwork,
    options: CostingOptions,
    baseline: Option<Sequencing>,
}

impl<'a> PlanCoster<'a> {
    pub fn new(
        shuttle: &'a ShuttleState,
        network: &'a TravelNetwork,
        options: CostingOptions,
    ) -> Result<Self, CostingError> {
        let baseline = evaluate_assignment_plan(shuttle, &[], network, options)?;
        Ok(Self {
            shuttle,
            network,
            options,
            baseline,
        })
    }

    pub fn baseline(&self) -> Option<&Sequencing> {
        self.baseline.as_ref()
    }

    /// Marginal cost and schedule, or `None` if infeasible.
    pub fn cost(
        &self,
        new_requests: &[TripRequest],
    ) -> Result<Option<(Seconds, Sequencing)>, CostingError> {
        if new_requests.is_empty() {
            return Ok(Some((
                0,
                self.baseline.clone().unwrap_or(Sequencing {
                    waiting: 0,
                    visits: Vec::new(),
                }),
            )));
        }
        let Some(base) = &self.baseline else {
            return Ok(None);
        };
        let with =
            evaluate_assignment_plan(self.shuttle, new_requests, self.network, self.options)?;
        Ok(with.map(|s| (s.waiting - base.waiting, s)))
    }
}
