//! Travel times between stops, region membership and trip classification.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{NetworkError, RegionError};
use crate::types::{Seconds, Stop, StopId, TripRequest};

/// A directed link between two stops in graph mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub from: StopId,
    pub to: StopId,
    pub seconds: Seconds,
}

/// How travel times are derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Mode {
    /// Straight-line distance over `speed` (m/s).
    Euclidean { speed: f64 },
    /// Rectilinear distance over `speed` (m/s).
    Manhattan { speed: f64 },
    /// Shortest paths over directed links.
    Graph { links: Vec<Link> },
}

/// Serializable form of a [`TravelNetwork`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub stops: Vec<Stop>,
    #[serde(flatten)]
    pub mode: Mode,
}

/// Immutable travel-time oracle over a fixed stop set.
///
/// The all-pairs matrix is computed at construction, so lookups are O(1) and
/// every pair is guaranteed reachable.
#[derive(Debug, Clone)]
pub struct TravelNetwork {
    stops: Vec<Stop>,
    index: HashMap<StopId, usize>,
    mode: Mode,
    times: Vec<Seconds>,
}

/// Rounds a metric travel time up to whole seconds.
fn metric_seconds(distance: f64, speed: f64) -> Seconds {
    // Absorb float noise so that exact quotients are not bumped up a second.
    let t = distance / speed - 1e-9;
    t.ceil().max(0.0) as Seconds
}

impl TravelNetwork {
    pub fn new(stops: Vec<Stop>, mode: Mode) -> Result<Self, NetworkError> {
        let mut index = HashMap::with_capacity(stops.len());
        for (i, s) in stops.iter().enumerate() {
            if !s.x.is_finite() || !s.y.is_finite() {
                return Err(crate::error::ModelError::NonFiniteCoordinate(s.id).into());
            }
            if index.insert(s.id, i).is_some() {
                return Err(NetworkError::DuplicateStop(s.id));
            }
        }
        let n = stops.len();
        let times = match &mode {
            Mode::Euclidean { speed } | Mode::Manhattan { speed } => {
                if !(speed.is_finite() && *speed > 0.0) {
                    return Err(NetworkError::InvalidSpeed(*speed));
                }
                let manhattan = matches!(mode, Mode::Manhattan { .. });
                let mut m = vec![0; n * n];
                for (i, a) in stops.iter().enumerate() {
                    for (j, b) in stops.iter().enumerate() {
                        if i != j {
                            let d = if manhattan {
                                (a.x - b.x).abs() + (a.y - b.y).abs()
                            } else {
                                a.distance_to(b)
                            };
                            m[i * n + j] = metric_seconds(d, *speed);
                        }
                    }
                }
                m
            }
            Mode::Graph { links } => shortest_paths(&stops, &index, links)?,
        };
        Ok(Self {
            stops,
            index,
            mode,
            times,
        })
    }

    pub fn from_spec(spec: NetworkSpec) -> Result<Self, NetworkError> {
        Self::new(spec.stops, spec.mode)
    }

    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec {
            stops: self.stops.clone(),
            mode: self.mode.clone(),
        }
    }

    pub fn stops(&self) -> &[Stop] {
        &self.stops
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn contains(&self, id: StopId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn stop(&self, id: StopId) -> Result<&Stop, NetworkError> {
        self.index
            .get(&id)
            .map(|&i| &self.stops[i])
            .ok_or(NetworkError::UnknownStop(id))
    }

    /// Dense index of a stop, usable with [`Self::time_by_index`].
    pub fn index_of(&self, id: StopId) -> Result<usize, NetworkError> {
        self.index
            .get(&id)
            .copied()
            .ok_or(NetworkError::UnknownStop(id))
    }

    #[inline]
    pub fn time_by_index(&self, a: usize, b: usize) -> Seconds {
        self.times[a * self.stops.len() + b]
    }

    /// Travel time from `a` to `b` in whole seconds.
    pub fn travel_time(&self, a: StopId, b: StopId) -> Result<Seconds, NetworkError> {
        let i = self.index_of(a)?;
        let j = self.index_of(b)?;
        Ok(self.time_by_index(i, j))
    }
}

fn shortest_paths(
    stops: &[Stop],
    index: &HashMap<StopId, usize>,
    links: &[Link],
) -> Result<Vec<Seconds>, NetworkError> {
    let n = stops.len();
    let mut adj: Vec<Vec<(usize, Seconds)>> = vec![Vec::new(); n];
    for l in links {
        if l.seconds < 0 {
            return Err(NetworkError::NegativeLink {
                from: l.from,
                to: l.to,
                seconds: l.seconds,
            });
        }
        let a = *index
            .get(&l.from)
            .ok_or(NetworkError::UnknownStop(l.from))?;
        let b = *index.get(&l.to).ok_or(NetworkError::UnknownStop(l.to))?;
        adj[a].push((b, l.seconds));
    }

    let mut times = vec![0; n * n];
    let mut dist = vec![Seconds::MAX; n];
    let mut heap = BinaryHeap::new();
    for src in 0..n {
        dist.fill(Seconds::MAX);
        dist[src] = 0;
        heap.push(Reverse((0, src)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        for (dst, &d) in dist.iter().enumerate() {
            if d == Seconds::MAX {
                return Err(NetworkError::Unreachable {
                    from: stops[src].id,
                    to: stops[dst].id,
                });
            }
            times[src * n + dst] = d;
        }
    }
    Ok(times)
}

/// Dense all-pairs travel-time table, rows and columns in `stops` order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeMatrix {
    pub stops: Vec<StopId>,
    pub seconds: Vec<Vec<Seconds>>,
}

pub fn all_pairs_times(network: &TravelNetwork) -> TimeMatrix {
    let n = network.stops.len();
    TimeMatrix {
        stops: network.stops.iter().map(|s| s.id).collect(),
        seconds: (0..n)
            .map(|i| (0..n).map(|j| network.time_by_index(i, j)).collect())
            .collect(),
    }
}

/// Trip categories a regional shuttle fleet serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripType {
    /// Starts and ends inside the region.
    IntraRegion,
    /// Starts inside, ends at a gateway station.
    OutboundConnector,
    /// Starts at a gateway station, ends inside.
    InboundConnector,
}

impl TripType {
    pub const ALL: [TripType; 3] = [
        TripType::IntraRegion,
        TripType::OutboundConnector,
        TripType::InboundConnector,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TripType::IntraRegion => "intra_region",
            TripType::OutboundConnector => "outbound_connector",
            TripType::InboundConnector => "inbound_connector",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

/// Downstream journey time after transferring at a gateway.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DownstreamTime {
    pub stop: StopId,
    pub seconds: Seconds,
}

/// Serializable form of a [`Region`].
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RegionSpec {
    pub members: Vec<StopId>,
    pub gateways: Vec<StopId>,
    #[serde(default)]
    pub downstream: Vec<DownstreamTime>,
}

/// A geofenced service area and the transit stations it connects to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    members: BTreeSet<StopId>,
    gateways: BTreeSet<StopId>,
    downstream: BTreeMap<StopId, Seconds>,
}

impl Region {
    pub fn new(
        members: impl IntoIterator<Item = StopId>,
        gateways: impl IntoIterator<Item = StopId>,
    ) -> Result<Self, RegionError> {
        let members: BTreeSet<_> = members.into_iter().collect();
        let gateways: BTreeSet<_> = gateways.into_iter().collect();
        if let Some(s) = members.intersection(&gateways).next() {
            return Err(RegionError::Overlap(*s));
        }
        Ok(Self {
            members,
            gateways,
            downstream: BTreeMap::new(),
        })
    }

    pub fn with_downstream(
        mut self,
        table: impl IntoIterator<Item = (StopId, Seconds)>,
    ) -> Result<Self, RegionError> {
        for (stop, secs) in table {
            if !self.gateways.contains(&stop) {
                return Err(RegionError::OutsideRegion(stop));
            }
            self.downstream.insert(stop, secs);
        }
        Ok(self)
    }

    pub fn from_spec(spec: RegionSpec) -> Result<Self, RegionError> {
        Self::new(spec.members, spec.gateways)?
            .with_downstream(spec.downstream.into_iter().map(|d| (d.stop, d.seconds)))
    }

    pub fn to_spec(&self) -> RegionSpec {
        RegionSpec {
            members: self.members.iter().copied().collect(),
            gateways: self.gateways.iter().copied().collect(),
            downstream: self
                .downstream
                .iter()
                .map(|(&stop, &seconds)| DownstreamTime { stop, seconds })
                .collect(),
        }
    }

    pub fn members(&self) -> &BTreeSet<StopId> {
        &self.members
    }

    pub fn gateways(&self) -> &BTreeSet<StopId> {
        &self.gateways
    }

    pub fn downstream(&self) -> &BTreeMap<StopId, Seconds> {
        &self.downstream
    }

    pub fn is_member(&self, s: StopId) -> bool {
        self.members.contains(&s)
    }

    pub fn is_gateway(&self, s: StopId) -> bool {
        self.gateways.contains(&s)
    }

    /// All stops must exist in `network`.
    pub fn check_against(&self, network: &TravelNetwork) -> Result<(), RegionError> {
        for &s in self.members.iter().chain(&self.gateways) {
            network.stop(s)?;
        }
        Ok(())
    }
}

pub fn classify_trip(request: &TripRequest, region: &Region) -> Result<TripType, RegionError> {
    let side = |s: StopId| {
        if region.is_member(s) {
            Ok(true)
        } else if region.is_gateway(s) {
            Ok(false)
        } else {
            Err(RegionError::OutsideRegion(s))
        }
    };
    match (side(request.pickup)?, side(request.dropoff)?) {
        (true, true) => Ok(TripType::IntraRegion),
        (true, false) => Ok(TripType::OutboundConnector),
        (false, true) => Ok(TripType::InboundConnector),
        (false, false) => Err(RegionError::GatewayToGateway(request.id)),
    }
}

/// Gateway minimizing shuttle leg from `origin` plus the downstream remainder.
///
/// Ties go to the smallest stop id.
pub fn select_gateway(
    origin: StopId,
    region: &Region,
    network: &TravelNetwork,
    downstream_times: &BTreeMap<StopId, Seconds>,
) -> Result<StopId, RegionError> {
    best_gateway(region, downstream_times, |g| network.travel_time(origin, g))
}

/// Inbound counterpart of [`select_gateway`]: `upstream_times` is the journey
/// time to reach each gateway, the shuttle leg runs gateway to `destination`.
pub fn select_gateway_to(
    destination: StopId,
    region: &Region,
    network: &TravelNetwork,
    upstream_times: &BTreeMap<StopId, Seconds>,
) -> Result<StopId, RegionError> {
    best_gateway(region, upstream_times, |g| {
        network.travel_time(g, destination)
    })
}

fn best_gateway(
    region: &Region,
    table: &BTreeMap<StopId, Seconds>,
    leg: impl Fn(StopId) -> Result<Seconds, NetworkError>,
) -> Result<StopId, RegionError> {
    let mut best: Option<(Seconds, StopId)> = None;
    // BTreeSet iteration is ascending, so strict < keeps the smallest id on ties.
    for &g in &region.gateways {
        let rest = *table.get(&g).ok_or(RegionError::MissingDownstream(g))?;
        let total = leg(g)? + rest;
        if best.is_none_or(|(b, _)| total < b) {
            best = Some((total, g));
        }
    }
    best.map(|(_, g)| g).ok_or(RegionError::NoGateways)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stop(id: u32, x: f64, y: f64) -> Stop {
        Stop::new(StopId(id), x, y).unwrap()
    }

    fn link(from: u32, to: u32, seconds: Seconds) -> Link {
        Link {
            from: StopId(from),
            to: StopId(to),
            seconds,
        }
    }

    #[test]
    fn identity_is_zero() {
        let n = TravelNetwork::new(
            vec![stop(0, 0.0, 0.0), stop(1, 5.0, 5.0)],
            Mode::Manhattan { speed: 2.0 },
        )
        .unwrap();
        assert_eq!(n.travel_time(StopId(1), StopId(1)).unwrap(), 0);
        assert_eq!(n.travel_time(StopId(0), StopId(1)).unwrap(), 5);
    }

    #[test]
    fn euclidean_divides_distance_by_speed() {
        let n = TravelNetwork::new(
            vec![stop(0, 0.0, 0.0), stop(1, 180.0, 240.0)],
            Mode::Euclidean { speed: 10.0 },
        )
        .unwrap();
        assert_eq!(n.travel_time(StopId(0), StopId(1)).unwrap(), 30);
    }

    #[test]
    fn metric_rounds_up() {
        let n = TravelNetwork::new(
            vec![stop(0, 0.0, 0.0), stop(1, 301.0, 0.0)],
            Mode::Euclidean { speed: 10.0 },
        )
        .unwrap();
        assert_eq!(n.travel_time(StopId(0), StopId(1)).unwrap(), 31);
    }

    #[test]
    fn graph_line_sums_edges() {
        let stops = vec![stop(0, 0.0, 0.0), stop(1, 1.0, 0.0), stop(2, 2.0, 0.0)];
        let links = vec![
            link(0, 1, 10),
            link(1, 0, 10),
            link(1, 2, 20),
            link(2, 1, 20),
        ];
        let n = TravelNetwork::new(stops, Mode::Graph { links }).unwrap();
        // The only simple path 0 -> 2 is 0-1-2.
        assert_eq!(n.travel_time(StopId(0), StopId(2)).unwrap(), 30);
        assert_eq!(n.travel_time(StopId(2), StopId(0)).unwrap(), 30);
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let stops = vec![stop(0, 0.0, 0.0), stop(1, 1.0, 0.0)];
        let err = TravelNetwork::new(
            stops,
            Mode::Graph {
                links: vec![link(0, 1, 5)],
            },
        )
        .unwrap_err();
        assert_eq!(
            err,
            NetworkError::Unreachable {
                from: StopId(1),
                to: StopId(0)
            }
        );
    }

    #[test]
    fn unknown_stop_errors() {
        let n =
            TravelNetwork::new(vec![stop(0, 0.0, 0.0)], Mode::Euclidean { speed: 1.0 }).unwrap();
        assert_eq!(
            n.travel_time(StopId(0), StopId(4)),
            Err(NetworkError::UnknownStop(StopId(4)))
        );
    }

    fn region() -> Region {
        Region::new([StopId(0), StopId(1)], [StopId(10), StopId(11)]).unwrap()
    }

    #[test]
    fn classify_three_trip_types() {
        let r = region();
        let t = |p, d| classify_trip(&TripRequest::single(1, p, d, 0).unwrap(), &r);
        assert_eq!(t(0, 1), Ok(TripType::IntraRegion));
        assert_eq!(t(0, 10), Ok(TripType::OutboundConnector));
        assert_eq!(t(11, 1), Ok(TripType::InboundConnector));
        assert_eq!(t(10, 11), Err(RegionError::GatewayToGateway(RequestId(1))));
        assert_eq!(t(0, 7), Err(RegionError::OutsideRegion(StopId(7))));
    }

    use crate::types::RequestId;

    #[test]
    fn overlapping_region_rejected() {
        assert_eq!(
            Region::new([StopId(1)], [StopId(1)]),
            Err(RegionError::Overlap(StopId(1)))
        );
    }

    fn gateway_net() -> TravelNetwork {
        // origin 0; gateway 10 is 100 s away, gateway 11 is 200 s away.
        TravelNetwork::new(
            vec![
                stop(0, 0.0, 0.0),
                stop(10, 100.0, 0.0),
                stop(11, -200.0, 0.0),
            ],
            Mode::Euclidean { speed: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn gateway_single_candidate() {
        let r = Region::new([StopId(0)], [StopId(10)]).unwrap();
        let table = BTreeMap::from([(StopId(10), 999)]);
        assert_eq!(
            select_gateway(StopId(0), &r, &gateway_net(), &table),
            Ok(StopId(10))
        );
    }

    #[test]
    fn gateway_minimizes_total_journey() {
        let r = Region::new([StopId(0)], [StopId(10), StopId(11)]).unwrap();
        // 100 + 500 = 600 versus 200 + 300 = 500.
        let table = BTreeMap::from([(StopId(10), 500), (StopId(11), 300)]);
        assert_eq!(
            select_gateway(StopId(0), &r, &gateway_net(), &table),
            Ok(StopId(11))
        );
    }

    #[test]
    fn gateway_tie_goes_to_smaller_id() {
        let r = Region::new([StopId(0)], [StopId(10), StopId(11)]).unwrap();
        let table = BTreeMap::from([(StopId(10), 400), (StopId(11), 300)]);
        assert_eq!(
            select_gateway(StopId(0), &r, &gateway_net(), &table),
            Ok(StopId(10))
        );
    }

    #[test]
    fn gateway_errors() {
        let r = Region::new([StopId(0)], []).unwrap();
        assert_eq!(
            select_gateway(StopId(0), &r, &gateway_net(), &BTreeMap::new()),
            Err(RegionError::NoGateways)
        );
        let r = Region::new([StopId(0)], [StopId(10)]).unwrap();
        assert_eq!(
            select_gateway(StopId(0), &r, &gateway_net(), &BTreeMap::new()),
            Err(RegionError::MissingDownstream(StopId(10)))
        );
    }

    #[test]
    fn metric_matrix_is_symmetric_with_zero_diagonal() {
        let stops = (0..5)
            .map(|i| stop(i, (i * 37 % 11) as f64 * 90.0, (i * 13 % 7) as f64 * 55.0))
            .collect();
        let m =
            all_pairs_times(&TravelNetwork::new(stops, Mode::Euclidean { speed: 3.0 }).unwrap());
        for i in 0..5 {
            assert_eq!(m.seconds[i][i], 0);
            for j in 0..5 {
                assert_eq!(m.seconds[i][j], m.seconds[j][i]);
            }
        }
    }

    /// Exhaustive simple-path enumeration; only for tiny graphs.
    fn brute_force_times(n: usize, links: &[Link]) -> Vec<Vec<Option<Seconds>>> {
        fn walk(
            u: usize,
            elapsed: Seconds,
            seen: &mut Vec<bool>,
            adj: &[Vec<(usize, Seconds)>],
            best: &mut [Option<Seconds>],
        ) {
            if best[u].is_none_or(|b| elapsed < b) {
                best[u] = Some(elapsed);
            }
            for &(v, w) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    walk(v, elapsed + w, seen, adj, best);
                    seen[v] = false;
                }
            }
        }
        let mut adj = vec![Vec::new(); n];
        for l in links {
            adj[l.from.0 as usize].push((l.to.0 as usize, l.seconds));
        }
        (0..n)
            .map(|src| {
                let mut best = vec![None; n];
                let mut seen = vec![false; n];
                seen[src] = true;
                walk(src, 0, &mut seen, &adj, &mut best);
                best
            })
            .collect()
    }

    fn random_strong_graph() -> impl Strategy<Value = (usize, Vec<Link>)> {
        (3usize..=5).prop_flat_map(|n| {
            let extra = proptest::collection::vec((0..n, 0..n, 0i64..60), 0..10);
            let ring = proptest::collection::vec(1i64..60, n);
            (Just(n), ring, extra).prop_map(|(n, ring, extra)| {
                // A directed cycle guarantees strong connectivity.
                let mut links: Vec<Link> = ring
                    .iter()
                    .enumerate()
                    .map(|(i, &w)| link(i as u32, ((i + 1) % n) as u32, w))
                    .collect();
                links.extend(
                    extra
                        .into_iter()
                        .filter(|(a, b, _)| a != b)
                        .map(|(a, b, w)| link(a as u32, b as u32, w)),
                );
                (n, links)
            })
        })
    }

    proptest! {
        #[test]
        fn graph_matrix_matches_path_enumeration((n, links) in random_strong_graph()) {
            let stops = (0..n as u32).map(|i| stop(i, i as f64, 0.0)).collect();
            let net = TravelNetwork::new(stops, Mode::Graph { links: links.clone() }).unwrap();
            let m = all_pairs_times(&net);
            let oracle = brute_force_times(n, &links);
            for (row, expected) in m.seconds.iter().zip(&oracle) {
                for (&t, &e) in row.iter().zip(expected) {
                    prop_assert_eq!(Some(t), e);
                }
            }
        }

        #[test]
        fn graph_times_satisfy_triangle_inequality((n, links) in random_strong_graph()) {
            let stops = (0..n as u32).map(|i| stop(i, i as f64, 0.0)).collect();
            let net = TravelNetwork::new(stops, Mode::Graph { links }).unwrap();
            for a in 0..n { for b in 0..n { for c in 0..n {
                prop_assert!(net.time_by_index(a, c) <= net.time_by_index(a, b) + net.time_by_index(b, c));
            }}}
        }

        #[test]
        fn gateway_choice_invariant_under_shift(
            a in 0i64..1000, b in 0i64..1000, c in 0i64..1000, shift in -500i64..500
        ) {
            let net = TravelNetwork::new(
                vec![stop(0, 0.0, 0.0), stop(10, 100.0, 0.0), stop(11, -200.0, 0.0), stop(12, 0.0, 150.0)],
                Mode::Euclidean { speed: 1.0 },
            ).unwrap();
            let r = Region::new([StopId(0)], [StopId(10), StopId(11), StopId(12)]).unwrap();
            let base = BTreeMap::from([(StopId(10), a), (StopId(11), b), (StopId(12), c)]);
            let shifted = base.iter().map(|(&k, &v)| (k, v + shift)).collect();
            prop_assert_eq!(
                select_gateway(StopId(0), &r, &net, &base),
                select_gateway(StopId(0), &r, &net, &shifted)
            );
        }
    }
}
