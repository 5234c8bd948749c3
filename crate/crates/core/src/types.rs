//! Domain types shared by the dispatcher, the sequencer and the simulator.
//!
//! All times are integer seconds since scenario start. Constructors validate
//! their invariants and reject bad input instead of repairing it.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{InstanceError, ModelError};
use crate::network::TravelNetwork;

/// Integer seconds since scenario start, or a duration in seconds.
pub type Seconds = i64;

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident($inner:ty)) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl From<$inner> for $name {
            fn from(v: $inner) -> Self {
                Self(v)
            }
        }
    };
}

id_newtype!(
    /// Identifier of a pick-up/drop-off stop.
    StopId(u32)
);
id_newtype!(
    /// Identifier of a trip request.
    RequestId(u64)
);
id_newtype!(
    /// Identifier of a shuttle.
    VehicleId(u32)
);

/// A stop with planar coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub id: StopId,
    pub x: f64,
    pub y: f64,
}

impl Stop {
    pub fn new(id: StopId, x: f64, y: f64) -> Result<Self, ModelError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(ModelError::NonFiniteCoordinate(id));
        }
        Ok(Self { id, x, y })
    }

    pub fn distance_to(&self, other: &Stop) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

fn default_passengers() -> u32 {
    1
}

/// A passenger demand between two stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TripRequest {
    pub id: RequestId,
    pub pickup: StopId,
    pub dropoff: StopId,
    pub request_time: Seconds,
    #[serde(default = "default_passengers")]
    pub passengers: u32,
}

impl TripRequest {
    pub fn new(
        id: RequestId,
        pickup: StopId,
        dropoff: StopId,
        request_time: Seconds,
        passengers: u32,
    ) -> Result<Self, ModelError> {
        let r = Self {
            id,
            pickup,
            dropoff,
            request_time,
            passengers,
        };
        r.check()?;
        Ok(r)
    }

    /// Single-passenger request.
    pub fn single(
        id: u64,
        pickup: u32,
        dropoff: u32,
        request_time: Seconds,
    ) -> Result<Self, ModelError> {
        Self::new(
            RequestId(id),
            StopId(pickup),
            StopId(dropoff),
            request_time,
            1,
        )
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if self.pickup == self.dropoff {
            return Err(ModelError::PickupEqualsDropoff(self.id));
        }
        if self.request_time < 0 {
            return Err(ModelError::NegativeRequestTime(self.id));
        }
        if self.passengers == 0 {
            return Err(ModelError::NoPassengers(self.id));
        }
        Ok(())
    }
}

/// A shuttle's committed state at a dispatch instant.
///
/// `heading_stop`/`arrival_time` are the stop the shuttle is directed to and
/// when it gets there. `pending_dropoffs` are the requests onboard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuttleState {
    pub id: VehicleId,
    pub heading_stop: StopId,
    pub arrival_time: Seconds,
    #[serde(default)]
    pub pending_pickups: Vec<TripRequest>,
    #[serde(default)]
    pub pending_dropoffs: Vec<TripRequest>,
    pub capacity: u32,
    #[serde(default)]
    pub onboard: u32,
}

impl ShuttleState {
    /// An empty shuttle waiting at `stop` from time `at`.
    pub fn idle(id: VehicleId, stop: StopId, at: Seconds, capacity: u32) -> Self {
        Self {
            id,
            heading_stop: stop,
            arrival_time: at,
            pending_pickups: Vec::new(),
            pending_dropoffs: Vec::new(),
            capacity,
            onboard: 0,
        }
    }

    /// Builds a shuttle with commitments; `onboard` is derived from the drop-off set.
    pub fn new(
        id: VehicleId,
        heading_stop: StopId,
        arrival_time: Seconds,
        pending_pickups: Vec<TripRequest>,
        pending_dropoffs: Vec<TripRequest>,
        capacity: u32,
    ) -> Result<Self, ModelError> {
        let onboard = pending_dropoffs.iter().map(|r| r.passengers).sum();
        let s = Self {
            id,
            heading_stop,
            arrival_time,
            pending_pickups,
            pending_dropoffs,
            capacity,
            onboard,
        };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if self.capacity == 0 {
            return Err(ModelError::ZeroCapacity(self.id));
        }
        if self.onboard > self.capacity {
            return Err(ModelError::OverCapacity {
                vehicle: self.id,
                onboard: self.onboard,
                capacity: self.capacity,
            });
        }
        let carried: u32 = self.pending_dropoffs.iter().map(|r| r.passengers).sum();
        if carried != self.onboard {
            return Err(ModelError::OnboardMismatch {
                vehicle: self.id,
                onboard: self.onboard,
                carried,
            });
        }
        let pickups: HashSet<RequestId> = self.pending_pickups.iter().map(|r| r.id).collect();
        if let Some(r) = self
            .pending_dropoffs
            .iter()
            .find(|r| pickups.contains(&r.id))
        {
            return Err(ModelError::PickupAndDropoffOverlap {
                vehicle: self.id,
                request: r.id,
            });
        }
        Ok(())
    }

    /// Number of requests the shuttle is already responsible for.
    pub fn outstanding(&self) -> usize {
        self.pending_pickups.len() + self.pending_dropoffs.len()
    }

    pub fn is_idle(&self) -> bool {
        self.outstanding() == 0
    }
}

/// Actions performed when a shuttle reaches a stop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopVisit {
    pub stop: StopId,
    /// Arrival time at the stop.
    pub arrival: Seconds,
    /// Departure time; later than `arrival` only when waiting for a future-dated request.
    pub departure: Seconds,
    pub pickups: Vec<RequestId>,
    pub dropoffs: Vec<RequestId>,
}

/// A shuttle paired with the new requests `requests` it would take on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentPlan {
    pub vehicle: VehicleId,
    /// New requests, sorted by id.
    pub requests: Vec<TripRequest>,
    /// Added passenger waiting, in seconds.
    pub cost: Seconds,
    /// Optimal visit schedule for committed plus new requests.
    pub visits: Vec<StopVisit>,
}

impl AssignmentPlan {
    pub fn empty(vehicle: VehicleId) -> Self {
        Self {
            vehicle,
            requests: Vec::new(),
            cost: 0,
            visits: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn serves(&self, id: RequestId) -> bool {
        self.requests.iter().any(|r| r.id == id)
    }

    pub fn request_ids(&self) -> impl Iterator<Item = RequestId> + '_ {
        self.requests.iter().map(|r| r.id)
    }

    /// The stop sequence realizing `cost`.
    pub fn sequence(&self) -> Vec<StopId> {
        self.visits.iter().map(|v| v.stop).collect()
    }
}

/// Selected plans (the `y_i = 1` indices) plus the requests left unserved
/// this interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispatchSolution {
    /// Plan-set indices, ascending; one per vehicle in a valid solution.
    pub selected: Vec<usize>,
    pub missed: BTreeSet<RequestId>,
    pub objective: Seconds,
}

impl DispatchSolution {
    /// Selected plan index per vehicle; `plans` resolves each index.
    pub fn by_vehicle(&self, plans: &[AssignmentPlan]) -> BTreeMap<VehicleId, usize> {
        self.selected
            .iter()
            .map(|&i| (plans[i].vehicle, i))
            .collect()
    }
}

/// Checks ids, stop references and the per-type invariants of a dispatch instance.
///
/// Returns every problem found rather than stopping at the first.
pub fn validate_instance(
    requests: &[TripRequest],
    shuttles: &[ShuttleState],
    network: &TravelNetwork,
) -> Result<(), Vec<InstanceError>> {
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    let mut check_request = |r: &TripRequest, errors: &mut Vec<InstanceError>| {
        if let Err(e) = r.check() {
            errors.push(InstanceError::Invalid(e));
        }
        for stop in [r.pickup, r.dropoff] {
            if !network.contains(stop) {
                errors.push(InstanceError::DanglingStop {
                    request: Some(r.id),
                    vehicle: None,
                    stop,
                });
            }
        }
        if !seen.insert(r.id) {
            errors.push(InstanceError::DuplicateRequest(r.id));
        }
    };

    for r in requests {
        check_request(r, &mut errors);
    }
    let mut vehicles = HashSet::new();
    for v in shuttles {
        if !vehicles.insert(v.id) {
            errors.push(InstanceError::DuplicateVehicle(v.id));
        }
        if let Err(e) = v.check() {
            errors.push(InstanceError::Invalid(e));
        }
        if !network.contains(v.heading_stop) {
            errors.push(InstanceError::DanglingStop {
                request: None,
                vehicle: Some(v.id),
                stop: v.heading_stop,
            });
        }
        for r in v.pending_pickups.iter().chain(&v.pending_dropoffs) {
            check_request(r, &mut errors);
        }
    }

    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}
