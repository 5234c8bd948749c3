use std::path::PathBuf;

use thiserror::Error;

use crate::types::{RequestId, StopId, VehicleId};

/// A value violated one of its type invariants.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("stop {0} has a non-finite coordinate")]
    NonFiniteCoordinate(StopId),
    #[error("request {0} picks up and drops off at the same stop")]
    PickupEqualsDropoff(RequestId),
    #[error("request {0} has a negative request time")]
    NegativeRequestTime(RequestId),
    #[error("request {0} has zero passengers")]
    NoPassengers(RequestId),
    #[error("shuttle {0} has zero capacity")]
    ZeroCapacity(VehicleId),
    #[error("shuttle {vehicle} carries {onboard} passengers but seats {capacity}")]
    OverCapacity {
        vehicle: VehicleId,
        onboard: u32,
        capacity: u32,
    },
    #[error("shuttle {vehicle} reports {onboard} onboard but its drop-off set carries {carried}")]
    OnboardMismatch {
        vehicle: VehicleId,
        onboard: u32,
        carried: u32,
    },
    #[error("request {request} is both awaiting pick-up and drop-off on shuttle {vehicle}")]
    PickupAndDropoffOverlap {
        vehicle: VehicleId,
        request: RequestId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error(transparent)]
    Invalid(#[from] ModelError),
    #[error("unknown stop {stop} referenced by request {request:?} / shuttle {vehicle:?}")]
    DanglingStop {
        request: Option<RequestId>,
        vehicle: Option<VehicleId>,
        stop: StopId,
    },
    #[error("duplicate request id {0}")]
    DuplicateRequest(RequestId),
    #[error("duplicate shuttle id {0}")]
    DuplicateVehicle(VehicleId),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("unknown stop {0}")]
    UnknownStop(StopId),
    #[error("stop {0} is listed twice")]
    DuplicateStop(StopId),
    #[error("no path from stop {from} to stop {to}")]
    Unreachable { from: StopId, to: StopId },
    #[error("speed must be positive and finite, got {0}")]
    InvalidSpeed(f64),
    #[error("link {from} -> {to} has negative traversal time {seconds}")]
    NegativeLink {
        from: StopId,
        to: StopId,
        seconds: i64,
    },
    #[error(transparent)]
    Invalid(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("stop {0} is both a member stop and a gateway station")]
    Overlap(StopId),
    #[error("stop {0} is neither inside the region nor a gateway")]
    OutsideRegion(StopId),
    #[error("request {0} runs gateway to gateway, which no shuttle serves")]
    GatewayToGateway(RequestId),
    #[error("region has no gateway stations")]
    NoGateways,
    #[error("no downstream time for gateway {0}")]
    MissingDownstream(StopId),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnumerationError {
    #[error("plan cap K must be at least 1")]
    ZeroCap,
    #[error(
        "instance too large: {vehicles} shuttles x {requests} requests with K = {k} gives {plans} plans (limit {limit})"
    )]
    TooLarge {
        vehicles: usize,
        requests: usize,
        k: usize,
        plans: u128,
        limit: usize,
    },
    #[error("request {0} is offered twice")]
    DuplicateRequest(RequestId),
    #[error("request {request} is already committed to shuttle {vehicle}")]
    AlreadyCommitted {
        request: RequestId,
        vehicle: VehicleId,
    },
    #[error(transparent)]
    Costing(#[from] CostingError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DispatchError {
    #[error("shuttle {0} has no empty assignment plan")]
    MissingEmptyPlan(VehicleId),
    #[error("plan {plan} serves request {request}, which is not part of the problem")]
    UnknownRequest { plan: usize, request: RequestId },
    #[error("request {0} has a negative miss penalty")]
    NegativePenalty(RequestId),
    #[error("request {0} has no miss penalty")]
    MissingPenalty(RequestId),
    #[error("{0} requests exceed the solver limit of 128")]
    TooManyRequests(usize),
    #[error("brute force would examine {combinations} selections (limit {limit})")]
    GuardExceeded { combinations: u128, limit: u128 },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Toml(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostingError {
    #[error("{0} outstanding requests exceed the sequencer limit of 64")]
    TooManyRequests(usize),
    #[error("request {0} appears more than once among committed and new requests")]
    DuplicateRequest(RequestId),
    #[error("stop {0} is not part of this search")]
    StopNotInSearch(StopId),
    #[error(transparent)]
    Network(#[from] NetworkError),
}
