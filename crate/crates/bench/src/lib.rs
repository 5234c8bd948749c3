//! Deterministic fixtures for the criterion benches.

use std::path::PathBuf;

use odmts_core::network::Mode;
use odmts_core::{
    RequestId, ScenarioConfig, ShuttleState, Stop, StopId, TravelNetwork, TripRequest, VehicleId,
};

/// An `n` by `n` grid of stops 500 m apart, driven at 8 m/s.
pub fn grid(n: u32) -> TravelNetwork {
    let stops = (0..n * n)
        .map(|i| Stop::new(StopId(i), (i % n) as f64 * 500.0, (i / n) as f64 * 500.0).unwrap())
        .collect();
    TravelNetwork::new(stops, Mode::Manhattan { speed: 8.0 }).unwrap()
}

/// `count` requests scattered over `stops` stops by a fixed stride.
pub fn requests(count: u64, stops: u32, first_id: u64) -> Vec<TripRequest> {
    (0..count)
        .map(|i| {
            let p = ((i * 7 + 3) % stops as u64) as u32;
            let d = ((i * 11 + 5 + stops as u64 / 2) % stops as u64) as u32;
            let d = if d == p { (d + 1) % stops } else { d };
            TripRequest::new(
                RequestId(first_id + i),
                StopId(p),
                StopId(d),
                (i as i64 * 37) % 120,
                1,
            )
            .unwrap()
        })
        .collect()
}

/// Idle shuttles spread over the grid.
pub fn fleet(size: u32, stops: u32, capacity: u32) -> Vec<ShuttleState> {
    (0..size)
        .map(|v| ShuttleState::idle(VehicleId(v), StopId(v * 5 % stops), 0, capacity))
        .collect()
}

/// A shuttle with two riders aboard and one pick-up pending.
pub fn busy_shuttle(stops: u32) -> ShuttleState {
    let committed = requests(3, stops, 1000);
    ShuttleState::new(
        VehicleId(0),
        StopId(0),
        0,
        vec![committed[2]],
        committed[..2].to_vec(),
        4,
    )
    .unwrap()
}

pub fn scenario(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    ScenarioConfig::from_file(path).unwrap()
}
