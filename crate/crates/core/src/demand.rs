//! Seeded synthetic demand: non-homogeneous Poisson arrivals by thinning, with
//! a trip-type mix and spatial weights over region stops and gateways.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::RegionError;
use crate::network::{select_gateway, select_gateway_to, Region, TravelNetwork, TripType};
use crate::types::{RequestId, Seconds, StopId, TripRequest};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DemandError {
    #[error(
        "rate piece [{start}, {end}) is empty, overlaps its predecessor or has an invalid rate"
    )]
    InvalidRate { start: Seconds, end: Seconds },
    #[error("trip mix must be non-negative and sum to 1, got {0}")]
    InvalidMix(f64),
    #[error("region lacks the stops needed for {0:?} trips")]
    MissingStops(TripType),
    #[error("invalid spatial weight for stop {0}")]
    InvalidWeight(StopId),
    #[error(transparent)]
    Region(#[from] RegionError),
}

/// Constant arrival rate over `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePiece {
    pub start: Seconds,
    pub end: Seconds,
    pub per_hour: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripMix {
    pub intra: f64,
    pub outbound: f64,
    pub inbound: f64,
}

impl Default for TripMix {
    fn default() -> Self {
        Self {
            intra: 1.0,
            outbound: 0.0,
            inbound: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopWeight {
    pub stop: StopId,
    pub weight: f64,
}

/// How connector trips pick their gateway.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayChoice {
    /// Sample from the gateway weights.
    #[default]
    Weighted,
    /// Gateway with the fastest shuttle leg plus downstream time.
    Fastest,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    /// Piecewise-constant rate in requests/hour; zero outside the pieces.
    pub rates: Vec<RatePiece>,
    #[serde(default)]
    pub mix: TripMix,
    /// Weights over member stops; uniform when empty.
    #[serde(default)]
    pub member_weights: Vec<StopWeight>,
    /// Weights over gateways; uniform when empty.
    #[serde(default)]
    pub gateway_weights: Vec<StopWeight>,
    #[serde(default)]
    pub gateway_choice: GatewayChoice,
    /// Party sizes are uniform on `1..=max_party`.
    #[serde(default = "one")]
    pub max_party: u32,
    #[serde(default)]
    pub seed: u64,
}

impl DemandProfile {
    pub fn constant(per_hour: f64, horizon: Seconds, seed: u64) -> Self {
        Self {
            rates: vec![RatePiece {
                start: 0,
                end: horizon,
                per_hour,
            }],
            mix: TripMix::default(),
            member_weights: Vec::new(),
            gateway_weights: Vec::new(),
            gateway_choice: GatewayChoice::Weighted,
            max_party: 1,
            seed,
        }
    }

    /// Arrival rate (per hour) at `t`.
    pub fn rate_at(&self, t: f64) -> f64 {
        self.rates
            .iter()
            .find(|p| (p.start as f64) <= t && t < p.end as f64)
            .map_or(0.0, |p| p.per_hour)
    }

    pub fn validate(&self) -> Result<(), DemandError> {
        let mut last_end = Seconds::MIN;
        for p in &self.rates {
            if p.end <= p.start
                || p.start < last_end
                || !(p.per_hour.is_finite() && p.per_hour >= 0.0)
            {
                return Err(DemandError::InvalidRate {
                    start: p.start,
                    end: p.end,
                });
            }
            last_end = p.end;
        }
        let m = self.mix;
        let sum = m.intra + m.outbound + m.inbound;
        if m.intra < 0.0 || m.outbound < 0.0 || m.inbound < 0.0 || (sum - 1.0).abs() > 1e-9 {
            return Err(DemandError::InvalidMix(sum));
        }
        for w in self.member_weights.iter().chain(&self.gateway_weights) {
            if !(w.weight.is_finite() && w.weight >= 0.0) {
                return Err(DemandError::InvalidWeight(w.stop));
            }
        }
        Ok(())
    }

    /// Busiest rate over the pieces.
    pub fn peak_rate(&self) -> f64 {
        self.rates.iter().map(|p| p.per_hour).fold(0.0, f64::max)
    }
}

/// A generated request with the trip type it was drawn as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandTrip {
    pub request: TripRequest,
    pub trip_type: TripType,
}

/// Weighted sampler over stops; missing/unlisted stops get zero weight when
/// an explicit list is given, uniform weight otherwise.
struct StopSampler {
    stops: Vec<StopId>,
    dist: Option<WeightedIndex<f64>>,
}

impl StopSampler {
    fn new(
        candidates: impl Iterator<Item = StopId>,
        weights: &[StopWeight],
    ) -> Result<Self, DemandError> {
        let stops: Vec<StopId> = candidates.collect();
        let table: BTreeMap<StopId, f64> = weights.iter().map(|w| (w.stop, w.weight)).collect();
        if let Some(w) = weights.iter().find(|w| !stops.contains(&w.stop)) {
            return Err(DemandError::InvalidWeight(w.stop));
        }
        let ws: Vec<f64> = stops
            .iter()
            .map(|s| {
                if weights.is_empty() {
                    1.0
                } else {
                    table.get(s).copied().unwrap_or(0.0)
                }
            })
            .collect();
        Ok(Self {
            dist: WeightedIndex::new(&ws).ok(),
            stops,
        })
    }

    fn positive(&self) -> usize {
        match &self.dist {
            None => 0,
            Some(d) => (0..self.stops.len())
                .filter(|&i| d.weight(i).is_some_and(|w| w > 0.0))
                .count(),
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> StopId {
        self.stops[self.dist.as_ref().expect("checked non-empty").sample(rng)]
    }

    fn sample_except(&self, rng: &mut impl Rng, avoid: StopId) -> StopId {
        loop {
            let s = self.sample(rng);
            if s != avoid {
                return s;
            }
        }
    }
}

/// Generates requests over `[0, horizon)` sorted by request time, ids from 0.
pub fn generate_demand(
    profile: &DemandProfile,
    region: &Region,
    network: &TravelNetwork,
    horizon: Seconds,
) -> Result<Vec<DemandTrip>, DemandError> {
    profile.validate()?;
    let members = StopSampler::new(region.members().iter().copied(), &profile.member_weights)?;
    let gateways = StopSampler::new(region.gateways().iter().copied(), &profile.gateway_weights)?;
    let mix = profile.mix;
    if mix.intra > 0.0 && members.positive() < 2 {
        return Err(DemandError::MissingStops(TripType::IntraRegion));
    }
    for (share, t) in [
        (mix.outbound, TripType::OutboundConnector),
        (mix.inbound, TripType::InboundConnector),
    ] {
        let fastest =
            profile.gateway_choice == GatewayChoice::Fastest && !region.gateways().is_empty();
        if share > 0.0 && (members.positive() == 0 || (gateways.positive() == 0 && !fastest)) {
            return Err(DemandError::MissingStops(t));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let peak = profile.peak_rate();
    let mut out = Vec::new();
    if peak <= 0.0 || horizon <= 0 {
        return Ok(out);
    }
    let gap = Exp::new(peak / 3600.0).expect("positive rate");
    let mut t = 0.0f64;
    loop {
        t += gap.sample(&mut rng);
        if t >= horizon as f64 {
            break;
        }
        if rng.random::<f64>() * peak >= profile.rate_at(t) {
            continue;
        }
        let roll: f64 = rng.random();
        let trip_type = if roll < mix.intra {
            TripType::IntraRegion
        } else if roll < mix.intra + mix.outbound {
            TripType::OutboundConnector
        } else {
            TripType::InboundConnector
        };
        let (pickup, dropoff) = match trip_type {
            TripType::IntraRegion => {
                let p = members.sample(&mut rng);
                (p, members.sample_except(&mut rng, p))
            }
            TripType::OutboundConnector => {
                let p = members.sample(&mut rng);
                let g = match profile.gateway_choice {
                    GatewayChoice::Weighted => gateways.sample(&mut rng),
                    GatewayChoice::Fastest => {
                        select_gateway(p, region, network, region.downstream())?
                    }
                };
                (p, g)
            }
            TripType::InboundConnector => {
                let d = members.sample(&mut rng);
                let g = match profile.gateway_choice {
                    GatewayChoice::Weighted => gateways.sample(&mut rng),
                    GatewayChoice::Fastest => {
                        select_gateway_to(d, region, network, region.downstream())?
                    }
                };
                (g, d)
            }
        };
        let passengers = rng.random_range(1..=profile.max_party.max(1));
        out.push(DemandTrip {
            request: TripRequest {
                id: RequestId(out.len() as u64),
                pickup,
                dropoff,
                request_time: t.floor() as Seconds,
                passengers,
            },
            trip_type,
        });
    }
    Ok(out)
}
