//! Scenario configuration (TOML).
//!
//! Network, region, demand and baseline sections may be written inline or
//! given as a path to a separate file, resolved relative to the scenario file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::demand::{DemandProfile, DemandTrip};
use crate::dispatch::DEFAULT_MISS_PENALTY;
use crate::enumeration::DEFAULT_K;
use crate::error::ConfigError;
use crate::formats::read_demand;
use crate::network::{NetworkSpec, Region, RegionSpec, TravelNetwork};
use crate::reporting::DEFAULT_BIN;
use crate::simulator::baseline::FixedRoute;
use crate::types::{Seconds, StopId};

pub const DEFAULT_DISPATCH_INTERVAL: Seconds = 30;
pub const DEFAULT_MAX_DEFER: Seconds = 1800;
pub const DEFAULT_DRAIN: Seconds = 3600;
pub const DEFAULT_WALK_SPEED: f64 = 1.3;
pub const DEFAULT_MAX_REQUESTS_PER_TICK: usize = 20;
pub const DEFAULT_MAX_OUTSTANDING: usize = 8;

/// A section given inline or as a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Section<T> {
    Path(PathBuf),
    Inline(T),
}

impl<T: DeserializeOwned> Section<T> {
    fn resolve(self, base: &Path) -> Result<T, ConfigError> {
        match self {
            Section::Inline(v) => Ok(v),
            Section::Path(p) => {
                let path = base.join(p);
                let text = fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                    path: path.clone(),
                    source,
                })?;
                toml::from_str(&text).map_err(|e| ConfigError::Parse {
                    path,
                    message: e.to_string(),
                })
            }
        }
    }
}

/// Where requests come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandSource {
    /// Generated from a profile; the scenario's `rng_seed` replaces the profile seed.
    Profile(DemandProfile),
    /// A fixed demand file.
    File(PathBuf),
    /// Requests listed in the config.
    #[serde(skip)]
    Trips(Vec<DemandTrip>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    #[serde(default = "default_walk_speed")]
    pub walk_speed: f64,
    /// Longest walk to or from a route stop, in metres.
    #[serde(default)]
    pub max_walk: Option<f64>,
    pub routes: Vec<FixedRoute>,
}

fn default_walk_speed() -> f64 {
    DEFAULT_WALK_SPEED
}

/// Resolved scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub horizon: Seconds,
    #[serde(default = "default_interval")]
    pub dispatch_interval: Seconds,
    pub fleet_size: u32,
    pub shuttle_capacity: u32,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_penalty")]
    pub miss_penalty: Seconds,
    #[serde(default = "default_max_defer")]
    pub max_defer: Seconds,
    #[serde(default)]
    pub rng_seed: u64,
    /// Extra time after the horizon to finish open trips; no new requests arrive.
    #[serde(default = "default_drain")]
    pub drain: Seconds,
    /// Oldest open requests offered per dispatch; keeps plan counts bounded.
    #[serde(default = "default_batch")]
    pub max_requests_per_tick: usize,
    /// Most requests a shuttle may be responsible for at once.
    #[serde(default = "default_outstanding")]
    pub max_outstanding: usize,
    #[serde(default)]
    pub weight_by_party_size: bool,
    /// Count abandoned trips in the statistics with trip time `max_defer`.
    #[serde(default)]
    pub impute_abandoned: bool,
    #[serde(default = "default_bin")]
    pub bin: Seconds,
    /// Starting stops, assigned to shuttles in id order and cycled; defaults
    /// to the region's member stops.
    #[serde(default)]
    pub depots: Vec<StopId>,
    pub network: NetworkSpec,
    pub region: RegionSpec,
    pub demand: DemandSource,
    #[serde(default)]
    pub baseline: Option<BaselineConfig>,
}

fn default_batch() -> usize {
    DEFAULT_MAX_REQUESTS_PER_TICK
}
fn default_outstanding() -> usize {
    DEFAULT_MAX_OUTSTANDING
}
fn default_interval() -> Seconds {
    DEFAULT_DISPATCH_INTERVAL
}
fn default_k() -> usize {
    DEFAULT_K
}
fn default_penalty() -> Seconds {
    DEFAULT_MISS_PENALTY
}
fn default_max_defer() -> Seconds {
    DEFAULT_MAX_DEFER
}
fn default_drain() -> Seconds {
    DEFAULT_DRAIN
}
fn default_bin() -> Seconds {
    DEFAULT_BIN
}

/// On-disk form of [`ScenarioConfig`] with unresolved sections.
#[derive(Debug, Deserialize)]
struct ScenarioFile {
    horizon: Seconds,
    #[serde(default = "default_interval")]
    dispatch_interval: Seconds,
    fleet_size: u32,
    shuttle_capacity: u32,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default = "default_penalty")]
    miss_penalty: Seconds,
    #[serde(default = "default_max_defer")]
    max_defer: Seconds,
    #[serde(default)]
    rng_seed: u64,
    #[serde(default = "default_drain")]
    drain: Seconds,
    #[serde(default = "default_batch")]
    max_requests_per_tick: usize,
    #[serde(default = "default_outstanding")]
    max_outstanding: usize,
    #[serde(default)]
    weight_by_party_size: bool,
    #[serde(default)]
    impute_abandoned: bool,
    #[serde(default = "default_bin")]
    bin: Seconds,
    #[serde(default)]
    depots: Vec<StopId>,
    network: Section<NetworkSpec>,
    region: Section<RegionSpec>,
    demand: Section<DemandSource>,
    #[serde(default)]
    baseline: Option<Section<BaselineConfig>>,
}

/// Network and region built from a config.
#[derive(Debug, Clone)]
pub struct World {
    pub network: TravelNetwork,
    pub region: Region,
}

impl ScenarioConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            ConfigError::Parse { path: p, message } if p.as_os_str().is_empty() => {
                ConfigError::Parse {
                    path: path.to_path_buf(),
                    message,
                }
            }
            e => e,
        })
    }

    /// Parses scenario text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::new(),
            message: e.to_string(),
        })?;
        let demand = match file.demand.resolve(base)? {
            DemandSource::File(p) => {
                let path = base.join(p);
                let f = fs::File::open(&path).map_err(|source| ConfigError::Io {
                    path: path.clone(),
                    source,
                })?;
                DemandSource::Trips(read_demand(f).map_err(|e| ConfigError::Parse {
                    path,
                    message: e.to_string(),
                })?)
            }
            d => d,
        };
        let config = Self {
            horizon: file.horizon,
            dispatch_interval: file.dispatch_interval,
            fleet_size: file.fleet_size,
            shuttle_capacity: file.shuttle_capacity,
            k: file.k,
            miss_penalty: file.miss_penalty,
            max_defer: file.max_defer,
            rng_seed: file.rng_seed,
            drain: file.drain,
            max_requests_per_tick: file.max_requests_per_tick,
            max_outstanding: file.max_outstanding,
            weight_by_party_size: file.weight_by_party_size,
            impute_abandoned: file.impute_abandoned,
            bin: file.bin,
            depots: file.depots,
            network: file.network.resolve(base)?,
            region: file.region.resolve(base)?,
            demand,
            baseline: file.baseline.map(|b| b.resolve(base)).transpose()?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.horizon <= 0 {
            return bad("horizon must be positive");
        }
        if self.dispatch_interval < 1 {
            return bad("dispatch_interval must be at least 1 s");
        }
        if self.fleet_size < 1 {
            return bad("fleet_size must be at least 1");
        }
        if self.shuttle_capacity < 1 {
            return bad("shuttle_capacity must be at least 1");
        }
        if self.k < 1 {
            return bad("k must be at least 1");
        }
        if self.miss_penalty < 0 {
            return bad("miss_penalty must be non-negative");
        }
        if self.max_defer <= self.dispatch_interval {
            return bad("max_defer must exceed dispatch_interval");
        }
        if self.drain < 0 {
            return bad("drain must be non-negative");
        }
        if self.bin < 60 {
            return bad("bin must be at least 60 s");
        }
        if self.max_requests_per_tick == 0 {
            return bad("max_requests_per_tick must be at least 1");
        }
        if self.max_outstanding == 0 {
            return bad("max_outstanding must be at least 1");
        }
        let world = self.world()?;
        for d in &self.depots {
            world.network.stop(*d)?;
        }
        if self.depots.is_empty() && world.region.members().is_empty() {
            return bad("no depots and no member stops to start shuttles from");
        }
        if let DemandSource::Profile(p) = &self.demand {
            p.validate()
                .map_err(|e| ConfigError::Invalid(format!("demand: {e}")))?;
        }
        if let Some(b) = &self.baseline {
            if !(b.walk_speed > 0.0 && b.walk_speed.is_finite()) {
                return bad("baseline walk_speed must be positive");
            }
            if b.routes.is_empty() {
                return bad("baseline needs at least one route");
            }
            for r in &b.routes {
                r.validate().map_err(ConfigError::Invalid)?;
                for s in &r.served_stops {
                    world.network.stop(*s)?;
                }
            }
        }
        Ok(())
    }

    pub fn world(&self) -> Result<World, ConfigError> {
        let network = TravelNetwork::from_spec(self.network.clone())?;
        let region = Region::from_spec(self.region.clone())?;
        region.check_against(&network)?;
        Ok(World { network, region })
    }

    /// Starting stop of every shuttle, in vehicle id order.
    pub fn depot_stops(&self) -> Vec<StopId> {
        let pool: Vec<StopId> = if self.depots.is_empty() {
            let mut m: Vec<StopId> = self.region.members.clone();
            m.sort_unstable();
            m.dedup();
            m
        } else {
            self.depots.clone()
        };
        (0..self.fleet_size as usize)
            .map(|i| pool[i % pool.len()])
            .collect()
    }

    pub fn with_fleet_size(&self, fleet_size: u32) -> Self {
        Self {
            fleet_size,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, rng_seed: u64) -> Self {
        Self {
            rng_seed,
            ..self.clone()
        }
    }
}
