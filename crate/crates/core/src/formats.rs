//! Comma-separated and TOML file formats.
//!
//! Demand files: `id,time,pickup,dropoff,passengers,type`.
//! Trips files: `id,request_time,pickup_time,dropoff_time,waiting,trip_time,status,trip_type`,
//! with empty fields for events that did not happen.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::demand::DemandTrip;
use crate::dispatch::DispatchProblem;
use crate::enumeration::{enumerate_plans, EnumerationOptions, PlanSet, DEFAULT_K};
use crate::error::FormatError;
use crate::network::{NetworkSpec, TravelNetwork, TripType};
use crate::reporting::{Comparison, SummaryStats, TripRecord, TripStatus};
use crate::types::{
    AssignmentPlan, DispatchSolution, RequestId, Seconds, ShuttleState, StopId, TripRequest,
    VehicleId,
};

fn csv_error(e: csv::Error) -> FormatError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    FormatError::Line {
        line,
        message: e.to_string(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DemandRow {
    id: u64,
    time: Seconds,
    pickup: u32,
    dropoff: u32,
    passengers: u32,
    #[serde(rename = "type")]
    trip_type: String,
}

pub fn write_demand<W: Write>(out: W, trips: &[DemandTrip]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    for t in trips {
        let r = &t.request;
        w.serialize(DemandRow {
            id: r.id.0,
            time: r.request_time,
            pickup: r.pickup.0,
            dropoff: r.dropoff.0,
            passengers: r.passengers,
            trip_type: t.trip_type.as_str().to_string(),
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a demand file; rows are returned sorted by (time, id).
pub fn read_demand<R: Read>(input: R) -> Result<Vec<DemandTrip>, FormatError> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut trips = Vec::new();
    for row in rd.deserialize::<DemandRow>() {
        let row = row.map_err(csv_error)?;
        let line = trips.len() + 2;
        let trip_type = TripType::parse(&row.trip_type).ok_or_else(|| FormatError::Line {
            line,
            message: format!("unknown trip type {:?}", row.trip_type),
        })?;
        let request = TripRequest::new(
            RequestId(row.id),
            StopId(row.pickup),
            StopId(row.dropoff),
            row.time,
            row.passengers,
        )
        .map_err(|e| FormatError::Line {
            line,
            message: e.to_string(),
        })?;
        trips.push(DemandTrip { request, trip_type });
    }
    trips.sort_by_key(|t| (t.request.request_time, t.request.id));
    if let Some(w) = trips
        .windows(2)
        .find(|w| w[0].request.id == w[1].request.id)
    {
        return Err(FormatError::Line {
            line: 0,
            message: format!("request {} listed twice", w[0].request.id),
        });
    }
    Ok(trips)
}

#[derive(Debug, Serialize, Deserialize)]
struct TripRow {
    id: u64,
    request_time: Seconds,
    pickup_time: Option<Seconds>,
    dropoff_time: Option<Seconds>,
    waiting: Option<Seconds>,
    trip_time: Option<Seconds>,
    status: TripStatus,
    trip_type: TripType,
}

pub fn write_trips<W: Write>(out: W, records: &[TripRecord]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(TripRow {
            id: r.id.0,
            request_time: r.request_time,
            pickup_time: r.pickup_time,
            dropoff_time: r.dropoff_time,
            waiting: r.waiting(),
            trip_time: r.trip_time(),
            status: r.status,
            trip_type: r.trip_type,
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trips<R: Read>(input: R) -> Result<Vec<TripRecord>, FormatError> {
    let mut rd = csv::Reader::from_reader(input);
    rd.deserialize::<TripRow>()
        .map(|row| {
            let row = row.map_err(csv_error)?;
            Ok(TripRecord {
                id: RequestId(row.id),
                request_time: row.request_time,
                pickup_time: row.pickup_time,
                dropoff_time: row.dropoff_time,
                status: row.status,
                trip_type: row.trip_type,
                vehicle: None,
            })
        })
        .collect()
}

fn fmt_f(x: f64) -> String {
    format!("{x:.3}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

/// Summary file: one `all` row with the aggregates, then one `bin` row per
/// non-empty time bin.
pub fn write_summary<W: Write>(out: W, stats: &SummaryStats) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scope",
        "bin_start",
        "bin_end",
        "count",
        "completed",
        "abandoned",
        "pending",
        "unserved",
        "mean_waiting",
        "median_waiting",
        "p90_waiting",
        "mean_trip_time",
        "median_trip_time",
        "p90_trip_time",
        "utilization",
    ])
    .map_err(csv_error)?;
    w.write_record([
        "all".to_string(),
        String::new(),
        String::new(),
        stats.generated.to_string(),
        stats.completed.to_string(),
        stats.abandoned.to_string(),
        stats.pending.to_string(),
        stats.unserved.to_string(),
        fmt_f(stats.waiting.mean),
        fmt_f(stats.waiting.median),
        fmt_f(stats.waiting.p90),
        fmt_f(stats.trip_time.mean),
        fmt_f(stats.trip_time.median),
        fmt_f(stats.trip_time.p90),
        fmt_opt(stats.utilization),
    ])
    .map_err(csv_error)?;
    for b in &stats.bins {
        let mut row = vec![
            "bin".to_string(),
            b.start.to_string(),
            b.end.to_string(),
            b.count.to_string(),
        ];
        row.extend(std::iter::repeat_n(String::new(), 4));
        row.push(fmt_f(b.mean_waiting));
        row.extend([String::new(), String::new()]);
        row.push(fmt_f(b.mean_trip_time));
        row.extend([String::new(), String::new(), String::new()]);
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparison<W: Write>(out: W, cmp: &Comparison) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "series",
        "bin_start",
        "base",
        "odmts",
        "delta",
        "delta_pct",
        "comparable",
    ])
    .map_err(csv_error)?;
    for m in &cmp.metrics {
        w.write_record([
            m.metric.to_string(),
            String::new(),
            fmt_f(m.base),
            fmt_f(m.odmts),
            fmt_f(m.delta),
            fmt_opt(m.delta_pct),
            "true".to_string(),
        ])
        .map_err(csv_error)?;
    }
    for b in &cmp.bins {
        w.write_record([
            "bin_mean_trip_time".to_string(),
            b.start.to_string(),
            fmt_opt(b.base),
            fmt_opt(b.odmts),
            fmt_opt(b.delta()),
            fmt_opt(b.delta_pct()),
            b.comparable().to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per plan: index, vehicle, request ids (`;`-separated), cost, stop sequence.
pub fn write_plan_set<W: Write>(out: W, plans: &PlanSet) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "vehicle", "requests", "cost", "sequence"])
        .map_err(csv_error)?;
    for (i, p) in plans.plans().iter().enumerate() {
        w.write_record([
            i.to_string(),
            p.vehicle.to_string(),
            join(p.request_ids()),
            p.cost.to_string(),
            join(p.sequence()),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn join<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// A one-shot dispatch problem.
///
/// Either lists plans explicitly, or gives shuttle states and a network from
/// which the plans are enumerated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(default = "default_penalty")]
    pub miss_penalty: Seconds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub requests: Vec<TripRequest>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub penalties: Vec<PenaltyEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shuttles: Vec<ShuttleState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plans: Vec<PlanEntry>,
}

fn default_penalty() -> Seconds {
    crate::dispatch::DEFAULT_MISS_PENALTY
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PenaltyEntry {
    pub request: RequestId,
    pub penalty: Seconds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub vehicle: VehicleId,
    #[serde(default)]
    pub requests: Vec<RequestId>,
    pub cost: Seconds,
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        toml::from_str(text).map_err(|e| FormatError::Toml(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("instance serializes")
    }

    /// Explicit-plan instance for an enumerated plan set.
    pub fn from_problem(problem: &DispatchProblem) -> Self {
        let uniform = problem.miss_penalty.values().next().copied();
        let all_same = problem.miss_penalty.values().all(|&p| Some(p) == uniform);
        Self {
            miss_penalty: uniform.unwrap_or_else(default_penalty),
            k: Some(problem.plan_set.k()),
            requests: problem.requests.clone(),
            penalties: if all_same {
                Vec::new()
            } else {
                problem
                    .miss_penalty
                    .iter()
                    .map(|(&request, &penalty)| PenaltyEntry { request, penalty })
                    .collect()
            },
            shuttles: Vec::new(),
            network: None,
            plans: problem
                .plan_set
                .plans()
                .iter()
                .map(|p| PlanEntry {
                    vehicle: p.vehicle,
                    requests: p.request_ids().collect(),
                    cost: p.cost,
                })
                .collect(),
        }
    }

    /// Builds the dispatch problem, enumerating plans when shuttles are given.
    pub fn into_problem(self) -> Result<DispatchProblem, FormatError> {
        if self.plans.is_empty() && !self.shuttles.is_empty() {
            return self.enumerate();
        }
        self.explicit()
    }

    fn penalties(&self) -> std::collections::BTreeMap<RequestId, Seconds> {
        let mut penalty: std::collections::BTreeMap<RequestId, Seconds> = self
            .requests
            .iter()
            .map(|r| (r.id, self.miss_penalty))
            .collect();
        for e in &self.penalties {
            penalty.insert(e.request, e.penalty);
        }
        penalty
    }

    fn enumerate(self) -> Result<DispatchProblem, FormatError> {
        let spec = self.network.clone().ok_or_else(|| {
            FormatError::Toml("instance with shuttles needs a [network] table".into())
        })?;
        let network =
            TravelNetwork::from_spec(spec).map_err(|e| FormatError::Toml(e.to_string()))?;
        let options = EnumerationOptions::with_k(self.k.unwrap_or(DEFAULT_K));
        let plans = enumerate_plans(&self.shuttles, &self.requests, &network, &options)
            .map_err(|e| FormatError::Toml(e.to_string()))?;
        let penalty = self.penalties();
        Ok(DispatchProblem::new(self.requests, plans, penalty))
    }

    fn explicit(mut self) -> Result<DispatchProblem, FormatError> {
        let penalty = self.penalties();
        let by_id: std::collections::BTreeMap<RequestId, TripRequest> =
            self.requests.iter().map(|r| (r.id, *r)).collect();
        let mut plans = Vec::with_capacity(self.plans.len());
        for (i, p) in std::mem::take(&mut self.plans).into_iter().enumerate() {
            let mut reqs = Vec::with_capacity(p.requests.len());
            for id in p.requests {
                let r = by_id.get(&id).copied().ok_or_else(|| FormatError::Line {
                    line: 0,
                    message: format!("plan {i} names unknown request {id}"),
                })?;
                reqs.push(r);
            }
            reqs.sort_by_key(|r| r.id);
            plans.push(AssignmentPlan {
                vehicle: p.vehicle,
                requests: reqs,
                cost: p.cost,
                visits: Vec::new(),
            });
        }
        plans.sort_by(|a, b| {
            a.vehicle.cmp(&b.vehicle).then_with(|| {
                let ka: Vec<_> = a.request_ids().collect();
                let kb: Vec<_> = b.request_ids().collect();
                ka.cmp(&kb)
            })
        });
        let k = self.k.unwrap_or_else(|| {
            plans
                .iter()
                .map(|p| p.requests.len())
                .max()
                .unwrap_or(0)
                .max(1)
        });
        Ok(DispatchProblem::new(
            self.requests,
            PlanSet::from_plans(plans, k),
            penalty,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub objective: Seconds,
    pub missed: Vec<RequestId>,
    pub assignments: Vec<PlanEntry>,
}

impl SolutionFile {
    pub fn new(problem: &DispatchProblem, solution: &DispatchSolution) -> Self {
        Self {
            objective: solution.objective,
            missed: solution.missed.iter().copied().collect(),
            assignments: solution
                .selected
                .iter()
                .map(|&i| {
                    let p = problem.plan_set.plan(i);
                    PlanEntry {
                        vehicle: p.vehicle,
                        requests: p.request_ids().collect(),
                        cost: p.cost,
                    }
                })
                .collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("solution serializes")
    }
}
