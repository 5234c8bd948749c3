//! Trip-record aggregation and base-versus-on-demand comparison.
//!
//! Means and percentiles cover completed trips only unless abandoned trips
//! are imputed a fixed trip time. Time bins are keyed by request time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::TripType;
use crate::types::{RequestId, Seconds, VehicleId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripStatus {
    Completed,
    Abandoned,
    /// Still open when the simulation ended.
    Pending,
    /// No service could be offered (baseline: no reachable route stop).
    Unserved,
}

impl TripStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TripStatus::Completed => "completed",
            TripStatus::Abandoned => "abandoned",
            TripStatus::Pending => "pending",
            TripStatus::Unserved => "unserved",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripRecord {
    pub id: RequestId,
    pub request_time: Seconds,
    pub pickup_time: Option<Seconds>,
    pub dropoff_time: Option<Seconds>,
    pub status: TripStatus,
    pub trip_type: TripType,
    pub vehicle: Option<VehicleId>,
}

impl TripRecord {
    pub fn open(id: RequestId, request_time: Seconds, trip_type: TripType) -> Self {
        Self {
            id,
            request_time,
            pickup_time: None,
            dropoff_time: None,
            status: TripStatus::Pending,
            trip_type,
            vehicle: None,
        }
    }

    pub fn waiting(&self) -> Option<Seconds> {
        self.pickup_time.map(|p| p - self.request_time)
    }

    pub fn trip_time(&self) -> Option<Seconds> {
        self.dropoff_time.map(|d| d - self.request_time)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("bin width must be at least 60 s, got {0}")]
    BinTooSmall(Seconds),
    #[error("summaries use different bin widths ({0} s vs {1} s)")]
    BinMismatch(Seconds, Seconds),
}

/// Mean, median and 90th percentile (nearest-rank) of a sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p90: f64,
}

/// Nearest-rank percentile of an ascending sample: the smallest value with at
/// least `pct` percent of the sample at or below it.
pub fn percentile(sorted: &[Seconds], pct: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1] as f64
}

impl Distribution {
    pub fn of(values: &mut [Seconds]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        values.sort_unstable();
        Self {
            count: values.len(),
            mean: values.iter().sum::<Seconds>() as f64 / values.len() as f64,
            median: percentile(values, 50.0),
            p90: percentile(values, 90.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub start: Seconds,
    pub end: Seconds,
    pub count: usize,
    pub mean_waiting: f64,
    pub mean_trip_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub bin: Seconds,
    pub generated: usize,
    pub completed: usize,
    pub abandoned: usize,
    pub pending: usize,
    pub unserved: usize,
    pub waiting: Distribution,
    pub trip_time: Distribution,
    /// Non-empty bins only, ascending.
    pub bins: Vec<BinStat>,
    /// Fraction of shuttle time spent driving, when known.
    pub utilization: Option<f64>,
}

impl SummaryStats {
    pub fn abandonment_rate(&self) -> f64 {
        if self.generated == 0 {
            0.0
        } else {
            self.abandoned as f64 / self.generated as f64
        }
    }

    pub fn bin_at(&self, start: Seconds) -> Option<&BinStat> {
        self.bins.iter().find(|b| b.start == start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SummaryOptions {
    pub bin: Seconds,
    /// Count abandoned trips in the time statistics with this trip time.
    pub impute_abandoned: Option<Seconds>,
}

pub const DEFAULT_BIN: Seconds = 900;

pub fn summarize(records: &[TripRecord], bin: Seconds) -> Result<SummaryStats, ReportError> {
    summarize_with(
        records,
        SummaryOptions {
            bin,
            impute_abandoned: None,
        },
    )
}

pub fn summarize_with(
    records: &[TripRecord],
    options: SummaryOptions,
) -> Result<SummaryStats, ReportError> {
    let bin = options.bin;
    if bin < 60 {
        return Err(ReportError::BinTooSmall(bin));
    }
    let mut stats = SummaryStats {
        bin,
        generated: records.len(),
        completed: 0,
        abandoned: 0,
        pending: 0,
        unserved: 0,
        waiting: Distribution::default(),
        trip_time: Distribution::default(),
        bins: Vec::new(),
        utilization: None,
    };
    let mut waits = Vec::new();
    let mut trips = Vec::new();
    // bin index -> (count, waiting sum, trip sum)
    let mut bins: BTreeMap<Seconds, (usize, Seconds, Seconds)> = BTreeMap::new();
    for r in records {
        let times = match r.status {
            TripStatus::Completed => {
                stats.completed += 1;
                r.waiting().zip(r.trip_time())
            }
            TripStatus::Abandoned => {
                stats.abandoned += 1;
                options.impute_abandoned.map(|t| (t, t))
            }
            TripStatus::Pending => {
                stats.pending += 1;
                None
            }
            TripStatus::Unserved => {
                stats.unserved += 1;
                None
            }
        };
        if let Some((w, t)) = times {
            waits.push(w);
            trips.push(t);
            let e = bins.entry(r.request_time.div_euclid(bin)).or_default();
            e.0 += 1;
            e.1 += w;
            e.2 += t;
        }
    }
    stats.waiting = Distribution::of(&mut waits);
    stats.trip_time = Distribution::of(&mut trips);
    stats.bins = bins
        .into_iter()
        .map(|(k, (n, w, t))| BinStat {
            start: k * bin,
            end: (k + 1) * bin,
            count: n,
            mean_waiting: w as f64 / n as f64,
            mean_trip_time: t as f64 / n as f64,
        })
        .collect();
    Ok(stats)
}

/// Relative change in percent; `None` when the base is zero and the other is not.
pub fn percent_change(base: f64, other: f64) -> Option<f64> {
    if base == other {
        Some(0.0)
    } else if base == 0.0 {
        None
    } else {
        Some((other - base) / base * 100.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricComparison {
    pub metric: &'static str,
    pub base: f64,
    pub odmts: f64,
    pub delta: f64,
    pub delta_pct: Option<f64>,
}

impl MetricComparison {
    fn new(metric: &'static str, base: f64, odmts: f64) -> Self {
        Self {
            metric,
            base,
            odmts,
            delta: odmts - base,
            delta_pct: percent_change(base, odmts),
        }
    }
}

/// Per-bin mean trip time; a bin empty on either side is incomparable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinComparison {
    pub start: Seconds,
    pub end: Seconds,
    pub base: Option<f64>,
    pub odmts: Option<f64>,
}

impl BinComparison {
    pub fn comparable(&self) -> bool {
        self.base.is_some() && self.odmts.is_some()
    }

    pub fn delta(&self) -> Option<f64> {
        Some(self.odmts? - self.base?)
    }

    pub fn delta_pct(&self) -> Option<f64> {
        percent_change(self.base?, self.odmts?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub bin: Seconds,
    pub metrics: Vec<MetricComparison>,
    pub bins: Vec<BinComparison>,
}

impl Comparison {
    pub fn metric(&self, name: &str) -> Option<&MetricComparison> {
        self.metrics.iter().find(|m| m.metric == name)
    }

    /// Plain-text report.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for m in &self.metrics {
            let pct = m
                .delta_pct
                .map_or_else(|| "n/a".to_string(), |p| format!("{p:+.1}%"));
            out.push_str(&format!(
                "{:<18} base {:>10.1}  odmts {:>10.1}  delta {:>+10.1} ({pct})\n",
                m.metric, m.base, m.odmts, m.delta
            ));
        }
        let incomparable = self.bins.iter().filter(|b| !b.comparable()).count();
        out.push_str(&format!(
            "{} bins of {} s, {} incomparable\n",
            self.bins.len(),
            self.bin,
            incomparable
        ));
        out
    }
}

pub fn compare(base: &SummaryStats, odmts: &SummaryStats) -> Result<Comparison, ReportError> {
    if base.bin != odmts.bin {
        return Err(ReportError::BinMismatch(base.bin, odmts.bin));
    }
    let metrics = vec![
        MetricComparison::new("mean_trip_time", base.trip_time.mean, odmts.trip_time.mean),
        MetricComparison::new(
            "median_trip_time",
            base.trip_time.median,
            odmts.trip_time.median,
        ),
        MetricComparison::new("p90_trip_time", base.trip_time.p90, odmts.trip_time.p90),
        MetricComparison::new("mean_waiting", base.waiting.mean, odmts.waiting.mean),
        MetricComparison::new("completed", base.completed as f64, odmts.completed as f64),
        MetricComparison::new(
            "abandonment_rate",
            base.abandonment_rate(),
            odmts.abandonment_rate(),
        ),
    ];
    let mut starts: Vec<Seconds> = base
        .bins
        .iter()
        .chain(&odmts.bins)
        .map(|b| b.start)
        .collect();
    starts.sort_unstable();
    starts.dedup();
    let bins = starts
        .into_iter()
        .map(|start| BinComparison {
            start,
            end: start + base.bin,
            base: base.bin_at(start).map(|b| b.mean_trip_time),
            odmts: odmts.bin_at(start).map(|b| b.mean_trip_time),
        })
        .collect();
    Ok(Comparison {
        bin: base.bin,
        metrics,
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn done(id: u64, request: Seconds, pickup: Seconds, dropoff: Seconds) -> TripRecord {
        TripRecord {
            id: RequestId(id),
            request_time: request,
            pickup_time: Some(pickup),
            dropoff_time: Some(dropoff),
            status: TripStatus::Completed,
            trip_type: TripType::IntraRegion,
            vehicle: None,
        }
    }

    #[test]
    fn empty_records_give_zeroed_stats() {
        let s = summarize(&[], 900).unwrap();
        assert_eq!(s.generated, 0);
        assert_eq!(s.completed, 0);
        assert_eq!(s.trip_time, Distribution::default());
        assert!(s.bins.is_empty());
    }

    #[test]
    fn mean_of_two_trips() {
        let s = summarize(&[done(1, 0, 50, 100), done(2, 0, 10, 300)], 900).unwrap();
        assert_eq!(s.trip_time.mean, 200.0);
        assert_eq!(s.waiting.mean, 30.0);
    }

    #[test]
    fn bin_too_small() {
        assert_eq!(summarize(&[], 59), Err(ReportError::BinTooSmall(59)));
    }

    #[test]
    fn abandoned_excluded_unless_imputed() {
        let mut a = TripRecord::open(RequestId(2), 0, TripType::IntraRegion);
        a.status = TripStatus::Abandoned;
        let recs = [done(1, 0, 10, 100), a];
        let s = summarize(&recs, 900).unwrap();
        assert_eq!((s.completed, s.abandoned, s.trip_time.mean), (1, 1, 100.0));
        assert_eq!(s.abandonment_rate(), 0.5);
        let s = summarize_with(
            &recs,
            SummaryOptions {
                bin: 900,
                impute_abandoned: Some(1900),
            },
        )
        .unwrap();
        assert_eq!(s.trip_time.mean, 1000.0);
    }

    #[test]
    fn bins_keyed_by_request_time() {
        let s = summarize(&[done(1, 10, 20, 100), done(2, 950, 960, 2000)], 900).unwrap();
        assert_eq!(s.bins.len(), 2);
        assert_eq!((s.bins[0].start, s.bins[0].mean_trip_time), (0, 90.0));
        assert_eq!((s.bins[1].start, s.bins[1].mean_trip_time), (900, 1050.0));
    }

    /// Counting oracle for nearest-rank percentiles: the smallest sample value
    /// with at least `pct` percent of the sample at or below it.
    fn counting_percentile(values: &[Seconds], pct: f64) -> f64 {
        let n = values.len() as f64;
        let mut candidates: Vec<Seconds> = values
            .iter()
            .copied()
            .filter(|&x| values.iter().filter(|&&y| y <= x).count() as f64 >= pct / 100.0 * n)
            .collect();
        candidates.sort_unstable();
        candidates[0] as f64
    }

    #[test]
    fn known_quantiles() {
        let mut v: Vec<Seconds> = (1..=10).map(|x| x * 10).collect();
        let d = Distribution::of(&mut v);
        assert_eq!((d.median, d.p90), (50.0, 90.0));
    }

    #[test]
    fn identical_comparison_is_flat() {
        let s = summarize(&[done(1, 0, 10, 100), done(2, 950, 960, 2000)], 900).unwrap();
        let c = compare(&s, &s).unwrap();
        assert!(c
            .metrics
            .iter()
            .all(|m| m.delta == 0.0 && m.delta_pct == Some(0.0)));
        assert!(c
            .bins
            .iter()
            .all(|b| b.delta() == Some(0.0) && b.delta_pct() == Some(0.0)));
    }

    #[test]
    fn percent_change_of_a_large_drop() {
        let pct = percent_change(2430.7, 998.4).unwrap();
        assert!((pct - (-58.9)).abs() < 0.05, "{pct}");
    }

    #[test]
    fn missing_bin_is_incomparable() {
        let base = summarize(&[done(1, 0, 10, 100)], 900).unwrap();
        let odmts = summarize(&[done(1, 0, 10, 100), done(2, 1000, 1010, 1100)], 900).unwrap();
        let c = compare(&base, &odmts).unwrap();
        assert_eq!(c.bins.len(), 2);
        assert!(c.bins[0].comparable());
        assert!(!c.bins[1].comparable());
        assert_eq!(c.bins[1].delta(), None);
        let other = summarize(&[], 600).unwrap();
        assert_eq!(
            compare(&base, &other),
            Err(ReportError::BinMismatch(900, 600))
        );
    }

    proptest! {
        #[test]
        fn percentiles_match_counting_oracle(mut v in proptest::collection::vec(0i64..5000, 1..60)) {
            let oracle_med = counting_percentile(&v, 50.0);
            let oracle_p90 = counting_percentile(&v, 90.0);
            let d = Distribution::of(&mut v);
            prop_assert_eq!(d.median, oracle_med);
            prop_assert_eq!(d.p90, oracle_p90);
            prop_assert!(d.median <= d.p90);
        }

        #[test]
        fn summary_is_permutation_invariant(
            trips in proptest::collection::vec((0i64..7200, 0i64..900, 0i64..1800), 0..40),
            seed in any::<u64>()
        ) {
            let recs: Vec<TripRecord> = trips
                .iter()
                .enumerate()
                .map(|(i, &(r, w, t))| done(i as u64, r, r + w, r + w + t))
                .collect();
            let mut shuffled = recs.clone();
            // Deterministic shuffle from the seed.
            let n = shuffled.len();
            for i in (1..n).rev() {
                let j = (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) % (i as u64 + 1)) as usize;
                shuffled.swap(i, j);
            }
            prop_assert_eq!(summarize(&recs, 900).unwrap(), summarize(&shuffled, 900).unwrap());
        }
    }
}
