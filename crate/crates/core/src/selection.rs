//! AP selection for the offline survey and for the online query window.
//!
//! Offline, every (reference point, AP) series passes through three steps:
//! a loss-rate gate, a fluctuation gate and asymmetric filtering. A series
//! that fails a gate leaves the sentinel in the radio map and is logged in the
//! provenance list. Online, each AP's values over the last `T` slots are
//! dropped when too many are missing and otherwise filtered with the bounds
//! fitted offline.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::filter::{self, FilterParams, FitGrid, FALLBACK_G};
use crate::fingerprint::{ApRegistry, Bounds, Coord, ReferencePoint, RssiVector, DEFAULT_RSSI_MIN};
use crate::radio_map::RadioMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionThresholds {
    /// Loss-rate threshold: a series whose missing fraction reaches it is dropped.
    pub theta1: f64,
    /// Jitter peak-average ratio threshold.
    pub theta2: f64,
    /// Rejected mass allowed to the asymmetric filter.
    pub epsilon: f64,
    pub rssi_min: f64,
}

impl SelectionThresholds {
    /// Thresholds tuned on the default simulated venue: about 1% of entries
    /// are eliminated.
    pub const TUNED: SelectionThresholds = SelectionThresholds {
        theta1: 0.3,
        theta2: 0.9,
        epsilon: 0.05,
        rssi_min: DEFAULT_RSSI_MIN,
    };
}

impl SelectionThresholds {
    /// `theta1 > 1` disables the loss gate and `theta2 = inf` the fluctuation
    /// gate; both are accepted.
    pub fn validate(&self) -> Result<()> {
        if !(self.theta1 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "theta1 {} must be positive",
                self.theta1
            )));
        }
        if !(self.theta2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "theta2 {} must be positive",
                self.theta2
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon {} not in (0, 1)",
                self.epsilon
            )));
        }
        if !self.rssi_min.is_finite() {
            return Err(Error::InvalidParameter("rssi_min must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSampleSeries {
    pub point_id: usize,
    pub ap_index: usize,
    /// Missing measurements are stored as the sentinel.
    pub samples: Vec<f64>,
}

/// Everything collected during an offline survey of one venue.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub registry: ApRegistry,
    pub bounds: Bounds,
    /// Reference point coordinates; the index is the point id.
    pub points: Vec<Coord>,
    pub samples_per_series: usize,
    pub series: Vec<RawSampleSeries>,
}

impl Campaign {
    /// Series laid out point-major, validated for completeness and a common length.
    fn series_grid(&self) -> Result<Vec<&RawSampleSeries>> {
        let n_aps = self.registry.len();
        let mut grid: Vec<Option<&RawSampleSeries>> = vec![None; self.points.len() * n_aps];
        for s in &self.series {
            if s.point_id < self.points.len() && s.ap_index < n_aps {
                if s.samples.len() != self.samples_per_series || s.samples.is_empty() {
                    return Err(Error::InconsistentSeries {
                        point: s.point_id,
                        ap: s.ap_index,
                        expected: self.samples_per_series,
                        actual: s.samples.len(),
                    });
                }
                grid[s.point_id * n_aps + s.ap_index] = Some(s);
            }
        }
        grid.into_iter()
            .enumerate()
            .map(|(i, s)| {
                s.ok_or(Error::MissingSeries {
                    point: i / n_aps,
                    ap: i % n_aps,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    Loss,
    Fluctuation,
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gate::Loss => "loss",
            Gate::Fluctuation => "fluctuation",
        })
    }
}

impl std::str::FromStr for Gate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loss" => Ok(Gate::Loss),
            "fluctuation" => Ok(Gate::Fluctuation),
            other => Err(Error::InvalidParameter(format!("unknown gate {other:?}"))),
        }
    }
}

/// One (point, AP) entry replaced by the sentinel, and why.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elimination {
    pub point: usize,
    pub ap: usize,
    pub gate: Gate,
    /// Loss rate, or jitter over 1-norm for the fluctuation gate.
    pub statistic: f64,
    pub threshold: f64,
}

/// How surviving series are reduced to a fingerprint value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OfflineFilter {
    /// Fit asymmetric bounds per series.
    Fit(FitGrid),
    /// Use the same multipliers everywhere.
    Fixed { g_inf: f64, g_sup: f64 },
    /// Plain mean of the received samples. No bounds are recorded, so online
    /// filtering has nothing to work with.
    Unfiltered,
}

impl Default for OfflineFilter {
    fn default() -> Self {
        OfflineFilter::Fit(FitGrid::default())
    }
}

/// Fraction of entries exactly equal to the sentinel.
pub fn loss_rate(series: &[f64], rssi_min: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySamples);
    }
    let missing = series.iter().filter(|&&v| v == rssi_min).count();
    Ok(missing as f64 / series.len() as f64)
}

/// Jitter `sqrt(sum_i (S' r_i - sum_j r_j)^2)` and magnitude `||r||_1` of a
/// received (sentinel-free) series of length `S'`. For all-negative dBm
/// series `sum_j r_j = -||r||_1`.
pub fn fluctuation_terms(received: &[f64]) -> (f64, f64) {
    let len = received.len() as f64;
    let sum: f64 = received.iter().sum();
    let l1: f64 = received.iter().map(|r| r.abs()).sum();
    let jitter = received
        .iter()
        .map(|r| {
            let d = len * r - sum;
            d * d
        })
        .sum::<f64>()
        .sqrt();
    (jitter, l1)
}

/// Whether the jitter of a received series reaches `theta2` times its 1-norm.
/// A series with no jitter never counts as excessive.
pub fn fluctuation_excessive(received: &[f64], theta2: f64) -> bool {
    let (jitter, l1) = fluctuation_terms(received);
    jitter > 0.0 && jitter >= theta2 * l1
}

/// Builds the radio map from a survey campaign.
pub fn offline_select(
    campaign: &Campaign,
    thresholds: &SelectionThresholds,
    filter_mode: OfflineFilter,
) -> Result<RadioMap> {
    thresholds.validate()?;
    if let OfflineFilter::Fit(grid) = filter_mode {
        grid.validate()?;
    }
    let n_aps = campaign.registry.len();
    let grid = campaign.series_grid()?;

    let mut values = vec![thresholds.rssi_min; grid.len()];
    let mut raw_means = vec![thresholds.rssi_min; grid.len()];
    let mut params: Vec<Option<FilterParams>> = vec![None; grid.len()];
    let mut provenance = Vec::new();

    for (slot, series) in grid.iter().enumerate() {
        let (m, n) = (slot / n_aps, slot % n_aps);
        raw_means[slot] = received_mean(&series.samples, thresholds.rssi_min);
        let outcome = select_series(&series.samples, thresholds, filter_mode).map_err(|e| Error::Fit {
            point: m,
            ap: n,
            source: Box::new(e),
        })?;
        match outcome {
            SeriesOutcome::Kept { value, params: p } => {
                values[slot] = value;
                params[slot] = p;
            }
            SeriesOutcome::Eliminated {
                gate,
                statistic,
                threshold,
            } => provenance.push(Elimination {
                point: m,
                ap: n,
                gate,
                statistic,
                threshold,
            }),
        }
    }

    let points = campaign
        .points
        .iter()
        .enumerate()
        .map(|(m, &coord)| {
            let fingerprint = campaign.registry.vector(values[m * n_aps..(m + 1) * n_aps].to_vec())?;
            Ok(ReferencePoint {
                id: m,
                coord,
                fingerprint,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let unprocessed = raw_means
        .chunks(n_aps.max(1))
        .take(campaign.points.len())
        .map(|row| campaign.registry.vector(row.to_vec()))
        .collect::<Result<Vec<_>>>()?;

    RadioMap::new(
        campaign.registry.clone(),
        campaign.bounds,
        points,
        params,
        provenance,
        campaign.samples_per_series,
        *thresholds,
    )?
    .with_unprocessed(unprocessed)
}

/// Plain mean of the non-sentinel samples, or the sentinel if there are none.
pub fn received_mean(samples: &[f64], rssi_min: f64) -> f64 {
    let (sum, count) = samples
        .iter()
        .filter(|&&x| x != rssi_min)
        .fold((0.0, 0usize), |(s, c), &x| (s + x, c + 1));
    if count == 0 {
        rssi_min
    } else {
        sum / count as f64
    }
}

enum SeriesOutcome {
    Kept { value: f64, params: Option<FilterParams> },
    Eliminated { gate: Gate, statistic: f64, threshold: f64 },
}

fn select_series(samples: &[f64], t: &SelectionThresholds, mode: OfflineFilter) -> Result<SeriesOutcome> {
    let loss = loss_rate(samples, t.rssi_min)?;
    let received: Vec<f64> = samples.iter().copied().filter(|&v| v != t.rssi_min).collect();
    if loss >= t.theta1 || received.is_empty() {
        return Ok(SeriesOutcome::Eliminated {
            gate: Gate::Loss,
            statistic: loss,
            threshold: t.theta1,
        });
    }
    let (jitter, l1) = fluctuation_terms(&received);
    if jitter > 0.0 && jitter >= t.theta2 * l1 {
        return Ok(SeriesOutcome::Eliminated {
            gate: Gate::Fluctuation,
            statistic: jitter / l1,
            threshold: t.theta2,
        });
    }
    let params = match mode {
        OfflineFilter::Unfiltered => {
            return Ok(SeriesOutcome::Kept {
                value: received_mean(&received, t.rssi_min),
                params: None,
            })
        }
        OfflineFilter::Fit(grid) => match filter::fit_asymmetric_bounds(&received, t.epsilon, grid) {
            Ok(p) => p,
            Err(Error::TooFewSamples { .. }) => {
                let stats = filter::empirical_stats(&received)?;
                FilterParams::with_bounds(stats, FALLBACK_G, FALLBACK_G, t.epsilon)
            }
            Err(e) => return Err(e),
        },
        OfflineFilter::Fixed { g_inf, g_sup } => {
            FilterParams::with_bounds(filter::empirical_stats(&received)?, g_inf, g_sup, t.epsilon)
        }
    };
    Ok(SeriesOutcome::Kept {
        value: filter::filtered_mean(&received, &params),
        params: Some(params),
    })
}

/// Ring buffer of the most recent query slots, oldest first.
///
/// Alongside the slots it keeps every AP's values in ascending order, so
/// order statistics of a column cost no sorting at query time.
#[derive(Debug, Clone)]
pub struct OnlineWindow {
    capacity: usize,
    slots: VecDeque<(f64, RssiVector)>,
    sorted: Vec<Vec<f64>>,
}

impl OnlineWindow {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParameter("window capacity must be at least 1".into()));
        }
        Ok(Self {
            capacity,
            slots: VecDeque::with_capacity(capacity),
            sorted: Vec::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Appends a slot, evicting the oldest when full. Every slot must share
    /// the registry of the first and carry a later timestamp.
    pub fn push(&mut self, timestamp: f64, slot: RssiVector) -> Result<()> {
        if let Some((last, prev)) = self.slots.back() {
            if !(timestamp > *last) {
                return Err(Error::NonIncreasingTimestamp {
                    last: *last,
                    got: timestamp,
                });
            }
            if prev.registry() != slot.registry() {
                return Err(Error::RegistryMismatch);
            }
        } else {
            self.sorted = vec![Vec::with_capacity(self.capacity); slot.len()];
        }
        if self.slots.len() == self.capacity {
            if let Some((_, old)) = self.slots.pop_front() {
                for (column, x) in self.sorted.iter_mut().zip(old.values()) {
                    let at = column.partition_point(|v| v.total_cmp(x).is_lt());
                    column.remove(at);
                }
            }
        }
        for (column, x) in self.sorted.iter_mut().zip(slot.values()) {
            let at = column.partition_point(|v| v.total_cmp(x).is_le());
            column.insert(at, *x);
        }
        self.slots.push_back((timestamp, slot));
        Ok(())
    }

    /// Values of AP `n` over the window in ascending order.
    pub fn sorted_column(&self, n: usize) -> &[f64] {
        self.sorted.get(n).map_or(&[], Vec::as_slice)
    }

    pub fn slots(&self) -> std::collections::vec_deque::Iter<'_, (f64, RssiVector)> {
        self.slots.iter()
    }

    pub fn latest(&self) -> Option<&RssiVector> {
        self.slots.back().map(|(_, v)| v)
    }

    pub fn clear(&mut self) {
        self.slots.clear();
        self.sorted.clear();
    }

    /// Per-AP mean of received values over the window, sentinel where none.
    pub fn received_mean(&self, rssi_min: f64) -> Result<Vec<f64>> {
        let first = self.latest().ok_or(Error::EmptyWindow)?;
        let mut sums = vec![0.0; first.len()];
        let mut counts = vec![0usize; first.len()];
        for (_, v) in &self.slots {
            for (n, &x) in v.values().iter().enumerate() {
                if x != rssi_min {
                    sums[n] += x;
                    counts[n] += 1;
                }
            }
        }
        Ok(sums
            .into_iter()
            .zip(counts)
            .map(|(s, c)| if c == 0 { rssi_min } else { s / c as f64 })
            .collect())
    }
}

/// Result of [`online_select`].
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineSelection {
    pub query: RssiVector,
    /// APs dropped by the loss gate.
    pub abandoned: usize,
    /// Kept APs that had no offline bounds and were averaged unfiltered.
    pub missing_params: usize,
}

/// Median of a non-empty ascending slice.
fn median_of_sorted(asc: &[f64]) -> f64 {
    let mid = asc.len() / 2;
    if asc.len() % 2 == 1 {
        asc[mid]
    } else {
        0.5 * (asc[mid - 1] + asc[mid])
    }
}

/// Reduces the window to one processed query vector.
///
/// For each AP, if the missing fraction over the window reaches `theta1` the
/// output is the sentinel. Otherwise the received values are filtered with
/// the bounds returned by `params_for(ap)` (when `filtering` is on) and
/// averaged over the retained count.
pub fn online_select<'p, F>(
    window: &OnlineWindow,
    registry: &ApRegistry,
    theta1: f64,
    rssi_min: f64,
    filtering: bool,
    params_for: F,
) -> Result<OnlineSelection>
where
    F: Fn(usize) -> Option<&'p FilterParams>,
{
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let total = window.len();
    let mut out = Vec::with_capacity(registry.len());
    let mut abandoned = 0;
    let mut missing_params = 0;
    // reused across APs: received values of one AP, ascending
    let mut received = Vec::with_capacity(total);

    for n in 0..registry.len() {
        received.clear();
        received.extend(window.sorted_column(n).iter().filter(|&&x| x != rssi_min));
        let missing = total - received.len();
        if received.is_empty() || missing as f64 / total as f64 >= theta1 {
            abandoned += 1;
            out.push(rssi_min);
            continue;
        }
        let mean = received.iter().sum::<f64>() / received.len() as f64;
        let params = if filtering { params_for(n) } else { None };
        if filtering && params.is_none() {
            missing_params += 1;
        }
        let value = match params {
            Some(p) => {
                // Centre on the window median so a single deep fade cannot drag
                // the interval away from the bulk of the window.
                let bounds = p.recentered(median_of_sorted(&received));
                let lo = received.partition_point(|&x| x < bounds.lower());
                let hi = received.partition_point(|&x| x <= bounds.upper());
                if lo >= hi {
                    mean
                } else {
                    received[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
                }
            }
            None => mean,
        };
        out.push(value);
    }

    Ok(OnlineSelection {
        query: registry.vector(out)?,
        abandoned,
        missing_params,
    })
}
