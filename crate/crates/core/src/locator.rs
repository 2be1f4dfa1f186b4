//! Online positioning sessions.
//!
//! A [`Locator`] tracks one user. Each call to [`Locator::locate`] pushes the
//! raw slot into the online window, reduces the window to a processed query
//! with the offline filter bounds, restricts matching to reference points near
//! the previous estimate and runs WKNN over that candidate set.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::fingerprint::{self, euclidean_distance, wknn_weights, PositionEstimate, RssiVector};
use crate::radio_map::RadioMap;
use crate::selection::{online_select, OnlineWindow};

/// Minimum candidate count before the search radius stops growing.
pub const MIN_CANDIDATES: usize = 8;
/// Radius growth factor when too few candidates qualify.
pub const RADIUS_GROWTH: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    IWknn,
    Wknn,
    Knn,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::IWknn, Algorithm::Wknn, Algorithm::Knn];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::IWknn => "iwknn",
            Algorithm::Wknn => "wknn",
            Algorithm::Knn => "knn",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iwknn" | "i-wknn" => Ok(Algorithm::IWknn),
            "wknn" => Ok(Algorithm::Wknn),
            "knn" => Ok(Algorithm::Knn),
            other => Err(Error::InvalidParameter(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Full-scan comparison methods: no window, filtering or candidate restriction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Wknn,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocatorConfig {
    pub k: usize,
    /// Window length `T` in slots.
    pub window: usize,
    /// Number of past estimates kept. Zero disables candidate restriction.
    pub history: usize,
    /// Metres; `f64::INFINITY` disables candidate restriction.
    pub candidate_radius: f64,
    /// Online loss-rate threshold; values above 1 disable the gate.
    pub theta1: f64,
    /// Filter window values with the offline bounds.
    pub filtering: bool,
}

impl LocatorConfig {
    pub const DEFAULT_HISTORY: usize = 3;

    pub fn new(k: usize, window: usize, theta1: f64, candidate_radius: f64) -> Self {
        Self {
            k,
            window,
            history: Self::DEFAULT_HISTORY,
            candidate_radius,
            theta1,
            filtering: true,
        }
    }

    /// Twice the distance covered in one slot at `max_speed`, plus the grid pitch.
    pub fn default_radius(max_speed: f64, slot_interval: f64, grid_pitch: f64) -> f64 {
        2.0 * max_speed * slot_interval + grid_pitch
    }

    /// Everything beyond WKNN switched off; `locate` then matches the WKNN baseline.
    pub fn degenerate(k: usize) -> Self {
        Self {
            k,
            window: 1,
            history: 0,
            candidate_radius: f64::INFINITY,
            theta1: f64::INFINITY,
            filtering: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::ZeroK);
        }
        if self.window == 0 {
            return Err(Error::InvalidParameter("window must be at least 1 slot".into()));
        }
        if !(self.candidate_radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "candidate radius {} must be positive",
                self.candidate_radius
            )));
        }
        if !(self.theta1 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "theta1 {} must be positive",
                self.theta1
            )));
        }
        Ok(())
    }
}

/// Counters accumulated over a session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub queries: usize,
    pub abandoned_aps: usize,
    pub missing_params: usize,
    pub radius_expansions: usize,
}

/// One tracked user over an immutable radio map.
#[derive(Debug, Clone)]
pub struct Locator<'a> {
    map: &'a RadioMap,
    config: LocatorConfig,
    window: OnlineWindow,
    history: VecDeque<PositionEstimate>,
    diagnostics: Diagnostics,
}

impl<'a> Locator<'a> {
    pub fn new(map: &'a RadioMap, config: LocatorConfig) -> Result<Self> {
        config.validate()?;
        if map.is_empty() {
            return Err(Error::NoCandidates);
        }
        Ok(Self {
            map,
            config,
            window: OnlineWindow::new(config.window)?,
            history: VecDeque::with_capacity(config.history),
            diagnostics: Diagnostics::default(),
        })
    }

    pub fn config(&self) -> &LocatorConfig {
        &self.config
    }

    pub fn map(&self) -> &'a RadioMap {
        self.map
    }

    pub fn history(&self) -> impl Iterator<Item = &PositionEstimate> {
        self.history.iter()
    }

    pub fn window(&self) -> &OnlineWindow {
        &self.window
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    pub fn reset(&mut self) {
        self.window.clear();
        self.history.clear();
        self.diagnostics = Diagnostics::default();
    }

    /// Reference points eligible for matching.
    ///
    /// Cold start (no history) yields every point. Otherwise points within
    /// the candidate radius of the latest estimate; the radius grows by
    /// [`RADIUS_GROWTH`] until at least `max(k, 8)` points qualify.
    pub fn candidate_set(&self) -> Vec<usize> {
        self.candidates().0
    }

    fn candidates(&self) -> (Vec<usize>, usize) {
        let points = self.map.points();
        let center = match self.history.back() {
            Some(est) if self.config.candidate_radius.is_finite() => est.coord,
            _ => return ((0..points.len()).collect(), 0),
        };
        let floor = self.config.k.max(MIN_CANDIDATES).min(points.len());
        let mut radius = self.config.candidate_radius;
        let mut expansions = 0;
        loop {
            let r2 = radius * radius;
            let ids: Vec<usize> = points
                .iter()
                .filter(|p| p.coord.distance_sq(&center) <= r2)
                .map(|p| p.id)
                .collect();
            if ids.len() >= floor {
                return (ids, expansions);
            }
            radius *= RADIUS_GROWTH;
            expansions += 1;
        }
    }

    /// Reference point whose offline bounds filter the current window: the
    /// point nearest the previous estimate, or on a cold start the point whose
    /// fingerprint is nearest the window's raw mean.
    fn anchor_point(&self) -> Result<usize> {
        if let Some(last) = self.history.back() {
            return self.map.nearest_point(&last.coord).ok_or(Error::NoCandidates);
        }
        let rssi_min = self.map.rssi_min();
        let mean = self.map.registry().vector(self.window.received_mean(rssi_min)?)?;
        let mut best: Option<(usize, f64)> = None;
        for p in self.map.points() {
            let d = euclidean_distance(&p.fingerprint, &mean)?;
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((p.id, d));
            }
        }
        best.map(|(id, _)| id).ok_or(Error::NoCandidates)
    }

    /// Runs the full online pipeline on one raw slot.
    pub fn locate(&mut self, raw_slot: RssiVector, timestamp: f64) -> Result<PositionEstimate> {
        let start = Instant::now();
        if raw_slot.registry() != self.map.registry().id() {
            return Err(Error::RegistryMismatch);
        }
        self.window.push(timestamp, raw_slot)?;

        let map = self.map;
        let anchor = if self.config.filtering {
            Some(self.anchor_point()?)
        } else {
            None
        };
        let selection = online_select(
            &self.window,
            map.registry(),
            self.config.theta1,
            map.rssi_min(),
            self.config.filtering,
            |n| anchor.and_then(|m| map.params(m, n)),
        )?;

        let (candidates, expansions) = self.candidates();
        let points = map.points();
        let distances = candidates
            .iter()
            .map(|&id| euclidean_distance(&points[id].fingerprint, &selection.query).map(|d| (id, d)))
            .collect::<Result<Vec<_>>>()?;
        let weights = wknn_weights(&distances, self.config.k)?;
        let mut estimate = fingerprint::estimate_from(weights, points)?;

        self.diagnostics.queries += 1;
        self.diagnostics.abandoned_aps += selection.abandoned;
        self.diagnostics.missing_params += selection.missing_params;
        self.diagnostics.radius_expansions += expansions;
        if self.config.history > 0 {
            if self.history.len() == self.config.history {
                self.history.pop_front();
            }
            self.history.push_back(estimate.clone());
        }
        estimate.elapsed_us = start.elapsed().as_secs_f64() * 1e6;
        Ok(estimate)
    }

    /// Full-map KNN or WKNN of the raw slot alone against the unprocessed
    /// fingerprints. Does not touch the session state.
    pub fn locate_baseline(&self, raw_slot: &RssiVector, baseline: Baseline) -> Result<PositionEstimate> {
        let points = self.map.baseline_points();
        match baseline {
            Baseline::Wknn => fingerprint::wknn_estimate(raw_slot, points, self.config.k),
            Baseline::Knn => fingerprint::knn_estimate(raw_slot, points, self.config.k),
        }
    }

    /// Dispatches on `algorithm`; baselines ignore the session state.
    pub fn locate_with(
        &mut self,
        algorithm: Algorithm,
        raw_slot: RssiVector,
        timestamp: f64,
    ) -> Result<PositionEstimate> {
        match algorithm {
            Algorithm::IWknn => self.locate(raw_slot, timestamp),
            Algorithm::Wknn => self.locate_baseline(&raw_slot, Baseline::Wknn),
            Algorithm::Knn => self.locate_baseline(&raw_slot, Baseline::Knn),
        }
    }
}
