//! The fingerprint database built offline.

use crate::error::{Error, Result};
use crate::filter::FilterParams;
use crate::fingerprint::{ApRegistry, Bounds, Coord, ReferencePoint, RssiVector};
use crate::selection::{Elimination, SelectionThresholds};

/// Reference points with filtered fingerprints, the per-(point, AP) filter
/// bounds fitted offline, and the log of entries eliminated by a gate.
///
/// A map built from a survey also keeps the unprocessed fingerprints (plain
/// mean of the received samples per entry) that the baselines match against.
///
/// Read-only once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap {
    registry: ApRegistry,
    bounds: Bounds,
    points: Vec<ReferencePoint>,
    unprocessed: Option<Vec<ReferencePoint>>,
    params: Vec<Option<FilterParams>>,
    provenance: Vec<Elimination>,
    samples_per_series: usize,
    thresholds: SelectionThresholds,
}

impl RadioMap {
    /// `params` is point-major: entry `m * N + n`.
    pub fn new(
        registry: ApRegistry,
        bounds: Bounds,
        points: Vec<ReferencePoint>,
        params: Vec<Option<FilterParams>>,
        provenance: Vec<Elimination>,
        samples_per_series: usize,
        thresholds: SelectionThresholds,
    ) -> Result<Self> {
        let n = registry.len();
        for (position, p) in points.iter().enumerate() {
            if p.id != position {
                return Err(Error::NonContiguousIds { position, found: p.id });
            }
            if !bounds.contains(&p.coord) {
                return Err(Error::OutOfBounds {
                    id: p.id,
                    x: p.coord.x,
                    y: p.coord.y,
                });
            }
            if p.fingerprint.registry() != registry.id() {
                return Err(Error::RegistryMismatch);
            }
        }
        if params.len() != points.len() * n {
            return Err(Error::LengthMismatch {
                expected: points.len() * n,
                actual: params.len(),
            });
        }
        Ok(Self {
            registry,
            bounds,
            points,
            unprocessed: None,
            params,
            provenance,
            samples_per_series,
            thresholds,
        })
    }

    /// Attaches unprocessed fingerprints, one per reference point in id order.
    pub fn with_unprocessed(mut self, fingerprints: Vec<RssiVector>) -> Result<Self> {
        if fingerprints.len() != self.points.len() {
            return Err(Error::LengthMismatch {
                expected: self.points.len(),
                actual: fingerprints.len(),
            });
        }
        let mut raw = Vec::with_capacity(fingerprints.len());
        for (p, fingerprint) in self.points.iter().zip(fingerprints) {
            if fingerprint.registry() != self.registry.id() {
                return Err(Error::RegistryMismatch);
            }
            raw.push(ReferencePoint {
                id: p.id,
                coord: p.coord,
                fingerprint,
            });
        }
        self.unprocessed = Some(raw);
        Ok(self)
    }

    /// Unprocessed fingerprints, if the map carries them.
    pub fn unprocessed_points(&self) -> Option<&[ReferencePoint]> {
        self.unprocessed.as_deref()
    }

    /// Fingerprints for the baselines: unprocessed when available, else the
    /// processed ones.
    pub fn baseline_points(&self) -> &[ReferencePoint] {
        self.unprocessed.as_deref().unwrap_or(&self.points)
    }

    pub fn registry(&self) -> &ApRegistry {
        &self.registry
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn points(&self) -> &[ReferencePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_aps(&self) -> usize {
        self.registry.len()
    }

    pub fn rssi_min(&self) -> f64 {
        self.thresholds.rssi_min
    }

    pub fn thresholds(&self) -> &SelectionThresholds {
        &self.thresholds
    }

    pub fn samples_per_series(&self) -> usize {
        self.samples_per_series
    }

    pub fn params(&self, point: usize, ap: usize) -> Option<&FilterParams> {
        if ap >= self.n_aps() {
            return None;
        }
        self.params.get(point * self.n_aps() + ap)?.as_ref()
    }

    pub fn all_params(&self) -> &[Option<FilterParams>] {
        &self.params
    }

    pub fn provenance(&self) -> &[Elimination] {
        &self.provenance
    }

    /// Reference point closest to `c` in the plane (smaller id on ties).
    pub fn nearest_point(&self, c: &Coord) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for p in &self.points {
            let d = p.coord.distance_sq(c);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((p.id, d));
            }
        }
        best.map(|(id, _)| id)
    }

    /// Median nearest-neighbour spacing between reference points; the grid
    /// pitch for a surveyed grid. Zero with fewer than two points.
    pub fn point_spacing(&self) -> f64 {
        if self.points.len() < 2 {
            return 0.0;
        }
        let mut nearest: Vec<f64> = self
            .points
            .iter()
            .map(|a| {
                self.points
                    .iter()
                    .filter(|b| b.id != a.id)
                    .map(|b| a.coord.distance(&b.coord))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        nearest.sort_unstable_by(f64::total_cmp);
        nearest[nearest.len() / 2]
    }
}
