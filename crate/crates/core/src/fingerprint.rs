//! Fingerprint vectors and the WKNN/KNN estimation math.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Sentinel substituted for an AP that was not heard.
pub const DEFAULT_RSSI_MIN: f64 = -100.0;

/// 48-bit MAC address, rendered as lowercase colon-separated hex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MacAddr(pub [u8; 6]);

impl FromStr for MacAddr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split([':', '-']).collect();
        if parts.len() != 6 {
            return Err(Error::InvalidMac(s.to_string()));
        }
        let mut bytes = [0u8; 6];
        for (b, p) in bytes.iter_mut().zip(&parts) {
            if p.len() != 2 {
                return Err(Error::InvalidMac(s.to_string()));
            }
            *b = u8::from_str_radix(p, 16).map_err(|_| Error::InvalidMac(s.to_string()))?;
        }
        Ok(MacAddr(bytes))
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

/// Content-derived identity of an [`ApRegistry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegistryId(u64);

/// Sealed, ordered set of APs. Index `n` is the position of AP `n` in every
/// [`RssiVector`] bound to this registry.
#[derive(Debug, Clone)]
pub struct ApRegistry {
    macs: Vec<MacAddr>,
    index: HashMap<MacAddr, usize>,
    id: RegistryId,
}

impl ApRegistry {
    pub fn new(macs: Vec<MacAddr>) -> Result<Self> {
        let mut index = HashMap::with_capacity(macs.len());
        // FNV-1a over the ordered MAC bytes
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for (i, mac) in macs.iter().enumerate() {
            if index.insert(*mac, i).is_some() {
                return Err(Error::DuplicateMac(mac.to_string()));
            }
            for b in mac.0 {
                hash ^= u64::from(b);
                hash = hash.wrapping_mul(0x0100_0000_01b3);
            }
        }
        hash ^= macs.len() as u64;
        Ok(Self {
            macs,
            index,
            id: RegistryId(hash),
        })
    }

    pub fn id(&self) -> RegistryId {
        self.id
    }

    pub fn len(&self) -> usize {
        self.macs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.macs.is_empty()
    }

    pub fn macs(&self) -> &[MacAddr] {
        &self.macs
    }

    pub fn index_of(&self, mac: &MacAddr) -> Option<usize> {
        self.index.get(mac).copied()
    }

    /// Binds raw per-AP values to this registry.
    pub fn vector(&self, values: Vec<f64>) -> Result<RssiVector> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteRssi(i));
        }
        Ok(RssiVector {
            registry: self.id,
            values,
        })
    }
}

impl PartialEq for ApRegistry {
    fn eq(&self, other: &Self) -> bool {
        self.macs == other.macs
    }
}

/// One time slot of per-AP signal strengths (dBm) in registry order.
#[derive(Debug, Clone, PartialEq)]
pub struct RssiVector {
    registry: RegistryId,
    values: Vec<f64>,
}

impl RssiVector {
    pub fn registry(&self) -> RegistryId {
        self.registry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Coord {
    pub x: f64,
    pub y: f64,
}

impl Coord {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Coord) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub(crate) fn distance_sq(&self, other: &Coord) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Axis-aligned venue rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Coord,
    pub max: Coord,
}

impl Bounds {
    pub fn new(min: Coord, max: Coord) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, c: &Coord) -> bool {
        c.x >= self.min.x && c.x <= self.max.x && c.y >= self.min.y && c.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePoint {
    pub id: usize,
    pub coord: Coord,
    pub fingerprint: RssiVector,
}

/// Output of one positioning call.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionEstimate {
    pub coord: Coord,
    pub neighbor_ids: Vec<usize>,
    /// Weights aligned with `neighbor_ids`; reference points not listed had weight 0.
    pub weights: Vec<f64>,
    /// Wall-clock duration of the locate call in microseconds.
    pub elapsed_us: f64,
}

/// Euclidean distance between two fingerprints in dB.
pub fn euclidean_distance(fingerprint: &RssiVector, query: &RssiVector) -> Result<f64> {
    if fingerprint.registry != query.registry {
        return Err(Error::RegistryMismatch);
    }
    if fingerprint.len() != query.len() {
        return Err(Error::LengthMismatch {
            expected: fingerprint.len(),
            actual: query.len(),
        });
    }
    let sum: f64 = fingerprint
        .values
        .iter()
        .zip(&query.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum.sqrt())
}

/// Picks the `k` smallest distances, ties going to the smaller id. `k` larger
/// than the candidate count selects everything.
fn select_nearest(distances: &[(usize, f64)], k: usize) -> Result<Vec<(usize, f64)>> {
    if distances.is_empty() {
        return Err(Error::NoCandidates);
    }
    if k == 0 {
        return Err(Error::ZeroK);
    }
    if distances.iter().any(|(_, d)| d.is_nan() || *d < 0.0) {
        return Err(Error::NoUsableAps);
    }
    let mut sorted = distances.to_vec();
    let by_distance = |a: &(usize, f64), b: &(usize, f64)| -> Ordering { a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)) };
    let k = k.min(sorted.len());
    if k < sorted.len() {
        sorted.select_nth_unstable_by(k - 1, by_distance);
        sorted.truncate(k);
    }
    sorted.sort_unstable_by(by_distance);
    Ok(sorted)
}

/// Inverse-squared-distance weights over the `k` nearest candidates.
///
/// Returns only the selected candidates, nearest first. A candidate at
/// distance exactly zero takes all of the weight (shared equally when several
/// are at zero).
pub fn wknn_weights(distances: &[(usize, f64)], k: usize) -> Result<Vec<(usize, f64)>> {
    let selected = select_nearest(distances, k)?;
    let inverse: Vec<f64> = selected.iter().map(|(_, d)| 1.0 / (d * d)).collect();

    let exact = inverse.iter().filter(|w| w.is_infinite()).count();
    if exact > 0 {
        let share = 1.0 / exact as f64;
        return Ok(selected
            .iter()
            .zip(&inverse)
            .map(|((id, _), w)| (*id, if w.is_infinite() { share } else { 0.0 }))
            .collect());
    }

    let total: f64 = inverse.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::NoUsableAps);
    }
    Ok(selected
        .iter()
        .zip(&inverse)
        .map(|((id, _), w)| (*id, w / total))
        .collect())
}

/// Equal weights `1/k` over the `k` nearest candidates.
pub fn knn_weights(distances: &[(usize, f64)], k: usize) -> Result<Vec<(usize, f64)>> {
    let selected = select_nearest(distances, k)?;
    if selected.iter().all(|(_, d)| d.is_infinite()) {
        return Err(Error::NoUsableAps);
    }
    let w = 1.0 / selected.len() as f64;
    Ok(selected.into_iter().map(|(id, _)| (id, w)).collect())
}

/// Weighted sum of reference-point coordinates.
pub fn weighted_centroid(weights: &[(usize, f64)], points: &[ReferencePoint]) -> Result<Coord> {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::WeightsNotNormalized(total));
    }
    let mut c = Coord::default();
    for &(id, w) in weights {
        let p = lookup(points, id).ok_or(Error::UnknownReferencePoint(id))?;
        c.x += w * p.coord.x;
        c.y += w * p.coord.y;
    }
    Ok(c)
}

fn lookup(points: &[ReferencePoint], id: usize) -> Option<&ReferencePoint> {
    match points.get(id) {
        Some(p) if p.id == id => Some(p),
        _ => points.iter().find(|p| p.id == id),
    }
}

pub(crate) fn all_distances(query: &RssiVector, points: &[ReferencePoint]) -> Result<Vec<(usize, f64)>> {
    points
        .iter()
        .map(|p| euclidean_distance(&p.fingerprint, query).map(|d| (p.id, d)))
        .collect()
}

pub(crate) fn estimate_from(weights: Vec<(usize, f64)>, points: &[ReferencePoint]) -> Result<PositionEstimate> {
    let coord = weighted_centroid(&weights, points)?;
    let (neighbor_ids, weights) = weights.into_iter().unzip();
    Ok(PositionEstimate {
        coord,
        neighbor_ids,
        weights,
        elapsed_us: 0.0,
    })
}

/// Unweighted mean of the `k` nearest reference points (regression-form KNN).
pub fn knn_estimate(query: &RssiVector, points: &[ReferencePoint], k: usize) -> Result<PositionEstimate> {
    let start = std::time::Instant::now();
    let distances = all_distances(query, points)?;
    let mut est = estimate_from(knn_weights(&distances, k)?, points)?;
    est.elapsed_us = start.elapsed().as_secs_f64() * 1e6;
    Ok(est)
}

/// Full-scan WKNN: inverse-squared-distance centroid of the `k` nearest points.
pub fn wknn_estimate(query: &RssiVector, points: &[ReferencePoint], k: usize) -> Result<PositionEstimate> {
    let start = std::time::Instant::now();
    let distances = all_distances(query, points)?;
    let mut est = estimate_from(wknn_weights(&distances, k)?, points)?;
    est.elapsed_us = start.elapsed().as_secs_f64() * 1e6;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry(n: usize) -> ApRegistry {
        ApRegistry::new((0..n).map(|i| MacAddr([2, 0, 0, 0, 0, i as u8])).collect()).unwrap()
    }

    fn point(id: usize, x: f64, y: f64, reg: &ApRegistry) -> ReferencePoint {
        ReferencePoint {
            id,
            coord: Coord::new(x, y),
            fingerprint: reg.vector(vec![-60.0; reg.len()]).unwrap(),
        }
    }

    #[test]
    fn mac_parse_and_display() {
        let mac: MacAddr = "AA:bb:0C:dd:ee:0F".parse().unwrap();
        assert_eq!(mac.to_string(), "aa:bb:0c:dd:ee:0f");
        assert!("aa:bb:cc".parse::<MacAddr>().is_err());
        assert!("aa:bb:cc:dd:ee:zz".parse::<MacAddr>().is_err());
    }

    #[test]
    fn registry_rejects_duplicates() {
        let m = MacAddr([1; 6]);
        assert_eq!(
            ApRegistry::new(vec![m, m]).unwrap_err(),
            Error::DuplicateMac(m.to_string())
        );
    }

    #[test]
    fn distance_identity_and_345() {
        let reg = registry(2);
        let a = reg.vector(vec![-50.0, -60.0]).unwrap();
        let b = reg.vector(vec![-53.0, -56.0]).unwrap();
        assert_eq!(euclidean_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(euclidean_distance(&a, &b).unwrap(), 5.0);
    }

    #[test]
    fn distance_matches_scalar_loop() {
        use rand::{Rng, SeedableRng};
        let reg = registry(10);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let a: Vec<f64> = (0..10).map(|_| rng.random_range(-100.0..0.0)).collect();
            let b: Vec<f64> = (0..10).map(|_| rng.random_range(-100.0..0.0)).collect();
            let mut acc = 0.0;
            for i in 0..10 {
                let d = a[i] - b[i];
                acc += d * d;
            }
            let expected = acc.sqrt();
            let got = euclidean_distance(&reg.vector(a).unwrap(), &reg.vector(b).unwrap()).unwrap();
            assert!((got - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn distance_rejects_other_registry() {
        let a = registry(2).vector(vec![0.0, 0.0]).unwrap();
        let other = ApRegistry::new(vec![MacAddr([9; 6]), MacAddr([8; 6])]).unwrap();
        let b = other.vector(vec![0.0, 0.0]).unwrap();
        assert_eq!(euclidean_distance(&a, &b), Err(Error::RegistryMismatch));
    }

    #[test]
    fn weights_equal_distance() {
        let w = wknn_weights(&[(0, 3.0), (1, 3.0)], 2).unwrap();
        assert_eq!(w, vec![(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn weights_zero_distance_absorbs() {
        let w = wknn_weights(&[(0, 2.0), (1, 0.0), (2, 5.0)], 3).unwrap();
        assert_eq!(w, vec![(1, 1.0), (0, 0.0), (2, 0.0)]);
        let w = wknn_weights(&[(4, 0.0), (1, 0.0), (2, 5.0)], 3).unwrap();
        assert_eq!(w, vec![(1, 0.5), (4, 0.5), (2, 0.0)]);
    }

    #[test]
    fn weights_one_two_four() {
        let w = wknn_weights(&[(0, 1.0), (1, 2.0), (2, 4.0)], 3).unwrap();
        // 1/1 : 1/4 : 1/16 normalised by 21/16
        let expected = [16.0 / 21.0, 4.0 / 21.0, 1.0 / 21.0];
        for ((_, got), e) in w.iter().zip(expected) {
            assert!((got - e).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_tie_break_and_oversized_k() {
        let w = wknn_weights(&[(5, 1.0), (2, 1.0), (9, 1.0)], 2).unwrap();
        assert_eq!(w.iter().map(|p| p.0).collect::<Vec<_>>(), vec![2, 5]);
        let w = wknn_weights(&[(5, 1.0), (2, 2.0)], 10).unwrap();
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn weights_errors() {
        assert_eq!(wknn_weights(&[], 3), Err(Error::NoCandidates));
        assert_eq!(wknn_weights(&[(0, 1.0)], 0), Err(Error::ZeroK));
        assert_eq!(wknn_weights(&[(0, f64::NAN)], 1), Err(Error::NoUsableAps));
        assert_eq!(wknn_weights(&[(0, f64::INFINITY)], 1), Err(Error::NoUsableAps));
    }

    #[test]
    fn centroid_examples() {
        let reg = registry(1);
        let pts = vec![
            point(0, 0.0, 0.0, &reg),
            point(1, 1.0, 0.0, &reg),
            point(2, 0.0, 1.0, &reg),
            point(3, 3.0, 7.0, &reg),
        ];
        assert_eq!(weighted_centroid(&[(3, 1.0)], &pts).unwrap(), Coord::new(3.0, 7.0));

        let two = vec![point(0, 0.0, 0.0, &reg), point(1, 2.0, 4.0, &reg)];
        assert_eq!(
            weighted_centroid(&[(0, 0.5), (1, 0.5)], &two).unwrap(),
            Coord::new(1.0, 2.0)
        );

        let c = weighted_centroid(&[(0, 16.0 / 21.0), (1, 4.0 / 21.0), (2, 1.0 / 21.0)], &pts).unwrap();
        assert!((c.x - 4.0 / 21.0).abs() < 1e-12 && (c.y - 1.0 / 21.0).abs() < 1e-12);

        assert_eq!(
            weighted_centroid(&[(42, 1.0)], &pts),
            Err(Error::UnknownReferencePoint(42))
        );
        assert!(matches!(
            weighted_centroid(&[(0, 0.7)], &pts),
            Err(Error::WeightsNotNormalized(_))
        ));
    }
}
