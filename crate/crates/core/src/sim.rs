//! Synthetic venue for offline surveys and online query streams.
//!
//! Mean RSSI follows a log-distance path-loss model. Each sample is then
//! either lost, taken from a deep-fade component, or taken from the nominal
//! Gaussian around the mean, which gives the bimodal, low-tailed sample
//! histograms seen in crowded halls.
//!
//! All randomness derives from one seed. Every (point, AP) series has its own
//! ChaCha stream, so generation order does not matter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fingerprint::{ApRegistry, Bounds, Coord, MacAddr, RssiVector};
use crate::selection::{Campaign, RawSampleSeries};

/// Valid range of emitted measurements.
pub const RSSI_FLOOR: f64 = -100.0;
pub const RSSI_CEIL: f64 = 0.0;
/// Default interval between online slots in seconds (50 Hz scanning).
pub const DEFAULT_SLOT_INTERVAL: f64 = 0.02;
/// Default walking/jogging speed of a tracked user in m/s.
pub const DEFAULT_SPEED: f64 = 3.0;

const TRAJECTORY_STREAM: u64 = 0xffff_0000_0000_0001;
const ONLINE_STREAM: u64 = 0xffff_0000_0000_0002;

#[derive(Debug, Clone, PartialEq)]
pub struct AccessPoint {
    pub mac: MacAddr,
    pub pos: Coord,
    pub tx_power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VenueLayout {
    pub width: f64,
    pub height: f64,
    pub grid_pitch: f64,
    pub aps: Vec<AccessPoint>,
}

impl VenueLayout {
    /// Rectangle with `n_aps` APs spread evenly along the perimeter.
    pub fn with_perimeter_aps(width: f64, height: f64, grid_pitch: f64, n_aps: usize, tx_power_dbm: f64) -> Self {
        let perimeter = 2.0 * (width + height);
        let aps = (0..n_aps)
            .map(|i| {
                let s = perimeter * (i as f64 + 0.5) / n_aps as f64;
                let pos = if s < width {
                    Coord::new(s, 0.0)
                } else if s < width + height {
                    Coord::new(width, s - width)
                } else if s < 2.0 * width + height {
                    Coord::new(2.0 * width + height - s, height)
                } else {
                    Coord::new(0.0, perimeter - s)
                };
                let mac = MacAddr([0x02, 0x1a, 0x11, 0x00, (i >> 8) as u8, i as u8]);
                AccessPoint { mac, pos, tx_power_dbm }
            })
            .collect();
        Self {
            width,
            height,
            grid_pitch,
            aps,
        }
    }

    /// 50 m x 30 m hall, 2.45 m pitch (240 points), 10 perimeter APs.
    pub fn stadium() -> Self {
        Self::with_perimeter_aps(50.0, 30.0, 2.45, 10, -30.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0 && self.grid_pitch > 0.0) {
            return Err(Error::InvalidParameter(
                "venue dimensions and pitch must be positive".into(),
            ));
        }
        if self.aps.is_empty() {
            return Err(Error::InvalidParameter("venue needs at least one AP".into()));
        }
        let b = self.bounds();
        if let Some(ap) = self.aps.iter().find(|ap| !b.contains(&ap.pos)) {
            return Err(Error::InvalidParameter(format!("AP {} lies outside the venue", ap.mac)));
        }
        Ok(())
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::new(Coord::new(0.0, 0.0), Coord::new(self.width, self.height))
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        (
            (self.width / self.grid_pitch).floor() as usize,
            (self.height / self.grid_pitch).floor() as usize,
        )
    }

    /// Cell centres of the reference grid, centred in the venue, row-major
    /// from the origin. Point id is the index.
    pub fn reference_points(&self) -> Vec<Coord> {
        let (nx, ny) = self.grid_dims();
        let x0 = (self.width - nx as f64 * self.grid_pitch) / 2.0 + self.grid_pitch / 2.0;
        let y0 = (self.height - ny as f64 * self.grid_pitch) / 2.0 + self.grid_pitch / 2.0;
        let mut pts = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                pts.push(Coord::new(
                    x0 + i as f64 * self.grid_pitch,
                    y0 + j as f64 * self.grid_pitch,
                ));
            }
        }
        pts
    }

    /// Bounding box of the reference grid.
    pub fn grid_bounds(&self) -> Bounds {
        let pts = self.reference_points();
        let fold = |f: fn(f64, f64) -> f64, init: f64, get: fn(&Coord) -> f64| pts.iter().map(get).fold(init, f);
        Bounds::new(
            Coord::new(
                fold(f64::min, f64::INFINITY, |c| c.x),
                fold(f64::min, f64::INFINITY, |c| c.y),
            ),
            Coord::new(
                fold(f64::max, f64::NEG_INFINITY, |c| c.x),
                fold(f64::max, f64::NEG_INFINITY, |c| c.y),
            ),
        )
    }

    pub fn registry(&self) -> Result<ApRegistry> {
        ApRegistry::new(self.aps.iter().map(|ap| ap.mac).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagation {
    pub exponent: f64,
    /// Reference distance in metres.
    pub d0: f64,
}

impl Default for Propagation {
    fn default() -> Self {
        Self { exponent: 2.4, d0: 1.0 }
    }
}

impl Propagation {
    pub fn validate(&self) -> Result<()> {
        if !(1.5..=4.5).contains(&self.exponent) {
            return Err(Error::InvalidParameter(format!(
                "path-loss exponent {} not in [1.5, 4.5]",
                self.exponent
            )));
        }
        if !(self.d0 > 0.0) {
            return Err(Error::InvalidParameter("reference distance must be positive".into()));
        }
        Ok(())
    }

    pub fn mean_rssi(&self, ap: &AccessPoint, pos: &Coord) -> f64 {
        path_loss_rssi(ap, pos, self.exponent, self.d0)
    }
}

/// Log-distance mean RSSI; distances below `d0` are clamped to `d0`.
pub fn path_loss_rssi(ap: &AccessPoint, pos: &Coord, exponent: f64, d0: f64) -> f64 {
    let d = ap.pos.distance(pos).max(d0);
    ap.tx_power_dbm - 10.0 * exponent * (d / d0).log10()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma_dbm: f64,
    pub p_loss: f64,
    pub p_fade: f64,
    pub fade_depth_dbm: f64,
    pub fade_sigma_dbm: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_dbm: 1.0,
            p_loss: 0.01,
            p_fade: 0.05,
            fade_depth_dbm: 10.0,
            fade_sigma_dbm: 3.0,
        }
    }
}

impl NoiseModel {
    /// No noise at all: every sample equals the path-loss mean.
    pub fn noiseless() -> Self {
        Self {
            sigma_dbm: 0.0,
            p_loss: 0.0,
            p_fade: 0.0,
            fade_depth_dbm: 0.0,
            fade_sigma_dbm: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.p_loss) || !prob(self.p_fade) || self.p_loss + self.p_fade > 1.0 {
            return Err(Error::InvalidParameter(
                "noise probabilities must lie in [0, 1] and sum to at most 1".into(),
            ));
        }
        if !(self.sigma_dbm >= 0.0 && self.fade_depth_dbm >= 0.0 && self.fade_sigma_dbm >= 0.0) {
            return Err(Error::InvalidParameter(
                "noise spreads and fade depth must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One noisy measurement around `mean`, or `None` if the AP was not heard.
/// Measurements are clamped to `[-100, 0]` dBm.
pub fn sample_rssi<R: Rng + ?Sized>(mean: f64, model: &NoiseModel, rng: &mut R) -> Option<f64> {
    let u: f64 = rng.random();
    if u < model.p_loss {
        return None;
    }
    let (centre, spread) = if u < model.p_loss + model.p_fade {
        (mean - model.fade_depth_dbm, model.fade_sigma_dbm)
    } else {
        (mean, model.sigma_dbm)
    };
    let value = if spread > 0.0 {
        // spread is finite and positive, so construction cannot fail
        Normal::new(centre, spread).map(|n| n.sample(rng)).unwrap_or(centre)
    } else {
        centre
    };
    Some(value.clamp(RSSI_FLOOR, RSSI_CEIL))
}

fn encode(value: Option<f64>, rssi_min: f64) -> f64 {
    value.map_or(rssi_min, |v| v.max(rssi_min))
}

fn series_rng(seed: u64, point: usize, ap: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((point as u64) << 20) | ap as u64);
    rng
}

/// Offline survey: `S` samples of every AP at every reference point.
pub fn generate_offline_campaign(
    layout: &VenueLayout,
    propagation: &Propagation,
    noise: &NoiseModel,
    samples: usize,
    rssi_min: f64,
    seed: u64,
) -> Result<Campaign> {
    layout.validate()?;
    propagation.validate()?;
    noise.validate()?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples per series must be at least 1".into()));
    }
    let points = layout.reference_points();
    let mut series = Vec::with_capacity(points.len() * layout.aps.len());
    for (m, pos) in points.iter().enumerate() {
        for (n, ap) in layout.aps.iter().enumerate() {
            let mean = propagation.mean_rssi(ap, pos);
            let mut rng = series_rng(seed, m, n);
            let values = (0..samples)
                .map(|_| encode(sample_rssi(mean, noise, &mut rng), rssi_min))
                .collect();
            series.push(RawSampleSeries {
                point_id: m,
                ap_index: n,
                samples: values,
            });
        }
    }
    Ok(Campaign {
        registry: layout.registry()?,
        bounds: layout.bounds(),
        points,
        samples_per_series: samples,
        series,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub t: f64,
    pub pos: Coord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
    pub speed_mps: f64,
}

impl Trajectory {
    /// Constant-speed random-waypoint walk inside `area`, sampled every
    /// `slot_interval` seconds for `count` slots. A leg ends exactly on its
    /// target, so no step covers more than `speed * slot_interval`.
    pub fn random_waypoints(area: Bounds, speed_mps: f64, slot_interval: f64, count: usize, seed: u64) -> Result<Self> {
        if !(speed_mps >= 0.0) || !(slot_interval > 0.0) {
            return Err(Error::InvalidParameter(
                "speed must be non-negative and slot interval positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(TRAJECTORY_STREAM);
        let draw = |rng: &mut ChaCha8Rng| {
            Coord::new(
                area.min.x + rng.random::<f64>() * area.width(),
                area.min.y + rng.random::<f64>() * area.height(),
            )
        };
        let mut pos = draw(&mut rng);
        let mut target = draw(&mut rng);
        let step = speed_mps * slot_interval;
        let mut waypoints = Vec::with_capacity(count);
        for i in 0..count {
            waypoints.push(Waypoint {
                t: i as f64 * slot_interval,
                pos,
            });
            let remaining = pos.distance(&target);
            if remaining <= step {
                pos = target;
                target = draw(&mut rng);
            } else {
                let f = step / remaining;
                pos = Coord::new(pos.x + (target.x - pos.x) * f, pos.y + (target.y - pos.y) * f);
            }
        }
        Ok(Self { waypoints, speed_mps })
    }
}

/// One online query slot with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSample {
    pub t: f64,
    pub truth: Coord,
    pub rssi: RssiVector,
}

/// One raw query vector per waypoint, missing APs stored as `rssi_min`.
pub fn generate_online_stream(
    layout: &VenueLayout,
    propagation: &Propagation,
    noise: &NoiseModel,
    trajectory: &Trajectory,
    rssi_min: f64,
    seed: u64,
) -> Result<Vec<StreamSample>> {
    layout.validate()?;
    propagation.validate()?;
    noise.validate()?;
    let registry = layout.registry()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ONLINE_STREAM);
    trajectory
        .waypoints
        .iter()
        .map(|w| {
            let values = layout
                .aps
                .iter()
                .map(|ap| {
                    encode(
                        sample_rssi(propagation.mean_rssi(ap, &w.pos), noise, &mut rng),
                        rssi_min,
                    )
                })
                .collect();
            Ok(StreamSample {
                t: w.t,
                truth: w.pos,
                rssi: registry.vector(values)?,
            })
        })
        .collect()
}
