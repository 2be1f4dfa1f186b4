//! `key = value` run configuration.
//!
//! Blank lines and anything after `#` are ignored. Keys are case-sensitive;
//! an unknown key is an error so typos do not silently fall back to defaults.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use iwknn_core::sim::{NoiseModel, Propagation, VenueLayout, DEFAULT_SLOT_INTERVAL, DEFAULT_SPEED};
use iwknn_core::{LocatorConfig, SelectionThresholds, DEFAULT_RSSI_MIN};

/// Every setting a command can take. Thresholds, `k` and `window` have no
/// defaults and must come from a file or a flag.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub width: f64,
    pub height: f64,
    pub grid_pitch: f64,
    pub n_aps: usize,
    pub tx_power: f64,
    pub path_loss_exponent: f64,
    pub reference_distance: f64,
    pub noise: NoiseModel,
    pub samples: usize,
    pub queries: usize,
    pub speed: f64,
    pub slot_interval: f64,
    pub rssi_min: f64,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub k: Option<usize>,
    pub window: Option<usize>,
    pub history: usize,
    pub radius: Option<f64>,
    pub filtering: bool,
    pub warmup: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let venue = VenueLayout::stadium();
        let prop = Propagation::default();
        Self {
            seed: 0,
            width: venue.width,
            height: venue.height,
            grid_pitch: venue.grid_pitch,
            n_aps: venue.aps.len(),
            tx_power: venue.aps[0].tx_power_dbm,
            path_loss_exponent: prop.exponent,
            reference_distance: prop.d0,
            noise: NoiseModel::default(),
            samples: 200,
            queries: 1000,
            speed: DEFAULT_SPEED,
            slot_interval: DEFAULT_SLOT_INTERVAL,
            rssi_min: DEFAULT_RSSI_MIN,
            theta1: None,
            theta2: None,
            epsilon: None,
            k: None,
            window: None,
            history: LocatorConfig::DEFAULT_HISTORY,
            radius: None,
            filtering: true,
            warmup: 50,
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    value.parse().with_context(|| format!("{key}: cannot parse {value:?}"))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => bail!("{key}: expected true or false, got {value:?}"),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key = value", i + 1))?;
            cfg.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = number(key, value)?,
            "width" => self.width = number(key, value)?,
            "height" => self.height = number(key, value)?,
            "grid_pitch" => self.grid_pitch = number(key, value)?,
            "n_aps" => self.n_aps = number(key, value)?,
            "tx_power" => self.tx_power = number(key, value)?,
            "path_loss_exponent" => self.path_loss_exponent = number(key, value)?,
            "reference_distance" => self.reference_distance = number(key, value)?,
            "sigma" => self.noise.sigma_dbm = number(key, value)?,
            "p_loss" => self.noise.p_loss = number(key, value)?,
            "p_fade" => self.noise.p_fade = number(key, value)?,
            "fade_depth" => self.noise.fade_depth_dbm = number(key, value)?,
            "fade_sigma" => self.noise.fade_sigma_dbm = number(key, value)?,
            "samples" => self.samples = number(key, value)?,
            "queries" => self.queries = number(key, value)?,
            "speed" => self.speed = number(key, value)?,
            "slot_interval" => self.slot_interval = number(key, value)?,
            "rssi_min" => self.rssi_min = number(key, value)?,
            "theta1" => self.theta1 = Some(number(key, value)?),
            "theta2" => self.theta2 = Some(number(key, value)?),
            "epsilon" => self.epsilon = Some(number(key, value)?),
            "k" => self.k = Some(number(key, value)?),
            "window" => self.window = Some(number(key, value)?),
            "history" => self.history = number(key, value)?,
            "radius" => self.radius = Some(number(key, value)?),
            "filtering" => self.filtering = boolean(key, value)?,
            "warmup" => self.warmup = number(key, value)?,
            _ => bail!("unknown key {key:?}"),
        }
        Ok(())
    }

    pub fn layout(&self) -> VenueLayout {
        VenueLayout::with_perimeter_aps(self.width, self.height, self.grid_pitch, self.n_aps, self.tx_power)
    }

    pub fn propagation(&self) -> Propagation {
        Propagation {
            exponent: self.path_loss_exponent,
            d0: self.reference_distance,
        }
    }

    pub fn thresholds(&self) -> Result<SelectionThresholds> {
        let t = SelectionThresholds {
            theta1: self.theta1.context("theta1 is required (config key or --theta1)")?,
            theta2: self.theta2.context("theta2 is required (config key or --theta2)")?,
            epsilon: self.epsilon.context("epsilon is required (config key or --epsilon)")?,
            rssi_min: self.rssi_min,
        };
        t.validate()?;
        Ok(t)
    }

    /// Locator settings; the radius defaults to twice the distance covered
    /// per slot plus `grid_pitch`.
    pub fn locator(&self, grid_pitch: f64) -> Result<LocatorConfig> {
        let k = self.k.context("k is required (config key or --k)")?;
        let window = self.window.context("window is required (config key or --window)")?;
        let theta1 = self.theta1.context("theta1 is required (config key or --theta1)")?;
        let radius = self
            .radius
            .unwrap_or_else(|| LocatorConfig::default_radius(self.speed, self.slot_interval, grid_pitch));
        let mut cfg = LocatorConfig::new(k, window, theta1, radius);
        cfg.history = self.history;
        cfg.filtering = self.filtering;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_comments_and_blank_lines() {
        let cfg = RunConfig::parse(
            "# tuned run\n\
             theta1 = 0.3\n\
             theta2=0.9   # fluctuation\n\
             \n\
             epsilon = 0.05\n\
             k = 5\nwindow = 20\nfiltering = off\nsigma = 1.5\n",
        )
        .unwrap();
        assert_eq!(cfg.theta1, Some(0.3));
        assert_eq!(cfg.theta2, Some(0.9));
        assert_eq!(cfg.k, Some(5));
        assert!(!cfg.filtering);
        assert_eq!(cfg.noise.sigma_dbm, 1.5);
        assert_eq!(cfg.thresholds().unwrap().epsilon, 0.05);
    }

    #[test]
    fn thresholds_are_never_defaulted() {
        let cfg = RunConfig::parse("theta1 = 0.3\nepsilon = 0.05\n").unwrap();
        let err = cfg.thresholds().unwrap_err().to_string();
        assert!(err.contains("theta2"), "{err}");
        assert!(RunConfig::default().locator(2.0).is_err());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::parse("thetaa = 1\n").is_err());
        assert!(RunConfig::parse("k = five\n").is_err());
        assert!(RunConfig::parse("just words\n").is_err());
    }

    #[test]
    fn infinite_thresholds_parse() {
        let cfg = RunConfig::parse("theta1 = 1.5\ntheta2 = inf\nepsilon = 0.05\n").unwrap();
        assert!(cfg.thresholds().unwrap().theta2.is_infinite());
    }

    #[test]
    fn default_radius_uses_speed_and_slot() {
        let cfg = RunConfig::parse("k = 5\nwindow = 20\ntheta1 = 0.3\nspeed = 2\nslot_interval = 0.5\n").unwrap();
        assert_eq!(cfg.locator(1.0).unwrap().candidate_radius, 3.0);
    }
}
