//! Indoor WiFi fingerprint positioning.
//!
//! The crate is organised around the three stages of fingerprint positioning:
//!
//! * [`sim`] produces a synthetic venue, offline survey campaigns and online
//!   query streams with ground truth.
//! * [`selection`] turns a survey campaign into a [`RadioMap`] (loss and
//!   fluctuation gates followed by asymmetric Gaussian filtering, see
//!   [`filter`]) and pre-processes windows of online measurements.
//! * [`locator`] runs the online pipeline: candidate restriction around the
//!   previous estimate followed by weighted k-nearest-neighbour matching
//!   ([`fingerprint`]), plus the plain KNN/WKNN baselines.

// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod filter;
pub mod fingerprint;
pub mod locator;
pub mod radio_map;
pub mod selection;
pub mod sim;

pub use error::{Error, Result};
pub use filter::{FilterParams, FitGrid, SampleStats};
pub use fingerprint::{
    ApRegistry, Bounds, Coord, MacAddr, PositionEstimate, ReferencePoint, RegistryId, RssiVector, DEFAULT_RSSI_MIN,
};
pub use locator::{Algorithm, Baseline, Locator, LocatorConfig};
pub use radio_map::RadioMap;
pub use selection::{Campaign, Elimination, Gate, OfflineFilter, OnlineWindow, RawSampleSeries, SelectionThresholds};
