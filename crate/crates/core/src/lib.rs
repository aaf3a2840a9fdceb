//! Source localization from OFDM frames captured by a distributed,
//! non-phase-synchronized receiver array.
//!
//! The crate covers the full simulation chain: scenario and resource-grid
//! generation ([`model`]), line-of-sight channel synthesis and noisy
//! observations ([`channel`]), pre-localization equalization and
//! demodulation for the decision-directed baselines ([`equalize`]), the
//! position objectives including the marginal-maximum-likelihood family
//! ([`estimators`]), two-stage grid + Nelder–Mead search ([`search`]) and the
//! Monte Carlo harness with accounting utilities ([`experiment`]).
//!
//! [`oracle`] holds independent numerical references (Gauss–Hermite
//! quadrature of the channel marginal) used by the oracle-check tooling.

pub mod channel;
pub mod equalize;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod math;
pub mod model;
pub mod ops;
pub mod oracle;
pub mod search;

pub use error::{Error, Result};
pub use model::{Constellation, ConstellationMap, Point, ResourceGrid, Scene, SystemConfig};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
