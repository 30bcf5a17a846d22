//! Poisson kriging and kriging-variance-driven exploration for count-based
//! soil-moisture sensing.
//!
//! The crate is organised bottom-up:
//!
//! - [`field`]: surrogate ground-truth rate fields and observation ingest
//! - [`sensor`]: Poisson counting sensor, corrections and FMI/AMI regimes
//! - [`variography`]: time-weighted empirical variogram and Gaussian fit
//! - [`kriging`]: ordinary and Poisson kriging, per point and per grid
//! - [`exploration`]: target selection strategies and the mission loop
//! - [`evaluation`]: MSE scoring, run aggregation and condition comparison
//! - [`io`]: text formats for grids, run logs and exported curves

pub mod error;
pub mod evaluation;
pub mod exploration;
pub mod field;
pub mod io;
pub mod kriging;
mod optimize;
pub mod rng;
pub mod sample;
pub mod sensor;
pub mod variography;

pub use error::{Error, Result};
pub use field::{GridSpec, ObservationRecord, RateField};
pub use kriging::{KrigingMap, KrigingMethod};
pub use sample::Sample;
pub use sensor::{EnvConditions, Measurement, SamplingRegime};
pub use variography::VariogramModel;
