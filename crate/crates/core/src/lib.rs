//! Environmental footprint accounting and placement of jobs across
//! geo-distributed data centers.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. File formats,
//! grid-data backends with on-disk caches and the command line live in the
//! `ecoorc` companion crate.
//!
//! * [`footprint`]: per-job carbon, water, land and e-waste impact.
//! * [`wue`]: time-varying water usage effectiveness from weather data.
//! * [`gridmix`]: regional intensities derived from a power-source mix.
//! * [`scheduler`]: per-round assignment/migration solver and its oracle.
//! * [`simulator`]: workload generation and the iterative scheduling loop.
#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod factor;
pub mod footprint;
pub mod gridmix;
pub mod ids;
pub mod scheduler;
pub mod simulator;
pub mod wue;

pub use factor::{Factor, FactorWeights, FootprintVector, FACTOR_COUNT};
pub use footprint::{DataCenterProfile, FootprintError, Job, RegionProfile};
pub use ids::{DcId, JobId, RegionId, UserId};
