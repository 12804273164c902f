//! Stratified randomized multinomial backtests for distortion risk measures.
//!
//! The crate is `no_std` with `alloc`. Everything here is pure or owns its
//! random stream; file formats, configuration and parallel orchestration live
//! in the `drmtest` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod alm;
pub mod backtest;
pub mod distortion;
pub mod drm;
pub mod error;
pub mod glaw;
pub mod math;
pub mod measure;
pub mod multinomial;
pub mod partition;
pub mod quantile;
pub mod rng;
pub mod sampler;
pub mod skewt;
pub mod study;

pub use distortion::{decompose, gluevar_weights, Decomposition, DistortionFunction, Knot};
pub use error::{Error, Result};
pub use glaw::{ComponentLabel, GLaw};
pub use measure::RiskMeasure;
pub use multinomial::{lrt, nass, pearson, TestKind, TestPlan, TestResult};
pub use partition::{CellProbabilities, Closure, Mode, Partition};
pub use quantile::QuantileFunction;
pub use rng::{Purpose, RngStream, StreamFamily};
