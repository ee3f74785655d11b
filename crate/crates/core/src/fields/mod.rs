//! Sampled and analytic fields, spectral calculus, probe regions and the
//! Navier-Stokes rescaling.

mod analytic;
mod grid;
mod plane;
mod region;
mod slice;
pub mod snapshot;
mod spectral;
mod trig;

pub use analytic::{AnalyticField, AnalyticKind, VelocityMode};
pub use grid::{cross, dot, norm, periodic_delta, GridSpec, ScalarField, VectorField};
pub use plane::{Channel, Deriv, Source};
pub use region::{CylinderRegion, DiscSpec};
pub use slice::{
    sample_poly, trig_of, AnalyticFlow, FieldSlice, Flow, Rescaled, RescaledSlice, SnapshotSeries, Steady,
    TrigSlice, PRUNE_REL,
};
pub use spectral::{
    biot_savart, curl, divergence, gradient, laplacian, pad_spectrum, pressure_spectrum, Spectral,
};
pub use trig::{Jet, ScalarMode, StaticScalar, TrigScalar, TrigVector};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("fields carry different times")]
    TimeMismatch,
    #[error("component {component} has nonzero mean {mean:e}")]
    NonZeroMean { component: usize, mean: f64 },
    #[error("time {time} lies outside the data span [{start}, {end}]")]
    OutsideCoverage { time: f64, start: f64, end: f64 },
    #[error("probe radius {radius} exceeds the safe radius {limit}")]
    RegionTooLarge { radius: f64, limit: f64 },
    #[error("need {needed} snapshots, have {found}")]
    InsufficientSnapshots { needed: usize, found: usize },
    #[error("snapshot times must increase strictly (t = {0})")]
    NonMonotoneTimes(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
