//! Redundancy scheduling for multi-server queues with bi-modal service times.
//!
//! * [`designs`]: symmetric `(n, r, 1)` block designs from planar difference sets.
//! * [`policies`]: random, round-robin and block-design server selection.
//! * [`indicators`]: closed-form overlap distributions and LBF/ROF/RDF.
//! * [`urnball`]: Monte Carlo urn experiments measuring the same indicators.
//! * [`simqueue`]: discrete-event simulation of cancel-on-start redundancy.
//!
//! The analytic code is generic over [`Scalar`]; the aliases below fix the
//! common instantiations.

pub mod designs;
pub mod error;
pub mod indicators;
pub mod policies;
pub mod rng;
pub mod scalar;
pub mod simqueue;
pub mod urnball;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Exact arithmetic for the analytic indicators.
pub type Rational = num_rational::BigRational;

pub type ExactPmf = indicators::OverlapPmf<Rational>;
pub type OverlapPmfF64 = indicators::OverlapPmf<f64>;
pub type OverlapPmfF32 = indicators::OverlapPmf<f32>;

pub type ExactIndicators = indicators::IndicatorSet<Rational>;
pub type IndicatorsF64 = indicators::IndicatorSet<f64>;
pub type IndicatorsF32 = indicators::IndicatorSet<f32>;
