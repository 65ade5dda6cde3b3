//! Spatial-spectral interference model for dense finite-area directional
//! (mmWave) networks.
//!
//! The analytic side covers the blockage model for interfering links, the
//! distribution of active interferers, the moment generating function of the
//! aggregate interference power and the two link metrics built on it (average
//! BER and outage probability). [`montecarlo`] is an independent geometric
//! simulation used to validate every analytic quantity, and [`experiment`]
//! drives parameter sweeps and writes CSV.
//!
//! The analytic modules are generic over the scalar type through [`Real`]
//! (`f32` or `f64`). The accuracy contracts documented on individual
//! functions are stated for `f64`; the aliases at the bottom of this file fix
//! the scalar to `f64` for the common case.

// negated comparisons reject NaN along with out-of-range values; tabulated
// constants keep their published digits
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod blockage;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod interference;
pub mod montecarlo;
pub mod numerics;
pub mod performance;
pub mod spectral;

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub use error::{Error, Result};

/// Floating-point scalar used throughout the analytic model.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Complex<T> = num_complex::Complex<T>;

pub type Complex64 = Complex<f64>;
pub type QuadratureSpec64 = numerics::QuadratureSpec<f64>;
pub type Disk64 = geometry::Disk<f64>;
pub type ReceiverAnchor64 = geometry::ReceiverAnchor<f64>;
pub type Band64 = geometry::Band<f64>;
pub type ObstacleCircle64 = geometry::ObstacleCircle<f64>;
pub type BlockageParams64 = blockage::BlockageParams<f64>;
pub type BlockageResult64 = blockage::BlockageResult<f64>;
pub type SpectralProfile64 = spectral::SpectralProfile<f64>;
pub type LinkModel64 = interference::LinkModel<f64>;
pub type InterferenceScenario64 = interference::InterferenceScenario<f64>;
pub type MgfEvaluator64 = interference::MgfEvaluator<f64>;
pub type DesiredLink64 = performance::DesiredLink<f64>;
