//! Building blocks for a single-cell massive MU-MIMO downlink simulator.
//!
//! The crate models the full transmit chain of a multi-antenna base station
//! at complex baseband: QAM mapping and root-raised-cosine pulse shaping
//! ([`waveform`]), Rice-mixture channel generation ([`channel`]), regularized
//! zero-forcing precoding ([`precode`]), per-antenna power amplifiers with
//! mutual coupling ([`frontend`]), finite-resolution transmit DACs with
//! dithering ([`converters`]), simplified stochastic impairment models
//! ([`stochastic`]), and the quality metrics used to compare them
//! ([`metrics`]).
//!
//! All numeric code is generic over the scalar type through the [`Real`]
//! trait; `f64` is the intended default and `f32` works where reduced
//! precision is acceptable. Concrete complex aliases [`C32`] and [`C64`] are
//! exported at the crate root.

pub mod channel;
pub mod converters;
pub mod error;
pub mod frontend;
pub mod linalg;
pub mod metrics;
pub mod precode;
pub mod rng;
pub mod stochastic;
pub mod waveform;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, Signed};

pub use error::{Result, SimError};
pub use num_complex::Complex;

/// Scalar type over which the whole simulator is generic: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + Signed
    + Sum<Self>
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + NumAssign
        + FromPrimitive
        + Signed
        + Sum<T>
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Single-precision complex sample.
pub type C32 = Complex<f32>;
/// Double-precision complex sample.
pub type C64 = Complex<f64>;

/// Dense complex matrix used for channel matrices and sample frames.
///
/// Antenna frames are `M x N` (antennas by samples), symbol frames `K x L`
/// (users by symbols), channel matrices `M x K`.
pub type Mat<T> = ndarray::Array2<Complex<T>>;

/// Dense complex vector (a single sample or symbol stream).
pub type Vect<T> = ndarray::Array1<Complex<T>>;

pub(crate) fn real<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("f64 constant representable in scalar type")
}
