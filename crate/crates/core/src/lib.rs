//! Real-time gaze analytics for distributed multi-user eye tracking.
//!
//! The numeric core is generic over [`Scalar`] (`f32`/`f64`); the aliases
//! below fix it to `f64`, which is what the wire format, recordings and the
//! session pipeline use.

pub mod measures;
pub mod restream;
pub mod ripa;
pub mod scalar;
pub mod session;
pub mod stats;
pub mod transport;

pub use scalar::{Field, Scalar};

pub type Sample = measures::GazeSample<f64>;
pub type Event = measures::GazeEvent<f64>;
pub type Fixation = measures::Fixation<f64>;
pub type Saccade = measures::Saccade<f64>;
pub type KValue = measures::KValue<f64>;
pub type Traditional = measures::TraditionalMeasures<f64>;
pub type Kernel = ripa::SgKernel<f64>;
pub type RipaConfig = ripa::RipaConfig<f64>;
pub type RipaValue = ripa::RipaValue<f64>;
pub type RipaEngine = ripa::RipaEngine<f64>;
pub type Detector = measures::FixationDetector<f64>;
