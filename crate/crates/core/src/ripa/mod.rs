//! Savitzky-Golay filtering and the Real-time Index of Pupillary Activity.

pub mod index;
pub mod pupil;
pub mod savgol;

pub use index::{
    experiment_ripa, group_ripa, ripa_window, FilterSpec, RatioOrientation, RipaConfig, RipaEngine,
    RipaError, RipaValue, RATIO_ORIENTATION,
};
pub use pupil::{pupil_valid, PupilSegment};
pub use savgol::{sg_kernel, KernelError, SgKernel};

use crate::measures::GazeSample;
use crate::scalar::Scalar;

/// Splits one user's samples into clean pupil segments using the validity
/// and interpolation settings of `cfg`.
pub fn preprocess_pupil<T: Scalar>(samples: &[GazeSample<T>], cfg: &RipaConfig<T>) -> Vec<PupilSegment<T>> {
    pupil::preprocess_pupil(samples, cfg.confidence_min, cfg.max_interp_gap)
}
