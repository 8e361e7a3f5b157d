//! Real-time Index of Pupillary Activity over one window of pupil samples.
//!
//! Two first-derivative Savitzky-Golay filters with different support run over
//! the window. On their common valid region the ratio of the low-frequency to
//! the high-frequency response magnitude is formed; strict local maxima of the
//! ratio above `lambda` are counted and normalised by the number of interior
//! ratio samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::savgol::{sg_kernel, KernelError, SgKernel};
use crate::measures::{user_mean, MeasureError, Scope};
use crate::scalar::Scalar;

/// Which filter response sits in the numerator of the ratio series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioOrientation {
    LowOverHigh,
    HighOverLow,
}

pub const RATIO_ORIENTATION: RatioOrientation = RatioOrientation::LowOverHigh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub half_width: usize,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipaConfig<T> {
    pub low_filter: FilterSpec,
    pub high_filter: FilterSpec,
    pub lambda: T,
    /// Window length in samples; equal to the sampling frequency in Hz, so
    /// one window spans one second.
    pub window_samples: usize,
    pub epsilon: T,
    pub confidence_min: T,
    pub max_interp_gap: usize,
}

impl<T: Scalar> Default for RipaConfig<T> {
    fn default() -> Self {
        Self {
            low_filter: FilterSpec { half_width: 7, order: 2 },
            high_filter: FilterSpec { half_width: 2, order: 2 },
            lambda: T::one(),
            window_samples: 30,
            epsilon: T::lit(1e-9),
            confidence_min: T::lit(0.5),
            max_interp_gap: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RipaError {
    #[error("invalid RIPA config: {0}")]
    Config(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("window has {len} samples, expected {expected}")]
    WindowLength { len: usize, expected: usize },
}

impl<T: Scalar> RipaConfig<T> {
    pub fn min_window(&self) -> usize {
        2 * self.low_filter.half_width.max(self.high_filter.half_width) + 1
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), RipaError> {
        let bad = |msg: &str| Err(RipaError::Config(msg.to_string()));
        if !(self.lambda > T::zero()) {
            return bad("lambda must be > 0");
        }
        if !(self.epsilon > T::zero()) {
            return bad("epsilon must be > 0");
        }
        if !(self.confidence_min >= T::zero() && self.confidence_min <= T::one()) {
            return bad("confidence_min must lie in [0, 1]");
        }
        if self.window_samples < self.min_window() {
            return Err(RipaError::Config(format!(
                "window_samples {} is below 2*max(m)+1 = {}",
                self.window_samples,
                self.min_window()
            )));
        }
        Ok(())
    }

    /// Sample spacing in seconds implied by the window length.
    pub fn dt(&self) -> T {
        T::one() / T::from_count(self.window_samples)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipaValue<T> {
    pub t_window_end: f64,
    pub scope: Scope,
    pub value: T,
}

/// Prebuilt filter pair for repeated windows with one config.
#[derive(Debug, Clone)]
pub struct RipaEngine<T> {
    cfg: RipaConfig<T>,
    low: SgKernel<T>,
    high: SgKernel<T>,
}

impl<T: Scalar> RipaEngine<T> {
    pub fn new(cfg: RipaConfig<T>) -> Result<Self, RipaError> {
        cfg.validate()?;
        let dt = cfg.dt();
        let low = sg_kernel(cfg.low_filter.half_width, cfg.low_filter.order, 1, dt)?;
        let high = sg_kernel(cfg.high_filter.half_width, cfg.high_filter.order, 1, dt)?;
        Ok(Self { cfg, low, high })
    }

    pub fn config(&self) -> &RipaConfig<T> {
        &self.cfg
    }

    /// Low and high derivative responses aligned on their common centres.
    pub fn responses(&self, pupil: &[T]) -> Result<(Vec<T>, Vec<T>), RipaError> {
        let low = self.low.apply(pupil)?;
        let high = self.high.apply(pupil)?;
        let (ml, mh) = (self.low.half_width(), self.high.half_width());
        let m = ml.max(mh);
        let centres = pupil.len() - 2 * m;
        let low = low[m - ml..m - ml + centres].to_vec();
        let high = high[m - mh..m - mh + centres].to_vec();
        Ok((low, high))
    }

    pub fn ratios(&self, pupil: &[T]) -> Result<Vec<T>, RipaError> {
        let (low, high) = self.responses(pupil)?;
        let eps = self.cfg.epsilon;
        Ok(low
            .iter()
            .zip(&high)
            .map(|(l, h)| match RATIO_ORIENTATION {
                RatioOrientation::LowOverHigh => l.abs() / (h.abs() + eps),
                RatioOrientation::HighOverLow => h.abs() / (l.abs() + eps),
            })
            .collect())
    }

    /// RIPA of one window of exactly `window_samples` diameters.
    pub fn window(&self, pupil: &[T]) -> Result<T, RipaError> {
        if pupil.len() != self.cfg.window_samples {
            return Err(RipaError::WindowLength { len: pupil.len(), expected: self.cfg.window_samples });
        }
        let rho = self.ratios(pupil)?;
        let count = rho
            .windows(3)
            .filter(|w| w[1] > w[0] && w[1] > w[2] && w[1] > self.cfg.lambda)
            .count();
        let interior = rho.len().saturating_sub(2).max(1);
        let value = T::from_count(count) / T::from_count(interior);
        Ok(value.max(T::zero()).min(T::one()))
    }
}

/// One-shot RIPA for a single window.
pub fn ripa_window<T: Scalar>(pupil: &[T], cfg: &RipaConfig<T>) -> Result<T, RipaError> {
    RipaEngine::new(cfg.clone())?.window(pupil)
}

/// Group RIPA: unweighted mean over users.
pub fn group_ripa<T: Scalar>(user_values: &[RipaValue<T>]) -> Result<Option<RipaValue<T>>, MeasureError> {
    let mean = user_mean(user_values.iter().map(|v| (&v.scope, v.value)))?;
    Ok(mean.map(|value| RipaValue {
        t_window_end: user_values.iter().map(|v| v.t_window_end).fold(f64::MIN, f64::max),
        scope: Scope::Group,
        value,
    }))
}

/// Experiment-level RIPA of one scope: mean of its window values.
pub fn experiment_ripa<T: Scalar>(values: &[RipaValue<T>]) -> Result<Option<RipaValue<T>>, MeasureError> {
    let Some(first) = values.first() else {
        return Ok(None);
    };
    if let Some(other) = values.iter().find(|v| v.scope != first.scope) {
        return Err(MeasureError::ScopeMismatch(first.scope.to_string(), other.scope.to_string()));
    }
    let xs: Vec<T> = values.iter().map(|v| v.value).collect();
    Ok(Some(RipaValue {
        t_window_end: values.iter().map(|v| v.t_window_end).fold(f64::MIN, f64::max),
        scope: first.scope.clone(),
        value: crate::stats::mean(&xs).expect("non-empty"),
    }))
}
