//! Small descriptive statistics shared by the measures, latency accounting and
//! offline analysis.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} points, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("correlation undefined: zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("non-finite input")]
    NonFinite,
}

/// Arithmetic mean, `None` for an empty slice.
pub fn mean<T: Scalar>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Some(xs[0]);
    }
    Some(xs.iter().copied().sum::<T>() / T::from_count(xs.len()))
}

/// Population mean and standard deviation (divide by N), two-pass. Equal
/// inputs give exactly that value and a zero deviation, which rounding in the
/// summed mean would otherwise spoil.
pub fn mean_std<T: Scalar>(xs: &[T]) -> Option<(T, T)> {
    let first = *xs.first()?;
    if xs.iter().all(|&x| x == first) {
        return Some((first, T::zero()));
    }
    let mu = mean(xs)?;
    let var = xs.iter().map(|&x| (x - mu) * (x - mu)).sum::<T>() / T::from_count(xs.len());
    Some((mu, var.sqrt()))
}

/// Pearson product-moment correlation.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<T, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFew { needed: 3, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mx = mean(x).unwrap();
    let my = mean(y).unwrap();
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy = sxy + da * db;
        sxx = sxx + da * da;
        syy = syy + db * db;
    }
    if sxx == T::zero() {
        return Err(StatsError::ZeroVariance("x"));
    }
    if syy == T::zero() {
        return Err(StatsError::ZeroVariance("y"));
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}

/// One-pass accumulator (Welford) for count, mean, population std and max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
    max: f64,
}

impl Default for RunningStats {
    fn default() -> Self {
        Self { count: 0, mean: 0.0, m2: 0.0, max: f64::NEG_INFINITY }
    }
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        self.max = self.max.max(x);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    pub fn std(&self) -> Option<f64> {
        (self.count > 0).then(|| (self.m2 / self.count as f64).max(0.0).sqrt())
    }

    pub fn max(&self) -> Option<f64> {
        (self.count > 0).then_some(self.max)
    }
}
