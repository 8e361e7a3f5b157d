//! Ambient/focal coefficient K over time windows, experiments and groups.
//!
//! Inside a window every fixation duration `d_i` is paired with the amplitude
//! `a_i` of the saccade that follows it. Each pair contributes
//! `z(d_i) - z(a_i)` where the z-scores use the mean and population standard
//! deviation of all fixation durations and all saccade amplitudes ending in
//! the window. The window value is the mean contribution over pairs.

use serde::{Deserialize, Serialize};

use super::sample::GazeEvent;
use super::{user_mean, MeasureError, Scope, TimeWindow};
use crate::scalar::Scalar;
use crate::stats::mean_std;

/// Attention mode indicated by the sign of K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionMode {
    Ambient,
    Focal,
}

/// Sign convention: long fixations followed by short saccades give positive
/// K, which reads as focal processing.
pub const POSITIVE_K_MEANS: AttentionMode = AttentionMode::Focal;

impl AttentionMode {
    pub fn classify<T: Scalar>(k: T) -> Option<Self> {
        let flip = |m| match m {
            AttentionMode::Ambient => AttentionMode::Focal,
            AttentionMode::Focal => AttentionMode::Ambient,
        };
        if k > T::zero() {
            Some(POSITIVE_K_MEANS)
        } else if k < T::zero() {
            Some(flip(POSITIVE_K_MEANS))
        } else {
            None
        }
    }
}

/// Minimum fixation/saccade pairs for a window to carry a value.
pub const MIN_PAIRS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KValue<T> {
    pub t_window_end: f64,
    pub scope: Scope,
    pub value: T,
    pub n_pairs: usize,
}

fn z<T: Scalar>(v: T, mu: T, sigma: T) -> T {
    if sigma == T::zero() {
        T::zero()
    } else {
        (v - mu) / sigma
    }
}

/// K from raw window contents. `pairs` are `(d_i, a_i)` for fixations followed
/// by a saccade inside the window; `durations` and `amplitudes` hold every
/// fixation and saccade in the window and supply the z-score statistics.
pub fn k_from_window<T: Scalar>(durations: &[T], amplitudes: &[T], pairs: &[(T, T)]) -> Option<T> {
    if pairs.len() < MIN_PAIRS {
        return None;
    }
    let (mu_d, sd_d) = mean_std(durations)?;
    let (mu_a, sd_a) = mean_std(amplitudes)?;
    let total = pairs
        .iter()
        .map(|&(d, a)| z(d, mu_d, sd_d) - z(a, mu_a, sd_a))
        .sum::<T>();
    Some(total / T::from_count(pairs.len()))
}

pub(crate) fn check_order<T: Scalar>(events: &[GazeEvent<T>]) -> Result<(), MeasureError> {
    for (index, pair) in events.windows(2).enumerate() {
        if pair[1].t_start() < pair[0].t_end() || pair[1].t_end() < pair[0].t_end() {
            return Err(MeasureError::Ordering { index: index + 1 });
        }
    }
    Ok(())
}

/// Windowed K for one scope. Returns `Ok(None)` when fewer than
/// [`MIN_PAIRS`] pairs end inside the window.
pub fn window_k<T: Scalar>(
    events: &[GazeEvent<T>],
    window: TimeWindow,
    scope: Scope,
) -> Result<Option<KValue<T>>, MeasureError> {
    check_order(events)?;
    let mut durations = Vec::new();
    let mut amplitudes = Vec::new();
    let mut pairs = Vec::new();
    for (i, ev) in events.iter().enumerate() {
        if !window.contains(ev.t_end()) {
            continue;
        }
        match ev {
            GazeEvent::Fixation(f) => {
                durations.push(f.duration);
                let next = events.get(i + 1).and_then(GazeEvent::as_saccade);
                if let Some(s) = next.filter(|s| window.contains(s.t_end)) {
                    pairs.push((f.duration, s.amplitude));
                }
            }
            GazeEvent::Saccade(s) => amplitudes.push(s.amplitude),
        }
    }
    Ok(k_from_window(&durations, &amplitudes, &pairs).map(|value| KValue {
        t_window_end: window.end,
        scope,
        value,
        n_pairs: pairs.len(),
    }))
}

/// Experiment-level K: mean of the present window values of one scope.
pub fn experiment_k<T: Scalar>(window_values: &[KValue<T>]) -> Result<Option<KValue<T>>, MeasureError> {
    let Some(first) = window_values.first() else {
        return Ok(None);
    };
    if let Some(other) = window_values.iter().find(|v| v.scope != first.scope) {
        return Err(MeasureError::ScopeMismatch(first.scope.to_string(), other.scope.to_string()));
    }
    let values: Vec<T> = window_values.iter().map(|v| v.value).collect();
    Ok(Some(KValue {
        t_window_end: window_values.iter().map(|v| v.t_window_end).fold(f64::MIN, f64::max),
        scope: first.scope.clone(),
        value: crate::stats::mean(&values).expect("non-empty"),
        n_pairs: window_values.iter().map(|v| v.n_pairs).sum(),
    }))
}

/// Group K: unweighted mean over users, one value per user.
pub fn group_k<T: Scalar>(user_values: &[KValue<T>]) -> Result<Option<KValue<T>>, MeasureError> {
    let mean = user_mean(user_values.iter().map(|v| (&v.scope, v.value)))?;
    Ok(mean.map(|value| KValue {
        t_window_end: user_values.iter().map(|v| v.t_window_end).fold(f64::MIN, f64::max),
        scope: Scope::Group,
        value,
        n_pairs: user_values.iter().map(|v| v.n_pairs).sum(),
    }))
}
