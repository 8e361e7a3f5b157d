//! Gaze event detection and positional measures.
//!
//! Samples are segmented into fixations and saccades with a dispersion
//! threshold detector ([`detect`]); the events then feed the windowed
//! ambient/focal coefficient K ([`coefficient`]) and the traditional means
//! ([`traditional`]).

pub mod coefficient;
pub mod detect;
pub mod sample;
pub mod traditional;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coefficient::{
    experiment_k, group_k, k_from_window, window_k, AttentionMode, KValue, POSITIVE_K_MEANS,
};
pub use detect::{detect_events, DetectorConfig, FixationDetector};
pub use sample::{EventKind, Fixation, GazeEvent, GazeSample, Saccade, Screen};
pub use traditional::{traditional_measures, TraditionalMeasures};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("input out of time order at index {index}")]
    Ordering { index: usize },
    #[error("duplicate user {0:?} in group aggregate")]
    DuplicateUser(String),
    #[error("values mix scopes {0} and {1}")]
    ScopeMismatch(String, String),
    #[error("group aggregate expects user-scoped values, got {0}")]
    NotUserScope(String),
    #[error("invalid detector config: {0}")]
    InvalidConfig(&'static str),
}

/// Whom a measure value describes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    User(String),
    Group,
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scope::User(id) => write!(f, "user.{id}"),
            Scope::Group => f.write_str("group"),
        }
    }
}

/// Half-open time interval `[start, end)` in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    pub fn new(start: f64, end: f64) -> Self {
        debug_assert!(end > start);
        Self { start, end }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }
}

/// Unweighted mean across distinct users. Every user weighs `1/|U|`.
pub(crate) fn user_mean<'a, T, I>(values: I) -> Result<Option<T>, MeasureError>
where
    T: crate::Scalar,
    I: IntoIterator<Item = (&'a Scope, T)>,
{
    let mut seen = std::collections::BTreeSet::new();
    let mut acc = Vec::new();
    for (scope, v) in values {
        match scope {
            Scope::User(id) => {
                if !seen.insert(id.as_str()) {
                    return Err(MeasureError::DuplicateUser(id.clone()));
                }
            }
            Scope::Group => return Err(MeasureError::NotUserScope(scope.to_string())),
        }
        acc.push(v);
    }
    Ok(crate::stats::mean(&acc))
}
