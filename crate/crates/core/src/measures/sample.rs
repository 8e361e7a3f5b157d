use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Screen geometry in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Screen {
    pub width: f64,
    pub height: f64,
}

impl Default for Screen {
    fn default() -> Self {
        Self { width: 1920.0, height: 1080.0 }
    }
}

/// One timestamped gaze and pupil observation from one user.
///
/// `t_origin` stays `f64` regardless of `T`: epoch milliseconds do not fit in
/// an `f32` mantissa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeSample<T> {
    pub user_id: String,
    pub seq: u64,
    pub t_origin: f64,
    pub x: T,
    pub y: T,
    pub pupil_diameter: T,
    pub confidence: T,
}

impl<T: Scalar> GazeSample<T> {
    /// Whether the gaze position can be used for event detection. Samples
    /// off-screen or with zero confidence are kept in recordings but skipped
    /// here.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn gaze_valid(&self, screen: Option<&Screen>) -> bool {
        if !(self.x.is_finite() && self.y.is_finite()) || !(self.confidence > T::zero()) {
            return false;
        }
        match screen {
            Some(s) => {
                let (x, y) = (self.x.to_f64_lossy(), self.y.to_f64_lossy());
                (0.0..=s.width).contains(&x) && (0.0..=s.height).contains(&y)
            }
            None => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Fixation,
    Saccade,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixation<T> {
    pub t_start: f64,
    pub t_end: f64,
    pub duration: T,
    pub centroid_x: T,
    pub centroid_y: T,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Saccade<T> {
    pub t_start: f64,
    pub t_end: f64,
    pub duration: T,
    /// Distance between the centroids of the surrounding fixations.
    pub amplitude: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GazeEvent<T> {
    Fixation(Fixation<T>),
    Saccade(Saccade<T>),
}

impl<T: Scalar> GazeEvent<T> {
    pub fn kind(&self) -> EventKind {
        match self {
            GazeEvent::Fixation(_) => EventKind::Fixation,
            GazeEvent::Saccade(_) => EventKind::Saccade,
        }
    }

    pub fn t_start(&self) -> f64 {
        match self {
            GazeEvent::Fixation(f) => f.t_start,
            GazeEvent::Saccade(s) => s.t_start,
        }
    }

    pub fn t_end(&self) -> f64 {
        match self {
            GazeEvent::Fixation(f) => f.t_end,
            GazeEvent::Saccade(s) => s.t_end,
        }
    }

    pub fn duration(&self) -> T {
        match self {
            GazeEvent::Fixation(f) => f.duration,
            GazeEvent::Saccade(s) => s.duration,
        }
    }

    pub fn as_fixation(&self) -> Option<&Fixation<T>> {
        match self {
            GazeEvent::Fixation(f) => Some(f),
            GazeEvent::Saccade(_) => None,
        }
    }

    pub fn as_saccade(&self) -> Option<&Saccade<T>> {
        match self {
            GazeEvent::Saccade(s) => Some(s),
            GazeEvent::Fixation(_) => None,
        }
    }
}
