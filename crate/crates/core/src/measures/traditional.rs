use serde::{Deserialize, Serialize};

use super::coefficient::check_order;
use super::sample::GazeEvent;
use super::{MeasureError, TimeWindow};
use crate::scalar::Scalar;
use crate::stats::mean;

/// Per-window means of the classic positional measures. A field is `None`
/// when no event of that kind ends inside the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraditionalMeasures<T> {
    pub mean_fixation_duration: Option<T>,
    pub mean_saccade_duration: Option<T>,
    pub mean_saccade_amplitude: Option<T>,
}

impl<T> TraditionalMeasures<T> {
    pub fn is_empty(&self) -> bool {
        self.mean_fixation_duration.is_none()
            && self.mean_saccade_duration.is_none()
            && self.mean_saccade_amplitude.is_none()
    }
}

pub fn traditional_measures<T: Scalar>(
    events: &[GazeEvent<T>],
    window: TimeWindow,
) -> Result<TraditionalMeasures<T>, MeasureError> {
    check_order(events)?;
    let inside = || events.iter().filter(|e| window.contains(e.t_end()));
    let fix: Vec<T> = inside().filter_map(GazeEvent::as_fixation).map(|f| f.duration).collect();
    let sac_d: Vec<T> = inside().filter_map(GazeEvent::as_saccade).map(|s| s.duration).collect();
    let sac_a: Vec<T> = inside().filter_map(GazeEvent::as_saccade).map(|s| s.amplitude).collect();
    Ok(TraditionalMeasures {
        mean_fixation_duration: mean(&fix),
        mean_saccade_duration: mean(&sac_d),
        mean_saccade_amplitude: mean(&sac_a),
    })
}
