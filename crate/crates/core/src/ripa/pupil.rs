//! Pupil signal clean-up ahead of RIPA windowing.

use crate::measures::GazeSample;
use crate::scalar::Scalar;

/// A contiguous run of usable pupil diameters with their timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PupilSegment<T> {
    pub times: Vec<f64>,
    pub values: Vec<T>,
}

impl<T> PupilSegment<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn pupil_valid<T: Scalar>(sample: &GazeSample<T>, confidence_min: T) -> bool {
    sample.pupil_diameter.is_finite()
        && sample.pupil_diameter > T::zero()
        && sample.confidence >= confidence_min
}

/// Marks low-confidence and non-positive diameters invalid, linearly
/// interpolates interior invalid runs of at most `max_gap` samples, splits on
/// longer runs, and drops leading and trailing invalid samples.
pub fn preprocess_pupil<T: Scalar>(
    samples: &[GazeSample<T>],
    confidence_min: T,
    max_gap: usize,
) -> Vec<PupilSegment<T>> {
    let mut segments = Vec::new();
    let mut current = PupilSegment::default();
    // invalid samples seen since the last valid one
    let mut hole: Vec<f64> = Vec::new();

    for s in samples {
        if !pupil_valid(s, confidence_min) {
            if !current.is_empty() {
                hole.push(s.t_origin);
            }
            continue;
        }
        if !hole.is_empty() {
            if hole.len() <= max_gap {
                let last = *current.values.last().expect("segment has a valid sample");
                let step = (s.pupil_diameter - last) / T::from_count(hole.len() + 1);
                for (i, &t) in hole.iter().enumerate() {
                    current.times.push(t);
                    current.values.push(last + step * T::from_count(i + 1));
                }
            } else {
                segments.push(std::mem::take(&mut current));
            }
            hole.clear();
        }
        current.times.push(s.t_origin);
        current.values.push(s.pupil_diameter);
    }
    if !current.is_empty() {
        segments.push(current);
    }
    segments
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(t: f64, p: f64, c: f64) -> GazeSample<f64> {
        GazeSample { user_id: "A".into(), seq: 0, t_origin: t, x: 0.0, y: 0.0, pupil_diameter: p, confidence: c }
    }

    #[test]
    fn all_valid_unchanged() {
        let xs = [s(0.0, 3.0, 1.0), s(1.0, 3.2, 1.0), s(2.0, 3.1, 1.0)];
        let seg = preprocess_pupil(&xs, 0.5, 2);
        assert_eq!(seg.len(), 1);
        assert_eq!(seg[0].values, vec![3.0, 3.2, 3.1]);
        assert_eq!(seg[0].times, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn short_hole_interpolated() {
        let xs = [s(0.0, 3.0, 1.0), s(1.0, 0.0, 1.0), s(2.0, 4.0, 1.0)];
        let seg = preprocess_pupil(&xs, 0.5, 1);
        assert_eq!(seg[0].values, vec![3.0, 3.5, 4.0]);

        let xs = [s(0.0, 3.0, 1.0), s(1.0, 9.0, 0.1), s(2.0, 9.0, 0.1), s(3.0, 6.0, 1.0)];
        let seg = preprocess_pupil(&xs, 0.5, 2);
        assert_eq!(seg[0].values, vec![3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn long_hole_splits() {
        let xs = [s(0.0, 3.0, 1.0), s(1.0, -1.0, 1.0), s(2.0, -1.0, 1.0), s(3.0, 4.0, 1.0)];
        let seg = preprocess_pupil(&xs, 0.5, 1);
        assert_eq!(seg.len(), 2);
        assert_eq!(seg[0].values, vec![3.0]);
        assert_eq!(seg[1].values, vec![4.0]);
        assert_eq!(seg[1].times, vec![3.0]);
    }

    #[test]
    fn edges_dropped() {
        let xs = [s(0.0, 3.0, 0.0), s(1.0, 3.0, 1.0), s(2.0, 3.3, 1.0), s(3.0, f64::NAN, 1.0)];
        let seg = preprocess_pupil(&xs, 0.5, 4);
        assert_eq!(seg.len(), 1);
        assert_eq!(seg[0].values, vec![3.0, 3.3]);
        assert!(preprocess_pupil::<f64>(&[], 0.5, 1).is_empty());
    }
}
