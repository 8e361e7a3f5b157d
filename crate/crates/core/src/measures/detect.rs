//! Dispersion-threshold (I-DT) fixation identification.
//!
//! A fixation is a maximal run of consecutive valid samples whose bounding-box
//! dispersion `(max x - min x) + (max y - min y)` stays within the threshold
//! and whose span reaches the minimum duration. Consecutive fixations are
//! joined by a saccade whose amplitude is the distance between centroids.
//! Samples that never join a fixation are dropped, so output always starts
//! and ends with a fixation and alternates kinds.
//!
//! [`FixationDetector`] runs the segmentation incrementally; [`detect_events`]
//! feeds it a whole slice.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::sample::{Fixation, GazeEvent, GazeSample, Saccade, Screen};
use super::MeasureError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Maximum bounding-box dispersion of a fixation, pixels.
    pub dispersion_threshold: f64,
    pub min_fixation_duration_ms: f64,
    /// Largest spacing between consecutive valid samples inside one fixation.
    pub max_gap_ms: f64,
    /// When set, off-screen samples are treated as invalid.
    pub screen: Option<Screen>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            dispersion_threshold: 60.0,
            min_fixation_duration_ms: 100.0,
            max_gap_ms: 75.0,
            screen: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), MeasureError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.dispersion_threshold) {
            return Err(MeasureError::InvalidConfig("dispersion_threshold must be > 0"));
        }
        if !positive(self.min_fixation_duration_ms) {
            return Err(MeasureError::InvalidConfig("min_fixation_duration_ms must be > 0"));
        }
        if !positive(self.max_gap_ms) {
            return Err(MeasureError::InvalidConfig("max_gap_ms must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Point<T> {
    t: f64,
    x: T,
    y: T,
}

#[derive(Debug, Clone, Copy)]
struct BBox<T> {
    min_x: T,
    max_x: T,
    min_y: T,
    max_y: T,
}

impl<T: Scalar> BBox<T> {
    fn of(p: &Point<T>) -> Self {
        Self { min_x: p.x, max_x: p.x, min_y: p.y, max_y: p.y }
    }

    fn with(mut self, p: &Point<T>) -> Self {
        self.min_x = self.min_x.min(p.x);
        self.max_x = self.max_x.max(p.x);
        self.min_y = self.min_y.min(p.y);
        self.max_y = self.max_y.max(p.y);
        self
    }

    fn dispersion(&self) -> T {
        (self.max_x - self.min_x) + (self.max_y - self.min_y)
    }
}

#[derive(Debug, Clone)]
struct OpenFixation<T> {
    t_start: f64,
    t_last: f64,
    bbox: BBox<T>,
    sum_x: T,
    sum_y: T,
    n: usize,
}

impl<T: Scalar> OpenFixation<T> {
    fn centroid(&self) -> (T, T) {
        let n = T::from_count(self.n);
        (self.sum_x / n, self.sum_y / n)
    }

    fn close(&self) -> Fixation<T> {
        let (cx, cy) = self.centroid();
        Fixation {
            t_start: self.t_start,
            t_end: self.t_last,
            duration: T::lit(self.t_last - self.t_start),
            centroid_x: cx,
            centroid_y: cy,
            n_samples: self.n,
        }
    }
}

/// Incremental I-DT segmentation for one user's time-ordered stream.
#[derive(Debug, Clone)]
pub struct FixationDetector<T> {
    threshold: T,
    min_duration: f64,
    max_gap: f64,
    screen: Option<Screen>,
    pending: VecDeque<Point<T>>,
    open: Option<OpenFixation<T>>,
    previous: Option<(f64, T, T)>,
    last_t: Option<f64>,
    pushed: usize,
    out: Vec<GazeEvent<T>>,
}

enum Scan {
    Confirmed(usize),
    GapAt(usize),
    TooDispersed,
    NeedMore,
}

impl<T: Scalar> FixationDetector<T> {
    pub fn new(cfg: &DetectorConfig) -> Result<Self, MeasureError> {
        cfg.validate()?;
        Ok(Self {
            threshold: T::lit(cfg.dispersion_threshold),
            min_duration: cfg.min_fixation_duration_ms,
            max_gap: cfg.max_gap_ms,
            screen: cfg.screen,
            pending: VecDeque::new(),
            open: None,
            previous: None,
            last_t: None,
            pushed: 0,
            out: Vec::new(),
        })
    }

    /// Feeds one sample. Invalid samples advance the ordering check only.
    pub fn push(&mut self, sample: &GazeSample<T>) -> Result<(), MeasureError> {
        let index = self.pushed;
        self.pushed += 1;
        if !sample.t_origin.is_finite() || self.last_t.is_some_and(|t| sample.t_origin < t) {
            return Err(MeasureError::Ordering { index });
        }
        self.last_t = Some(sample.t_origin);
        if !sample.gaze_valid(self.screen.as_ref()) {
            return Ok(());
        }
        self.push_point(Point { t: sample.t_origin, x: sample.x, y: sample.y });
        Ok(())
    }

    /// Closes any open fixation. Trailing samples that never formed one are
    /// discarded.
    pub fn finish(&mut self) {
        if let Some(open) = self.open.take() {
            self.close(open);
        }
        self.pending.clear();
    }

    /// Events completed so far, in time order.
    pub fn take_events(&mut self) -> Vec<GazeEvent<T>> {
        std::mem::take(&mut self.out)
    }

    /// Every event emitted from now on ends at or after this time.
    pub fn horizon(&self) -> Option<f64> {
        if let Some(open) = &self.open {
            return Some(open.t_last);
        }
        self.pending.front().map(|p| p.t).or(self.last_t)
    }

    fn push_point(&mut self, p: Point<T>) {
        if let Some(open) = self.open.as_mut() {
            let bbox = open.bbox.with(&p);
            if p.t - open.t_last <= self.max_gap && bbox.dispersion() <= self.threshold {
                open.bbox = bbox;
                open.t_last = p.t;
                open.sum_x = open.sum_x + p.x;
                open.sum_y = open.sum_y + p.y;
                open.n += 1;
                return;
            }
            let open = self.open.take().expect("open fixation");
            self.close(open);
        }
        self.pending.push_back(p);
        self.try_confirm();
    }

    fn scan(&self) -> Scan {
        let Some(first) = self.pending.front() else {
            return Scan::NeedMore;
        };
        let mut bbox = BBox::of(first);
        for k in 1..self.pending.len() {
            let (prev, cur) = (&self.pending[k - 1], &self.pending[k]);
            if cur.t - prev.t > self.max_gap {
                return Scan::GapAt(k);
            }
            bbox = bbox.with(cur);
            if bbox.dispersion() > self.threshold {
                return Scan::TooDispersed;
            }
            if cur.t - first.t >= self.min_duration {
                return Scan::Confirmed(k);
            }
        }
        Scan::NeedMore
    }

    fn try_confirm(&mut self) {
        loop {
            match self.scan() {
                Scan::NeedMore => return,
                Scan::TooDispersed => {
                    self.pending.pop_front();
                }
                Scan::GapAt(k) => {
                    self.pending.drain(..k);
                }
                Scan::Confirmed(k) => {
                    let rest = self.pending.split_off(k + 1);
                    let members = std::mem::take(&mut self.pending);
                    self.open_fixation(members);
                    for p in rest {
                        self.push_point(p);
                    }
                    return;
                }
            }
        }
    }

    fn open_fixation(&mut self, members: VecDeque<Point<T>>) {
        let first = members[0];
        let mut open = OpenFixation {
            t_start: first.t,
            t_last: first.t,
            bbox: BBox::of(&first),
            sum_x: T::zero(),
            sum_y: T::zero(),
            n: 0,
        };
        for p in &members {
            open.bbox = open.bbox.with(p);
            open.t_last = p.t;
            open.sum_x = open.sum_x + p.x;
            open.sum_y = open.sum_y + p.y;
            open.n += 1;
        }
        if let Some((t_end, px, py)) = self.previous {
            let (cx, cy) = open.centroid();
            self.out.push(GazeEvent::Saccade(Saccade {
                t_start: t_end,
                t_end: open.t_start,
                duration: T::lit(open.t_start - t_end),
                amplitude: (cx - px).hypot(cy - py),
            }));
        }
        self.open = Some(open);
    }

    fn close(&mut self, open: OpenFixation<T>) {
        let fixation = open.close();
        self.previous = Some((fixation.t_end, fixation.centroid_x, fixation.centroid_y));
        self.out.push(GazeEvent::Fixation(fixation));
    }
}

/// Segments a complete, time-ordered single-user sample sequence.
pub fn detect_events<T: Scalar>(
    samples: &[GazeSample<T>],
    cfg: &DetectorConfig,
) -> Result<Vec<GazeEvent<T>>, MeasureError> {
    let mut detector = FixationDetector::new(cfg)?;
    for s in samples {
        detector.push(s)?;
    }
    detector.finish();
    Ok(detector.take_events())
}
