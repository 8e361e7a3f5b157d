//! Timed replay of a recording.
//!
//! With `t0` the first row timestamp and `tau` the wall time since replay
//! started, every wake-up emits the rows with `t_i - t0 <= tau * speed` that
//! have not been emitted yet, in recording order. The scheduler wakes at the
//! next row's due time, sleeping at most one tick at a stretch, so a row's
//! lag behind its due time is only the clock's wake-up overshoot.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::recording::{RecordingRow, SessionRecording};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RestreamError {
    #[error("speed must be a positive finite number, got {0}")]
    Speed(f64),
    #[error("tick must be a positive finite number of milliseconds, got {0}")]
    Tick(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestreamOptions {
    pub speed: f64,
    pub tick_ms: f64,
}

impl Default for RestreamOptions {
    fn default() -> Self {
        Self { speed: 1.0, tick_ms: 50.0 }
    }
}

impl RestreamOptions {
    pub fn validate(&self) -> Result<(), RestreamError> {
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(RestreamError::Speed(self.speed));
        }
        if !(self.tick_ms.is_finite() && self.tick_ms > 0.0) {
            return Err(RestreamError::Tick(self.tick_ms));
        }
        Ok(())
    }
}

/// Position in a replay. Independent of any clock so async drivers can use it.
#[derive(Debug, Clone)]
pub struct ReplayCursor<'a> {
    rows: &'a [RecordingRow],
    t0: f64,
    speed: f64,
    next: usize,
}

impl<'a> ReplayCursor<'a> {
    pub fn new(rows: &'a [RecordingRow], speed: f64) -> Self {
        let t0 = rows.first().map_or(0.0, |r| r.t);
        Self { rows, t0, speed, next: 0 }
    }

    /// Rows due once `elapsed_ms` of wall time have passed.
    pub fn due(&mut self, elapsed_ms: f64) -> &'a [RecordingRow] {
        let horizon = elapsed_ms * self.speed;
        let start = self.next;
        while self.next < self.rows.len() && self.rows[self.next].t - self.t0 <= horizon {
            self.next += 1;
        }
        &self.rows[start..self.next]
    }

    /// Wall offset at which a row becomes due.
    pub fn due_at(&self, row: &RecordingRow) -> f64 {
        (row.t - self.t0) / self.speed
    }

    pub fn is_done(&self) -> bool {
        self.next >= self.rows.len()
    }

    pub fn emitted(&self) -> usize {
        self.next
    }
}

/// Source of wall time for the scheduler.
pub trait Clock {
    /// Milliseconds since an arbitrary fixed origin.
    fn now_ms(&self) -> f64;
    fn sleep_until_ms(&self, t: f64);
}

#[derive(Debug, Clone, Copy)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> f64 {
        self.origin.elapsed().as_secs_f64() * 1e3
    }

    fn sleep_until_ms(&self, t: f64) {
        let remaining = t - self.now_ms();
        if remaining > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(remaining / 1e3));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestreamReport {
    pub rows_emitted: usize,
    pub wall_ms: f64,
    /// Rows emitted before their due time, from the scheduler's own clock
    /// reads. Always zero unless the clock runs backwards.
    pub early: usize,
    /// Largest delay between a row's due time and its emission.
    pub max_lateness_ms: f64,
}

/// Replays `rec` on `clock`, handing each row to `sink` together with the
/// wall offset (ms since start) of its emission.
pub fn restream<C, F>(
    rec: &SessionRecording,
    opts: RestreamOptions,
    clock: &C,
    mut sink: F,
) -> Result<RestreamReport, RestreamError>
where
    C: Clock,
    F: FnMut(&RecordingRow, f64),
{
    opts.validate()?;
    let start = clock.now_ms();
    let mut cursor = ReplayCursor::new(&rec.rows, opts.speed);
    let mut report = RestreamReport { rows_emitted: 0, wall_ms: 0.0, early: 0, max_lateness_ms: 0.0 };
    loop {
        let elapsed = clock.now_ms() - start;
        for row in cursor.due(elapsed) {
            let due = cursor.due_at(row);
            if elapsed < due {
                report.early += 1;
            }
            report.max_lateness_ms = report.max_lateness_ms.max(elapsed - due);
            sink(row, elapsed);
            report.rows_emitted += 1;
        }
        if cursor.is_done() {
            break;
        }
        let next_due = cursor.due_at(&rec.rows[cursor.emitted()]);
        clock.sleep_until_ms(start + next_due.min(elapsed + opts.tick_ms));
    }
    report.wall_ms = clock.now_ms() - start;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::restream::recording::RecordingMeta;
    use std::cell::Cell;

    /// Deterministic clock that jumps straight to each requested wake-up.
    struct FakeClock {
        now: Cell<f64>,
        overshoot: f64,
    }

    impl Clock for FakeClock {
        fn now_ms(&self) -> f64 {
            self.now.get()
        }
        fn sleep_until_ms(&self, t: f64) {
            self.now.set(self.now.get().max(t + self.overshoot));
        }
    }

    fn rec(ts: &[f64]) -> SessionRecording {
        let mut r = SessionRecording::new(RecordingMeta {
            session_id: "s".into(),
            screen: Default::default(),
            nominal_rate_hz: 30.0,
            user_ids: vec!["A".into()],
            offsets: Default::default(),
        });
        for (i, &t) in ts.iter().enumerate() {
            r.rows.push(RecordingRow {
                t,
                user_id: "A".into(),
                seq: i as u64 + 1,
                x: 0.0,
                y: 0.0,
                pupil: 3.5,
                confidence: 1.0,
                received_at: None,
            });
        }
        r
    }

    #[test]
    fn schedule_walk_through() {
        let clock = FakeClock { now: Cell::new(1000.0), overshoot: 0.0 };
        let mut seen = Vec::new();
        let report = restream(&rec(&[0.0, 100.0, 200.0]), RestreamOptions::default(), &clock, |r, at| {
            seen.push((r.seq, at))
        })
        .unwrap();
        assert_eq!(seen, [(1, 0.0), (2, 100.0), (3, 200.0)]);
        assert_eq!(report.rows_emitted, 3);
        assert_eq!(report.early, 0);
    }

    #[test]
    fn late_wakeups_stay_within_a_tick() {
        let clock = FakeClock { now: Cell::new(0.0), overshoot: 7.0 };
        let mut seen = Vec::new();
        restream(&rec(&[0.0, 100.0, 200.0]), RestreamOptions::default(), &clock, |r, at| seen.push((r.seq, at)))
            .unwrap();
        for (seq, at) in seen {
            let due = (seq - 1) as f64 * 100.0;
            assert!(at >= due && at < due + 50.0, "row {seq} at {at}");
        }
    }

    #[test]
    fn speed_scales_wall_time() {
        let clock = FakeClock { now: Cell::new(0.0), overshoot: 0.0 };
        let report = restream(&rec(&[0.0, 100.0, 200.0]), RestreamOptions { speed: 2.0, tick_ms: 50.0 }, &clock, |_, _| {})
            .unwrap();
        assert!(report.wall_ms <= 150.0);
        assert_eq!(report.wall_ms, 100.0);
    }

    #[test]
    fn empty_completes_immediately() {
        let clock = FakeClock { now: Cell::new(0.0), overshoot: 0.0 };
        let report = restream(&rec(&[]), RestreamOptions::default(), &clock, |_, _| panic!("no rows")).unwrap();
        assert_eq!(report.rows_emitted, 0);
        assert_eq!(report.wall_ms, 0.0);
    }

    #[test]
    fn bad_options() {
        let clock = SystemClock::new();
        let r = rec(&[0.0]);
        assert_eq!(
            restream(&r, RestreamOptions { speed: 0.0, tick_ms: 50.0 }, &clock, |_, _| {}).unwrap_err(),
            RestreamError::Speed(0.0)
        );
        assert!(restream(&r, RestreamOptions { speed: 1.0, tick_ms: -1.0 }, &clock, |_, _| {}).is_err());
    }

    #[test]
    fn cursor_due_sets() {
        let r = rec(&[0.0, 100.0, 200.0, 200.0]);
        let mut c = ReplayCursor::new(&r.rows, 1.0);
        assert_eq!(c.due(0.0).len(), 1);
        assert_eq!(c.due(99.9).len(), 0);
        assert_eq!(c.due(250.0).len(), 3);
        assert!(c.is_done());
    }
}
