//! Per-session stream processing: reorder, detect, window, aggregate.
//!
//! Window boundaries live on a fixed grid of the offset-corrected sender
//! clock, `t0 + j * stride` for K and `t0 + b * T` for RIPA, so arrival
//! timing never changes which samples a window holds. A user's K window is
//! finalised once its fixation detector can no longer emit events ending
//! inside it; a RIPA window once a sample from a later window arrives. Group
//! windows are emitted in grid order when every user has reported, or after
//! `group_timeout` of arrival time, in which case missing users count as
//! absent.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::channel::{Channel, MeasurePoint, MeasureValue};
use super::config::{ConfigError, SessionConfig};
use crate::measures::{
    experiment_k, group_k, traditional_measures, window_k, FixationDetector, GazeEvent, GazeSample, KValue, Scope,
    TimeWindow,
};
use crate::restream::{RecordingMeta, RecordingRow, SessionRecording};
use crate::ripa::{experiment_ripa, group_ripa, preprocess_pupil, RipaEngine, RipaValue};
use crate::stats::mean_std;
use crate::transport::{Envelope, LatencyAccumulator, LatencyStats, ReorderNotice, Reorderer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionNotice {
    Reorder(ReorderNotice),
    /// Sample from a user outside the configured roster; reported once per
    /// user, every such sample is ignored.
    UnknownUser { user_id: String },
    /// Envelope addressed to another session.
    ForeignSession { session_id: String, user_id: String },
    /// Sample whose timestamp does not advance past the user's previous one.
    TimeRegression { user_id: String, seq: u64, t: f64 },
    /// Window report that arrived after its group window was emitted.
    LateGroupReport { channel: String, user_id: String, t: f64 },
    /// Input after the session was finished.
    Closed { user_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSummary {
    pub user_id: String,
    pub samples: usize,
    /// Windowed K values that were present.
    pub k_windows: usize,
    /// Experiment-level K, the mean of present windowed values.
    pub experiment_k: Option<f64>,
    pub k_std: Option<f64>,
    pub ripa_windows: usize,
    pub experiment_ripa: Option<f64>,
    pub ripa_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub users: Vec<UserSummary>,
    /// Mean of the per-user experiment K values.
    pub group_k: Option<f64>,
    /// Population std of the emitted group K series.
    pub group_k_std: Option<f64>,
    /// Mean of the per-user experiment RIPA values.
    pub group_ripa: Option<f64>,
    pub group_ripa_std: Option<f64>,
    pub total_time_s: f64,
    pub latency: Option<LatencyStats>,
    pub samples_accepted: usize,
    pub notices: usize,
    pub finished: bool,
}

struct UserState {
    offset: f64,
    detector: FixationDetector<f64>,
    events: Vec<GazeEvent<f64>>,
    next_k: Option<i64>,
    first_t: Option<f64>,
    last_t: Option<f64>,
    bucket: Option<(i64, Vec<GazeSample<f64>>)>,
    first_bucket: i64,
    k_values: Vec<KValue<f64>>,
    ripa_values: Vec<RipaValue<f64>>,
    rows: Vec<RecordingRow>,
}

#[derive(Debug)]
struct Slot {
    t_end: f64,
    opened_at: f64,
    values: BTreeMap<String, Option<f64>>,
}

/// Collects per-user window results and releases group windows in order.
#[derive(Debug)]
struct GroupAggregator {
    timeout: f64,
    slots: BTreeMap<i64, Slot>,
    /// Highest window index each user has fully reported.
    watermark: BTreeMap<String, i64>,
    finished: BTreeSet<String>,
    emitted_through: Option<i64>,
}

impl GroupAggregator {
    fn new(timeout: f64) -> Self {
        Self {
            timeout,
            slots: BTreeMap::new(),
            watermark: BTreeMap::new(),
            finished: BTreeSet::new(),
            emitted_through: None,
        }
    }

    /// A user whose first window is `first` has nothing to add before it.
    fn start(&mut self, user: &str, first: i64) {
        self.watermark.entry(user.into()).or_insert(first - 1);
    }

    /// Returns false when the group window was already emitted.
    fn report(&mut self, user: &str, index: i64, t_end: f64, value: Option<f64>, now: f64) -> bool {
        self.watermark.insert(user.into(), index);
        if self.emitted_through.is_some_and(|e| index <= e) {
            return false;
        }
        let slot = self.slots.entry(index).or_insert_with(|| Slot { t_end, opened_at: now, values: BTreeMap::new() });
        slot.values.insert(user.into(), value);
        true
    }

    fn finish_user(&mut self, user: &str) {
        self.finished.insert(user.into());
    }

    fn ready(&mut self, roster: &[String], now: f64) -> Vec<(i64, Slot)> {
        let mut out = Vec::new();
        while let Some((&index, slot)) = self.slots.iter().next() {
            let complete = roster
                .iter()
                .all(|u| self.finished.contains(u) || self.watermark.get(u).is_some_and(|&w| w >= index));
            if !complete && now - slot.opened_at < self.timeout {
                break;
            }
            let slot = self.slots.remove(&index).expect("present");
            self.emitted_through = Some(index);
            out.push((index, slot));
        }
        out
    }
}

pub struct SessionPipeline {
    cfg: SessionConfig,
    ripa: RipaEngine<f64>,
    reorder: Reorderer,
    roster: Vec<String>,
    users: BTreeMap<String, UserState>,
    k_group: GroupAggregator,
    ripa_group: GroupAggregator,
    group_k_series: Vec<f64>,
    group_ripa_series: Vec<f64>,
    latency: LatencyAccumulator,
    outbox: Vec<MeasurePoint>,
    notices: Vec<SessionNotice>,
    warned: BTreeSet<String>,
    now: f64,
    accepted: usize,
    finished: bool,
    stopped_at: Option<f64>,
}

impl SessionPipeline {
    pub fn new(cfg: SessionConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let ripa = RipaEngine::new(cfg.ripa.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let timeout = cfg.group_timeout();
        let mut pipeline = Self {
            ripa,
            reorder: Reorderer::new(cfg.reorder.clone()),
            roster: Vec::new(),
            users: BTreeMap::new(),
            k_group: GroupAggregator::new(timeout),
            ripa_group: GroupAggregator::new(timeout),
            group_k_series: Vec::new(),
            group_ripa_series: Vec::new(),
            latency: LatencyAccumulator::new(),
            outbox: Vec::new(),
            notices: Vec::new(),
            warned: BTreeSet::new(),
            now: f64::NEG_INFINITY,
            accepted: 0,
            finished: false,
            stopped_at: None,
            cfg,
        };
        for u in pipeline.cfg.user_ids.clone() {
            pipeline.admit(&u)?;
        }
        Ok(pipeline)
    }

    /// Pipeline configured to reproduce the analytics of a recording.
    pub fn for_recording(rec: &SessionRecording, base: &SessionConfig) -> Result<Self, ConfigError> {
        let mut cfg = base.clone();
        cfg.session_id = rec.meta.session_id.clone();
        cfg.user_ids = rec.meta.user_ids.clone();
        cfg.screen = rec.meta.screen;
        cfg.nominal_rate_hz = rec.meta.nominal_rate_hz;
        cfg.offsets = rec.meta.offsets.clone();
        Self::new(cfg)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn users(&self) -> &[String] {
        &self.roster
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    fn admit(&mut self, user: &str) -> Result<(), ConfigError> {
        if self.users.contains_key(user) {
            return Ok(());
        }
        let detector = FixationDetector::new(&self.cfg.detector).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.users.insert(
            user.into(),
            UserState {
                offset: self.cfg.offsets.get(user).copied().unwrap_or(0.0),
                detector,
                events: Vec::new(),
                next_k: None,
                first_t: None,
                last_t: None,
                bucket: None,
                first_bucket: 0,
                k_values: Vec::new(),
                ripa_values: Vec::new(),
                rows: Vec::new(),
            },
        );
        self.roster.push(user.into());
        Ok(())
    }

    fn notice(&mut self, n: SessionNotice) {
        warn!(session = %self.cfg.session_id, notice = ?n, "session notice");
        self.notices.push(n);
    }

    fn advance_clock(&mut self, now: f64) {
        if now > self.now {
            self.now = now;
        }
    }

    /// Feeds one received envelope. `arrival_ms` is the receiver clock.
    pub fn ingest(&mut self, env: Envelope, arrival_ms: f64) {
        self.advance_clock(arrival_ms);
        if self.finished {
            self.notice(SessionNotice::Closed { user_id: env.user_id });
            return;
        }
        if env.session_id != self.cfg.session_id {
            self.notice(SessionNotice::ForeignSession { session_id: env.session_id, user_id: env.user_id });
            return;
        }
        if !self.users.contains_key(&env.user_id) {
            if self.cfg.user_ids.is_empty() {
                self.admit(&env.user_id).expect("detector config validated at construction");
            } else {
                if self.warned.insert(env.user_id.clone()) {
                    self.notice(SessionNotice::UnknownUser { user_id: env.user_id });
                }
                return;
            }
        }
        let released = self.reorder.push(env, arrival_ms);
        self.absorb(released.emitted, released.notices, arrival_ms);
        self.release_groups();
    }

    /// Advances the receiver clock: expires reorder waits and group timeouts.
    pub fn poll(&mut self, now_ms: f64) {
        self.advance_clock(now_ms);
        if self.finished {
            return;
        }
        let released = self.reorder.poll(now_ms);
        self.absorb(released.emitted, released.notices, now_ms);
        self.release_groups();
    }

    /// Marks a proctor stop; completion time is measured up to here.
    pub fn stop(&mut self, now_ms: f64) {
        self.stopped_at.get_or_insert(now_ms);
        self.finish();
    }

    /// End of input: drains buffers, closes open windows and emits every
    /// remaining group window.
    pub fn finish(&mut self) {
        if self.finished {
            return;
        }
        let released = self.reorder.flush();
        let now = self.now;
        self.absorb(released.emitted, released.notices, now);
        let roster = self.roster.clone();
        for user in &roster {
            self.finish_user(user);
        }
        self.release_groups();
        self.finished = true;
    }

    fn absorb(&mut self, emitted: Vec<Envelope>, notices: Vec<ReorderNotice>, arrival_ms: f64) {
        for n in notices {
            self.notice(SessionNotice::Reorder(n));
        }
        for env in emitted {
            self.accept(env, arrival_ms);
        }
    }

    fn accept(&mut self, env: Envelope, arrival_ms: f64) {
        let user_id = env.user_id.clone();
        let st = self.users.get_mut(&user_id).expect("admitted");
        let t = env.t_origin + st.offset;
        if st.last_t.is_some_and(|last| t <= last) {
            let n = SessionNotice::TimeRegression { user_id, seq: env.seq, t: env.t_origin };
            self.notice(n);
            return;
        }
        let mut sample = env.to_sample();
        sample.t_origin = t;
        if st.detector.push(&sample).is_err() {
            // unreachable after the regression check; keep the stream alive
            return;
        }
        st.rows.push(RecordingRow::from_envelope(&env, Some(arrival_ms)));
        self.accepted += 1;
        self.latency.record(t, arrival_ms);

        let stride = self.cfg.k_stride_ms;
        let t0 = self.cfg.t0_ms;
        if st.first_t.is_none() {
            st.first_t = Some(t);
            // first windows lying entirely inside the user's data
            let j0 = ((t - t0) / stride).ceil() as i64;
            st.next_k = Some(j0);
            self.k_group.start(&user_id, j0);
            let b0 = ((t - t0) / self.cfg.ripa_window_ms()).ceil() as i64;
            st.first_bucket = b0;
            self.ripa_group.start(&user_id, b0);
        }
        st.last_t = Some(t);

        self.step_ripa(&user_id, sample);
        self.step_k(&user_id, false);
    }

    fn k_window(&self, j: i64) -> TimeWindow {
        let start = self.cfg.t0_ms + j as f64 * self.cfg.k_stride_ms;
        TimeWindow::new(start, start + self.cfg.k_window_ms)
    }

    /// Finalises every K window the user's data has moved past. At the end of
    /// input, windows ending at or before the last sample are closed too.
    fn step_k(&mut self, user_id: &str, at_end: bool) {
        loop {
            let st = &self.users[user_id];
            let Some(j) = st.next_k else { return };
            let window = self.k_window(j);
            let done = if at_end {
                st.last_t.is_some_and(|t| window.end <= t)
            } else {
                st.detector.horizon().is_some_and(|h| h >= window.end)
            };
            if !done {
                return;
            }
            self.finalize_k(user_id, j, window);
        }
    }

    fn finalize_k(&mut self, user_id: &str, j: i64, window: TimeWindow) {
        let scope = Scope::User(user_id.into());
        let st = self.users.get_mut(user_id).expect("admitted");
        st.events.extend(st.detector.take_events());
        let k = window_k(&st.events, window, scope).expect("detector output is time ordered");
        let trad = traditional_measures(&st.events, window).expect("detector output is time ordered");
        st.next_k = Some(j + 1);
        // events ending before the next window can no longer matter
        let next_start = window.start + self.cfg.k_stride_ms;
        st.events.retain(|e| e.t_end() >= next_start);
        let value = k.as_ref().map(|k| k.value);
        if let Some(k) = k {
            st.k_values.push(k);
        }

        let trad_v = if trad.is_empty() { MeasureValue::Absent } else { MeasureValue::Traditional(trad) };
        self.outbox.push(MeasurePoint::new(Channel::Traditional(user_id.into()), window.end, trad_v));
        self.outbox.push(MeasurePoint::new(Channel::KUser(user_id.into()), window.end, to_value(value)));
        if !self.k_group.report(user_id, j, window.end, value, self.now) {
            let n = SessionNotice::LateGroupReport { channel: "k.group".into(), user_id: user_id.into(), t: window.end };
            self.notice(n);
        }
    }

    fn step_ripa(&mut self, user_id: &str, sample: GazeSample<f64>) {
        let period = self.cfg.ripa_window_ms();
        let b = ((sample.t_origin - self.cfg.t0_ms) / period).floor() as i64;
        let st = self.users.get_mut(user_id).expect("admitted");
        if b < st.first_bucket {
            return;
        }
        match st.bucket.take() {
            Some((cur, mut samples)) if cur == b => {
                samples.push(sample);
                st.bucket = Some((cur, samples));
            }
            Some((cur, samples)) => {
                st.bucket = Some((b, vec![sample]));
                self.finalize_ripa(user_id, cur, &samples, true);
                for skipped in cur + 1..b {
                    self.finalize_ripa(user_id, skipped, &[], true);
                }
            }
            None => st.bucket = Some((b, vec![sample])),
        }
    }

    /// RIPA of one grid window from the first `window_samples` diameters of a
    /// contiguous cleaned run. With `emit_absent` false a window without such
    /// a run is dropped silently (trailing partial window).
    fn finalize_ripa(&mut self, user_id: &str, b: i64, samples: &[GazeSample<f64>], emit_absent: bool) {
        let f = self.cfg.ripa.window_samples;
        let t_end = self.cfg.t0_ms + (b + 1) as f64 * self.cfg.ripa_window_ms();
        let value = preprocess_pupil(samples, &self.cfg.ripa)
            .into_iter()
            .find(|seg| seg.len() >= f)
            .map(|seg| self.ripa.window(&seg.values[..f]).expect("window length checked"));
        if value.is_none() && !emit_absent {
            return;
        }
        let st = self.users.get_mut(user_id).expect("admitted");
        if let Some(v) = value {
            st.ripa_values.push(RipaValue { t_window_end: t_end, scope: Scope::User(user_id.into()), value: v });
        }
        self.outbox.push(MeasurePoint::new(Channel::RipaUser(user_id.into()), t_end, to_value(value)));
        if !self.ripa_group.report(user_id, b, t_end, value, self.now) {
            let n = SessionNotice::LateGroupReport { channel: "ripa.group".into(), user_id: user_id.into(), t: t_end };
            self.notice(n);
        }
    }

    fn finish_user(&mut self, user_id: &str) {
        let st = self.users.get_mut(user_id).expect("admitted");
        st.detector.finish();
        self.step_k(user_id, true);
        let st = self.users.get_mut(user_id).expect("admitted");
        if let Some((b, samples)) = st.bucket.take() {
            self.finalize_ripa(user_id, b, &samples, false);
        }
        self.k_group.finish_user(user_id);
        self.ripa_group.finish_user(user_id);
    }

    fn release_groups(&mut self) {
        let now = if self.finished { f64::INFINITY } else { self.now };
        for (_, slot) in self.k_group.ready(&self.roster, now) {
            let values: Vec<KValue<f64>> = present(&slot)
                .map(|(u, v)| KValue { t_window_end: slot.t_end, scope: Scope::User(u.into()), value: v, n_pairs: 0 })
                .collect();
            let g = group_k(&values).expect("one value per user").map(|k| k.value);
            self.group_k_series.extend(g);
            self.outbox.push(MeasurePoint::new(Channel::KGroup, slot.t_end, to_value(g)));
        }
        for (_, slot) in self.ripa_group.ready(&self.roster, now) {
            let values: Vec<RipaValue<f64>> = present(&slot)
                .map(|(u, v)| RipaValue { t_window_end: slot.t_end, scope: Scope::User(u.into()), value: v })
                .collect();
            let g = group_ripa(&values).expect("one value per user").map(|r| r.value);
            self.group_ripa_series.extend(g);
            self.outbox.push(MeasurePoint::new(Channel::RipaGroup, slot.t_end, to_value(g)));
        }
    }

    /// Points produced since the last call, in production order.
    pub fn drain_points(&mut self) -> Vec<MeasurePoint> {
        std::mem::take(&mut self.outbox)
    }

    pub fn notices(&self) -> &[SessionNotice] {
        &self.notices
    }

    pub fn samples_accepted(&self) -> usize {
        self.accepted
    }

    pub fn summary(&self) -> SessionSummary {
        let mut users = Vec::new();
        let mut user_k = Vec::new();
        let mut user_ripa = Vec::new();
        for u in &self.roster {
            let st = &self.users[u];
            let ek = experiment_k(&st.k_values).expect("single scope");
            let er = experiment_ripa(&st.ripa_values).expect("single scope");
            let k_series: Vec<f64> = st.k_values.iter().map(|k| k.value).collect();
            let r_series: Vec<f64> = st.ripa_values.iter().map(|r| r.value).collect();
            users.push(UserSummary {
                user_id: u.clone(),
                samples: st.rows.len(),
                k_windows: k_series.len(),
                experiment_k: ek.as_ref().map(|k| k.value),
                k_std: mean_std(&k_series).map(|(_, s)| s),
                ripa_windows: r_series.len(),
                experiment_ripa: er.as_ref().map(|r| r.value),
                ripa_std: mean_std(&r_series).map(|(_, s)| s),
            });
            user_k.extend(ek);
            user_ripa.extend(er);
        }
        let first = self.users.values().filter_map(|s| s.first_t).fold(f64::INFINITY, f64::min);
        let last = self.users.values().filter_map(|s| s.last_t).fold(f64::NEG_INFINITY, f64::max);
        let total_time_s = match (first.is_finite(), self.stopped_at) {
            (false, _) => 0.0,
            (true, Some(stop)) => ((stop - first) / 1000.0).max(0.0),
            (true, None) => (last - first) / 1000.0,
        };
        SessionSummary {
            session_id: self.cfg.session_id.clone(),
            users,
            group_k: group_k(&user_k).expect("one value per user").map(|k| k.value),
            group_k_std: mean_std(&self.group_k_series).map(|(_, s)| s),
            group_ripa: group_ripa(&user_ripa).expect("one value per user").map(|r| r.value),
            group_ripa_std: mean_std(&self.group_ripa_series).map(|(_, s)| s),
            total_time_s,
            latency: self.latency.stats(),
            samples_accepted: self.accepted,
            notices: self.notices.len(),
            finished: self.finished,
        }
    }

    /// Every accepted sample with its raw sender timestamp and arrival time.
    pub fn recording(&self) -> SessionRecording {
        let mut rows: Vec<RecordingRow> =
            self.roster.iter().flat_map(|u| self.users[u].rows.iter().cloned()).collect();
        rows.sort_by(|a, b| a.t.total_cmp(&b.t));
        let offsets = self.users.iter().filter(|(_, s)| s.offset != 0.0).map(|(u, s)| (u.clone(), s.offset)).collect();
        SessionRecording {
            meta: RecordingMeta {
                session_id: self.cfg.session_id.clone(),
                screen: self.cfg.screen,
                nominal_rate_hz: self.cfg.nominal_rate_hz,
                user_ids: self.roster.clone(),
                offsets,
            },
            rows,
        }
    }
}

fn present(slot: &Slot) -> impl Iterator<Item = (&str, f64)> {
    slot.values.iter().filter_map(|(u, v)| v.map(|v| (u.as_str(), v)))
}

fn to_value(v: Option<f64>) -> MeasureValue {
    v.map_or(MeasureValue::Absent, MeasureValue::Number)
}
