//! Restores per-user sequence order from out-of-order delivery.
//!
//! Each `(session, user)` stream has its own buffer. An envelope leaves the
//! buffer when it carries the next expected sequence number. If the buffer
//! fills up, or its oldest arrival has waited `max_wait_ms`, the missing
//! numbers up to the smallest buffered one are declared lost and reported as
//! a gap. Anything that arrives for a sequence number already emitted,
//! buffered or skipped is dropped with a notice.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::envelope::Envelope;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReorderConfig {
    pub capacity: usize,
    pub max_wait_ms: f64,
    /// Sequence number expected first on every stream.
    pub first_seq: u64,
}

impl Default for ReorderConfig {
    fn default() -> Self {
        Self { capacity: 64, max_wait_ms: 500.0, first_seq: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReorderNotice {
    /// Sequence numbers `first..=last` were skipped.
    Gap { user_id: String, first: u64, last: u64 },
    /// Already emitted or already buffered.
    Duplicate { user_id: String, seq: u64 },
    /// Arrived after its number had been skipped.
    Late { user_id: String, seq: u64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Released {
    pub emitted: Vec<Envelope>,
    pub notices: Vec<ReorderNotice>,
}

impl Released {
    fn extend(&mut self, other: Released) {
        self.emitted.extend(other.emitted);
        self.notices.extend(other.notices);
    }
}

#[derive(Debug, Clone)]
struct StreamBuffer {
    user_id: String,
    next: u64,
    pending: BTreeMap<u64, (Envelope, f64)>,
    skipped: Vec<(u64, u64)>,
}

impl StreamBuffer {
    fn new(user_id: &str, first_seq: u64) -> Self {
        Self { user_id: user_id.to_owned(), next: first_seq, pending: BTreeMap::new(), skipped: Vec::new() }
    }

    fn was_skipped(&self, seq: u64) -> bool {
        self.skipped.iter().any(|&(a, b)| (a..=b).contains(&seq))
    }

    fn drain_ready(&mut self, out: &mut Released) {
        while let Some((env, _)) = self.pending.remove(&self.next) {
            out.emitted.push(env);
            self.next += 1;
        }
    }

    fn skip_to_first_pending(&mut self, out: &mut Released) {
        let Some(&first) = self.pending.keys().next() else {
            return;
        };
        if first > self.next {
            out.notices.push(ReorderNotice::Gap {
                user_id: self.user_id.clone(),
                first: self.next,
                last: first - 1,
            });
            self.skipped.push((self.next, first - 1));
            self.next = first;
        }
        self.drain_ready(out);
    }

    fn oldest_arrival(&self) -> Option<f64> {
        self.pending.values().map(|(_, a)| *a).reduce(f64::min)
    }

    fn release_expired(&mut self, cfg: &ReorderConfig, now_ms: f64, out: &mut Released) {
        while self.oldest_arrival().is_some_and(|a| now_ms - a >= cfg.max_wait_ms) {
            self.skip_to_first_pending(out);
        }
    }
}

/// Reorder buffers for every stream of a session.
#[derive(Debug, Clone)]
pub struct Reorderer {
    cfg: ReorderConfig,
    streams: BTreeMap<(String, String), StreamBuffer>,
}

impl Reorderer {
    pub fn new(cfg: ReorderConfig) -> Self {
        assert!(cfg.capacity >= 1, "reorder capacity must be at least 1");
        Self { cfg, streams: BTreeMap::new() }
    }

    pub fn config(&self) -> &ReorderConfig {
        &self.cfg
    }

    pub fn push(&mut self, env: Envelope, arrival_ms: f64) -> Released {
        let mut out = Released::default();
        let key = (env.session_id.clone(), env.user_id.clone());
        let first_seq = self.cfg.first_seq;
        let stream = self.streams.entry(key).or_insert_with(|| StreamBuffer::new(&env.user_id, first_seq));
        let seq = env.seq;
        if seq < stream.next || stream.pending.contains_key(&seq) {
            let user_id = env.user_id;
            out.notices.push(if stream.was_skipped(seq) {
                ReorderNotice::Late { user_id, seq }
            } else {
                ReorderNotice::Duplicate { user_id, seq }
            });
        } else {
            stream.pending.insert(seq, (env, arrival_ms));
            stream.drain_ready(&mut out);
            while stream.pending.len() >= self.cfg.capacity {
                stream.skip_to_first_pending(&mut out);
            }
        }
        stream.release_expired(&self.cfg, arrival_ms, &mut out);
        out
    }

    /// Releases streams whose oldest buffered envelope has waited too long.
    pub fn poll(&mut self, now_ms: f64) -> Released {
        let mut out = Released::default();
        for stream in self.streams.values_mut() {
            stream.release_expired(&self.cfg, now_ms, &mut out);
        }
        out
    }

    /// End of input: everything still buffered is released, with gaps.
    pub fn flush(&mut self) -> Released {
        let mut out = Released::default();
        for stream in self.streams.values_mut() {
            while !stream.pending.is_empty() {
                let mut part = Released::default();
                stream.skip_to_first_pending(&mut part);
                out.extend(part);
            }
        }
        out
    }

    pub fn buffered(&self) -> usize {
        self.streams.values().map(|s| s.pending.len()).sum()
    }
}
