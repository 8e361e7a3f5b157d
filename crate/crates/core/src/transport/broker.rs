//! Minimal in-process publish/subscribe with MQTT topic semantics.
//!
//! Filters use `/`-separated levels, `+` for one level and a trailing `#` for
//! any remainder. Topics follow `adt/<session>/gaze/<user>` for samples and
//! `adt/<session>/ctl` for control messages.

use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub topic: String,
    pub payload: Vec<u8>,
}

pub fn gaze_topic(session_id: &str, user_id: &str) -> String {
    format!("adt/{session_id}/gaze/{user_id}")
}

pub fn ctl_topic(session_id: &str) -> String {
    format!("adt/{session_id}/ctl")
}

/// Splits a gaze topic into `(session, user)`.
pub fn parse_gaze_topic(topic: &str) -> Option<(&str, &str)> {
    let mut parts = topic.split('/');
    match (parts.next(), parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some("adt"), Some(s), Some("gaze"), Some(u), None) if !s.is_empty() && !u.is_empty() => Some((s, u)),
        _ => None,
    }
}

pub fn topic_matches(filter: &str, topic: &str) -> bool {
    let mut f = filter.split('/');
    let mut t = topic.split('/');
    loop {
        match (f.next(), t.next()) {
            (Some("#"), _) => return true,
            (Some("+"), Some(_)) => {}
            (Some(a), Some(b)) if a == b => {}
            (None, None) => return true,
            _ => return false,
        }
    }
}

struct Subscription {
    filter: String,
    tx: Sender<Message>,
}

#[derive(Clone, Default)]
pub struct Broker {
    subs: Arc<Mutex<Vec<Subscription>>>,
}

impl Broker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&self, filter: &str) -> Receiver<Message> {
        let (tx, rx) = channel();
        self.subs.lock().expect("broker lock").push(Subscription { filter: filter.to_owned(), tx });
        rx
    }

    /// Delivers to every matching live subscriber; returns how many got it.
    pub fn publish(&self, topic: &str, payload: impl Into<Vec<u8>>) -> usize {
        let payload = payload.into();
        let mut subs = self.subs.lock().expect("broker lock");
        let mut delivered = 0;
        subs.retain(|s| {
            if !topic_matches(&s.filter, topic) {
                return true;
            }
            let ok = s.tx.send(Message { topic: topic.to_owned(), payload: payload.clone() }).is_ok();
            delivered += ok as usize;
            ok
        });
        delivered
    }

    pub fn subscriber_count(&self) -> usize {
        self.subs.lock().expect("broker lock").len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wildcards() {
        assert!(topic_matches("adt/+/gaze/+", "adt/s1/gaze/A"));
        assert!(topic_matches("adt/s1/#", "adt/s1/ctl"));
        assert!(topic_matches("adt/s1/ctl", "adt/s1/ctl"));
        assert!(!topic_matches("adt/+/gaze/+", "adt/s1/ctl"));
        assert!(!topic_matches("adt/s1/gaze", "adt/s1/gaze/A"));
    }

    #[test]
    fn topic_helpers() {
        assert_eq!(gaze_topic("s1", "A"), "adt/s1/gaze/A");
        assert_eq!(parse_gaze_topic("adt/s1/gaze/A"), Some(("s1", "A")));
        assert_eq!(parse_gaze_topic(&ctl_topic("s1")), None);
        assert_eq!(parse_gaze_topic("adt/s1/gaze/A/x"), None);
    }

    #[test]
    fn fan_out_and_dead_subscribers() {
        let broker = Broker::new();
        let a = broker.subscribe("adt/s1/gaze/+");
        let b = broker.subscribe("adt/#");
        let c = broker.subscribe("adt/s2/#");
        assert_eq!(broker.publish("adt/s1/gaze/A", b"x".to_vec()), 2);
        assert_eq!(a.recv().unwrap().payload, b"x");
        assert_eq!(b.recv().unwrap().topic, "adt/s1/gaze/A");
        assert!(c.try_recv().is_err());
        drop(a);
        assert_eq!(broker.publish("adt/s1/gaze/B", "y"), 1);
        assert_eq!(broker.subscriber_count(), 2);
    }
}
