//! Sample transport: wire envelope, ordering recovery, clock offset and
//! latency accounting, plus an in-process broker.

pub mod broker;
pub mod clock;
pub mod envelope;
pub mod latency;
pub mod reorder;

pub use broker::{ctl_topic, gaze_topic, parse_gaze_topic, topic_matches, Broker, Message};
pub use clock::{estimate_offset, round_trip_delay, ClockError, ClockOffset, SyncMessage};
pub use envelope::{decode_envelope, encode_envelope, CodecError, Envelope, Payload};
pub use latency::{latency_stats, LatencyAccumulator, LatencyError, LatencyStats};
pub use reorder::{Released, ReorderConfig, ReorderNotice, Reorderer};
