//! Four-timestamp clock offset estimate and the sync message exchange.
//!
//! The client stamps `t1` on send, the server `t2` on receipt and `t3` on
//! reply, the client `t4` on receipt. With symmetric path delays the offset
//! `((t2 - t1) + (t3 - t4)) / 2` is exact; otherwise it is off by half the
//! delay asymmetry. Drift over a session is assumed negligible.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::envelope::{get_f64, CodecError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockOffset {
    /// Added to the sender clock to obtain the receiver clock.
    pub offset_ms: f64,
    pub estimated_at: f64,
}

impl ClockOffset {
    pub const ZERO: ClockOffset = ClockOffset { offset_ms: 0.0, estimated_at: 0.0 };

    pub fn to_receiver(&self, t_sender: f64) -> f64 {
        t_sender + self.offset_ms
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClockError {
    #[error("client timestamps out of order: t1 = {t1} > t4 = {t4}")]
    ClientOrder { t1: f64, t4: f64 },
    #[error("server timestamps out of order: t2 = {t2} > t3 = {t3}")]
    ServerOrder { t2: f64, t3: f64 },
    #[error("non-finite timestamp")]
    NonFinite,
}

pub fn estimate_offset(t1: f64, t2: f64, t3: f64, t4: f64) -> Result<ClockOffset, ClockError> {
    if ![t1, t2, t3, t4].iter().all(|t| t.is_finite()) {
        return Err(ClockError::NonFinite);
    }
    if t1 > t4 {
        return Err(ClockError::ClientOrder { t1, t4 });
    }
    if t2 > t3 {
        return Err(ClockError::ServerOrder { t2, t3 });
    }
    Ok(ClockOffset { offset_ms: ((t2 - t1) + (t3 - t4)) / 2.0, estimated_at: t4 })
}

/// Round-trip delay excluding server processing time.
pub fn round_trip_delay(t1: f64, t2: f64, t3: f64, t4: f64) -> f64 {
    (t4 - t1) - (t3 - t2)
}

/// Messages on the control topic: `{"k":"syn","t1":..}` and
/// `{"k":"ack","t1":..,"t2":..,"t3":..}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyncMessage {
    Request { t1: f64 },
    Reply { t1: f64, t2: f64, t3: f64 },
}

impl SyncMessage {
    pub fn encode(&self) -> String {
        match *self {
            SyncMessage::Request { t1 } => serde_json::json!({ "k": "syn", "t1": t1 }),
            SyncMessage::Reply { t1, t2, t3 } => {
                serde_json::json!({ "k": "ack", "t1": t1, "t2": t2, "t3": t3 })
            }
        }
        .to_string()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let value: Value = serde_json::from_slice(bytes).map_err(|e| CodecError::Syntax(e.to_string()))?;
        let obj = value.as_object().ok_or_else(|| CodecError::Syntax("expected an object".into()))?;
        match obj.get("k").and_then(Value::as_str) {
            Some("syn") => Ok(SyncMessage::Request { t1: get_f64(obj, "t1", "t1")? }),
            Some("ack") => Ok(SyncMessage::Reply {
                t1: get_f64(obj, "t1", "t1")?,
                t2: get_f64(obj, "t2", "t2")?,
                t3: get_f64(obj, "t3", "t3")?,
            }),
            Some(_) => Err(CodecError::WrongType("k")),
            None => Err(CodecError::Missing("k")),
        }
    }

    /// Server side: answer a request received at `t2`, replying at `t3`.
    pub fn reply_to(&self, t2: f64, t3: f64) -> Option<SyncMessage> {
        match *self {
            SyncMessage::Request { t1 } => Some(SyncMessage::Reply { t1, t2, t3 }),
            SyncMessage::Reply { .. } => None,
        }
    }

    /// Client side: complete the estimate on receiving a reply at `t4`.
    pub fn complete(&self, t4: f64) -> Option<Result<ClockOffset, ClockError>> {
        match *self {
            SyncMessage::Reply { t1, t2, t3 } => Some(estimate_offset(t1, t2, t3, t4)),
            SyncMessage::Request { .. } => None,
        }
    }
}
