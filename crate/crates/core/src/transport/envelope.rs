//! Wire envelope for one gaze sample.
//!
//! One UTF-8 JSON object per message:
//! `{"s":session,"u":user,"q":seq,"t":origin_ms,"x":..,"y":..,"p":pupil,"c":confidence}`.
//! Field order is not significant and unknown fields are ignored.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::measures::GazeSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub x: f64,
    pub y: f64,
    pub pupil_diameter: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub session_id: String,
    pub user_id: String,
    pub seq: u64,
    /// Sender clock, milliseconds since the epoch.
    pub t_origin: f64,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("malformed envelope: {0}")]
    Syntax(String),
    #[error("missing field {0}")]
    Missing(&'static str),
    #[error("field {0} has the wrong type")]
    WrongType(&'static str),
    #[error("field {0} is not finite")]
    NonFinite(&'static str),
}

impl CodecError {
    /// Long name of the offending field, if the error concerns one.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            CodecError::Missing(f) | CodecError::WrongType(f) | CodecError::NonFinite(f) => Some(f),
            CodecError::Syntax(_) => None,
        }
    }
}

impl Envelope {
    pub fn from_sample(session_id: impl Into<String>, sample: &GazeSample<f64>) -> Self {
        Self {
            session_id: session_id.into(),
            user_id: sample.user_id.clone(),
            seq: sample.seq,
            t_origin: sample.t_origin,
            payload: Payload {
                x: sample.x,
                y: sample.y,
                pupil_diameter: sample.pupil_diameter,
                confidence: sample.confidence,
            },
        }
    }

    pub fn to_sample(&self) -> GazeSample<f64> {
        GazeSample {
            user_id: self.user_id.clone(),
            seq: self.seq,
            t_origin: self.t_origin,
            x: self.payload.x,
            y: self.payload.y,
            pupil_diameter: self.payload.pupil_diameter,
            confidence: self.payload.confidence,
        }
    }

    fn numbers(&self) -> [(&'static str, f64); 5] {
        [
            ("t_origin", self.t_origin),
            ("x", self.payload.x),
            ("y", self.payload.y),
            ("pupil_diameter", self.payload.pupil_diameter),
            ("confidence", self.payload.confidence),
        ]
    }
}

pub fn encode_envelope(e: &Envelope) -> Result<String, CodecError> {
    if let Some((name, _)) = e.numbers().iter().find(|(_, v)| !v.is_finite()) {
        return Err(CodecError::NonFinite(name));
    }
    let value = serde_json::json!({
        "s": e.session_id,
        "u": e.user_id,
        "q": e.seq,
        "t": e.t_origin,
        "x": e.payload.x,
        "y": e.payload.y,
        "p": e.payload.pupil_diameter,
        "c": e.payload.confidence,
    });
    Ok(value.to_string())
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, name: &'static str) -> Result<&'a Value, CodecError> {
    obj.get(key).ok_or(CodecError::Missing(name))
}

pub(crate) fn get_str(obj: &Map<String, Value>, key: &str, name: &'static str) -> Result<String, CodecError> {
    field(obj, key, name)?.as_str().map(str::to_owned).ok_or(CodecError::WrongType(name))
}

pub(crate) fn get_f64(obj: &Map<String, Value>, key: &str, name: &'static str) -> Result<f64, CodecError> {
    let v = field(obj, key, name)?.as_f64().ok_or(CodecError::WrongType(name))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CodecError::NonFinite(name))
    }
}

pub(crate) fn get_u64(obj: &Map<String, Value>, key: &str, name: &'static str) -> Result<u64, CodecError> {
    field(obj, key, name)?.as_u64().ok_or(CodecError::WrongType(name))
}

pub fn decode_envelope(bytes: &[u8]) -> Result<Envelope, CodecError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| CodecError::Syntax(e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| CodecError::Syntax("expected an object".into()))?;
    Ok(Envelope {
        session_id: get_str(obj, "s", "session_id")?,
        user_id: get_str(obj, "u", "user_id")?,
        seq: get_u64(obj, "q", "seq")?,
        t_origin: get_f64(obj, "t", "t_origin")?,
        payload: Payload {
            x: get_f64(obj, "x", "x")?,
            y: get_f64(obj, "y", "y")?,
            pupil_diameter: get_f64(obj, "p", "pupil_diameter")?,
            confidence: get_f64(obj, "c", "confidence")?,
        },
    })
}
