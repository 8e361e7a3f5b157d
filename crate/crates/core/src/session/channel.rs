//! Measure channels and the JSON shape of points sent to dashboards.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};

use crate::measures::TraditionalMeasures;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Traditional(String),
    KUser(String),
    KGroup,
    RipaUser(String),
    RipaGroup,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Traditional(u) => write!(f, "trad.user.{u}"),
            Channel::KUser(u) => write!(f, "k.user.{u}"),
            Channel::KGroup => f.write_str("k.group"),
            Channel::RipaUser(u) => write!(f, "ripa.user.{u}"),
            Channel::RipaGroup => f.write_str("ripa.group"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not a channel name: {0:?}")]
pub struct ChannelParseError(pub String);

impl FromStr for Channel {
    type Err = ChannelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let user = |rest: &str| (!rest.is_empty()).then(|| rest.to_string());
        let parsed = match s {
            "k.group" => Some(Channel::KGroup),
            "ripa.group" => Some(Channel::RipaGroup),
            _ => {
                if let Some(u) = s.strip_prefix("trad.user.") {
                    user(u).map(Channel::Traditional)
                } else if let Some(u) = s.strip_prefix("k.user.") {
                    user(u).map(Channel::KUser)
                } else if let Some(u) = s.strip_prefix("ripa.user.") {
                    user(u).map(Channel::RipaUser)
                } else {
                    None
                }
            }
        };
        parsed.ok_or_else(|| ChannelParseError(s.into()))
    }
}

impl Serialize for Channel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Payload of a point. `Absent` marks a window without enough data and is
/// sent as `null`.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureValue {
    Number(f64),
    Traditional(TraditionalMeasures<f64>),
    Absent,
}

impl MeasureValue {
    pub fn number(&self) -> Option<f64> {
        match self {
            MeasureValue::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, MeasureValue::Absent)
    }

    fn to_json(&self) -> Value {
        match self {
            MeasureValue::Number(v) => json!(v),
            MeasureValue::Traditional(t) => json!({
                "fixation_duration": t.mean_fixation_duration,
                "saccade_duration": t.mean_saccade_duration,
                "saccade_amplitude": t.mean_saccade_amplitude,
            }),
            MeasureValue::Absent => Value::Null,
        }
    }

    fn from_json(v: &Value) -> Result<Self, String> {
        match v {
            Value::Null => Ok(MeasureValue::Absent),
            Value::Number(n) => n.as_f64().map(MeasureValue::Number).ok_or_else(|| "bad number".into()),
            Value::Object(m) => {
                let field = |k: &str| match m.get(k) {
                    None | Some(Value::Null) => Ok(None),
                    Some(Value::Number(n)) => Ok(n.as_f64()),
                    Some(_) => Err(format!("field {k} must be a number or null")),
                };
                Ok(MeasureValue::Traditional(TraditionalMeasures {
                    mean_fixation_duration: field("fixation_duration")?,
                    mean_saccade_duration: field("saccade_duration")?,
                    mean_saccade_amplitude: field("saccade_amplitude")?,
                }))
            }
            _ => Err("value must be a number, an object or null".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurePoint {
    pub chan: Channel,
    /// Window end on the corrected sender clock, ms.
    pub t: f64,
    pub v: MeasureValue,
}

impl MeasurePoint {
    pub fn new(chan: Channel, t: f64, v: MeasureValue) -> Self {
        Self { chan, t, v }
    }

    /// Wire object; snapshot frames carry `"snapshot": true`.
    pub fn to_json(&self, snapshot: bool) -> Value {
        let mut m = Map::new();
        m.insert("chan".into(), Value::String(self.chan.to_string()));
        m.insert("t".into(), json!(self.t));
        m.insert("v".into(), self.v.to_json());
        if snapshot {
            m.insert("snapshot".into(), Value::Bool(true));
        }
        Value::Object(m)
    }

    pub fn from_json(v: &Value) -> Result<Self, String> {
        let chan = v.get("chan").and_then(Value::as_str).ok_or("missing chan")?;
        let t = v.get("t").and_then(Value::as_f64).ok_or("missing t")?;
        let value = MeasureValue::from_json(v.get("v").ok_or("missing v")?)?;
        Ok(Self { chan: chan.parse().map_err(|e: ChannelParseError| e.to_string())?, t, v: value })
    }
}

impl Serialize for MeasurePoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json(false).serialize(s)
    }
}

impl<'de> Deserialize<'de> for MeasurePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        MeasurePoint::from_json(&v).map_err(serde::de::Error::custom)
    }
}
