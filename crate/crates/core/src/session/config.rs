use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{DetectorConfig, Screen};
use crate::ripa::{FilterSpec, RipaConfig};
use crate::transport::ReorderConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {message}")]
    Value { key: String, message: String },
    #[error("invalid session config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub session_id: String,
    /// Expected users. Empty admits any user on first contact.
    pub user_ids: Vec<String>,
    pub screen: Screen,
    pub nominal_rate_hz: f64,
    pub k_window_ms: f64,
    pub k_stride_ms: f64,
    pub ripa: RipaConfig<f64>,
    pub detector: DetectorConfig,
    pub reorder: ReorderConfig,
    pub chart_update_s: f64,
    pub snapshot_depth: usize,
    /// Origin of the window grid on the corrected sender clock. Windows start
    /// at `t0_ms + j * stride`; the default 0 anchors the grid to the epoch.
    pub t0_ms: f64,
    /// Arrival-time wait before a group window is emitted without all users.
    /// Defaults to one stride.
    pub group_timeout_ms: Option<f64>,
    /// Per-user clock offsets added to sender timestamps.
    pub offsets: BTreeMap<String, f64>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            session_id: "session".into(),
            user_ids: Vec::new(),
            screen: Screen::default(),
            nominal_rate_hz: 30.0,
            k_window_ms: 3000.0,
            k_stride_ms: 300.0,
            ripa: RipaConfig::default(),
            detector: DetectorConfig::default(),
            reorder: ReorderConfig::default(),
            chart_update_s: 1.0,
            snapshot_depth: 200,
            t0_ms: 0.0,
            group_timeout_ms: None,
            offsets: BTreeMap::new(),
        }
    }
}

impl SessionConfig {
    pub fn new(session_id: impl Into<String>, user_ids: Vec<String>) -> Self {
        Self { session_id: session_id.into(), user_ids, ..Default::default() }
    }

    pub fn group_timeout(&self) -> f64 {
        self.group_timeout_ms.unwrap_or(self.k_stride_ms)
    }

    /// RIPA window length in milliseconds.
    pub fn ripa_window_ms(&self) -> f64 {
        1000.0 * self.ripa.window_samples as f64 / self.nominal_rate_hz
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.k_window_ms) || !positive(self.k_stride_ms) {
            return bad("k_window_ms and k_stride_ms must be > 0");
        }
        if self.k_stride_ms > self.k_window_ms {
            return bad("k_stride_ms must not exceed k_window_ms");
        }
        if !positive(self.nominal_rate_hz) {
            return bad("nominal_rate_hz must be > 0");
        }
        if !positive(self.chart_update_s) {
            return bad("chart_update_s must be > 0");
        }
        if self.snapshot_depth == 0 {
            return bad("snapshot_depth must be > 0");
        }
        if self.reorder.capacity == 0 || !positive(self.reorder.max_wait_ms) {
            return bad("reorder capacity and max_wait_ms must be > 0");
        }
        if !self.t0_ms.is_finite() {
            return bad("t0_ms must be finite");
        }
        if self.group_timeout_ms.is_some_and(|t| !positive(t)) {
            return bad("group_timeout_ms must be > 0");
        }
        if !positive(self.screen.width) || !positive(self.screen.height) {
            return bad("screen dimensions must be > 0");
        }
        self.detector.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.ripa.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Applies `key = value` pairs. Keys under `server.` are skipped so the
    /// same file can carry deployment settings.
    pub fn apply(&mut self, pairs: &BTreeMap<String, String>) -> Result<(), ConfigError> {
        for (key, value) in pairs {
            if key.starts_with("server.") {
                continue;
            }
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::Value { key: key.into(), message: e.to_string() })
        }
        match key {
            "session_id" => self.session_id = value.into(),
            "users" | "user_ids" => {
                self.user_ids = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
            }
            "screen_width" => self.screen.width = num(key, value)?,
            "screen_height" => self.screen.height = num(key, value)?,
            "nominal_rate_hz" => self.nominal_rate_hz = num(key, value)?,
            "k_window_ms" => self.k_window_ms = num(key, value)?,
            "k_stride_ms" => self.k_stride_ms = num(key, value)?,
            "chart_update_s" => self.chart_update_s = num(key, value)?,
            "snapshot_depth" => self.snapshot_depth = num(key, value)?,
            "t0_ms" => self.t0_ms = num(key, value)?,
            "group_timeout_ms" => self.group_timeout_ms = Some(num(key, value)?),
            "ripa.window_samples" => self.ripa.window_samples = num(key, value)?,
            "ripa.lambda" => self.ripa.lambda = num(key, value)?,
            "ripa.epsilon" => self.ripa.epsilon = num(key, value)?,
            "ripa.confidence_min" => self.ripa.confidence_min = num(key, value)?,
            "ripa.max_interp_gap" => self.ripa.max_interp_gap = num(key, value)?,
            "ripa.low_m" => self.ripa.low_filter = FilterSpec { half_width: num(key, value)?, ..self.ripa.low_filter },
            "ripa.low_n" => self.ripa.low_filter = FilterSpec { order: num(key, value)?, ..self.ripa.low_filter },
            "ripa.high_m" => self.ripa.high_filter = FilterSpec { half_width: num(key, value)?, ..self.ripa.high_filter },
            "ripa.high_n" => self.ripa.high_filter = FilterSpec { order: num(key, value)?, ..self.ripa.high_filter },
            "detector.dispersion_threshold" => self.detector.dispersion_threshold = num(key, value)?,
            "detector.min_fixation_duration_ms" => self.detector.min_fixation_duration_ms = num(key, value)?,
            "detector.max_gap_ms" => self.detector.max_gap_ms = num(key, value)?,
            "detector.on_screen_only" => {
                self.detector.screen = num::<bool>(key, value)?.then_some(self.screen);
            }
            "reorder.capacity" => self.reorder.capacity = num(key, value)?,
            "reorder.max_wait_ms" => self.reorder.max_wait_ms = num(key, value)?,
            "reorder.first_seq" => self.reorder.first_seq = num(key, value)?,
            _ => {
                if let Some(user) = key.strip_prefix("offset.") {
                    self.offsets.insert(user.into(), num(key, value)?);
                } else {
                    return Err(ConfigError::UnknownKey(key.into()));
                }
            }
        }
        Ok(())
    }

    /// Parses a config file and applies it over the defaults.
    pub fn from_kv_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply(&parse_kv(text)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Plain `key = value` text. `#` starts a comment; blank lines are skipped;
/// `:` is accepted in place of `=`.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=').or_else(|| line.split_once(':')) else {
            return Err(ConfigError::Syntax { line: i + 1 });
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = SessionConfig::default();
        assert_eq!((c.k_window_ms, c.k_stride_ms), (3000.0, 300.0));
        assert_eq!(c.ripa.window_samples, 30);
        assert_eq!(c.chart_update_s, 1.0);
        assert_eq!(c.snapshot_depth, 200);
        assert_eq!(c.group_timeout(), 300.0);
        assert_eq!(c.ripa_window_ms(), 1000.0);
        c.validate().unwrap();
    }

    #[test]
    fn kv_overrides() {
        let text = "# demo\nsession_id = lab-1\nusers = A, B\nk_window_ms=2000\nk_stride_ms: 200\n\
                    ripa.lambda = 1.5\nripa.low_m = 6\noffset.B = -12.5\nserver.listen = 0.0.0.0:8080\n";
        let c = SessionConfig::from_kv_text(text).unwrap();
        assert_eq!(c.session_id, "lab-1");
        assert_eq!(c.user_ids, ["A", "B"]);
        assert_eq!((c.k_window_ms, c.k_stride_ms), (2000.0, 200.0));
        assert_eq!(c.ripa.lambda, 1.5);
        assert_eq!(c.ripa.low_filter, FilterSpec { half_width: 6, order: 2 });
        assert_eq!(c.offsets["B"], -12.5);
    }

    #[test]
    fn kv_errors() {
        assert_eq!(SessionConfig::from_kv_text("nonsense"), Err(ConfigError::Syntax { line: 1 }));
        assert_eq!(SessionConfig::from_kv_text("colour = red"), Err(ConfigError::UnknownKey("colour".into())));
        assert!(matches!(SessionConfig::from_kv_text("k_window_ms = soon"), Err(ConfigError::Value { .. })));
        assert!(matches!(
            SessionConfig::from_kv_text("k_window_ms = 100\nk_stride_ms = 300"),
            Err(ConfigError::Invalid(_))
        ));
    }
}
