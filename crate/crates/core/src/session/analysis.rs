//! Offline analysis: replaying recordings through the pipeline and relating
//! per-session group measures to completion time.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::channel::MeasurePoint;
use super::config::{ConfigError, SessionConfig};
use super::pipeline::{SessionPipeline, SessionSummary};
use crate::restream::SessionRecording;
use crate::stats::{pearson, StatsError};

/// Result of running one recording through a fresh pipeline.
#[derive(Debug, Clone)]
pub struct SessionRun {
    pub points: Vec<MeasurePoint>,
    pub summary: SessionSummary,
    pub recording: SessionRecording,
}

/// Replays `rec` with zero transport latency: each row arrives at its
/// offset-corrected timestamp.
pub fn run_recording(rec: &SessionRecording, base: &SessionConfig) -> Result<SessionRun, ConfigError> {
    let arrivals: Vec<f64> = rec.rows.iter().map(|r| r.t + rec.meta.offsets.get(&r.user_id).unwrap_or(&0.0)).collect();
    run_recording_with_arrivals(rec, base, &arrivals)
}

/// Replays `rec` with one arrival time per row. Rows are delivered in
/// arrival order (ties keep recording order), so late rows arrive out of
/// sequence exactly as they would over a network.
pub fn run_recording_with_arrivals(
    rec: &SessionRecording,
    base: &SessionConfig,
    arrivals: &[f64],
) -> Result<SessionRun, ConfigError> {
    assert_eq!(arrivals.len(), rec.rows.len(), "one arrival time per row");
    let mut pipeline = SessionPipeline::for_recording(rec, base)?;
    let mut order: Vec<usize> = (0..rec.rows.len()).collect();
    order.sort_by(|&a, &b| arrivals[a].total_cmp(&arrivals[b]));
    let mut points = Vec::new();
    for i in order {
        pipeline.ingest(rec.rows[i].to_envelope(&rec.meta.session_id), arrivals[i]);
        points.extend(pipeline.drain_points());
    }
    pipeline.finish();
    points.extend(pipeline.drain_points());
    Ok(SessionRun { points, summary: pipeline.summary(), recording: pipeline.recording() })
}

/// One row of an offline analysis table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub session: String,
    pub k: Option<f64>,
    pub ripa: Option<f64>,
    pub time_s: Option<f64>,
}

impl From<&SessionSummary> for AnalysisRow {
    fn from(s: &SessionSummary) -> Self {
        Self { session: s.session_id.clone(), k: s.group_k, ripa: s.group_ripa, time_s: Some(s.total_time_s) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Correlation {
    Available { r: f64, n: usize },
    Unavailable { reason: String },
}

impl Correlation {
    pub fn r(&self) -> Option<f64> {
        match self {
            Correlation::Available { r, .. } => Some(*r),
            Correlation::Unavailable { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub rows: Vec<AnalysisRow>,
    /// Group K against completion time.
    pub k_vs_time: Correlation,
    /// Group RIPA against completion time.
    pub ripa_vs_time: Correlation,
}

/// Minimum number of sessions for a correlation.
pub const MIN_SESSIONS: usize = 3;

fn correlate(rows: &[AnalysisRow], pick: impl Fn(&AnalysisRow) -> Option<f64>) -> Correlation {
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().filter_map(|r| Some((pick(r)?, r.time_s?))).unzip();
    if xs.len() < MIN_SESSIONS {
        return Correlation::Unavailable {
            reason: format!("{} session(s) with values, need at least {MIN_SESSIONS}", xs.len()),
        };
    }
    match pearson(&xs, &ys) {
        Ok(r) => Correlation::Available { r, n: xs.len() },
        Err(e @ (StatsError::ZeroVariance(_) | StatsError::NonFinite)) => {
            Correlation::Unavailable { reason: e.to_string() }
        }
        Err(e) => Correlation::Unavailable { reason: e.to_string() },
    }
}

/// Pearson r of group K and of group RIPA against completion time.
pub fn analyze_offline(rows: Vec<AnalysisRow>) -> AnalysisReport {
    let k_vs_time = correlate(&rows, |r| r.k);
    let ripa_vs_time = correlate(&rows, |r| r.ripa);
    AnalysisReport { rows, k_vs_time, ripa_vs_time }
}

/// Overrides completion times by session id.
pub fn apply_times(rows: &mut [AnalysisRow], times: &BTreeMap<String, f64>) {
    for r in rows {
        if let Some(&t) = times.get(&r.session) {
            r.time_s = Some(t);
        }
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

#[derive(Deserialize)]
struct TableRecord {
    session: String,
    #[serde(default)]
    k: Option<f64>,
    #[serde(default)]
    ripa: Option<f64>,
    #[serde(default, alias = "time", alias = "total_time_s")]
    time_s: Option<f64>,
}

/// Summary rows from CSV with a header naming `session` and any of `k`,
/// `ripa`, `time_s`. Empty cells are absent values.
pub fn read_summary_csv<R: Read>(reader: R) -> Result<Vec<AnalysisRow>, TableError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<TableRecord>().enumerate() {
        let rec = rec?;
        if rec.session.is_empty() {
            return Err(TableError::Row { row: i + 1, message: "empty session id".into() });
        }
        rows.push(AnalysisRow { session: rec.session, k: rec.k, ripa: rec.ripa, time_s: rec.time_s });
    }
    Ok(rows)
}

/// Completion times from CSV with columns `session,time_s`.
pub fn read_times_csv<R: Read>(reader: R) -> Result<BTreeMap<String, f64>, TableError> {
    read_summary_csv(reader)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| match r.time_s {
            Some(t) => Ok((r.session, t)),
            None => Err(TableError::Row { row: i + 1, message: format!("no time for session {:?}", r.session) }),
        })
        .collect()
}
