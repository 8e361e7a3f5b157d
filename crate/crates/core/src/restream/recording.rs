//! JSONL session recordings.
//!
//! Line 1 is metadata, every further line one sample:
//!
//! ```text
//! {"kind":"meta","s":"s1","w":1920,"h":1080,"rate":30,"users":["A","B"]}
//! {"kind":"row","t":1700000000000.0,"u":"A","q":1,"x":960,"y":540,"p":3.5,"c":0.98}
//! ```
//!
//! Rows may carry `"ra"`, the receiver arrival time, and metadata may carry
//! `"offsets"`, per-user clock offsets in milliseconds; both are written by
//! live sessions and used for latency reports.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{GazeSample, Screen};
use crate::transport::Envelope;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub session_id: String,
    pub screen: Screen,
    pub nominal_rate_hz: f64,
    pub user_ids: Vec<String>,
    pub offsets: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingRow {
    pub t: f64,
    pub user_id: String,
    pub seq: u64,
    pub x: f64,
    pub y: f64,
    pub pupil: f64,
    pub confidence: f64,
    pub received_at: Option<f64>,
}

impl RecordingRow {
    pub fn to_sample(&self) -> GazeSample<f64> {
        GazeSample {
            user_id: self.user_id.clone(),
            seq: self.seq,
            t_origin: self.t,
            x: self.x,
            y: self.y,
            pupil_diameter: self.pupil,
            confidence: self.confidence,
        }
    }

    pub fn from_envelope(env: &Envelope, received_at: Option<f64>) -> Self {
        Self {
            t: env.t_origin,
            user_id: env.user_id.clone(),
            seq: env.seq,
            x: env.payload.x,
            y: env.payload.y,
            pupil: env.payload.pupil_diameter,
            confidence: env.payload.confidence,
            received_at,
        }
    }

    pub fn to_envelope(&self, session_id: &str) -> Envelope {
        Envelope::from_sample(session_id, &self.to_sample())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecording {
    pub meta: RecordingMeta,
    pub rows: Vec<RecordingRow>,
}

#[derive(Debug, Error)]
pub enum RecordingError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error("recording has no metadata line")]
    MissingMeta,
}

impl RecordingError {
    pub fn line(&self) -> Option<usize> {
        match self {
            RecordingError::Parse { line, .. } | RecordingError::Validation { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Meta {
        s: String,
        w: f64,
        h: f64,
        rate: f64,
        users: Vec<String>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        offsets: BTreeMap<String, f64>,
    },
    Row {
        t: f64,
        u: String,
        q: u64,
        x: f64,
        y: f64,
        p: f64,
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ra: Option<f64>,
    },
}

impl SessionRecording {
    pub fn new(meta: RecordingMeta) -> Self {
        Self { meta, rows: Vec::new() }
    }

    /// Checks ordering invariants; errors cite the 1-based line the row would
    /// occupy in the JSONL file.
    pub fn validate(&self) -> Result<(), RecordingError> {
        let known: std::collections::HashSet<&str> = self.meta.user_ids.iter().map(String::as_str).collect();
        let mut last_t = f64::NEG_INFINITY;
        let mut per_user: HashMap<&str, (f64, u64)> = HashMap::new();
        for (i, row) in self.rows.iter().enumerate() {
            let line = i + 2;
            let fail = |message: String| Err(RecordingError::Validation { line, message });
            if !known.contains(row.user_id.as_str()) {
                return fail(format!("user {:?} not listed in metadata", row.user_id));
            }
            if ![row.t, row.x, row.y, row.pupil, row.confidence].iter().all(|v| v.is_finite()) {
                return fail("non-finite value".into());
            }
            if row.t < last_t {
                return fail(format!("timestamp {} precedes {}", row.t, last_t));
            }
            last_t = row.t;
            if let Some(&(t, q)) = per_user.get(row.user_id.as_str()) {
                if row.seq <= q {
                    return fail(format!("seq {} of user {:?} does not exceed {}", row.seq, row.user_id, q));
                }
                if row.t <= t {
                    return fail(format!("timestamp {} of user {:?} does not exceed {}", row.t, row.user_id, t));
                }
            }
            per_user.insert(row.user_id.as_str(), (row.t, row.seq));
        }
        Ok(())
    }

    pub fn rows_for<'a>(&'a self, user_id: &'a str) -> impl Iterator<Item = &'a RecordingRow> + 'a {
        self.rows.iter().filter(move |r| r.user_id == user_id)
    }

    pub fn samples_for(&self, user_id: &str) -> Vec<GazeSample<f64>> {
        self.rows_for(user_id).map(RecordingRow::to_sample).collect()
    }

    /// Time between the first and last row, milliseconds.
    pub fn span_ms(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        let meta = Line::Meta {
            s: self.meta.session_id.clone(),
            w: self.meta.screen.width,
            h: self.meta.screen.height,
            rate: self.meta.nominal_rate_hz,
            users: self.meta.user_ids.clone(),
            offsets: self.meta.offsets.clone(),
        };
        serde_json::to_writer(&mut w, &meta)?;
        w.write_all(b"\n")?;
        for r in &self.rows {
            let row = Line::Row {
                t: r.t,
                u: r.user_id.clone(),
                q: r.seq,
                x: r.x,
                y: r.y,
                p: r.pupil,
                c: r.confidence,
                ra: r.received_at,
            };
            serde_json::to_writer(&mut w, &row)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RecordingError> {
        let file = File::create(path)?;
        self.write_jsonl(BufWriter::new(file))?;
        Ok(())
    }

    /// Interleaves several recordings by timestamp into one session. Users
    /// keep their ids; ties keep input order.
    pub fn merge(session_id: &str, parts: Vec<SessionRecording>) -> SessionRecording {
        let mut meta = match parts.first() {
            Some(p) => p.meta.clone(),
            None => RecordingMeta {
                session_id: session_id.into(),
                screen: Screen::default(),
                nominal_rate_hz: 30.0,
                user_ids: Vec::new(),
                offsets: BTreeMap::new(),
            },
        };
        meta.session_id = session_id.into();
        meta.user_ids.clear();
        let mut rows = Vec::new();
        for p in parts {
            for u in p.meta.user_ids {
                if !meta.user_ids.contains(&u) {
                    meta.user_ids.push(u);
                }
            }
            meta.offsets.extend(p.meta.offsets);
            rows.extend(p.rows);
        }
        rows.sort_by(|a, b| a.t.total_cmp(&b.t));
        SessionRecording { meta, rows }
    }
}

pub fn load_recording<R: BufRead>(reader: R) -> Result<SessionRecording, RecordingError> {
    let mut recording: Option<SessionRecording> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line)
            .map_err(|e| RecordingError::Parse { line: line_no, message: e.to_string() })?;
        match (parsed, recording.as_mut()) {
            (Line::Meta { s, w, h, rate, users, offsets }, None) => {
                recording = Some(SessionRecording::new(RecordingMeta {
                    session_id: s,
                    screen: Screen { width: w, height: h },
                    nominal_rate_hz: rate,
                    user_ids: users,
                    offsets,
                }));
            }
            (Line::Meta { .. }, Some(_)) => {
                return Err(RecordingError::Parse { line: line_no, message: "second metadata line".into() });
            }
            (Line::Row { .. }, None) => return Err(RecordingError::MissingMeta),
            (Line::Row { t, u, q, x, y, p, c, ra }, Some(rec)) => {
                rec.rows.push(RecordingRow { t, user_id: u, seq: q, x, y, pupil: p, confidence: c, received_at: ra });
                // validate incrementally so errors cite the physical line
                if let Err(RecordingError::Validation { message, .. }) = validate_last(rec) {
                    return Err(RecordingError::Validation { line: line_no, message });
                }
            }
        }
    }
    recording.ok_or(RecordingError::MissingMeta)
}

fn validate_last(rec: &SessionRecording) -> Result<(), RecordingError> {
    let n = rec.rows.len();
    let last = &rec.rows[n - 1];
    let fail = |message: String| Err(RecordingError::Validation { line: 0, message });
    if !rec.meta.user_ids.contains(&last.user_id) {
        return fail(format!("user {:?} not listed in metadata", last.user_id));
    }
    if n >= 2 && last.t < rec.rows[n - 2].t {
        return fail(format!("timestamp {} precedes {}", last.t, rec.rows[n - 2].t));
    }
    if let Some(prev) = rec.rows[..n - 1].iter().rev().find(|r| r.user_id == last.user_id) {
        if last.seq <= prev.seq {
            return fail(format!("seq {} of user {:?} does not exceed {}", last.seq, last.user_id, prev.seq));
        }
        if last.t <= prev.t {
            return fail(format!("timestamp {} of user {:?} does not exceed {}", last.t, last.user_id, prev.t));
        }
    }
    Ok(())
}

pub fn load_recording_file(path: impl AsRef<Path>) -> Result<SessionRecording, RecordingError> {
    load_recording(BufReader::new(File::open(path)?))
}
