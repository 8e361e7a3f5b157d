//! Session orchestration: configuration, the windowed measure pipeline,
//! dashboard points and offline analysis.

pub mod analysis;
pub mod channel;
pub mod config;
pub mod pipeline;

pub use analysis::{
    analyze_offline, apply_times, read_summary_csv, read_times_csv, run_recording, run_recording_with_arrivals,
    AnalysisReport, AnalysisRow, Correlation, SessionRun, TableError, MIN_SESSIONS,
};
pub use channel::{Channel, ChannelParseError, MeasurePoint, MeasureValue};
pub use config::{parse_kv, ConfigError, SessionConfig};
pub use pipeline::{SessionNotice, SessionPipeline, SessionSummary, UserSummary};
