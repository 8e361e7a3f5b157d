//! Recordings, timed replay and synthetic sources.

pub mod player;
pub mod recording;
pub mod synthetic;

pub use player::{restream, Clock, ReplayCursor, RestreamError, RestreamOptions, RestreamReport, SystemClock};
pub use recording::{load_recording, load_recording_file, RecordingError, RecordingMeta, RecordingRow, SessionRecording};
pub use synthetic::{
    generate_session, generate_synthetic, generate_user, BehaviorKind, BehaviorProfile, SyntheticOptions,
    SYNTHETIC_EPOCH_MS,
};
