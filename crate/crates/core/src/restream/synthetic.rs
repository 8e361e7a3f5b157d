//! Seeded synthetic gaze and pupil traces for tests and demos.
//!
//! The gaze alternates jittered fixations with straight-line saccades whose
//! transit time follows the main sequence. The pupil trace is a baseline plus
//! a slow and a fast sinusoid whose amplitudes depend on the behavior, with
//! occasional blinks (zero confidence).

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::recording::{RecordingMeta, RecordingRow, SessionRecording};
use crate::measures::Screen;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    Ambient,
    Focal,
}

impl std::str::FromStr for BehaviorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ambient" => Ok(BehaviorKind::Ambient),
            "focal" => Ok(BehaviorKind::Focal),
            other => Err(format!("unknown behavior {other:?}, expected ambient or focal")),
        }
    }
}

impl std::fmt::Display for BehaviorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BehaviorKind::Ambient => "ambient",
            BehaviorKind::Focal => "focal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorProfile {
    pub kind: BehaviorKind,
    pub fixation_duration_ms: (f64, f64),
    pub saccade_amplitude_px: (f64, f64),
    pub jitter_px: f64,
    pub seed: u64,
}

impl BehaviorProfile {
    /// Short fixations, long saccades.
    pub fn ambient(seed: u64) -> Self {
        Self {
            kind: BehaviorKind::Ambient,
            fixation_duration_ms: (120.0, 300.0),
            saccade_amplitude_px: (250.0, 700.0),
            jitter_px: 4.0,
            seed,
        }
    }

    /// Long fixations, short saccades.
    pub fn focal(seed: u64) -> Self {
        Self {
            kind: BehaviorKind::Focal,
            fixation_duration_ms: (350.0, 1200.0),
            saccade_amplitude_px: (80.0, 220.0),
            jitter_px: 4.0,
            seed,
        }
    }

    pub fn of_kind(kind: BehaviorKind, seed: u64) -> Self {
        match kind {
            BehaviorKind::Ambient => Self::ambient(seed),
            BehaviorKind::Focal => Self::focal(seed),
        }
    }

    /// Slow and fast pupil oscillation amplitudes, millimetres.
    fn pupil_amplitudes(&self) -> (f64, f64) {
        match self.kind {
            BehaviorKind::Ambient => (0.15, 0.05),
            BehaviorKind::Focal => (0.30, 0.02),
        }
    }
}

/// Fixed origin for synthetic timestamps (2023-11-14T22:13:20Z).
pub const SYNTHETIC_EPOCH_MS: f64 = 1_700_000_000_000.0;

const PIXELS_PER_DEGREE: f64 = 40.0;
const PUPIL_BASELINE_MM: f64 = 3.5;
const BLINK_PROBABILITY_PER_FIXATION: f64 = 0.04;

/// Options beyond the behavior itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOptions {
    pub user_id: String,
    pub session_id: String,
    pub start_ms: f64,
    pub screen: Screen,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            user_id: "U1".into(),
            session_id: "synthetic".into(),
            start_ms: SYNTHETIC_EPOCH_MS,
            screen: Screen::default(),
        }
    }
}

struct Segment {
    end_ms: f64,
    from: (f64, f64),
    to: (f64, f64),
    moving: bool,
    blink: Option<(f64, f64)>,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Deterministic recording of one user; identical inputs give bit-identical
/// output.
pub fn generate_user(profile: &BehaviorProfile, duration_ms: f64, rate_hz: f64, opts: &SyntheticOptions) -> SessionRecording {
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let margin = 40.0;
    let (w, h) = (opts.screen.width, opts.screen.height);

    // gaze plan, in ms relative to the start
    let mut plan: Vec<Segment> = Vec::new();
    let mut pos = (rng.gen_range(margin..w - margin), rng.gen_range(margin..h - margin));
    let mut t = 0.0;
    while t < duration_ms {
        let fix = uniform(&mut rng, profile.fixation_duration_ms);
        let blink = rng.gen_bool(BLINK_PROBABILITY_PER_FIXATION).then(|| {
            let at = t + fix * rng.gen_range(0.2..0.6);
            (at, at + rng.gen_range(60.0..180.0))
        });
        plan.push(Segment { end_ms: t + fix, from: pos, to: pos, moving: false, blink });
        t += fix;

        let amplitude = uniform(&mut rng, profile.saccade_amplitude_px);
        let mut target = pos;
        for _ in 0..16 {
            let angle = rng.gen_range(0.0..TAU);
            target = (pos.0 + amplitude * angle.cos(), pos.1 + amplitude * angle.sin());
            if (margin..w - margin).contains(&target.0) && (margin..h - margin).contains(&target.1) {
                break;
            }
        }
        target = (target.0.clamp(margin, w - margin), target.1.clamp(margin, h - margin));
        let degrees = ((target.0 - pos.0).hypot(target.1 - pos.1)) / PIXELS_PER_DEGREE;
        let transit = 21.0 + 2.2 * degrees;
        plan.push(Segment { end_ms: t + transit, from: pos, to: target, moving: true, blink: None });
        t += transit;
        pos = target;
    }

    let (amp_low, amp_high) = profile.pupil_amplitudes();
    let phase_low = rng.gen_range(0.0..TAU);
    let phase_high = rng.gen_range(0.0..TAU);
    let (f_low, f_high) = (0.5, 6.0);

    let n = (duration_ms * rate_hz / 1000.0).floor() as u64;
    let mut rows = Vec::with_capacity(n as usize);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..n {
        let rel = k as f64 * 1000.0 / rate_hz;
        while seg + 1 < plan.len() && rel >= plan[seg].end_ms {
            seg_start = plan[seg].end_ms;
            seg += 1;
        }
        let s = &plan[seg];
        let (x, y) = if s.moving {
            let frac = ((rel - seg_start) / (s.end_ms - seg_start)).clamp(0.0, 1.0);
            (s.from.0 + frac * (s.to.0 - s.from.0), s.from.1 + frac * (s.to.1 - s.from.1))
        } else {
            let j = profile.jitter_px;
            (s.from.0 + rng.gen_range(-j..=j), s.from.1 + rng.gen_range(-j..=j))
        };
        let secs = rel / 1000.0;
        let pupil = PUPIL_BASELINE_MM
            + amp_low * (TAU * f_low * secs + phase_low).sin()
            + amp_high * (TAU * f_high * secs + phase_high).sin()
            + rng.gen_range(-0.01..0.01);
        let blinking = s.blink.is_some_and(|(a, b)| rel >= a && rel < b);
        rows.push(RecordingRow {
            t: opts.start_ms + rel,
            user_id: opts.user_id.clone(),
            seq: k + 1,
            x,
            y,
            pupil: if blinking { 0.0 } else { pupil },
            confidence: if blinking { 0.0 } else { rng.gen_range(0.9..1.0) },
            received_at: None,
        });
    }

    SessionRecording {
        meta: RecordingMeta {
            session_id: opts.session_id.clone(),
            screen: opts.screen,
            nominal_rate_hz: rate_hz,
            user_ids: vec![opts.user_id.clone()],
            offsets: BTreeMap::new(),
        },
        rows,
    }
}

/// One-user recording with default options.
pub fn generate_synthetic(profile: &BehaviorProfile, duration_ms: f64, rate_hz: f64) -> SessionRecording {
    generate_user(profile, duration_ms, rate_hz, &SyntheticOptions::default())
}

/// `users` users of the same behavior with seeds `seed, seed + 1, ...`,
/// named `U1..Un`, merged into one session.
pub fn generate_session(
    session_id: &str,
    kind: BehaviorKind,
    users: usize,
    seed: u64,
    duration_ms: f64,
    rate_hz: f64,
) -> SessionRecording {
    let parts = (0..users)
        .map(|i| {
            let opts = SyntheticOptions {
                user_id: format!("U{}", i + 1),
                session_id: session_id.into(),
                ..Default::default()
            };
            generate_user(&BehaviorProfile::of_kind(kind, seed + i as u64), duration_ms, rate_hz, &opts)
        })
        .collect();
    SessionRecording::merge(session_id, parts)
}
