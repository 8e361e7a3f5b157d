//! Replay scheduling on the real system clock.

use std::time::Instant;

use adt_core::restream::{
    generate_synthetic, load_recording, restream, BehaviorProfile, RecordingMeta, RecordingRow, RestreamOptions,
    SessionRecording, SystemClock,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Emission offsets per row, checked against the one-tick contract.
fn run(rec: &SessionRecording, speed: f64, tick_ms: f64) -> (Vec<(u64, f64)>, f64) {
    let mut seen = Vec::new();
    let report = restream(rec, RestreamOptions { speed, tick_ms }, &SystemClock::new(), |row, at| {
        seen.push((row.seq, at))
    })
    .unwrap();
    assert_eq!(report.rows_emitted, rec.rows.len());
    assert_eq!(report.early, 0);
    let t0 = rec.rows.first().map_or(0.0, |r| r.t);
    for (row, &(seq, at)) in rec.rows.iter().zip(&seen) {
        assert_eq!(row.seq, seq, "recording order");
        let due = (row.t - t0) / speed;
        assert!(at >= due, "row {seq} early: {at} < {due}");
    }
    let late = rec.rows.iter().zip(&seen).map(|(r, &(_, at))| at - (r.t - t0) / speed).fold(0.0, f64::max);
    (seen, late.max(report.max_lateness_ms))
}

#[test]
fn three_seconds_at_speed_one() {
    let rec = generate_synthetic(&BehaviorProfile::focal(1), 3_000.0, 30.0);
    let start = Instant::now();
    let (_, late) = run(&rec, 1.0, 50.0);
    let wall = start.elapsed().as_secs_f64();
    assert!(late < 50.0, "lateness {late} ms");
    assert!((2.9..3.5).contains(&wall), "wall {wall}");
}

#[test]
fn ten_seconds_at_speed_ten() {
    let rec = generate_synthetic(&BehaviorProfile::ambient(1), 10_000.0, 30.0);
    let start = Instant::now();
    let (_, late) = run(&rec, 10.0, 50.0);
    assert!(start.elapsed().as_secs_f64() <= 1.5);
    assert!(late < 50.0);
}

#[test]
fn randomized_runs_never_emit_early() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let n = rng.gen_range(0..25);
        let mut t = 1e12;
        let rows = (0..n)
            .map(|i| {
                t += rng.gen_range(0.0..40.0);
                RecordingRow {
                    t,
                    user_id: "A".into(),
                    seq: i + 1,
                    x: 0.0,
                    y: 0.0,
                    pupil: 3.5,
                    confidence: 1.0,
                    received_at: None,
                }
            })
            .collect();
        let rec = SessionRecording {
            meta: RecordingMeta {
                session_id: "r".into(),
                screen: Default::default(),
                nominal_rate_hz: 30.0,
                user_ids: vec!["A".into()],
                offsets: Default::default(),
            },
            rows,
        };
        run(&rec, rng.gen_range(5.0..50.0), rng.gen_range(1.0..20.0));
    }
}

#[test]
fn file_round_trip_preserves_rows() {
    let rec = generate_synthetic(&BehaviorProfile::focal(2), 2_000.0, 30.0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rec.jsonl");
    rec.save(&path).unwrap();
    let back = adt_core::restream::load_recording_file(&path).unwrap();
    assert_eq!(back, rec);
    let mut emitted = Vec::new();
    restream(&back, RestreamOptions { speed: 100.0, tick_ms: 5.0 }, &SystemClock::new(), |r, _| {
        emitted.push(r.clone())
    })
    .unwrap();
    assert_eq!(emitted, rec.rows);
}

#[test]
fn load_errors_cite_lines() {
    let mut text = String::from(r#"{"kind":"meta","s":"x","w":1920,"h":1080,"rate":30,"users":["A"]}"#);
    text.push('\n');
    assert_eq!(load_recording(text.as_bytes()).unwrap().rows.len(), 0);
    for i in 1..=15u64 {
        text += &format!(r#"{{"kind":"row","t":{},"u":"A","q":{i},"x":1,"y":1,"p":3,"c":1}}"#, i * 10);
        text.push('\n');
    }
    // line 17: seq goes backwards
    text += r#"{"kind":"row","t":999,"u":"A","q":3,"x":1,"y":1,"p":3,"c":1}"#;
    let err = load_recording(text.as_bytes()).unwrap_err();
    assert_eq!(err.line(), Some(17));
    let truncated = &text[..text.len() - 20];
    assert_eq!(load_recording(truncated.as_bytes()).unwrap_err().line(), Some(17));
}
