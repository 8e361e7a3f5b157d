use adt_core::transport::{
    decode_envelope, encode_envelope, estimate_offset, gaze_topic, latency_stats, parse_gaze_topic, Broker,
    CodecError, Envelope, LatencyAccumulator, Payload, ReorderConfig, ReorderNotice, Reorderer, SyncMessage,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn env(user: &str, seq: u64) -> Envelope {
    Envelope {
        session_id: "s1".into(),
        user_id: user.into(),
        seq,
        t_origin: 1000.0 + seq as f64 * 33.0,
        payload: Payload { x: 960.0, y: 540.0, pupil_diameter: 3.2, confidence: 0.98 },
    }
}

fn seqs(out: &[Envelope]) -> Vec<u64> {
    out.iter().map(|e| e.seq).collect()
}

#[test]
fn hundred_permutations_reassemble() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..100 {
        let mut order: Vec<u64> = (1..=100).collect();
        order.shuffle(&mut rng);
        let mut r = Reorderer::new(ReorderConfig { capacity: 128, ..Default::default() });
        let mut emitted = Vec::new();
        let mut notices = Vec::new();
        for (i, q) in order.into_iter().enumerate() {
            let out = r.push(env("A", q), i as f64);
            emitted.extend(out.emitted);
            notices.extend(out.notices);
        }
        assert_eq!(seqs(&emitted), (1..=100).collect::<Vec<_>>());
        assert!(notices.is_empty());
        assert_eq!(r.buffered(), 0);
    }
}

#[test]
fn gap_after_max_wait() {
    let mut r = Reorderer::new(ReorderConfig::default());
    let mut out = r.push(env("A", 1), 0.0).emitted;
    for (i, q) in (3..=6).enumerate() {
        let rel = r.push(env("A", q), 10.0 + i as f64);
        assert!(rel.emitted.is_empty() && rel.notices.is_empty());
    }
    assert!(r.poll(509.0).emitted.is_empty());
    let rel = r.poll(510.0);
    assert_eq!(rel.notices, [ReorderNotice::Gap { user_id: "A".into(), first: 2, last: 2 }]);
    out.extend(rel.emitted);
    assert_eq!(seqs(&out), [1, 3, 4, 5, 6]);
    let late = r.push(env("A", 2), 600.0);
    assert_eq!(late.notices, [ReorderNotice::Late { user_id: "A".into(), seq: 2 }]);
}

#[test]
fn duplicate_after_emit() {
    let mut r = Reorderer::new(ReorderConfig::default());
    for q in 1..=5 {
        assert_eq!(seqs(&r.push(env("A", q), 0.0).emitted), [q]);
    }
    let dup = r.push(env("A", 5), 1.0);
    assert!(dup.emitted.is_empty());
    assert_eq!(dup.notices, [ReorderNotice::Duplicate { user_id: "A".into(), seq: 5 }]);
}

#[test]
fn capacity_forces_gap_and_users_are_independent() {
    let mut r = Reorderer::new(ReorderConfig { capacity: 3, ..Default::default() });
    assert!(r.push(env("A", 2), 0.0).emitted.is_empty());
    assert!(r.push(env("A", 3), 0.0).emitted.is_empty());
    assert_eq!(seqs(&r.push(env("B", 1), 0.0).emitted), [1]);
    let out = r.push(env("A", 4), 0.0);
    assert_eq!(out.notices, [ReorderNotice::Gap { user_id: "A".into(), first: 1, last: 1 }]);
    assert_eq!(seqs(&out.emitted), [2, 3, 4]);
}

#[test]
fn conservation_under_loss_and_duplication() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let mut arrivals: Vec<u64> = (1..=200).filter(|_| rng.gen_bool(0.9)).collect();
        let dups: Vec<u64> = arrivals.iter().copied().filter(|_| rng.gen_bool(0.05)).collect();
        arrivals.extend(dups);
        // bounded displacement
        for i in 0..arrivals.len() {
            let j = (i + rng.gen_range(0..5)).min(arrivals.len() - 1);
            arrivals.swap(i, j);
        }
        let mut r = Reorderer::new(ReorderConfig { capacity: 16, max_wait_ms: 50.0, first_seq: 1 });
        let (mut emitted, mut notices) = (Vec::new(), Vec::new());
        for (i, &q) in arrivals.iter().enumerate() {
            let out = r.push(env("A", q), i as f64 * 10.0);
            emitted.extend(out.emitted);
            notices.extend(out.notices);
        }
        let out = r.flush();
        emitted.extend(out.emitted);
        notices.extend(out.notices);
        let dropped = notices.iter().filter(|n| !matches!(n, ReorderNotice::Gap { .. })).count();
        assert_eq!(emitted.len() + dropped, arrivals.len());
        assert!(seqs(&emitted).windows(2).all(|w| w[0] < w[1]));
        // emitted and skipped ranges tile 1..=max emitted
        let mut covered: Vec<u64> = seqs(&emitted);
        for n in &notices {
            if let ReorderNotice::Gap { first, last, .. } = n {
                covered.extend(*first..=*last);
            }
        }
        covered.sort_unstable();
        let max = *covered.last().unwrap();
        assert_eq!(covered, (1..=max).collect::<Vec<_>>());
    }
}

#[test]
fn latency_stats_match_direct_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let n = rng.gen_range(1..500);
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let t = rng.gen_range(0.0..1e6);
                (t, t + rng.gen_range(0.0..1500.0))
            })
            .collect();
        let stats = latency_stats(&pairs).unwrap();
        let d: Vec<f64> = pairs.iter().map(|(a, b)| b - a).collect();
        let mean = d.iter().sum::<f64>() / n as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let max = d.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(stats.count, n as u64);
        assert!((stats.mean_ms - mean).abs() < 1e-9);
        assert!((stats.std_ms - var.sqrt()).abs() < 1e-9);
        assert_eq!(stats.max_ms, max);
        let mut acc = LatencyAccumulator::new();
        pairs.iter().for_each(|&(a, b)| acc.record(a, b));
        assert!((acc.stats().unwrap().mean_ms - mean).abs() < 1e-9);
    }
    let s = latency_stats(&[(0.0, 10.0), (0.0, 20.0), (0.0, 30.0)]).unwrap();
    assert_eq!((s.mean_ms, s.max_ms), (20.0, 30.0));
    assert!((s.std_ms - (200.0f64 / 3.0).sqrt()).abs() < 1e-12);
    let one = latency_stats(&[(5.0, 47.0)]).unwrap();
    assert_eq!((one.mean_ms, one.std_ms, one.max_ms), (42.0, 0.0, 42.0));
    assert!(latency_stats(&[]).is_err());
    let clamped = latency_stats(&[(10.0, 5.0), (0.0, 4.0)]).unwrap();
    assert_eq!((clamped.clamped, clamped.mean_ms), (1, 2.0));
}

#[test]
fn offset_error_is_half_the_delay_asymmetry() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        // whole and quarter milliseconds keep every sum exact in binary
        let theta = rng.gen_range(-100_000i64..100_000) as f64 / 4.0;
        let d_fwd = rng.gen_range(0i64..4000) as f64 / 4.0;
        let d_back = rng.gen_range(0i64..4000) as f64 / 4.0;
        let t1 = rng.gen_range(0i64..1_000_000) as f64;
        let t2 = t1 + d_fwd + theta;
        let t3 = t2 + rng.gen_range(0i64..40) as f64;
        let t4 = t3 - theta + d_back;
        let est = estimate_offset(t1, t2, t3, t4).unwrap();
        assert_eq!(est.offset_ms - theta, (d_fwd - d_back) / 2.0);
    }
    assert_eq!(estimate_offset(0.0, 110.0, 120.0, 30.0).unwrap().offset_ms, 100.0);
    assert_eq!(estimate_offset(0.0, 0.0, 0.0, 0.0).unwrap().offset_ms, 0.0);
    assert_eq!(estimate_offset(0.0, 130.0, 140.0, 60.0).unwrap().offset_ms, 105.0);
    assert!(estimate_offset(10.0, 0.0, 0.0, 5.0).is_err());
    assert!(estimate_offset(0.0, 5.0, 4.0, 10.0).is_err());
}

#[test]
fn sync_exchange_over_the_wire() {
    let req = SyncMessage::Request { t1: 0.0 };
    let on_server = SyncMessage::decode(req.encode().as_bytes()).unwrap();
    let reply = on_server.reply_to(110.0, 120.0).unwrap();
    let back = SyncMessage::decode(reply.encode().as_bytes()).unwrap();
    assert_eq!(back.complete(30.0).unwrap().unwrap().offset_ms, 100.0);
}

#[test]
fn envelope_wire_format() {
    let text = br#"{"s":"s1","u":"A","q":7,"t":1000.5,"x":960,"y":540,"p":3.2,"c":0.98,"extra":1}"#;
    let e = decode_envelope(text).unwrap();
    assert_eq!(e.session_id, "s1");
    assert_eq!(e.user_id, "A");
    assert_eq!(e.seq, 7);
    assert_eq!(e.t_origin, 1000.5);
    assert_eq!(e.payload, Payload { x: 960.0, y: 540.0, pupil_diameter: 3.2, confidence: 0.98 });
    assert_eq!(decode_envelope(encode_envelope(&e).unwrap().as_bytes()).unwrap(), e);
    let missing = decode_envelope(br#"{"s":"s1","u":"A","t":1,"x":1,"y":1,"p":1,"c":1}"#).unwrap_err();
    assert_eq!(missing.field(), Some("seq"));
    assert!(matches!(missing, CodecError::Missing("seq")));
    let wrong = decode_envelope(br#"{"s":"s1","u":"A","q":"7","t":1,"x":1,"y":1,"p":1,"c":1}"#).unwrap_err();
    assert_eq!(wrong.field(), Some("seq"));
}

#[test]
fn broker_routes_by_topic() {
    let broker = Broker::new();
    let all = broker.subscribe("adt/s1/gaze/+");
    let a_only = broker.subscribe("adt/s1/gaze/A");
    let everything = broker.subscribe("adt/#");
    let payload = encode_envelope(&env("B", 1)).unwrap();
    assert_eq!(broker.publish(&gaze_topic("s1", "B"), payload.clone()), 2);
    let msg = all.try_recv().unwrap();
    assert_eq!(parse_gaze_topic(&msg.topic), Some(("s1", "B")));
    assert_eq!(decode_envelope(&msg.payload).unwrap(), env("B", 1));
    assert!(a_only.try_recv().is_err());
    assert!(everything.try_recv().is_ok());
}
