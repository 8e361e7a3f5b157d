//! Windowed K against a direct evaluation of its definition, plus the
//! aggregation examples and invariance properties.

use adt_core::measures::{
    experiment_k, group_k, window_k, Fixation, GazeEvent, KValue, MeasureError, Saccade, Scope, TimeWindow,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain description of one window's event stream.
struct Trace {
    /// (t_start, duration) of fixations.
    fixations: Vec<(f64, f64)>,
    /// (t_start, duration, amplitude) of the saccade after fixation i.
    saccades: Vec<(f64, f64, f64)>,
}

fn random_trace(rng: &mut ChaCha8Rng, pairs: usize) -> Trace {
    let mut t = rng.gen_range(0.0..500.0);
    let mut fixations = Vec::new();
    let mut saccades = Vec::new();
    for i in 0..=pairs {
        let d = rng.gen_range(50.0..1500.0);
        fixations.push((t, d));
        t += d;
        if i < pairs {
            let sd = rng.gen_range(10.0..80.0);
            saccades.push((t, sd, rng.gen_range(1.0..1000.0)));
            t += sd;
        }
    }
    Trace { fixations, saccades }
}

fn to_events(tr: &Trace, time_scale: f64, amp_scale: f64) -> Vec<GazeEvent<f64>> {
    let mut out = Vec::new();
    for (i, &(ts, d)) in tr.fixations.iter().enumerate() {
        out.push(GazeEvent::Fixation(Fixation {
            t_start: ts * time_scale,
            t_end: (ts + d) * time_scale,
            duration: d * time_scale,
            centroid_x: 0.0,
            centroid_y: 0.0,
            n_samples: 1,
        }));
        if let Some(&(ss, sd, a)) = tr.saccades.get(i) {
            out.push(GazeEvent::Saccade(Saccade {
                t_start: ss * time_scale,
                t_end: (ss + sd) * time_scale,
                duration: sd * time_scale,
                amplitude: a * amp_scale,
            }));
        }
    }
    out
}

/// Direct evaluation: statistics over every fixation duration and every
/// saccade amplitude ending in the window; the sum runs over fixations whose
/// following saccade also ends in the window.
fn oracle(tr: &Trace, start: f64, end: f64) -> Option<f64> {
    let inside = |t: f64| start <= t && t < end;
    let mut ds = Vec::new();
    let mut as_ = Vec::new();
    let mut pairs = Vec::new();
    for (i, &(ts, d)) in tr.fixations.iter().enumerate() {
        if inside(ts + d) {
            ds.push(d);
            if let Some(&(ss, sd, a)) = tr.saccades.get(i) {
                if inside(ss + sd) {
                    pairs.push((d, a));
                }
            }
        }
    }
    for &(ss, sd, a) in &tr.saccades {
        if inside(ss + sd) {
            as_.push(a);
        }
    }
    if pairs.len() < 2 {
        return None;
    }
    fn stats(v: &[f64]) -> (f64, f64) {
        let mut sum = 0.0;
        for x in v {
            sum += x;
        }
        let mu = sum / v.len() as f64;
        let mut ss = 0.0;
        for x in v {
            ss += (x - mu) * (x - mu);
        }
        (mu, (ss / v.len() as f64).sqrt())
    }
    let (md, sdd) = stats(&ds);
    let (ma, sda) = stats(&as_);
    let mut total = 0.0;
    for &(d, a) in &pairs {
        let zd = if sdd == 0.0 { 0.0 } else { (d - md) / sdd };
        let za = if sda == 0.0 { 0.0 } else { (a - ma) / sda };
        total += zd - za;
    }
    Some(total / pairs.len() as f64)
}

fn user(u: &str) -> Scope {
    Scope::User(u.into())
}

#[test]
fn thousand_random_windows_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut present = 0;
    for case in 0..1000 {
        let pairs = rng.gen_range(3..=50);
        let tr = random_trace(&mut rng, pairs);
        let last = tr.fixations.last().map(|&(t, d)| t + d).unwrap();
        // whole trace, or a random cut that leaves unpaired events at the edges
        let (start, end) = if case % 2 == 0 {
            (0.0, last + 1.0)
        } else {
            let a = rng.gen_range(0.0..last * 0.3);
            (a, rng.gen_range(last * 0.6..last + 1.0))
        };
        let expected = oracle(&tr, start, end);
        let got = window_k(&to_events(&tr, 1.0, 1.0), TimeWindow::new(start, end), user("A")).unwrap();
        match (expected, got) {
            (None, None) => {}
            (Some(e), Some(k)) => {
                present += 1;
                assert!((k.value - e).abs() < 1e-9, "case {case}: {} vs {e}", k.value);
            }
            (e, g) => panic!("case {case}: presence differs, oracle {e:?}, got {g:?}"),
        }
    }
    assert!(present > 900, "most windows carry a value ({present})");
}

#[test]
fn scale_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let pairs = rng.gen_range(3..30);
        let tr = random_trace(&mut rng, pairs);
        let last = tr.fixations.last().map(|&(t, d)| t + d).unwrap();
        let (start, end) = (rng.gen_range(0.0..last * 0.2), rng.gen_range(last * 0.7..last + 1.0));
        let base = window_k(&to_events(&tr, 1.0, 1.0), TimeWindow::new(start, end), user("A")).unwrap();
        let alpha = rng.gen_range(0.01..100.0);
        let beta = rng.gen_range(0.01..100.0);
        let w = TimeWindow::new(start * alpha, end * alpha);
        let scaled = window_k(&to_events(&tr, alpha, beta), w, user("A")).unwrap();
        match (base, scaled) {
            (Some(a), Some(b)) => assert!((a.value - b.value).abs() < 1e-9, "{} vs {}", a.value, b.value),
            (None, None) => {}
            other => panic!("presence changed under scaling: {other:?}"),
        }
    }
}

#[test]
fn all_equal_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let n = rng.gen_range(3..40);
        let d = rng.gen_range(50.0..1500.0);
        let a = rng.gen_range(1.0..1000.0);
        let mut t = 0.0;
        let mut tr = Trace { fixations: vec![], saccades: vec![] };
        for i in 0..=n {
            tr.fixations.push((t, d));
            t += d;
            if i < n {
                tr.saccades.push((t, 20.0, a));
                t += 20.0;
            }
        }
        let k = window_k(&to_events(&tr, 1.0, 1.0), TimeWindow::new(0.0, t + 1.0), user("A")).unwrap().unwrap();
        assert_eq!(k.value, 0.0);
    }
}

fn trace_from(ds: &[f64], amps: &[f64]) -> Trace {
    let mut t = 0.0;
    let mut tr = Trace { fixations: vec![], saccades: vec![] };
    for (i, &d) in ds.iter().enumerate() {
        tr.fixations.push((t, d));
        t += d;
        if let Some(&a) = amps.get(i) {
            tr.saccades.push((t, 10.0, a));
            t += 10.0;
        }
    }
    tr
}

#[test]
fn documented_examples() {
    let w = TimeWindow::new(0.0, 3000.0);
    let k = window_k(&to_events(&trace_from(&[200.0; 3], &[40.0; 2]), 1.0, 1.0), w, user("A")).unwrap();
    assert_eq!(k.unwrap().value, 0.0);

    let tr = trace_from(&[100.0, 300.0, 200.0], &[10.0, 50.0]);
    let k = window_k(&to_events(&tr, 1.0, 1.0), w, user("A")).unwrap().unwrap();
    assert_eq!(k.n_pairs, 2);
    assert!(k.value.abs() < 1e-12);
    assert!((oracle(&tr, 0.0, 3000.0).unwrap() - k.value).abs() < 1e-12);

    let k = window_k(&to_events(&trace_from(&[100.0, 300.0], &[10.0]), 1.0, 1.0), w, user("A")).unwrap();
    assert!(k.is_none());
}

fn kv(scope: Scope, v: f64) -> KValue<f64> {
    KValue { t_window_end: 0.0, scope, value: v, n_pairs: 2 }
}

#[test]
fn experiment_and_group_examples() {
    let e = |vs: &[f64]| experiment_k(&vs.iter().map(|&v| kv(user("A"), v)).collect::<Vec<_>>()).unwrap();
    assert!((e(&[-0.1, 0.3]).unwrap().value - 0.1).abs() < 1e-12);
    assert!((e(&[0.2, -0.4, 0.5]).unwrap().value - 0.1).abs() < 1e-12);
    assert_eq!(e(&[0.7]).unwrap().value, 0.7);
    assert!(e(&[]).is_none());

    let g = |vs: &[(&str, f64)]| group_k(&vs.iter().map(|&(u, v)| kv(user(u), v)).collect::<Vec<_>>());
    assert_eq!(g(&[("A", 0.4), ("B", 0.4)]).unwrap().unwrap().value, 0.4);
    assert_eq!(g(&[("A", -1.0), ("B", 1.0)]).unwrap().unwrap().value, 0.0);
    assert!((g(&[("A", -0.2), ("B", 0.5), ("C", 0.3)]).unwrap().unwrap().value - 0.2).abs() < 1e-12);
    assert!(g(&[]).unwrap().is_none());
    assert!(matches!(g(&[("A", 0.1), ("A", 0.2)]), Err(MeasureError::DuplicateUser(_))));
}

#[test]
fn group_k_is_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let n = rng.gen_range(1..12);
        let mut vals: Vec<KValue<f64>> =
            (0..n).map(|i| kv(user(&format!("u{i}")), rng.gen_range(-2.0..2.0))).collect();
        let a = group_k(&vals).unwrap().unwrap().value;
        for i in (1..vals.len()).rev() {
            vals.swap(i, rng.gen_range(0..=i));
        }
        let b = group_k(&vals).unwrap().unwrap().value;
        assert!((a - b).abs() < 1e-12);
    }
}
