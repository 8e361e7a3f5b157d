//! Live server over real sockets: control endpoints, dashboard stream
//! contract, and equality of live output with an offline replay.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::time::Duration;

use adt::server::{self, AppState, LiveSession};
use adt_core::restream::{generate_session, load_recording, BehaviorKind, SessionRecording};
use adt_core::session::{run_recording, SessionConfig, SessionSummary};
use adt_core::transport::encode_envelope;
use futures_util::{SinkExt, StreamExt};
use serde_json::Value;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::{self, Message};
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

fn config(rec: &SessionRecording) -> SessionConfig {
    let mut cfg = SessionConfig::new(rec.meta.session_id.clone(), rec.meta.user_ids.clone());
    cfg.chart_update_s = 0.05;
    cfg
}

async fn start(cfg: SessionConfig) -> (SocketAddr, AppState) {
    let state = AppState::new();
    state.add(LiveSession::new(cfg, None).unwrap());
    let (addr, _) = server::spawn("127.0.0.1:0".parse().unwrap(), state.clone()).await.unwrap();
    (addr, state)
}

async fn connect(addr: SocketAddr, id: &str) -> Ws {
    connect_async(format!("ws://{addr}/ws/sessions/{id}")).await.unwrap().0
}

async fn ingest(addr: SocketAddr, rec: &SessionRecording, rows: std::ops::Range<usize>) {
    let client = reqwest::Client::new();
    for chunk in rec.rows[rows].chunks(60) {
        let body: Vec<String> =
            chunk.iter().map(|r| encode_envelope(&r.to_envelope(&rec.meta.session_id)).unwrap()).collect();
        let resp = client
            .post(format!("http://{addr}/sessions/{}/ingest", rec.meta.session_id))
            .body(body.join("\n"))
            .send()
            .await
            .unwrap();
        assert!(resp.status().is_success());
        let report: Value = serde_json::from_str(&resp.text().await.unwrap()).unwrap();
        assert_eq!(report["received"], chunk.len());
    }
}

/// Frames until the stream has been quiet for `quiet`.
async fn collect(ws: &mut Ws, quiet: Duration) -> Vec<Value> {
    let mut out = Vec::new();
    while let Ok(Some(msg)) = tokio::time::timeout(quiet, ws.next()).await {
        if let Message::Text(t) = msg.unwrap() {
            out.push(serde_json::from_str(&t).unwrap());
        }
    }
    out
}

async fn post(addr: SocketAddr, path: &str) -> reqwest::Response {
    reqwest::Client::new().post(format!("http://{addr}{path}")).send().await.unwrap()
}

async fn get(addr: SocketAddr, path: &str) -> reqwest::Response {
    reqwest::get(format!("http://{addr}{path}")).await.unwrap()
}

fn by_channel(frames: &[Value]) -> BTreeMap<String, Vec<Value>> {
    let mut m: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    for f in frames {
        let mut f = f.clone();
        f.as_object_mut().unwrap().remove("snapshot");
        m.entry(f["chan"].as_str().unwrap().to_owned()).or_default().push(f);
    }
    m
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn live_session_end_to_end() {
    let rec = generate_session("live", BehaviorKind::Focal, 2, 1, 40_000.0, 30.0);
    let depth = 20;
    let (addr, _state) = start(SessionConfig { snapshot_depth: depth, ..config(&rec) }).await;

    let list: Value = serde_json::from_str(&get(addr, "/sessions").await.text().await.unwrap()).unwrap();
    assert_eq!(list[0]["session_id"], "live");
    assert_eq!(list[0]["finished"], false);

    let mut a = connect(addr, "live").await;
    let mut b = connect(addr, "live").await;
    let third = rec.rows.len() / 3;
    ingest(addr, &rec, 0..third).await;
    tokio::time::sleep(Duration::from_millis(200)).await;

    // a client joining mid-session, and one that leaves early
    let mut late = connect(addr, "live").await;
    let mut leaver = connect(addr, "live").await;
    a.send(Message::text("{not json")).await.unwrap();
    late.send(Message::text(r#"{"type":"ping"}"#)).await.unwrap();
    leaver.close(None).await.unwrap();
    drop(leaver);
    ingest(addr, &rec, third..rec.rows.len()).await;

    let stop = post(addr, "/sessions/live/stop").await;
    assert!(stop.status().is_success());
    let summary: SessionSummary = serde_json::from_str(&stop.text().await.unwrap()).unwrap();
    assert!(summary.finished);
    assert_eq!(summary.samples_accepted, rec.rows.len());
    let again: SessionSummary =
        serde_json::from_str(&get(addr, "/sessions/live/summary").await.text().await.unwrap()).unwrap();
    assert_eq!(again, summary);
    assert_eq!(post(addr, "/sessions/live/ingest").await.status(), 409);

    let quiet = Duration::from_millis(400);
    let (fa, fb, fl) = tokio::join!(collect(&mut a, quiet), collect(&mut b, quiet), collect(&mut late, quiet));
    assert!(!fa.is_empty());
    assert!(fa.iter().all(|f| f.get("snapshot").is_none()));
    assert_eq!(fa, fb, "concurrent clients see identical streams");

    // snapshot then live tail: per channel a contiguous suffix of the full stream
    let snap = fl.iter().take_while(|f| f["snapshot"] == true).count();
    assert!(snap > 0);
    assert!(fl[snap..].iter().all(|f| f.get("snapshot").is_none()));
    let (full, joined) = (by_channel(&fa), by_channel(&fl));
    let snap_counts = by_channel(&fl[..snap]);
    let mut cut = 0;
    for (chan, seq) in &full {
        let tail = &joined[chan];
        assert_eq!(tail.as_slice(), &seq[seq.len() - tail.len()..], "{chan}");
        let in_snapshot = snap_counts.get(chan).map_or(0, Vec::len);
        assert!(in_snapshot <= depth);
        if tail.len() < seq.len() {
            assert_eq!(in_snapshot, depth, "{chan}: snapshot holds the full depth when history was cut");
            cut += 1;
        }
    }
    assert!(cut > 0);

    // the live series equal an offline replay of the persisted recording
    let body = get(addr, "/sessions/live/recording").await.bytes().await.unwrap();
    let persisted = load_recording(&body[..]).unwrap();
    assert_eq!(persisted.rows.len(), rec.rows.len());
    let offline = run_recording(&persisted, &config(&rec)).unwrap();
    let expected: Vec<Value> = offline.points.iter().map(|p| p.to_json(false)).collect();
    for chan in ["k.user.U1", "k.user.U2", "k.group", "ripa.user.U1", "ripa.group", "trad.user.U2"] {
        assert_eq!(full[chan], by_channel(&expected)[chan], "{chan}");
    }
}

#[tokio::test]
async fn unknown_session_is_refused_with_reason() {
    let rec = generate_session("known", BehaviorKind::Ambient, 1, 0, 1_000.0, 30.0);
    let (addr, _state) = start(config(&rec)).await;
    match connect_async(format!("ws://{addr}/ws/sessions/nope")).await {
        Err(tungstenite::Error::Http(resp)) => {
            assert_eq!(resp.status(), 404);
            let body: Value = serde_json::from_slice(resp.body().as_ref().unwrap()).unwrap();
            assert!(body["error"].as_str().unwrap().contains("nope"));
        }
        other => panic!("expected refusal, got {:?}", other.map(|_| ())),
    }
    assert_eq!(get(addr, "/sessions/nope/summary").await.status(), 404);
    assert_eq!(post(addr, "/sessions/nope/stop").await.status(), 404);
}

#[tokio::test]
async fn bad_ingest_lines_are_reported() {
    let rec = generate_session("lines", BehaviorKind::Ambient, 1, 0, 1_000.0, 30.0);
    let (addr, _state) = start(config(&rec)).await;
    let good = encode_envelope(&rec.rows[0].to_envelope("lines")).unwrap();
    let body = format!("{good}\n{{\"s\":\"lines\",\"u\":\"U1\"}}\n\n");
    let resp = reqwest::Client::new()
        .post(format!("http://{addr}/sessions/lines/ingest"))
        .body(body)
        .send()
        .await
        .unwrap();
    let report: Value = serde_json::from_str(&resp.text().await.unwrap()).unwrap();
    assert_eq!(report["received"], 1);
    assert_eq!(report["rejected"][0]["line"], 2);
}
