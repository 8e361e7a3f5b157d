//! Command-line front end. Each subcommand is a plain function over readers
//! and writers so it can be driven from tests.

use std::collections::BTreeMap;
use std::io::{BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use adt_core::restream::{
    generate_session, load_recording_file, restream, BehaviorKind, RestreamOptions, SessionRecording, SystemClock,
};
use adt_core::session::{
    analyze_offline, apply_times, parse_kv, read_summary_csv, read_times_csv, run_recording, AnalysisReport,
    AnalysisRow, Correlation, SessionConfig, SessionPipeline, SessionSummary,
};
use adt_core::transport::{encode_envelope, latency_stats, LatencyStats};
use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::server::{self, AppState, LiveSession};

#[derive(Debug, Parser)]
#[command(name = "adt", version, about = "Multi-user gaze analytics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the session server.
    Serve {
        /// Session config file; repeat for several sessions.
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        /// Overrides `server.bind` from the config.
        #[arg(long)]
        bind: Option<SocketAddr>,
    },
    /// Replay a recording on its original timing.
    Restream {
        recording: PathBuf,
        /// Session id to publish under; defaults to the recording's.
        #[arg(long)]
        session: Option<String>,
        /// Replay only this user.
        #[arg(long)]
        user: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        #[arg(long, default_value_t = 50.0)]
        tick_ms: f64,
        /// Send to a running server instead of analysing in-process.
        #[arg(long)]
        server: Option<String>,
        /// Session config for in-process analysis.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write a synthetic recording.
    Simulate {
        #[arg(long, default_value_t = 2)]
        users: usize,
        #[arg(long, default_value = "focal")]
        behavior: BehaviorKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 60.0)]
        duration_s: f64,
        #[arg(long, default_value_t = 30.0)]
        rate_hz: f64,
        /// Session id; defaults to `<behavior>-<seed>`.
        #[arg(long)]
        session: Option<String>,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Summarise sessions and correlate group measures with completion time.
    Analyze {
        /// Recordings (.jsonl) or summary tables (.csv).
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// CSV `session,time_s` overriding completion times.
        #[arg(long)]
        times: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Transport latency from a recording's receive timestamps.
    LatencyReport {
        recording: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

/// Server-side settings read from the `server.` keys of a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerSettings {
    pub bind: SocketAddr,
    pub record_dir: Option<PathBuf>,
}

impl Default for ServerSettings {
    fn default() -> Self {
        Self { bind: SocketAddr::from(([127, 0, 0, 1], 8080)), record_dir: None }
    }
}

pub fn load_config(path: &Path) -> anyhow::Result<(SessionConfig, ServerSettings)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let pairs = parse_kv(&text).with_context(|| format!("in {}", path.display()))?;
    let mut cfg = SessionConfig::default();
    cfg.apply(&pairs).with_context(|| format!("in {}", path.display()))?;
    cfg.validate()?;
    let mut server = ServerSettings::default();
    for (k, v) in &pairs {
        match k.as_str() {
            "server.bind" => server.bind = v.parse().with_context(|| format!("server.bind = {v:?}"))?,
            "server.record_dir" => server.record_dir = Some(PathBuf::from(v)),
            other if other.starts_with("server.") => bail!("unknown key {other:?}"),
            _ => {}
        }
    }
    Ok((cfg, server))
}

fn base_config(path: Option<&Path>) -> anyhow::Result<SessionConfig> {
    Ok(match path {
        Some(p) => load_config(p)?.0,
        None => SessionConfig::default(),
    })
}

pub fn simulate(
    users: usize,
    behavior: BehaviorKind,
    seed: u64,
    duration_s: f64,
    rate_hz: f64,
    session: Option<&str>,
) -> anyhow::Result<SessionRecording> {
    if users == 0 {
        bail!("--users must be at least 1");
    }
    if !(duration_s > 0.0 && rate_hz > 0.0) {
        bail!("--duration-s and --rate-hz must be positive");
    }
    let id = session.map_or_else(|| format!("{behavior}-{seed}"), str::to_owned);
    Ok(generate_session(&id, behavior, users, seed, duration_s * 1000.0, rate_hz))
}

/// Narrows a recording to one user and renames its session.
pub fn select(mut rec: SessionRecording, session: Option<&str>, user: Option<&str>) -> anyhow::Result<SessionRecording> {
    if let Some(u) = user {
        if !rec.meta.user_ids.iter().any(|x| x == u) {
            bail!("user {u:?} is not in the recording (users: {})", rec.meta.user_ids.join(", "));
        }
        rec.rows.retain(|r| r.user_id == u);
        rec.meta.user_ids = vec![u.to_owned()];
        rec.meta.offsets.retain(|k, _| k == u);
    }
    if let Some(s) = session {
        rec.meta.session_id = s.to_owned();
    }
    Ok(rec)
}

/// Replays `rec` into an in-process pipeline at `speed`, writing each
/// measure point as a JSON line the moment it is produced. Arrival times
/// follow the replay clock mapped back to recording time.
pub fn restream_local<W: Write>(
    rec: &SessionRecording,
    base: &SessionConfig,
    opts: RestreamOptions,
    out: &mut W,
) -> anyhow::Result<SessionSummary> {
    let mut pipeline = SessionPipeline::for_recording(rec, base)?;
    let t0 = rec.rows.first().map_or(0.0, |r| r.t);
    let mut failed = None;
    restream(rec, opts, &SystemClock::new(), |row, elapsed| {
        let arrival = t0 + elapsed * opts.speed;
        pipeline.ingest(row.to_envelope(&rec.meta.session_id), arrival);
        for p in pipeline.drain_points() {
            if let Err(e) = writeln!(out, "{}", p.to_json(false)) {
                failed.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = failed {
        return Err(e.into());
    }
    pipeline.finish();
    for p in pipeline.drain_points() {
        writeln!(out, "{}", p.to_json(false))?;
    }
    out.flush()?;
    Ok(pipeline.summary())
}

/// Replays `rec` to a running server, one ingest request per batch of rows
/// that fell due together.
pub async fn restream_remote(rec: SessionRecording, opts: RestreamOptions, server: &str) -> anyhow::Result<usize> {
    let url = format!("{}/sessions/{}/ingest", server.trim_end_matches('/'), rec.meta.session_id);
    let (tx, mut rx) = tokio::sync::mpsc::unbounded_channel::<String>();
    let player = tokio::task::spawn_blocking(move || {
        let session = rec.meta.session_id.clone();
        restream(&rec, opts, &SystemClock::new(), |row, _| {
            let line = encode_envelope(&row.to_envelope(&session)).expect("finite sample");
            let _ = tx.send(line);
        })
    });
    let client = reqwest::Client::new();
    let mut sent = 0;
    while let Some(first) = rx.recv().await {
        let mut body = first;
        let mut n = 1;
        while let Ok(more) = rx.try_recv() {
            body.push('\n');
            body.push_str(&more);
            n += 1;
        }
        let resp = client.post(&url).body(body).send().await.with_context(|| format!("POST {url}"))?;
        let status = resp.status();
        if !status.is_success() {
            bail!("{url}: {status}: {}", resp.text().await.unwrap_or_default());
        }
        sent += n;
    }
    player.await??;
    Ok(sent)
}

pub fn analysis_rows(inputs: &[PathBuf], base: &SessionConfig) -> anyhow::Result<Vec<AnalysisRow>> {
    let mut rows = Vec::new();
    for path in inputs {
        let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if is_csv {
            let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            rows.extend(read_summary_csv(BufReader::new(f)).with_context(|| format!("in {}", path.display()))?);
        } else {
            let rec = load_recording_file(path).with_context(|| format!("loading {}", path.display()))?;
            let run = run_recording(&rec, base)?;
            rows.push(AnalysisRow::from(&run.summary));
        }
    }
    Ok(rows)
}

pub fn analyze(inputs: &[PathBuf], times: Option<&Path>, base: &SessionConfig) -> anyhow::Result<AnalysisReport> {
    let mut rows = analysis_rows(inputs, base)?;
    if let Some(t) = times {
        let f = std::fs::File::open(t).with_context(|| format!("opening {}", t.display()))?;
        let map = read_times_csv(BufReader::new(f)).with_context(|| format!("in {}", t.display()))?;
        apply_times(&mut rows, &map);
    }
    Ok(analyze_offline(rows))
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn correlation_line(label: &str, c: &Correlation) -> String {
    match c {
        Correlation::Available { r, n } => format!("r({label}, time) = {r:.5}  (n = {n})"),
        Correlation::Unavailable { reason } => format!("r({label}, time) unavailable: {reason}"),
    }
}

pub fn render_report(report: &AnalysisReport) -> String {
    let width = report.rows.iter().map(|r| r.session.len()).max().unwrap_or(0).max(7);
    let mut s = format!("{:<width$}  {:>9}  {:>9}  {:>9}\n", "session", "K", "RIPA", "time_s");
    for r in &report.rows {
        s += &format!("{:<width$}  {:>9}  {:>9}  {:>9}\n", r.session, cell(r.k), cell(r.ripa), cell(r.time_s));
    }
    s += &correlation_line("K", &report.k_vs_time);
    s.push('\n');
    s += &correlation_line("RIPA", &report.ripa_vs_time);
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    pub overall: LatencyStats,
    pub users: BTreeMap<String, LatencyStats>,
    /// Rows without a receive timestamp.
    pub skipped: usize,
}

pub fn latency_report(rec: &SessionRecording) -> anyhow::Result<LatencyReport> {
    let mut per_user: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut skipped = 0;
    for r in &rec.rows {
        match r.received_at {
            Some(ra) => {
                let corrected = r.t + rec.meta.offsets.get(&r.user_id).copied().unwrap_or(0.0);
                per_user.entry(r.user_id.clone()).or_default().push((corrected, ra));
            }
            None => skipped += 1,
        }
    }
    let all: Vec<(f64, f64)> = per_user.values().flatten().copied().collect();
    if all.is_empty() {
        bail!("recording has no receive timestamps");
    }
    let overall = latency_stats(&all)?;
    let users = per_user.into_iter().map(|(u, p)| Ok((u, latency_stats(&p)?))).collect::<anyhow::Result<_>>()?;
    Ok(LatencyReport { overall, users, skipped })
}

pub fn render_latency(report: &LatencyReport) -> String {
    let mut s = String::new();
    for (u, st) in &report.users {
        s += &format!("{u}: {st} ms  (n = {})\n", st.count);
    }
    s += &format!("all: {} ms  (n = {})\n", report.overall, report.overall.count);
    if report.skipped > 0 {
        s += &format!("{} row(s) without receive time\n", report.skipped);
    }
    s
}

/// Starts every configured session and serves until interrupted.
pub async fn serve(configs: &[PathBuf], bind: Option<SocketAddr>) -> anyhow::Result<()> {
    let state = AppState::new();
    let mut addr = None;
    for path in configs {
        let (cfg, settings) = load_config(path)?;
        if state.get(&cfg.session_id).is_some() {
            bail!("session {:?} configured twice", cfg.session_id);
        }
        addr.get_or_insert(settings.bind);
        if let Some(dir) = &settings.record_dir {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        tracing::info!(session = %cfg.session_id, "session started");
        state.add(LiveSession::new(cfg, settings.record_dir)?);
    }
    let addr = bind.or(addr).unwrap_or(ServerSettings::default().bind);
    let (local, handle) = server::spawn(addr, state.clone()).await?;
    tracing::info!(%local, "listening");
    tokio::signal::ctrl_c().await?;
    for s in state.all() {
        s.stop(server::now_ms())?;
    }
    handle.abort();
    Ok(())
}

/// Executes one command, writing its regular output to `out`.
pub async fn run<W: Write + Send>(cli: Cli, out: &mut W) -> anyhow::Result<()> {
    match cli.command {
        Command::Serve { config, bind } => serve(&config, bind).await,
        Command::Restream { recording, session, user, speed, tick_ms, server, config } => {
            let rec = load_recording_file(&recording).with_context(|| format!("loading {}", recording.display()))?;
            let rec = select(rec, session.as_deref(), user.as_deref())?;
            let opts = RestreamOptions { speed, tick_ms };
            opts.validate()?;
            match server {
                Some(url) => {
                    let n = restream_remote(rec, opts, &url).await?;
                    eprintln!("sent {n} samples");
                }
                None => {
                    let base = base_config(config.as_deref())?;
                    let summary =
                        tokio::task::block_in_place(|| restream_local(&rec, &base, opts, out))?;
                    eprintln!("{}", serde_json::to_string(&summary)?);
                }
            }
            Ok(())
        }
        Command::Simulate { users, behavior, seed, duration_s, rate_hz, session, out: file } => {
            let rec = simulate(users, behavior, seed, duration_s, rate_hz, session.as_deref())?;
            match file {
                Some(path) => rec.save(&path)?,
                None => rec.write_jsonl(&mut *out)?,
            }
            Ok(())
        }
        Command::Analyze { inputs, times, config, json } => {
            let base = base_config(config.as_deref())?;
            let report = analyze(&inputs, times.as_deref(), &base)?;
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            } else {
                write!(out, "{}", render_report(&report))?;
            }
            Ok(())
        }
        Command::LatencyReport { recording, json } => {
            let rec = load_recording_file(&recording).with_context(|| format!("loading {}", recording.display()))?;
            let report = latency_report(&rec)?;
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            } else {
                write!(out, "{}", render_latency(&report))?;
            }
            Ok(())
        }
    }
}
