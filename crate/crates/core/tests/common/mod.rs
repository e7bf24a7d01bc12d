#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use phonetutor::config::Config;
use phonetutor::dsp::{synth_word_utterance, white_noise, ErrorModel, Voice};
use phonetutor::engine::Engine;
use phonetutor::service::{router, AppState};
use phonetutor::session::{Session, SessionState, VirtualClock};
use phonetutor::store::Store;

pub struct Harness {
    pub app: Router,
    pub state: Arc<AppState>,
    pub clock: VirtualClock,
    pub dir: tempfile::TempDir,
}

pub fn harness(engine: Arc<Engine>, config: Config) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(dir.path()).unwrap());
    let clock = VirtualClock::new(1_700_000_000_000);
    let state = AppState::new(engine, store, Arc::new(clock.clone()), config);
    Harness {
        app: router(state.clone()),
        state,
        clock,
        dir,
    }
}

pub struct Reply {
    pub status: StatusCode,
    pub body: Vec<u8>,
    pub content_type: Option<String>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or(Value::Null)
    }
}

pub async fn call(app: &Router, method: Method, uri: &str, content_type: Option<&str>, body: Vec<u8>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(ct) = content_type {
        req = req.header(header::CONTENT_TYPE, ct);
    }
    let resp = app.clone().oneshot(req.body(Body::from(body)).unwrap()).await.unwrap();
    let status = resp.status();
    let content_type = resp
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply {
        status,
        body,
        content_type,
    }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    call(app, Method::GET, uri, None, Vec::new()).await
}

pub async fn post_json(app: &Router, uri: &str, body: &Value) -> Reply {
    call(app, Method::POST, uri, Some("application/json"), serde_json::to_vec(body).unwrap()).await
}

pub async fn post_wav(app: &Router, uri: &str, wav: Vec<u8>) -> Reply {
    call(app, Method::POST, uri, Some("audio/wav"), wav).await
}

pub fn create_body(participant: &str, mode: &str, seed: u64) -> Value {
    let mut body = json!({
        "participant": {"id": participant, "group": "treatment", "declared_voice": "female"},
        "mode": mode,
        "seed": seed,
    });
    if mode == "TEST" {
        body["phase"] = json!("pre");
    }
    body
}

const SCORE_KEYS: [&str; 12] = [
    "word_score",
    "ratings",
    "acoustic_scores",
    "accepted",
    "satisfactory",
    "flagged",
    "feedback",
    "mean_first_score",
    "mean_last_score",
    "in_session_asgp",
    "repeated_words",
    "total",
];

fn empty(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::Array(a) => a.is_empty(),
        _ => false,
    }
}

/// Paths of score-bearing fields with a value anywhere in `v`.
pub fn score_fields(v: &Value) -> Vec<String> {
    fn walk(v: &Value, path: &str, out: &mut Vec<String>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let p = format!("{path}.{k}");
                    if SCORE_KEYS.contains(&k.as_str()) && !empty(x) {
                        out.push(p.clone());
                    }
                    walk(x, &p, out);
                }
            }
            Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| walk(x, &format!("{path}[{i}]"), out)),
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk(v, "", &mut out);
    out
}

pub struct FuzzReport {
    pub sessions: usize,
    pub commands: usize,
    pub graded: usize,
    pub ended: usize,
    pub problems: Vec<String>,
}

/// Drives random command sequences through the HTTP API and checks that
/// every state change is legal, TEST responses carry no scores, no
/// request fails with a server error, and every stored log replays to the
/// state the API reports.
pub fn fuzz_http(engine: Arc<Engine>, seed: u64, sessions: usize, commands: usize) -> FuzzReport {
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    rt.block_on(async move {
        let h = harness(engine, Config::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut report = FuzzReport {
            sessions,
            commands: 0,
            graded: 0,
            ended: 0,
            problems: Vec::new(),
        };
        for s in 0..sessions {
            let mode = ["ARCADE", "ACTIVITY", "TEST"][s % 3];
            let created = post_json(&h.app, "/v1/sessions", &create_body(&format!("p{s}"), mode, rng.gen())).await;
            if created.status != StatusCode::CREATED {
                report.problems.push(format!("create {mode}: {}", created.status));
                continue;
            }
            let id = created.json()["id"].as_str().unwrap().to_string();
            let mut state: SessionState = serde_json::from_value(created.json()["state"].clone()).unwrap();
            let mut word: Option<String> = None;
            for _ in 0..commands {
                report.commands += 1;
                let reply = match rng.gen_range(0..10) {
                    0 | 1 => {
                        let r = get(&h.app, &format!("/v1/sessions/{id}/next")).await;
                        if r.status == StatusCode::OK {
                            word = r.json()["word"].as_str().map(str::to_string);
                        }
                        r
                    }
                    2..=4 => {
                        let wav = match (rng.gen_range(0..6), &word) {
                            (0, _) => b"RIFF-not-really".to_vec(),
                            (1, _) | (_, None) => white_noise(300, rng.gen()).to_wav_bytes(),
                            (_, Some(w)) => {
                                let entry = h.state.engine.entry(w).unwrap().clone();
                                let k = entry.phonemes.len();
                                let d = rng.gen_range(0.0..0.4);
                                let em = ErrorModel::new(vec![d; k]).unwrap();
                                synth_word_utterance(&entry, Voice::Female, &em).unwrap().to_wav_bytes()
                            }
                        };
                        let r = if rng.gen_bool(0.1) {
                            call(&h.app, Method::POST, &format!("/v1/sessions/{id}/attempts"), Some("text/plain"), wav).await
                        } else {
                            post_wav(&h.app, &format!("/v1/sessions/{id}/attempts"), wav).await
                        };
                        if r.status == StatusCode::OK || r.status == StatusCode::NO_CONTENT {
                            report.graded += 1;
                        }
                        r
                    }
                    5 | 6 => post_json(&h.app, &format!("/v1/sessions/{id}/continue"), &Value::Null).await,
                    7 => get(&h.app, &format!("/v1/sessions/{id}/summary")).await,
                    8 => get(&h.app, &format!("/v1/sessions/{id}")).await,
                    _ => {
                        h.clock.advance_secs(rng.gen_range(0.0..120.0));
                        continue;
                    }
                };
                if reply.status.is_server_error() {
                    report.problems.push(format!("{id}: server error {}", reply.status));
                }
                if mode == "TEST" {
                    let fields = score_fields(&reply.json());
                    if !fields.is_empty() {
                        report.problems.push(format!("{id}: TEST response exposes {fields:?}"));
                    }
                }
                let view = get(&h.app, &format!("/v1/sessions/{id}")).await.json();
                let next: SessionState = serde_json::from_value(view["state"].clone()).unwrap();
                if next != state && !state.can_transition_to(next) && !reachable(state, next) {
                    report.problems.push(format!("{id}: {state} -> {next}"));
                }
                state = next;
            }
            let live = get(&h.app, &format!("/v1/sessions/{id}")).await.json();
            report.ended += (live["state"] == "ended") as usize;
            match h.state.store.read_log(&id).map_err(|e| e.to_string()).and_then(|log| Session::replay(&log).map_err(|e| e.to_string())) {
                Ok(replayed) => {
                    if serde_json::to_value(replayed.view()).unwrap() != live {
                        report.problems.push(format!("{id}: replayed view differs from live view"));
                    }
                }
                Err(e) => report.problems.push(format!("{id}: log does not replay: {e}")),
            }
        }
        report
    })
}

// One request can pass through two legal transitions, such as an attempt
// moving awaiting_recording to feedback, or a tick ending a presenting
// session.
fn reachable(from: SessionState, to: SessionState) -> bool {
    use SessionState::*;
    [Presenting, AwaitingRecording, Feedback, Ended]
        .into_iter()
        .any(|mid| from.can_transition_to(mid) && mid.can_transition_to(to))
}
