//! The HTTP API without a socket: create a session, fetch the prompt,
//! upload a recording, read the feedback.

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use phonetutor::config::Config;
use phonetutor::dsp::{synth_word_utterance, ErrorModel, Voice};
use phonetutor::engine::Engine;
use phonetutor::service::{router, AppState};
use phonetutor::session::SystemClock;
use phonetutor::store::Store;

async fn send(app: &axum::Router, req: Request<Body>) -> (u16, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("phonetutor-http-{}", std::process::id()));
    let engine = Arc::new(Engine::synthetic());
    let state = AppState::new(engine.clone(), Arc::new(Store::open(&dir)?), Arc::new(SystemClock), Config::default());
    let app = router(state);

    let body = json!({
        "participant": {"id": "TG4", "group": "treatment", "declared_voice": "male"},
        "mode": "ARCADE",
        "seed": 4,
    });
    let create = Request::post("/v1/sessions").header("content-type", "application/json").body(Body::from(body.to_string()))?;
    let (status, view) = send(&app, create).await;
    let id = view["id"].as_str().unwrap().to_string();
    println!("POST /v1/sessions -> {status} {view}");

    let (status, prompt) = send(&app, Request::get(format!("/v1/sessions/{id}/next")).body(Body::empty())?).await;
    println!("GET next -> {status} {prompt}");

    let entry = engine.entry(prompt["word"].as_str().unwrap())?.clone();
    let mut detune = vec![0.0; entry.phonemes.len()];
    detune[0] = 0.4;
    let wav = synth_word_utterance(&entry, Voice::Male, &ErrorModel::new(detune)?)?.to_wav_bytes();
    let upload = Request::post(format!("/v1/sessions/{id}/attempts")).header("content-type", "audio/wav").body(Body::from(wav))?;
    let (status, feedback) = send(&app, upload).await;
    println!("POST attempts -> {status} ratings {} flagged {}", feedback["ratings"], feedback["flagged"]);

    std::fs::remove_dir_all(dir)?;
    Ok(())
}
