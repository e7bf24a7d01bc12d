use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::AppState;
use crate::analytics::{Phase, StudyGroup};
use crate::curriculum::{sample_syllabus, PronLexEntry};
use crate::dsp::{parse_wav, Voice};
use crate::session::{AttemptOutcome, EventLogRecord, Mode, Participant, Session, SessionError, SessionState, StartSession, TEST_WORDS};
use crate::store::StoreError;

const ARCADE_WORDS: usize = 5;
const ACTIVITY_WORDS: usize = 10;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateParticipant {
    pub id: String,
    pub group: StudyGroup,
    #[serde(default)]
    pub declared_voice: Option<Voice>,
    #[serde(default)]
    pub transform_ref: Option<String>,
}

/// Body of `POST /v1/sessions`. Without `words` the syllabus is drawn
/// from the curriculum with `seed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub participant: CreateParticipant,
    pub mode: Mode,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub phase: Option<Phase>,
    #[serde(default)]
    pub words: Option<Vec<String>>,
}

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    message: String,
    state: Option<SessionState>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            state: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(s) = self.state {
            body["state"] = json!(s);
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::InvalidState { .. } | SessionError::Ended | SessionError::NotEnded => StatusCode::CONFLICT,
            SessionError::Grading(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Internal(_) | SessionError::Scheduler(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        let state = match &e {
            SessionError::InvalidState { state, .. } => Some(*state),
            SessionError::Ended => Some(SessionState::Ended),
            _ => None,
        };
        Self {
            status,
            message: e.to_string(),
            state,
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::BadId(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %e, "store failure");
        }
        Self::new(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/next", get(next_item))
        .route("/v1/sessions/{id}/attempts", post(submit_attempt))
        .route("/v1/sessions/{id}/continue", post(continue_session))
        .route("/v1/sessions/{id}/summary", get(summary))
        .route("/v1/curriculum", get(curriculum))
        .route("/v1/clips/{hash}", get(clip))
        .layer(middleware::from_fn_with_state(state.clone(), authorize))
        .with_state(state)
}

async fn authorize(State(state): State<Arc<AppState>>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.config.operator_token {
        let presented = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong bearer token").into_response();
        }
    }
    next.run(request).await
}

fn default_syllabus(state: &AppState, mode: Mode, seed: u64) -> ApiResult<Vec<PronLexEntry>> {
    let curriculum = state.engine.curriculum();
    if mode == Mode::Test {
        return sample_syllabus(curriculum, TEST_WORDS / 3, seed)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()));
    }
    let n = if mode == Mode::Arcade { ARCADE_WORDS } else { ACTIVITY_WORDS };
    let mut entries: Vec<PronLexEntry> = curriculum.entries().to_vec();
    entries.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    entries.truncate(n);
    Ok(entries)
}

/// Stores the records, evicting the in-memory session on failure so the
/// next request rebuilds it from what was actually committed.
fn persist(state: &AppState, slot: &mut Option<Session>, records: &[EventLogRecord]) -> ApiResult<()> {
    if let Err(e) = state.store.append_events(records) {
        *slot = None;
        return Err(e.into());
    }
    Ok(())
}

async fn lock(state: &AppState, id: &str) -> ApiResult<tokio::sync::OwnedMutexGuard<Option<Session>>> {
    let mut guard = state.lock(id).await?;
    let now = state.clock.now_ms();
    let session = guard.as_mut().expect("lock loads the session");
    let records = session.tick(now)?;
    persist(state, &mut guard, &records)?;
    if guard.is_none() {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "session could not be stored; retry"));
    }
    Ok(guard)
}

async fn create_session(State(state): State<Arc<AppState>>, Json(body): Json<CreateSession>) -> ApiResult<Response> {
    let seed = body.seed.unwrap_or(state.config.syllabus_seed);
    let syllabus = match &body.words {
        Some(words) => words
            .iter()
            .map(|w| {
                state
                    .engine
                    .entry(w)
                    .cloned()
                    .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))
            })
            .collect::<ApiResult<Vec<_>>>()?,
        None => default_syllabus(&state, body.mode, seed)?,
    };
    let participant = Participant {
        id: body.participant.id,
        group: body.participant.group,
        declared_voice: body.participant.declared_voice,
        transform_ref: body.participant.transform_ref,
    };
    let id = state.new_session_id(&participant.id);
    let (session, start) = Session::start(
        StartSession {
            id: id.clone(),
            participant: participant.clone(),
            mode: body.mode,
            phase: body.phase,
            syllabus,
            seed,
            settings: state.config.session_settings(),
        },
        state.engine.scoring_config(),
        state.clock.now_ms(),
    )?;
    state.store.save_participant(&participant)?;
    let mut guard = state.slot(&id).lock_owned().await;
    state.store.append_events(&[start])?;
    let view = session.view();
    *guard = Some(session);
    tracing::info!(session = %id, participant = %participant.id, mode = %body.mode, "session started");
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let guard = lock(&state, &id).await?;
    Ok(Json(guard.as_ref().expect("locked session").view()).into_response())
}

async fn next_item(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let mut guard = lock(&state, &id).await?;
    let now = state.clock.now_ms();
    let session = guard.as_mut().expect("locked session");
    let (presentation, records) = session.next_item(state.engine.as_ref(), now)?;
    persist(&state, &mut guard, &records)?;
    match presentation {
        Some(p) => Ok(Json(p).into_response()),
        None => Err(SessionError::Ended.into()),
    }
}

fn is_wav(headers: &HeaderMap) -> bool {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.split(';').next())
        .map(|v| matches!(v.trim().to_ascii_lowercase().as_str(), "audio/wav" | "audio/x-wav" | "audio/wave"))
        .unwrap_or(false)
}

async fn submit_attempt(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    if !is_wav(&headers) {
        return Err(ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "attempts must be audio/wav"));
    }
    let clip = parse_wav(&body).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let mut guard = lock(&state, &id).await?;
    let session = guard.as_mut().expect("locked session");
    if session.state != SessionState::AwaitingRecording {
        return Err(SessionError::InvalidState {
            op: "submit_attempt",
            state: session.state,
        }
        .into());
    }
    let clip_ref = state.store.put_clip(&clip)?;
    let engine = state.engine.clone();
    let now = state.clock.now_ms();
    let (outcome, records) = session.submit_attempt(engine.as_ref(), &clip, &clip_ref, now)?;
    persist(&state, &mut guard, &records)?;
    match outcome {
        AttemptOutcome::Feedback(f) => Ok(Json(f).into_response()),
        AttemptOutcome::Silent { .. } => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

async fn continue_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let mut guard = lock(&state, &id).await?;
    let now = state.clock.now_ms();
    let session = guard.as_mut().expect("locked session");
    let records = session.dismiss_feedback(now)?;
    let view = session.view();
    persist(&state, &mut guard, &records)?;
    Ok(Json(view).into_response())
}

async fn summary(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let guard = lock(&state, &id).await?;
    let session = guard.as_ref().expect("locked session");
    if session.state != SessionState::Ended {
        return Err(ApiError {
            status: StatusCode::CONFLICT,
            message: SessionError::NotEnded.to_string(),
            state: Some(session.state),
        });
    }
    Ok(Json(session.summarize()?).into_response())
}

async fn curriculum(State(state): State<Arc<AppState>>) -> Json<Vec<PronLexEntry>> {
    Json(state.engine.curriculum().entries().to_vec())
}

async fn clip(State(state): State<Arc<AppState>>, Path(hash): Path<String>) -> ApiResult<Response> {
    let bytes = match state.store.clip_bytes(&hash) {
        Ok(b) => b,
        Err(StoreError::NotFound(m)) => state
            .engine
            .reference_audio(&hash)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, m))?,
        Err(e) => return Err(e.into()),
    };
    Ok(([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response())
}
