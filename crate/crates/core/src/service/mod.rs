//! HTTP session API and operator commands.
//!
//! Sessions live in memory behind one async mutex each, so commands to a
//! session run in arrival order while different sessions proceed in
//! parallel. Every command's records reach the store before the response
//! is sent. A session whose records could not be stored is evicted and
//! rebuilt from its log on the next request.

pub mod commands;
mod http;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use tokio::sync::Mutex as SessionLock;

use crate::config::Config;
use crate::engine::Engine;
use crate::session::{Clock, Session};
use crate::store::{content_hash, Store, StoreError};

pub use http::{router, CreateParticipant, CreateSession};

type Slot = Arc<SessionLock<Option<Session>>>;

pub struct AppState {
    pub engine: Arc<Engine>,
    pub store: Arc<Store>,
    pub clock: Arc<dyn Clock>,
    pub config: Config,
    sessions: Mutex<HashMap<String, Slot>>,
    counter: AtomicU64,
}

impl std::fmt::Debug for AppState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AppState")
            .field("engine", &self.engine)
            .field("store", &self.store)
            .finish_non_exhaustive()
    }
}

impl AppState {
    pub fn new(engine: Arc<Engine>, store: Arc<Store>, clock: Arc<dyn Clock>, config: Config) -> Arc<Self> {
        Arc::new(Self {
            engine,
            store,
            clock,
            config,
            sessions: Mutex::new(HashMap::new()),
            counter: AtomicU64::new(0),
        })
    }

    fn slot(&self, id: &str) -> Slot {
        self.sessions
            .lock()
            .expect("session table poisoned")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    /// Locks a session, loading it from the store when not in memory.
    async fn lock(&self, id: &str) -> Result<tokio::sync::OwnedMutexGuard<Option<Session>>, StoreError> {
        let mut guard = self.slot(id).lock_owned().await;
        if guard.is_none() {
            match self.store.load_session(id) {
                Ok(s) => *guard = Some(s),
                Err(e) => {
                    drop(guard);
                    self.sessions.lock().expect("session table poisoned").remove(id);
                    return Err(e);
                }
            }
        }
        Ok(guard)
    }

    fn new_session_id(&self, participant: &str) -> String {
        loop {
            let n = self.counter.fetch_add(1, Ordering::Relaxed);
            let seed = format!("{participant}/{}/{n}", self.clock.now_ms());
            let id = content_hash(seed.as_bytes())[..16].to_string();
            let taken = self.sessions.lock().expect("session table poisoned").contains_key(&id)
                || self.store.root().join("sessions").join(format!("{id}.log")).exists();
            if !taken {
                return id;
            }
        }
    }
}

/// Builds the engine and store described by `config` and serves the API
/// until interrupted.
pub async fn serve(config: Config) -> Result<(), commands::CommandError> {
    let engine = Arc::new(Engine::from_config(&config)?);
    let store = Arc::new(Store::open(&config.store_path)?);
    for voice in [crate::dsp::Voice::Male, crate::dsp::Voice::Female] {
        if let Some(t) = store.voice_transform(voice)? {
            engine.set_voice_transform(t);
        }
    }
    for p in store.participants()? {
        if let Some(t) = store.transform(&p.id)? {
            engine.set_transform(&p.id, t);
        }
    }
    let addr = format!("{}:{}", config.bind, config.port);
    let state = AppState::new(engine, store, Arc::new(crate::session::SystemClock), config);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| commands::CommandError::Io(format!("bind {addr}: {e}")))?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| commands::CommandError::Io(e.to_string()))
}
