//! Replays every stored session log and checks the result matches the
//! state the session had when it was written.

use phonetutor::engine::Engine;
use phonetutor::session::Session;
use phonetutor::simulate::{simulate_into, CohortConfig};
use phonetutor::store::Store;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("phonetutor-replay-{}", std::process::id()));
    let engine = Engine::synthetic();
    simulate_into(&engine, &CohortConfig { per_group: 2, sessions: 2, ..CohortConfig::default() }, &dir)?;

    let store = Store::open(&dir)?;
    for id in store.session_ids()? {
        let log = store.read_log(&id)?;
        let s = Session::replay(&log)?;
        println!("{id:<16} {:>4} events  {:<8} {:?} {} attempts", log.len(), s.mode, s.state, s.attempts.len());
    }
    println!("{} clips stored", store.clip_count()?);
    std::fs::remove_dir_all(dir)?;
    Ok(())
}
