//! A pre-test and a post-test for the same learner. The session reveals no
//! scores; totals are read back from the event log afterwards.

use phonetutor::analytics::{asgp, Phase, StudyGroup};
use phonetutor::curriculum::sample_syllabus;
use phonetutor::dsp::Voice;
use phonetutor::engine::Engine;
use phonetutor::session::{Participant, VirtualClock};
use phonetutor::simulate::{run_test, Sink, SyntheticLearner};
use phonetutor::store::Store;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let engine = Engine::synthetic();
    let dir = std::env::temp_dir().join(format!("phonetutor-test-{}", std::process::id()));
    let store = Store::open(&dir)?;
    let sink = Sink { store: Some(&store) };
    let clock = VirtualClock::new(0);
    let syllabus = sample_syllabus(engine.curriculum(), 10, 3)?;
    let participant = Participant::new("TG1", StudyGroup::Treatment, Some(Voice::Male));
    store.save_participant(&participant)?;
    let mut learner = SyntheticLearner::new(participant, 0.25, 0.6, 1.0, 0.3, 9);

    let pre = run_test(&engine, &mut learner, &syllabus, Phase::Pre, "tg1-pre", &clock, &sink)?;
    // three sessions of practice happen in between
    for _ in 0..3 {
        learner.finish_session();
    }
    let post = run_test(&engine, &mut learner, &syllabus, Phase::Post, "tg1-post", &clock, &sink)?;
    println!("pre  {:8.1} ({} words accepted)", pre.total, pre.words_accepted);
    println!("post {:8.1} ({} words accepted)", post.total, post.words_accepted);
    println!("ASGP {:+.2}%", asgp(&pre, &post)?);
    print!("{}", store.export_scores(&Default::default())?);
    std::fs::remove_dir_all(dir)?;
    Ok(())
}
