//! One ACTIVITY session driven directly through the state machine, with
//! a simulated learner who improves on each repetition. Events go to an
//! on-disk store in a temporary directory.

use phonetutor::analytics::StudyGroup;
use phonetutor::dsp::Voice;
use phonetutor::engine::Engine;
use phonetutor::session::{AttemptOutcome, Clock, Mode, Participant, Session, SessionSettings, SessionState, StartSession, VirtualClock};
use phonetutor::simulate::SyntheticLearner;
use phonetutor::store::Store;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let engine = Engine::synthetic();
    let dir = std::env::temp_dir().join(format!("phonetutor-activity-{}", std::process::id()));
    let store = Store::open(&dir)?;
    let clock = VirtualClock::new(0);
    let participant = Participant::new("TG1", StudyGroup::Treatment, Some(Voice::Female));
    let mut learner = SyntheticLearner::new(participant.clone(), 0.08, 0.8, 0.4, 0.0, 1);

    let syllabus: Vec<_> = ["attic", "orchard", "valley", "believe"].iter().map(|w| engine.entry(w).cloned()).collect::<Result<_, _>>()?;
    let (mut session, start) = Session::start(
        StartSession {
            id: "demo".into(),
            participant,
            mode: Mode::Activity,
            phase: None,
            syllabus,
            seed: 0,
            settings: SessionSettings::default(),
        },
        engine.scoring_config(),
        clock.now_ms(),
    )?;
    store.append_event(&start)?;

    while session.state != SessionState::Ended {
        let (p, recs) = session.next_item(&engine, clock.now_ms())?;
        store.append_events(&recs)?;
        let Some(p) = p else { break };
        let entry = session.entry(&p.word).unwrap().clone();
        let clip = learner.speak(&entry)?;
        clock.advance_secs(20.0);
        let clip_ref = store.put_clip(&clip)?;
        let (outcome, recs) = session.submit_attempt(&engine, &clip, &clip_ref, clock.now_ms())?;
        store.append_events(&recs)?;
        if let AttemptOutcome::Feedback(f) = outcome {
            println!("{:>5.0}s {:<8} ratings {:?} score {:6.1}", session.elapsed_s, f.word, f.ratings, f.word_score);
        }
        store.append_events(&session.dismiss_feedback(clock.now_ms())?)?;
    }

    let s = session.summarize()?;
    println!("ended ({:?}) after {} attempts", s.end_reason, s.attempts);
    if let Some(a) = s.in_session_asgp {
        println!("repeated words improved by {a:.1}% from first to last attempt");
    }
    println!("{} events logged under {}", store.read_log("demo")?.len(), dir.display());
    std::fs::remove_dir_all(dir)?;
    Ok(())
}
