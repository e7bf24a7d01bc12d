//! Enrolls a speaker whose voice differs from the references and compares
//! alignment cost with and without the estimated transform.

use phonetutor::adaptation::alignment_cost;
use phonetutor::dsp::{mfcc, synth_word_utterance, ErrorModel, Voice};
use phonetutor::engine::Engine;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let engine = Engine::synthetic();
    let entries: Vec<_> = engine.curriculum().entries().iter().step_by(15).cloned().collect();
    let mut recordings = Vec::new();
    for e in &entries {
        recordings.push((e.clone(), synth_word_utterance(e, Voice::Male, &ErrorModel::perfect())?));
    }
    let t = engine.enroll(Voice::Female, &recordings)?;
    println!("transform from {} words, {} frames", recordings.len(), t.enrollment_frame_count);

    let (mut before, mut after) = (0.0, 0.0);
    for (e, clip) in &recordings {
        let f = mfcc(clip, engine.features())?;
        let m = engine.model_for(e)?;
        before += alignment_cost(&f, &m, Voice::Female, None)?;
        after += alignment_cost(&f, &m, Voice::Female, Some(&t))?;
    }
    println!("mean cost against female templates: {:.3} -> {:.3}", before / entries.len() as f64, after / entries.len() as f64);
    Ok(())
}
