//! Aligns a mispronounced word to its templates and grades each phoneme.

use phonetutor::aligner::force_align;
use phonetutor::dsp::{mfcc, synth_word_utterance, ErrorModel, Voice};
use phonetutor::engine::Engine;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let engine = Engine::synthetic();
    let entry = engine.entry("menacing")?.clone();
    let mut detune = vec![0.0; entry.phonemes.len()];
    detune[2] = 0.35;
    let clip = synth_word_utterance(&entry, Voice::Male, &ErrorModel::new(detune)?)?;

    let features = mfcc(&clip, engine.features())?;
    let alignment = force_align(&features, &*engine.model_for(&entry)?, Voice::Male)?;
    let scored = engine.score(&entry, &clip, Voice::Male, None)?;
    println!("{} /{}/, {} frames", entry.word, entry.spelled_out, features.len());
    for (i, p) in entry.phonemes.iter().enumerate() {
        let s = &scored.feedback.phoneme_scores[i];
        println!(
            "  {:<3} frames {:>3}..{:<3} cost {:.3} score {:6.2} rating {}",
            p.to_string(),
            alignment.segments[i].start,
            alignment.segments[i].end,
            alignment.per_phoneme_cost[i],
            s.acoustic_score,
            scored.feedback.ratings[i]
        );
    }
    println!("flagged phonemes: {:?}", scored.feedback.flagged());
    Ok(())
}
