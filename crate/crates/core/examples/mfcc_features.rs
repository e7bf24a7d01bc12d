//! Feature extraction on a synthetic utterance.
//!
//! `cargo run --example mfcc_features -- path/to/clip.wav` reads a clip
//! instead.

use phonetutor::curriculum::Curriculum;
use phonetutor::dsp::{mfcc, read_wav, synth_word_utterance, ErrorModel, MfccConfig, Voice};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clip = match std::env::args().nth(1) {
        Some(path) => read_wav(path)?,
        None => {
            let c = Curriculum::bundled();
            synth_word_utterance(c.get("attic").unwrap(), Voice::Female, &ErrorModel::perfect())?
        }
    };
    let features = mfcc(&clip, &MfccConfig::default())?;
    println!("{} samples -> {} frames x {} coefficients", clip.samples().len(), features.len(), features.dim());
    for t in (0..features.len()).step_by(features.len().max(5) / 5) {
        let row: Vec<String> = features.frame(t).iter().take(6).map(|v| format!("{v:7.2}")).collect();
        println!("frame {t:3}: {} ...", row.join(" "));
    }
    Ok(())
}
