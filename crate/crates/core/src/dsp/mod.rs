//! Audio ingestion, MFCC features and the synthetic phoneme voice.

mod mfcc;
mod synth;
mod wav;

pub use mfcc::{
    mel_energies, mel_filterbank, mfcc, FeatureError, FeatureSequence, FrameSpec, MfccConfig,
    Window,
};
pub use synth::{
    synth_phoneme_signal, synth_word_utterance, tone_pair, white_noise, ErrorModel, SynthError,
    Voice, FEMALE_SHIFT, PHONEME_MS,
};
pub use wav::{parse_wav, read_wav, write_wav, AudioClip, WavError, SAMPLE_RATE};
