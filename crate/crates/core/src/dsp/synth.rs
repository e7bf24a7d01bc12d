//! Deterministic synthetic voice.
//!
//! Each phoneme is rendered as a fixed pair of sinusoids with a 10 ms
//! raised-cosine onset and offset. Tone frequencies sit on a 200 Hz grid
//! between 400 and 3000 Hz, one tone from the lower half and one from the
//! upper half, and no two phonemes share a pair. The female voice scales
//! both tones by [`FEMALE_SHIFT`]. A "detune" fraction `d` scales both tones
//! by `1 + d` and stands in for a learner's mispronunciation.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::wav::{AudioClip, SAMPLE_RATE};
use crate::curriculum::PronLexEntry;
use crate::phoneme::Phoneme;

/// Per-phoneme duration used when rendering whole words.
pub const PHONEME_MS: u32 = 120;

/// Frequency ratio applied to the female rendering.
pub const FEMALE_SHIFT: f64 = 1.2;

const LOW_TONES: [f64; 6] = [400.0, 600.0, 800.0, 1000.0, 1200.0, 1400.0];
const HIGH_TONES: [f64; 8] = [1600.0, 1800.0, 2000.0, 2200.0, 2400.0, 2600.0, 2800.0, 3000.0];
const LOW_AMPLITUDE: f64 = 0.35;
const HIGH_AMPLITUDE: f64 = 0.25;
const RAMP_MS: u32 = 10;
const MIN_DURATION_MS: u32 = 40;
const MAX_DETUNE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Voice {
    Male,
    Female,
}

impl Voice {
    pub const ALL: [Voice; 2] = [Voice::Male, Voice::Female];

    fn shift(self) -> f64 {
        match self {
            Voice::Male => 1.0,
            Voice::Female => FEMALE_SHIFT,
        }
    }
}

impl fmt::Display for Voice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Voice::Male => "male",
            Voice::Female => "female",
        })
    }
}

impl std::str::FromStr for Voice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Voice::Male),
            "female" | "f" => Ok(Voice::Female),
            other => Err(format!("unknown voice {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("duration {0} ms is below the 40 ms minimum")]
    TooShort(u32),
    #[error("detune {value} for phoneme index {index} is outside [0, 0.5]")]
    DetuneOutOfRange { index: usize, value: f64 },
    #[error("error model covers {got} phonemes, word has {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// The (low, high) tone pair of a phoneme for the male voice, in Hz.
pub fn tone_pair(p: Phoneme) -> (f64, f64) {
    let i = p.index();
    let (q, r) = (i / LOW_TONES.len(), i % LOW_TONES.len());
    (LOW_TONES[r], HIGH_TONES[(7 * q + r) % HIGH_TONES.len()])
}

fn render(p: Phoneme, duration_ms: u32, voice: Voice, detune: f64) -> Vec<i16> {
    let n = (SAMPLE_RATE * duration_ms / 1000) as usize;
    let ramp = (SAMPLE_RATE * RAMP_MS / 1000) as usize;
    let (lo, hi) = tone_pair(p);
    let scale = voice.shift() * (1.0 + detune);
    let (f1, f2) = (lo * scale, hi * scale);
    let sr = SAMPLE_RATE as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let edge = i.min(n - 1 - i);
            let env = if edge < ramp {
                0.5 * (1.0 - (PI * edge as f64 / ramp as f64).cos())
            } else {
                1.0
            };
            let s = LOW_AMPLITUDE * (2.0 * PI * f1 * t).sin() + HIGH_AMPLITUDE * (2.0 * PI * f2 * t).sin();
            (env * s * 32767.0).round() as i16
        })
        .collect()
}

/// Renders one phoneme. Pure: identical arguments give identical samples.
pub fn synth_phoneme_signal(p: Phoneme, duration_ms: u32, voice: Voice) -> Result<AudioClip, SynthError> {
    if duration_ms < MIN_DURATION_MS {
        return Err(SynthError::TooShort(duration_ms));
    }
    Ok(AudioClip::new(render(p, duration_ms, voice, 0.0)).expect("non-empty render"))
}

/// Per-phoneme detune fractions for a simulated learner.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    detunes: Vec<f64>,
}

impl ErrorModel {
    /// A perfect speaker: zero detune on every phoneme.
    pub fn perfect() -> Self {
        Self::default()
    }

    pub fn new(detunes: Vec<f64>) -> Result<Self, SynthError> {
        for (index, &value) in detunes.iter().enumerate() {
            if !(0.0..=MAX_DETUNE).contains(&value) {
                return Err(SynthError::DetuneOutOfRange { index, value });
            }
        }
        Ok(Self { detunes })
    }

    /// Detunes phoneme `index` only.
    pub fn single(len: usize, index: usize, detune: f64) -> Result<Self, SynthError> {
        let mut detunes = vec![0.0; len];
        if index < len {
            detunes[index] = detune;
        }
        Self::new(detunes)
    }

    pub fn detunes(&self) -> &[f64] {
        &self.detunes
    }

    fn detune(&self, index: usize) -> f64 {
        self.detunes.get(index).copied().unwrap_or(0.0)
    }
}

/// Renders a word as the concatenation of its phonemes, each detuned per
/// `error_model`. With zero detune this is exactly the reference rendering.
pub fn synth_word_utterance(
    entry: &PronLexEntry,
    voice: Voice,
    error_model: &ErrorModel,
) -> Result<AudioClip, SynthError> {
    let k = entry.phonemes.len();
    if !error_model.detunes.is_empty() && error_model.detunes.len() != k {
        return Err(SynthError::LengthMismatch {
            expected: k,
            got: error_model.detunes.len(),
        });
    }
    let mut samples = Vec::new();
    for (i, &p) in entry.phonemes.iter().enumerate() {
        samples.extend(render(p, PHONEME_MS, voice, error_model.detune(i)));
    }
    Ok(AudioClip::new(samples).expect("word has phonemes"))
}

/// Seeded uniform white noise at roughly the synthetic voice's level.
pub fn white_noise(duration_ms: u32, seed: u64) -> AudioClip {
    let n = ((SAMPLE_RATE * duration_ms / 1000) as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AudioClip::new((0..n).map(|_| rng.gen_range(-12000..=12000)).collect()).expect("non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::UnitGroup;

    #[test]
    fn tone_pairs_are_distinct_and_in_band() {
        let mut pairs: Vec<(u32, u32)> = Phoneme::all()
            .map(|p| {
                let (a, b) = tone_pair(p);
                assert!((300.0..=3000.0).contains(&a) && (300.0..=3000.0).contains(&b));
                assert!(b - a >= 150.0);
                (a as u32, b as u32)
            })
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        assert_eq!(pairs.len(), Phoneme::all().count());
    }

    #[test]
    fn phoneme_rendering_is_pure_and_ramped() {
        let p: Phoneme = "AE".parse().unwrap();
        let a = synth_phoneme_signal(p, 120, Voice::Male).unwrap();
        assert_eq!(a, synth_phoneme_signal(p, 120, Voice::Male).unwrap());
        assert_eq!(a.len(), 1920);
        assert_eq!(a.samples()[0], 0);
        assert_eq!(*a.samples().last().unwrap(), 0);
        assert_ne!(a, synth_phoneme_signal(p, 120, Voice::Female).unwrap());
    }

    #[test]
    fn short_duration_is_rejected() {
        let p: Phoneme = "AE".parse().unwrap();
        assert_eq!(synth_phoneme_signal(p, 39, Voice::Male), Err(SynthError::TooShort(39)));
        assert!(synth_phoneme_signal(p, 40, Voice::Male).is_ok());
    }

    #[test]
    fn zero_detune_is_the_reference_concatenation() {
        let entry = PronLexEntry::new(
            "attic",
            "AT-ik",
            ["AE", "T", "IH", "K"].iter().map(|s| s.parse().unwrap()).collect(),
            UnitGroup::A,
        )
        .unwrap();
        let word = synth_word_utterance(&entry, Voice::Female, &ErrorModel::perfect()).unwrap();
        let zeros = ErrorModel::new(vec![0.0; 4]).unwrap();
        assert_eq!(word, synth_word_utterance(&entry, Voice::Female, &zeros).unwrap());
        let concat = entry
            .phonemes
            .iter()
            .map(|&p| synth_phoneme_signal(p, PHONEME_MS, Voice::Female).unwrap())
            .reduce(|a, b| a.concat(&b))
            .unwrap();
        assert_eq!(word, concat);
    }

    #[test]
    fn detune_validation() {
        assert!(matches!(
            ErrorModel::new(vec![0.1, 0.6]),
            Err(SynthError::DetuneOutOfRange { index: 1, .. })
        ));
        assert!(ErrorModel::new(vec![-0.01]).is_err());
        assert!(ErrorModel::new(vec![0.0, 0.5]).is_ok());
    }

    #[test]
    fn detune_changes_only_the_target_phoneme_samples() {
        let entry = PronLexEntry::new(
            "soggy",
            "SOG-ee",
            ["S", "AA", "G", "IY"].iter().map(|s| s.parse().unwrap()).collect(),
            UnitGroup::A,
        )
        .unwrap();
        let clean = synth_word_utterance(&entry, Voice::Male, &ErrorModel::perfect()).unwrap();
        let bad = synth_word_utterance(&entry, Voice::Male, &ErrorModel::single(4, 2, 0.3).unwrap()).unwrap();
        let seg = 1920;
        for (i, (a, b)) in clean.samples().iter().zip(bad.samples()).enumerate() {
            if i / seg != 2 {
                assert_eq!(a, b);
            }
        }
        assert_ne!(clean.samples()[2 * seg..3 * seg], bad.samples()[2 * seg..3 * seg]);
    }

    #[test]
    fn white_noise_is_seeded() {
        assert_eq!(white_noise(100, 3), white_noise(100, 3));
        assert_ne!(white_noise(100, 3), white_noise(100, 4));
    }
}
