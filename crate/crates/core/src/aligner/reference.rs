use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::dtw::{warp, TemplateLayout};
use super::AlignError;
use crate::curriculum::PronLexEntry;
use crate::dsp::{mfcc, synth_phoneme_signal, AudioClip, FeatureSequence, MfccConfig, Voice, PHONEME_MS};
use crate::phoneme::Phoneme;

/// Lower bound applied to calibration spreads.
pub const SIGMA_FLOOR: f64 = 1e-3;

/// Reference recordings keyed by phoneme and voice. The first rendering of
/// each key supplies templates; the second, when present, is cross-aligned
/// against the first to calibrate the Likert bands.
#[derive(Debug, Clone, Default)]
pub struct ReferenceClips {
    clips: HashMap<(Phoneme, Voice), Vec<AudioClip>>,
}

impl ReferenceClips {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, phoneme: Phoneme, voice: Voice, clip: AudioClip) {
        self.clips.entry((phoneme, voice)).or_default().push(clip);
    }

    pub fn get(&self, phoneme: Phoneme, voice: Voice) -> &[AudioClip] {
        self.clips.get(&(phoneme, voice)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Removes every rendering for a key.
    pub fn remove(&mut self, phoneme: Phoneme, voice: Voice) {
        self.clips.remove(&(phoneme, voice));
    }

    pub fn len(&self) -> usize {
        self.clips.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Phoneme, Voice, &[AudioClip])> {
        self.clips.iter().map(|(&(p, v), c)| (p, v, c.as_slice()))
    }

    /// Synthetic references for the whole inventory: two identical
    /// renderings per (phoneme, voice), standing in for two speakers.
    pub fn synthetic() -> Self {
        let mut refs = Self::new();
        for p in Phoneme::all() {
            for v in Voice::ALL {
                let clip = synth_phoneme_signal(p, PHONEME_MS, v).expect("valid duration");
                refs.insert(p, v, clip.clone());
                refs.insert(p, v, clip);
            }
        }
        refs
    }
}

/// Reference frames of one phoneme in word context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhonemeTemplate {
    pub phoneme: Phoneme,
    pub frames: FeatureSequence,
    pub voice: Voice,
}

/// Mean and spread of per-frame reference cross-alignment distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub mean: f64,
    pub sd: f64,
}

/// Templates, calibration and playback audio for one voice.
#[derive(Debug, Clone, PartialEq)]
pub struct VoiceModel {
    pub templates: Vec<PhonemeTemplate>,
    pub calibration: Vec<Calibration>,
    pub reference_clip: AudioClip,
    reference: FeatureSequence,
    layout: TemplateLayout,
}

impl VoiceModel {
    /// Builds a voice model directly from feature templates, with the given
    /// calibration. Mostly useful for tests and feature-space experiments.
    pub fn from_templates(
        templates: Vec<PhonemeTemplate>,
        calibration: Vec<Calibration>,
        reference_clip: AudioClip,
    ) -> Result<Self, AlignError> {
        if templates.is_empty() || templates.len() != calibration.len() {
            return Err(AlignError::LengthMismatch {
                expected: templates.len(),
                actual: calibration.len(),
            });
        }
        for t in &templates {
            if t.frames.len() < 2 {
                return Err(AlignError::TemplateTooShort {
                    phoneme: t.phoneme,
                    voice: t.voice,
                    frames: t.frames.len(),
                });
            }
        }
        let reference = FeatureSequence::concat(templates.iter().map(|t| &t.frames))?;
        let layout = TemplateLayout::from_lengths(&templates.iter().map(|t| t.frames.len()).collect::<Vec<_>>());
        let calibration = calibration
            .into_iter()
            .map(|c| Calibration { mean: c.mean, sd: c.sd.max(SIGMA_FLOOR) })
            .collect();
        Ok(Self {
            templates,
            calibration,
            reference_clip,
            reference,
            layout,
        })
    }

    /// Concatenated template frames.
    pub fn reference(&self) -> &FeatureSequence {
        &self.reference
    }

    pub fn layout(&self) -> &TemplateLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.reference.dim()
    }
}

/// Everything needed to align and grade one curriculum word.
#[derive(Debug, Clone, PartialEq)]
pub struct WordReferenceModel {
    pub entry: PronLexEntry,
    voices: BTreeMap<Voice, VoiceModel>,
}

impl WordReferenceModel {
    pub fn from_voices(entry: PronLexEntry, voices: BTreeMap<Voice, VoiceModel>) -> Result<Self, AlignError> {
        for (&voice, vm) in &voices {
            let phonemes: Vec<Phoneme> = vm.templates.iter().map(|t| t.phoneme).collect();
            if phonemes != entry.phonemes {
                return Err(AlignError::TemplateOrder { voice });
            }
        }
        Ok(Self { entry, voices })
    }

    pub fn voice(&self, voice: Voice) -> Result<&VoiceModel, AlignError> {
        self.voices.get(&voice).ok_or(AlignError::MissingVoice(voice))
    }

    pub fn voices(&self) -> impl Iterator<Item = (Voice, &VoiceModel)> {
        self.voices.iter().map(|(&v, m)| (v, m))
    }

    pub fn phoneme_count(&self) -> usize {
        self.entry.phonemes.len()
    }
}

// Splits word-level frames at phoneme onsets: frame t belongs to the
// phoneme whose sample span contains the frame's first sample.
fn slice_by_onsets(features: &FeatureSequence, onsets: &[usize], hop: usize) -> Vec<FeatureSequence> {
    let frame_starts: Vec<usize> = onsets
        .iter()
        .map(|&s| s.div_ceil(hop).min(features.len()))
        .collect();
    frame_starts
        .iter()
        .enumerate()
        .map(|(k, &start)| {
            let end = frame_starts.get(k + 1).copied().unwrap_or(features.len());
            features.slice(start..end.max(start))
        })
        .collect()
}

fn concat_clips<'a>(clips: impl IntoIterator<Item = &'a AudioClip>) -> (AudioClip, Vec<usize>) {
    let mut samples: Vec<i16> = Vec::new();
    let mut onsets = Vec::new();
    for c in clips {
        onsets.push(samples.len());
        samples.extend_from_slice(c.samples());
    }
    (AudioClip::new(samples).expect("at least one non-empty clip"), onsets)
}

fn build_voice(
    entry: &PronLexEntry,
    clips: &ReferenceClips,
    voice: Voice,
    config: &MfccConfig,
) -> Result<VoiceModel, AlignError> {
    let mut firsts = Vec::with_capacity(entry.phonemes.len());
    let mut seconds = Vec::with_capacity(entry.phonemes.len());
    for &p in &entry.phonemes {
        let renderings = clips.get(p, voice);
        let first = renderings.first().ok_or(AlignError::MissingClip { phoneme: p, voice })?;
        firsts.push(first);
        seconds.push(renderings.get(1).unwrap_or(first));
    }

    let (reference_clip, onsets) = concat_clips(firsts.iter().copied());
    let features = mfcc(&reference_clip, config)?;
    let slices = slice_by_onsets(&features, &onsets, config.frame.hop_samples());
    let mut templates = Vec::with_capacity(slices.len());
    for (&phoneme, frames) in entry.phonemes.iter().zip(slices) {
        if frames.len() < 2 {
            return Err(AlignError::TemplateTooShort { phoneme, voice, frames: frames.len() });
        }
        templates.push(PhonemeTemplate { phoneme, frames, voice });
    }
    let layout = TemplateLayout::from_lengths(&templates.iter().map(|t| t.frames.len()).collect::<Vec<_>>());

    // Cross-align the second speaker's rendering against the templates.
    let (second_clip, _) = concat_clips(seconds.iter().copied());
    let second = mfcc(&second_clip, config)?;
    let path = warp(&second, &features, &layout).ok_or(AlignError::LearnerTooShort {
        frames: second.len(),
        phonemes: layout.templates(),
    })?;
    let mut per_template: Vec<Vec<f64>> = vec![Vec::new(); layout.templates()];
    for cell in &path.cells {
        per_template[layout.template_of(cell.reference)].push(cell.cost);
    }
    let calibration = per_template
        .iter()
        .map(|costs| {
            let n = costs.len().max(1) as f64;
            let mean = costs.iter().sum::<f64>() / n;
            let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n;
            Calibration { mean, sd: var.sqrt() }
        })
        .collect();
    VoiceModel::from_templates(templates, calibration, reference_clip)
}

/// Builds the reference model of a word for both voices.
///
/// Templates are cut from the MFCCs of the concatenated reference
/// renderings, so frames straddling two phonemes belong to the earlier one
/// and a learner reproducing the reference audio aligns at zero cost.
pub fn build_reference_model(
    entry: &PronLexEntry,
    clips: &ReferenceClips,
    config: &MfccConfig,
) -> Result<WordReferenceModel, AlignError> {
    let mut voices = BTreeMap::new();
    for voice in Voice::ALL {
        voices.insert(voice, build_voice(entry, clips, voice, config)?);
    }
    WordReferenceModel::from_voices(entry.clone(), voices)
}
