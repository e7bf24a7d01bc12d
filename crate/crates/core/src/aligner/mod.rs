//! Forced alignment and per-phoneme grading.
//!
//! A learner utterance is aligned against the exact transcription of the
//! expected word (its phoneme templates, in order), never against competing
//! hypotheses. The alignment yields one segment and one cost per phoneme;
//! costs become acoustic scores in (0, 100] and Likert ratings in 1..=3.

mod dtw;
mod reference;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use dtw::{euclidean, warp, PathCell, TemplateLayout, WarpPath};
pub use reference::{
    build_reference_model, Calibration, PhonemeTemplate, ReferenceClips, VoiceModel, WordReferenceModel,
    SIGMA_FLOOR,
};

use crate::adaptation::{apply_transform, AdaptError, SpeakerTransform};
use crate::analytics::{Phase, TestScores};
use crate::dsp::{mfcc, AudioClip, FeatureError, FeatureSequence, MfccConfig, Voice};
use crate::phoneme::Phoneme;

/// Lowest acoustic score ever reported.
pub const SCORE_FLOOR: f64 = 0.01;

#[derive(Debug, thiserror::Error)]
pub enum AlignError {
    #[error("learner has {frames} frames, fewer than the {phonemes} phonemes to align")]
    LearnerTooShort { frames: usize, phonemes: usize },
    #[error("missing reference clip for phoneme {phoneme} ({voice} voice)")]
    MissingClip { phoneme: Phoneme, voice: Voice },
    #[error("reference for phoneme {phoneme} ({voice} voice) yields {frames} frames, need at least 2")]
    TemplateTooShort { phoneme: Phoneme, voice: Voice, frames: usize },
    #[error("model has no {0} voice")]
    MissingVoice(Voice),
    #[error("template order does not match the word's phonemes ({voice} voice)")]
    TemplateOrder { voice: Voice },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("{clips} clips paired with {models} models")]
    PairingMismatch { clips: usize, models: usize },
    #[error("learner features have dimension {learner}, model expects {model}")]
    DimensionMismatch { learner: usize, model: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Adapt(#[from] AdaptError),
}

/// Segmentation and costs of one forced alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub phonemes: Vec<Phoneme>,
    /// Learner frame range of each phoneme; contiguous and covering.
    pub segments: Vec<Range<usize>>,
    /// Path distance within each segment divided by the segment length.
    pub per_phoneme_cost: Vec<f64>,
    /// Accumulated distance along the warping path.
    pub path_cost: f64,
    /// `path_cost` divided by the learner frame count.
    pub total_cost: f64,
}

/// Aligns learner features to the word's templates for `voice`.
pub fn force_align(
    learner: &FeatureSequence,
    model: &WordReferenceModel,
    voice: Voice,
) -> Result<AlignmentResult, AlignError> {
    let vm = model.voice(voice)?;
    align_to_voice(learner, vm)
}

pub(crate) fn align_to_voice(learner: &FeatureSequence, vm: &VoiceModel) -> Result<AlignmentResult, AlignError> {
    if learner.dim() != vm.dim() {
        return Err(AlignError::DimensionMismatch {
            learner: learner.dim(),
            model: vm.dim(),
        });
    }
    let layout = vm.layout();
    let k = layout.templates();
    let path = warp(learner, vm.reference(), layout).ok_or(AlignError::LearnerTooShort {
        frames: learner.len(),
        phonemes: k,
    })?;

    let mut starts = vec![usize::MAX; k];
    let mut sums = vec![0.0; k];
    for cell in &path.cells {
        let t = layout.template_of(cell.reference);
        starts[t] = starts[t].min(cell.learner);
        sums[t] += cell.cost;
    }
    let n = learner.len();
    let segments: Vec<Range<usize>> = (0..k)
        .map(|t| starts[t]..starts.get(t + 1).copied().unwrap_or(n))
        .collect();
    let per_phoneme_cost = segments
        .iter()
        .zip(&sums)
        .map(|(seg, sum)| sum / seg.len() as f64)
        .collect();
    Ok(AlignmentResult {
        phonemes: vm.templates.iter().map(|t| t.phoneme).collect(),
        segments,
        per_phoneme_cost,
        path_cost: path.cost,
        total_cost: path.cost / n as f64,
    })
}

/// Likert band configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikertBands {
    /// Rating 3 up to `mean + pass_sigmas * sd + margin`.
    pub pass_sigmas: f64,
    /// Rating 2 up to `mean + fail_sigmas * sd + margin`; 1 beyond.
    pub fail_sigmas: f64,
    /// Margin as a fraction of the calibration mean.
    pub margin_fraction: f64,
}

impl Default for LikertBands {
    fn default() -> Self {
        Self {
            pass_sigmas: 2.0,
            fail_sigmas: 4.0,
            margin_fraction: 0.05,
        }
    }
}

/// Grading parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    /// Cost at which a phoneme scores 100/e.
    pub temperature: f64,
    /// Word accepted when its score reaches this fraction of the perfect
    /// score (100 per phoneme).
    pub word_accept_fraction: f64,
    pub likert: LikertBands,
}

impl ScoringConfig {
    pub fn with_temperature(temperature: f64) -> Self {
        Self {
            temperature,
            word_accept_fraction: 0.6,
            likert: LikertBands::default(),
        }
    }

    /// Acceptance threshold for a word of `phonemes` phonemes.
    pub fn word_threshold(&self, phonemes: usize) -> f64 {
        self.word_accept_fraction * 100.0 * phonemes as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhonemeScore {
    pub phoneme: Phoneme,
    pub cost: f64,
    pub acoustic_score: f64,
}

/// Maps a cost to `max(0.01, 100 * exp(-cost / temperature))`.
pub fn acoustic_score(cost: f64, temperature: f64) -> f64 {
    (100.0 * (-cost / temperature).exp()).max(SCORE_FLOOR)
}

pub fn score_phonemes(alignment: &AlignmentResult, temperature: f64) -> Vec<PhonemeScore> {
    alignment
        .phonemes
        .iter()
        .zip(&alignment.per_phoneme_cost)
        .map(|(&phoneme, &cost)| PhonemeScore {
            phoneme,
            cost,
            acoustic_score: acoustic_score(cost, temperature),
        })
        .collect()
}

/// Per-phoneme ratings and the word decision for one attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikertFeedback {
    pub ratings: Vec<u8>,
    pub phoneme_scores: Vec<PhonemeScore>,
    pub word_score: f64,
    pub accepted: bool,
}

impl LikertFeedback {
    pub fn worst_rating(&self) -> u8 {
        self.ratings.iter().copied().min().unwrap_or(1)
    }

    /// Indices of phonemes rated below 3.
    pub fn flagged(&self) -> Vec<usize> {
        self.ratings
            .iter()
            .enumerate()
            .filter(|(_, &r)| r < 3)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Grades scored phonemes against the voice's calibration bands.
pub fn to_likert(
    scores: &[PhonemeScore],
    model: &WordReferenceModel,
    voice: Voice,
    config: &ScoringConfig,
) -> Result<LikertFeedback, AlignError> {
    let vm = model.voice(voice)?;
    if scores.len() != vm.calibration.len() {
        return Err(AlignError::LengthMismatch {
            expected: vm.calibration.len(),
            actual: scores.len(),
        });
    }
    let bands = config.likert;
    let ratings = scores
        .iter()
        .zip(&vm.calibration)
        .map(|(s, cal)| {
            let margin = bands.margin_fraction * cal.mean;
            if s.cost <= cal.mean + bands.pass_sigmas * cal.sd + margin {
                3
            } else if s.cost <= cal.mean + bands.fail_sigmas * cal.sd + margin {
                2
            } else {
                1
            }
        })
        .collect();
    let word_score = scores.iter().map(|s| s.acoustic_score).sum();
    Ok(LikertFeedback {
        ratings,
        phoneme_scores: scores.to_vec(),
        word_score,
        accepted: word_score >= config.word_threshold(scores.len()),
    })
}

/// Alignment plus feedback for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredAttempt {
    pub alignment: AlignmentResult,
    pub feedback: LikertFeedback,
}

/// Full pipeline: features, optional speaker transform, alignment, grading.
pub fn score_utterance(
    clip: &AudioClip,
    model: &WordReferenceModel,
    voice: Voice,
    transform: Option<&SpeakerTransform>,
    features: &MfccConfig,
    scoring: &ScoringConfig,
) -> Result<ScoredAttempt, AlignError> {
    let raw = mfcc(clip, features)?;
    let learner = match transform {
        Some(t) => apply_transform(t, &raw)?,
        None => raw,
    };
    let alignment = force_align(&learner, model, voice)?;
    let scores = score_phonemes(&alignment, scoring.temperature);
    let feedback = to_likert(&scores, model, voice, scoring)?;
    Ok(ScoredAttempt { alignment, feedback })
}

/// Scores of a whole test recording set.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchScores {
    pub scores: TestScores,
    pub words: Vec<LikertFeedback>,
}

/// Scores a test: clip `i` is an attempt at `models[i]`.
#[allow(clippy::too_many_arguments)]
pub fn batch_score(
    participant: &str,
    phase: Phase,
    clips: &[AudioClip],
    models: &[&WordReferenceModel],
    transform: Option<&SpeakerTransform>,
    voice: Voice,
    features: &MfccConfig,
    scoring: &ScoringConfig,
) -> Result<BatchScores, AlignError> {
    if clips.len() != models.len() {
        return Err(AlignError::PairingMismatch {
            clips: clips.len(),
            models: models.len(),
        });
    }
    let words = clips
        .iter()
        .zip(models)
        .map(|(clip, model)| score_utterance(clip, model, voice, transform, features, scoring).map(|s| s.feedback))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BatchScores {
        scores: TestScores {
            participant: participant.to_string(),
            phase,
            total: words.iter().map(|w| w.word_score).sum(),
            words_accepted: words.iter().filter(|w| w.accepted).count(),
        },
        words,
    })
}

/// Median per-frame alignment cost between distinct phonemes' templates.
/// Used as the default score temperature.
pub fn median_cross_cost(templates: &[FeatureSequence]) -> f64 {
    let mut costs = Vec::new();
    for (a, ta) in templates.iter().enumerate() {
        for (b, tb) in templates.iter().enumerate() {
            if a == b {
                continue;
            }
            let layout = TemplateLayout::from_lengths(&[tb.len()]);
            if let Some(p) = warp(ta, tb, &layout) {
                costs.push(p.cost / ta.len() as f64);
            }
        }
    }
    if costs.is_empty() {
        return 1.0;
    }
    costs.sort_by(|x, y| x.total_cmp(y));
    let mid = costs.len() / 2;
    if costs.len() % 2 == 0 {
        0.5 * (costs[mid - 1] + costs[mid])
    } else {
        costs[mid]
    }
}

#[cfg(test)]
mod tests;
