//! The scoring engine: curriculum, reference audio, lazily built word
//! models and speaker transforms behind one shareable value.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use crate::adaptation::{estimate_transform, AdaptError, SpeakerTransform};
use crate::aligner::{
    build_reference_model, median_cross_cost, score_utterance, AlignError, LikertFeedback, ReferenceClips,
    ScoredAttempt, ScoringConfig, WordReferenceModel,
};
use crate::config::Config;
use crate::curriculum::{load_curriculum, Curriculum, CurriculumError, PronLexEntry};
use crate::dsp::{mfcc, read_wav, write_wav, AudioClip, MfccConfig, Voice, WavError};
use crate::phoneme::Phoneme;
use crate::session::{Grader, Participant};
use crate::store::content_hash;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("word {0:?} is not in the curriculum")]
    UnknownWord(String),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error("reference clips: {0}")]
    References(String),
}

pub struct Engine {
    curriculum: Curriculum,
    clips: ReferenceClips,
    features: MfccConfig,
    scoring: ScoringConfig,
    models: RwLock<HashMap<String, Arc<WordReferenceModel>>>,
    transforms: RwLock<HashMap<String, SpeakerTransform>>,
    reference_audio: RwLock<HashMap<String, Vec<u8>>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("curriculum", &self.curriculum.source_name())
            .field("scoring", &self.scoring)
            .finish_non_exhaustive()
    }
}

/// Median cross-phoneme alignment cost between the isolated reference
/// renderings of one voice (male when present).
pub fn default_temperature(clips: &ReferenceClips, features: &MfccConfig) -> Result<f64, EngineError> {
    let voice = if clips.iter().any(|(_, v, _)| v == Voice::Male) {
        Voice::Male
    } else {
        Voice::Female
    };
    let mut keyed: Vec<(Phoneme, &AudioClip)> = clips
        .iter()
        .filter(|(_, v, c)| *v == voice && !c.is_empty())
        .map(|(p, _, c)| (p, &c[0]))
        .collect();
    keyed.sort_by_key(|(p, _)| *p);
    let templates = keyed
        .iter()
        .map(|(_, c)| mfcc(c, features))
        .collect::<Result<Vec<_>, _>>()
        .map_err(AlignError::from)?;
    Ok(median_cross_cost(&templates))
}

impl Engine {
    pub fn new(
        curriculum: Curriculum,
        clips: ReferenceClips,
        features: MfccConfig,
        temperature: Option<f64>,
        word_accept_fraction: f64,
        likert: crate::aligner::LikertBands,
    ) -> Result<Self, EngineError> {
        let temperature = match temperature {
            Some(t) => t,
            None => default_temperature(&clips, &features)?,
        };
        Ok(Self {
            curriculum,
            clips,
            features,
            scoring: ScoringConfig {
                temperature,
                word_accept_fraction,
                likert,
            },
            models: RwLock::new(HashMap::new()),
            transforms: RwLock::new(HashMap::new()),
            reference_audio: RwLock::new(HashMap::new()),
        })
    }

    /// Bundled curriculum, synthetic references, default settings.
    pub fn synthetic() -> Self {
        let c = Config::default();
        Self::new(
            Curriculum::bundled(),
            ReferenceClips::synthetic(),
            MfccConfig::default(),
            None,
            c.word_accept_fraction,
            c.likert,
        )
        .expect("synthetic references are complete")
    }

    pub fn from_config(config: &Config) -> Result<Self, EngineError> {
        let curriculum = match &config.curriculum {
            Some(p) => load_curriculum(p)?,
            None => Curriculum::bundled(),
        };
        let clips = match &config.references {
            Some(dir) => load_reference_clips(dir)?,
            None => ReferenceClips::synthetic(),
        };
        let features = MfccConfig {
            deltas: config.deltas,
            ..MfccConfig::default()
        };
        Self::new(
            curriculum,
            clips,
            features,
            config.temperature,
            config.word_accept_fraction,
            config.likert,
        )
    }

    pub fn curriculum(&self) -> &Curriculum {
        &self.curriculum
    }

    pub fn features(&self) -> &MfccConfig {
        &self.features
    }

    pub fn scoring_config(&self) -> ScoringConfig {
        self.scoring
    }

    pub fn reference_clips(&self) -> &ReferenceClips {
        &self.clips
    }

    pub fn entry(&self, word: &str) -> Result<&PronLexEntry, EngineError> {
        self.curriculum
            .get(word)
            .ok_or_else(|| EngineError::UnknownWord(word.to_string()))
    }

    /// Reference model for an entry, built on first use.
    pub fn model_for(&self, entry: &PronLexEntry) -> Result<Arc<WordReferenceModel>, EngineError> {
        let key = entry.word.to_lowercase();
        if let Some(m) = self.models.read().expect("model cache poisoned").get(&key) {
            if m.entry == *entry {
                return Ok(m.clone());
            }
        }
        let model = Arc::new(build_reference_model(entry, &self.clips, &self.features)?);
        self.models
            .write()
            .expect("model cache poisoned")
            .insert(key, model.clone());
        Ok(model)
    }

    pub fn model(&self, word: &str) -> Result<Arc<WordReferenceModel>, EngineError> {
        self.model_for(self.entry(word)?)
    }

    pub fn score(
        &self,
        entry: &PronLexEntry,
        clip: &AudioClip,
        voice: Voice,
        transform: Option<&SpeakerTransform>,
    ) -> Result<ScoredAttempt, EngineError> {
        let model = self.model_for(entry)?;
        Ok(score_utterance(clip, &model, voice, transform, &self.features, &self.scoring)?)
    }

    /// Installs a participant's own transform.
    pub fn set_transform(&self, participant: &str, t: SpeakerTransform) {
        self.transforms
            .write()
            .expect("transform table poisoned")
            .insert(participant.to_string(), t);
    }

    /// Installs the transform shared by one voice.
    pub fn set_voice_transform(&self, t: SpeakerTransform) {
        let key = format!("voice-{}", t.voice);
        self.set_transform(&key, t);
    }

    pub fn transform_for(&self, p: &Participant) -> Option<SpeakerTransform> {
        let table = self.transforms.read().expect("transform table poisoned");
        let key = p.transform_ref.as_deref().unwrap_or(&p.id);
        table
            .get(key)
            .or_else(|| table.get(&format!("voice-{}", p.voice())))
            .filter(|t| t.dim == self.features.dim())
            .cloned()
    }

    /// Estimates a transform from enrollment recordings of curriculum words.
    pub fn enroll(&self, voice: Voice, recordings: &[(PronLexEntry, AudioClip)]) -> Result<SpeakerTransform, EngineError> {
        let mut models = Vec::with_capacity(recordings.len());
        let mut feats = Vec::with_capacity(recordings.len());
        for (entry, clip) in recordings {
            models.push(self.model_for(entry)?);
            feats.push(mfcc(clip, &self.features).map_err(AlignError::from)?);
        }
        let pairs: Vec<_> = feats.into_iter().zip(models.iter().map(|m| m.as_ref())).collect();
        Ok(estimate_transform(&pairs, voice)?)
    }

    /// WAV bytes of a reference recording previously handed out by hash.
    pub fn reference_audio(&self, hash: &str) -> Option<Vec<u8>> {
        self.reference_audio.read().expect("audio cache poisoned").get(hash).cloned()
    }

    pub fn reference_clip_ref(&self, entry: &PronLexEntry, voice: Voice) -> Result<String, EngineError> {
        let model = self.model_for(entry)?;
        let bytes = model.voice(voice)?.reference_clip.to_wav_bytes();
        let hash = content_hash(&bytes);
        self.reference_audio
            .write()
            .expect("audio cache poisoned")
            .entry(hash.clone())
            .or_insert(bytes);
        Ok(hash)
    }
}

impl Grader for Engine {
    fn grade(&self, participant: &Participant, entry: &PronLexEntry, clip: &AudioClip) -> Result<LikertFeedback, String> {
        let transform = self.transform_for(participant);
        self.score(entry, clip, participant.voice(), transform.as_ref())
            .map(|s| s.feedback)
            .map_err(|e| e.to_string())
    }

    fn reference_clip(&self, entry: &PronLexEntry, voice: Voice) -> Option<String> {
        self.reference_clip_ref(entry, voice).ok()
    }

    fn scoring(&self) -> ScoringConfig {
        self.scoring
    }
}

fn parse_clip_name(stem: &str) -> Option<(Phoneme, Voice, u32)> {
    let mut parts = stem.split('_');
    let p = parts.next()?.parse().ok()?;
    let v = parts.next()?.parse().ok()?;
    let n = parts.next()?.parse().ok()?;
    parts.next().is_none().then_some((p, v, n))
}

/// Reads `<PHONEME>_<voice>_<n>.wav` files; renderings of a key are
/// ordered by `n`.
pub fn load_reference_clips(dir: impl AsRef<Path>) -> Result<ReferenceClips, EngineError> {
    let dir = dir.as_ref();
    let mut found = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| EngineError::References(format!("{}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry
            .map_err(|e| EngineError::References(e.to_string()))?
            .path();
        if path.extension().and_then(|e| e.to_str()) != Some("wav") {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let (p, v, n) = parse_clip_name(stem).ok_or_else(|| {
            EngineError::References(format!("{}: expected <PHONEME>_<voice>_<n>.wav", path.display()))
        })?;
        found.push((p, v, n, path));
    }
    if found.is_empty() {
        return Err(EngineError::References(format!("no reference clips in {}", dir.display())));
    }
    found.sort_by_key(|a| (a.0, a.1, a.2));
    let mut clips = ReferenceClips::new();
    for (p, v, _, path) in found {
        clips.insert(p, v, read_wav(&path)?);
    }
    Ok(clips)
}

/// Writes clips in the layout [`load_reference_clips`] reads.
pub fn save_reference_clips(dir: impl AsRef<Path>, clips: &ReferenceClips) -> Result<usize, EngineError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| EngineError::References(format!("{}: {e}", dir.display())))?;
    let mut n = 0;
    for (p, v, renderings) in clips.iter() {
        for (i, clip) in renderings.iter().enumerate() {
            write_wav(dir.join(format!("{p}_{v}_{}.wav", i + 1)), clip)?;
            n += 1;
        }
    }
    Ok(n)
}
