//! Synthetic learners and cohort simulation.
//!
//! A synthetic learner mispronounces by detuning the synthetic voice. Its
//! base detune shrinks by a fixed factor after every practice session and,
//! within a session, by another factor on each repeat of a word. Every
//! utterance multiplies each phoneme's detune by an independent jitter
//! drawn from `[1 - jitter, 1 + jitter]`.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytics::{gain_record, t_test_two_tailed, GainRecord, Phase, StatsError, StudyGroup, TTest, TTestVariant, TestScores};
use crate::curriculum::{sample_syllabus, CurriculumError, PronLexEntry};
use crate::dsp::{synth_word_utterance, AudioClip, ErrorModel, SynthError, Voice};
use crate::engine::Engine;
use crate::session::{
    AttemptOutcome, Clock, EventLogRecord, Mode, Participant, Session, SessionError, SessionSettings, SessionState,
    SessionSummary, StartSession, VirtualClock,
};
use crate::store::{content_hash, Store, StoreError};

/// Largest detune the synthetic voice accepts.
pub const MAX_DETUNE: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
}

#[derive(Debug, Clone)]
pub struct SyntheticLearner {
    pub participant: Participant,
    pub base_detune: f64,
    /// Multiplier applied to the base detune after each session.
    pub session_decay: f64,
    /// Multiplier applied per earlier attempt at the same word in a session.
    pub attempt_decay: f64,
    pub jitter: f64,
    sessions_completed: u32,
    attempts_this_session: HashMap<String, u32>,
    rng: ChaCha8Rng,
}

impl SyntheticLearner {
    pub fn new(participant: Participant, base_detune: f64, session_decay: f64, attempt_decay: f64, jitter: f64, seed: u64) -> Self {
        Self {
            participant,
            base_detune,
            session_decay,
            attempt_decay,
            jitter,
            sessions_completed: 0,
            attempts_this_session: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn voice(&self) -> Voice {
        self.participant.voice()
    }

    pub fn sessions_completed(&self) -> u32 {
        self.sessions_completed
    }

    /// Detune before in-session improvement and jitter.
    pub fn current_detune(&self) -> f64 {
        self.base_detune * self.session_decay.powi(self.sessions_completed as i32)
    }

    /// Renders one attempt at `entry`.
    pub fn speak(&mut self, entry: &PronLexEntry) -> Result<AudioClip, SynthError> {
        let prior = self.attempts_this_session.entry(entry.word.clone()).or_insert(0);
        let level = self.base_detune * self.session_decay.powi(self.sessions_completed as i32) * self.attempt_decay.powi(*prior as i32);
        *prior += 1;
        let detunes = (0..entry.phonemes.len())
            .map(|_| {
                let j = if self.jitter > 0.0 {
                    self.rng.gen_range(1.0 - self.jitter..=1.0 + self.jitter)
                } else {
                    1.0
                };
                (level * j).clamp(0.0, MAX_DETUNE)
            })
            .collect();
        synth_word_utterance(entry, self.voice(), &ErrorModel::new(detunes)?)
    }

    /// Forgets in-session progress without counting a practice session.
    pub fn reset_attempts(&mut self) {
        self.attempts_this_session.clear();
    }

    pub fn finish_session(&mut self) {
        self.sessions_completed += 1;
        self.attempts_this_session.clear();
    }
}

/// Where simulated sessions leave their records.
pub struct Sink<'a> {
    pub store: Option<&'a Store>,
}

impl Sink<'_> {
    fn records(&self, records: &[EventLogRecord]) -> Result<(), SimError> {
        if let Some(s) = self.store {
            s.append_events(records)?;
        }
        Ok(())
    }

    fn clip(&self, clip: &AudioClip) -> Result<String, SimError> {
        match self.store {
            Some(s) => Ok(s.put_clip(clip)?),
            None => Ok(content_hash(&clip.to_wav_bytes())),
        }
    }
}

/// Runs a 30-word TEST session for the learner and returns its totals.
pub fn run_test(
    engine: &Engine,
    learner: &mut SyntheticLearner,
    syllabus: &[PronLexEntry],
    phase: Phase,
    session_id: &str,
    clock: &VirtualClock,
    sink: &Sink<'_>,
) -> Result<TestScores, SimError> {
    let (mut session, start) = Session::start(
        StartSession {
            id: session_id.to_string(),
            participant: learner.participant.clone(),
            mode: Mode::Test,
            phase: Some(phase),
            syllabus: syllabus.to_vec(),
            seed: 0,
            settings: SessionSettings::default(),
        },
        engine.scoring_config(),
        clock.now_ms(),
    )?;
    sink.records(&[start])?;
    while session.state != SessionState::Ended {
        let (presentation, recs) = session.next_item(engine, clock.now_ms())?;
        sink.records(&recs)?;
        let word = presentation.expect("tests are untimed").word;
        let entry = session.entry(&word).expect("syllabus word").clone();
        let clip = learner.speak(&entry)?;
        clock.advance_secs(5.0);
        let clip_ref = sink.clip(&clip)?;
        let (_, recs) = session.submit_attempt(engine, &clip, &clip_ref, clock.now_ms())?;
        sink.records(&recs)?;
        sink.records(&session.dismiss_feedback(clock.now_ms())?)?;
    }
    learner.reset_attempts();
    Ok(TestScores {
        participant: learner.participant.id.clone(),
        phase,
        total: session.attempts.iter().map(|a| a.feedback.word_score).sum(),
        words_accepted: session.attempts.iter().filter(|a| a.feedback.accepted).count(),
    })
}

/// Plays one timed practice session until the time cap ends it.
#[allow(clippy::too_many_arguments)]
pub fn run_practice(
    engine: &Engine,
    learner: &mut SyntheticLearner,
    mode: Mode,
    syllabus: &[PronLexEntry],
    session_id: &str,
    seconds_per_attempt: f64,
    clock: &VirtualClock,
    sink: &Sink<'_>,
) -> Result<SessionSummary, SimError> {
    let (mut session, start) = Session::start(
        StartSession {
            id: session_id.to_string(),
            participant: learner.participant.clone(),
            mode,
            phase: None,
            syllabus: syllabus.to_vec(),
            seed: 0,
            settings: SessionSettings::default(),
        },
        engine.scoring_config(),
        clock.now_ms(),
    )?;
    sink.records(&[start])?;
    loop {
        let (presentation, recs) = session.next_item(engine, clock.now_ms())?;
        sink.records(&recs)?;
        let Some(p) = presentation else { break };
        let entry = session.entry(&p.word).expect("syllabus word").clone();
        let clip = learner.speak(&entry)?;
        clock.advance_secs(seconds_per_attempt);
        let clip_ref = sink.clip(&clip)?;
        let (outcome, recs) = session.submit_attempt(engine, &clip, &clip_ref, clock.now_ms())?;
        debug_assert!(matches!(outcome, AttemptOutcome::Feedback(_)));
        sink.records(&recs)?;
        sink.records(&session.dismiss_feedback(clock.now_ms())?)?;
        if session.state == SessionState::Ended {
            break;
        }
    }
    learner.finish_session();
    Ok(session.summarize()?)
}

#[derive(Debug, Clone)]
pub struct CohortConfig {
    pub per_group: usize,
    pub sessions: u32,
    pub seed: u64,
    pub base_detune: (f64, f64),
    pub treatment_session_decay: f64,
    pub treatment_attempt_decay: f64,
    pub jitter: f64,
    pub practice_words: usize,
    pub seconds_per_attempt: f64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            per_group: 9,
            sessions: 4,
            seed: 2012,
            base_detune: (0.1, 0.3),
            treatment_session_decay: 0.8,
            treatment_attempt_decay: 0.85,
            jitter: 0.5,
            practice_words: 10,
            seconds_per_attempt: 15.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CohortResult {
    pub pre: Vec<TestScores>,
    pub post: Vec<TestScores>,
    pub gains: Vec<GainRecord>,
    /// In-session summaries of the treatment group's practice sessions.
    pub sessions: Vec<(String, SessionSummary)>,
    pub asgp_pooled: TTest,
}

impl CohortResult {
    pub fn mean_asgp(&self, group: StudyGroup) -> f64 {
        let xs: Vec<f64> = self.gains.iter().filter(|g| g.group == group).map(|g| g.asgp).collect();
        crate::analytics::stats::mean(&xs)
    }

    /// Fraction of practice sessions with positive in-session ASGP.
    pub fn positive_session_fraction(&self) -> f64 {
        let positive = self
            .sessions
            .iter()
            .filter(|(_, s)| s.in_session_asgp.is_some_and(|a| a > 0.0))
            .count();
        positive as f64 / self.sessions.len().max(1) as f64
    }
}

/// Simulates a control/treatment study: pre-test, practice sessions for
/// the treatment group, post-test. Control learners never improve.
pub fn simulate_cohort(engine: &Engine, config: &CohortConfig, store: Option<&Store>) -> Result<CohortResult, SimError> {
    let sink = Sink { store };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let test_words = sample_syllabus(engine.curriculum(), 10, config.seed)?;
    let clock = VirtualClock::new(1_700_000_000_000);
    let mut result = CohortResult {
        pre: Vec::new(),
        post: Vec::new(),
        gains: Vec::new(),
        sessions: Vec::new(),
        asgp_pooled: TTest {
            variant: TTestVariant::Pooled,
            t: 0.0,
            df: 0.0,
            p: 1.0,
        },
    };
    for group in [StudyGroup::Control, StudyGroup::Treatment] {
        for i in 0..config.per_group {
            let prefix = match group {
                StudyGroup::Control => "CG",
                StudyGroup::Treatment => "TG",
            };
            let id = format!("{prefix}{}", i + 1);
            let voice = if i % 2 == 0 { Voice::Male } else { Voice::Female };
            let base = rng.gen_range(config.base_detune.0..=config.base_detune.1);
            let (session_decay, attempt_decay) = match group {
                StudyGroup::Control => (1.0, 1.0),
                StudyGroup::Treatment => (config.treatment_session_decay, config.treatment_attempt_decay),
            };
            let participant = Participant::new(&id, group, Some(voice));
            if let Some(s) = store {
                s.save_participant(&participant)?;
            }
            let mut learner =
                SyntheticLearner::new(participant, base, session_decay, attempt_decay, config.jitter, rng.gen());
            let pre = run_test(engine, &mut learner, &test_words, Phase::Pre, &format!("{id}-pre"), &clock, &sink)?;
            if group == StudyGroup::Treatment {
                for k in 0..config.sessions {
                    let words = practice_words(engine, config.practice_words, rng.gen());
                    let summary = run_practice(
                        engine,
                        &mut learner,
                        Mode::Activity,
                        &words,
                        &format!("{id}-s{}", k + 1),
                        config.seconds_per_attempt,
                        &clock,
                        &sink,
                    )?;
                    result.sessions.push((id.clone(), summary));
                }
            }
            let post = run_test(engine, &mut learner, &test_words, Phase::Post, &format!("{id}-post"), &clock, &sink)?;
            result.gains.push(gain_record(group, &pre, &post)?);
            result.pre.push(pre);
            result.post.push(post);
        }
    }
    let column = |g: StudyGroup| -> Vec<f64> { result.gains.iter().filter(|r| r.group == g).map(|r| r.asgp).collect() };
    result.asgp_pooled = t_test_two_tailed(
        &column(StudyGroup::Control),
        &column(StudyGroup::Treatment),
        TTestVariant::Pooled,
    )?;
    Ok(result)
}

fn practice_words(engine: &Engine, n: usize, seed: u64) -> Vec<PronLexEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = engine.curriculum().entries();
    let picked = rand::seq::index::sample(&mut rng, entries.len(), n.min(entries.len()));
    picked.into_iter().map(|i| entries[i].clone()).collect()
}

/// Writes a simulated study into a store directory.
pub fn simulate_into(engine: &Engine, config: &CohortConfig, root: impl AsRef<Path>) -> Result<CohortResult, SimError> {
    let store = Store::open(root.as_ref())?;
    simulate_cohort(engine, config, Some(&store))
}
