//! Session state machine for the ARCADE, ACTIVITY and TEST flows.
//!
//! Sessions are event-sourced. Every command validates against the current
//! state, emits one or more [`EventLogRecord`]s and applies them through
//! [`Session::apply`], which is the only code that mutates a session.
//! Replaying a stored log through the same function reconstructs the
//! session exactly.
//!
//! All modes follow `presenting -> awaiting_recording -> feedback ->
//! presenting | ended`. In TEST mode the feedback step is silent: scores
//! are logged but never returned.

mod clock;
mod events;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use clock::{Clock, SystemClock, VirtualClock};
pub use events::{EventKind, EventLogRecord, SessionEvent};

use crate::adaptation::select_voice_model;
use crate::aligner::{LikertFeedback, ScoringConfig};
use crate::analytics::{Phase, StudyGroup};
use crate::curriculum::PronLexEntry;
use crate::dsp::{AudioClip, Voice};
use crate::phoneme::Phoneme;
use crate::scheduler::{is_satisfactory, zorro_next, GirQueue, LevelScript, SchedulerError, DEFAULT_INTERVALS};

/// Play-mode session length, in seconds.
pub const PLAY_TIME_CAP_S: f64 = 600.0;
/// Words in a pre- or post-test.
pub const TEST_WORDS: usize = 30;
/// Reference playbacks per presentation in play modes.
pub const PLAY_COUNT: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Arcade,
    Activity,
    Test,
}

impl Mode {
    pub fn is_play(self) -> bool {
        self != Mode::Test
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Arcade => "ARCADE",
            Mode::Activity => "ACTIVITY",
            Mode::Test => "TEST",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "ARCADE" => Ok(Mode::Arcade),
            "ACTIVITY" => Ok(Mode::Activity),
            "TEST" => Ok(Mode::Test),
            _ => Err(format!("unknown mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Presenting,
    AwaitingRecording,
    Feedback,
    Ended,
}

impl SessionState {
    pub fn can_transition_to(self, next: SessionState) -> bool {
        use SessionState::*;
        matches!(
            (self, next),
            (Presenting, AwaitingRecording)
                | (AwaitingRecording, AwaitingRecording)
                | (AwaitingRecording, Feedback)
                | (Feedback, Presenting)
                | (Feedback, Ended)
                | (Presenting, Ended)
        )
    }
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionState::Presenting => "presenting",
            SessionState::AwaitingRecording => "awaiting_recording",
            SessionState::Feedback => "feedback",
            SessionState::Ended => "ended",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Participant {
    pub id: String,
    pub group: StudyGroup,
    #[serde(default)]
    pub declared_voice: Option<Voice>,
    #[serde(default)]
    pub transform_ref: Option<String>,
}

impl Participant {
    pub fn new(id: impl Into<String>, group: StudyGroup, declared_voice: Option<Voice>) -> Self {
        Self {
            id: id.into(),
            group,
            declared_voice,
            transform_ref: None,
        }
    }

    /// Reference voice used for alignment.
    pub fn voice(&self) -> Voice {
        select_voice_model(self.declared_voice)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSettings {
    pub time_cap_s: f64,
    pub interval_table: Vec<u64>,
}

impl Default for SessionSettings {
    fn default() -> Self {
        Self {
            time_cap_s: PLAY_TIME_CAP_S,
            interval_table: DEFAULT_INTERVALS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    TimeLimit,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerState {
    Gir(GirQueue),
    Script { script: LevelScript, position: usize },
    Test { cursor: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub session_ref: String,
    pub word: String,
    pub attempt_index: u64,
    pub clip_ref: String,
    pub feedback: LikertFeedback,
    pub wall_time: u64,
}

/// What the client shows for one presentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Presentation {
    pub word: String,
    pub spelled_out: String,
    pub presentation: u64,
    pub chest: Option<usize>,
    pub reference_clip: Option<String>,
    pub play_count: u32,
    pub suppress_feedback: bool,
}

/// Feedback returned after a play-mode attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackPayload {
    pub word: String,
    pub spelled_out: String,
    pub attempt_index: u64,
    pub phonemes: Vec<Phoneme>,
    pub ratings: Vec<u8>,
    pub acoustic_scores: Vec<f64>,
    pub word_score: f64,
    pub accepted: bool,
    pub satisfactory: bool,
    /// Phoneme indices rated below 3.
    pub flagged: Vec<usize>,
    pub learner_clip: String,
    pub reference_clip: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttemptOutcome {
    Feedback(FeedbackPayload),
    /// TEST mode: the attempt was stored; nothing is revealed.
    Silent { attempt_index: u64 },
}

/// Scoring backend used by sessions.
pub trait Grader {
    fn grade(&self, participant: &Participant, entry: &PronLexEntry, clip: &AudioClip) -> Result<LikertFeedback, String>;

    /// Content hash of the word's reference recording for a voice.
    fn reference_clip(&self, entry: &PronLexEntry, voice: Voice) -> Option<String>;

    fn scoring(&self) -> ScoringConfig;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("empty syllabus")]
    EmptySyllabus,
    #[error("duplicate word {0:?} in syllabus")]
    DuplicateWord(String),
    #[error("TEST sessions need exactly {TEST_WORDS} words, got {0}")]
    TestSyllabusSize(usize),
    #[error("TEST sessions need a phase (pre or post)")]
    MissingPhase,
    #[error("phase is only meaningful for TEST sessions")]
    UnexpectedPhase,
    #[error("invalid state: {op} not allowed while {state}")]
    InvalidState { op: &'static str, state: SessionState },
    #[error("session has ended")]
    Ended,
    #[error("session has not ended")]
    NotEnded,
    #[error("grading failed: {0}")]
    Grading(String),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error("internal: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("empty log")]
    Empty,
    #[error("log does not start with session_start")]
    MissingStart,
    #[error("sequence gap: expected {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("record belongs to session {got:?}, not {expected:?}")]
    WrongSession { expected: String, got: String },
    #[error("record {sequence} rejected: {reason}")]
    Rejected { sequence: u64, reason: String },
}

/// Per-word first and last attempt scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordProgress {
    pub word: String,
    pub attempts: usize,
    pub first_score: f64,
    pub last_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_ref: String,
    pub mode: Mode,
    pub words_presented: u64,
    pub attempts: usize,
    pub elapsed_s: f64,
    pub end_reason: Option<EndReason>,
    /// Words attempted at least twice. Empty in TEST mode.
    pub repeated_words: Vec<WordProgress>,
    pub mean_first_score: Option<f64>,
    pub mean_last_score: Option<f64>,
    pub in_session_asgp: Option<f64>,
}

/// Client-safe projection of a session. Never carries scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub participant: String,
    pub mode: Mode,
    pub phase: Option<Phase>,
    pub state: SessionState,
    pub elapsed_s: f64,
    pub presentations: u64,
    pub attempts: usize,
    pub current_word: Option<String>,
    pub syllabus_len: usize,
    pub end_reason: Option<EndReason>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: String,
    pub participant: Participant,
    pub mode: Mode,
    pub phase: Option<Phase>,
    pub seed: u64,
    pub syllabus: Vec<PronLexEntry>,
    pub settings: SessionSettings,
    pub scoring: ScoringConfig,
    pub started_at: u64,
    /// Seconds between the session start and the latest event.
    pub elapsed_s: f64,
    pub state: SessionState,
    pub scheduler: SchedulerState,
    pub current: Option<String>,
    pub presentations: u64,
    pub attempts: Vec<AttemptRecord>,
    pub end_reason: Option<EndReason>,
    /// Attempt logged but not yet delivered as feedback.
    pending_attempt: Option<u64>,
    last_sequence: u64,
}

/// Arguments of [`Session::start`].
#[derive(Debug, Clone)]
pub struct StartSession {
    pub id: String,
    pub participant: Participant,
    pub mode: Mode,
    pub phase: Option<Phase>,
    pub syllabus: Vec<PronLexEntry>,
    pub seed: u64,
    pub settings: SessionSettings,
}

fn reject(sequence: u64, reason: impl Into<String>) -> ReplayError {
    ReplayError::Rejected {
        sequence,
        reason: reason.into(),
    }
}

impl Session {
    /// Validates and opens a session, returning its `session_start` record.
    pub fn start(
        cmd: StartSession,
        scoring: ScoringConfig,
        now_ms: u64,
    ) -> Result<(Session, EventLogRecord), SessionError> {
        if cmd.syllabus.is_empty() {
            return Err(SessionError::EmptySyllabus);
        }
        let mut seen = std::collections::HashSet::new();
        for e in &cmd.syllabus {
            if !seen.insert(e.word.to_lowercase()) {
                return Err(SessionError::DuplicateWord(e.word.clone()));
            }
        }
        match cmd.mode {
            Mode::Test => {
                if cmd.syllabus.len() != TEST_WORDS {
                    return Err(SessionError::TestSyllabusSize(cmd.syllabus.len()));
                }
                if cmd.phase.is_none() {
                    return Err(SessionError::MissingPhase);
                }
            }
            _ if cmd.phase.is_some() => return Err(SessionError::UnexpectedPhase),
            _ => {}
        }
        let record = EventLogRecord {
            sequence_number: 1,
            session_ref: cmd.id,
            wall_time: now_ms,
            event: SessionEvent::SessionStart {
                participant: cmd.participant,
                mode: cmd.mode,
                phase: cmd.phase,
                seed: cmd.seed,
                syllabus: cmd.syllabus,
                settings: cmd.settings,
                scoring,
            },
        };
        let session = Self::from_start(&record).map_err(|e| match e {
            ReplayError::Rejected { reason, .. } => SessionError::Internal(reason),
            other => SessionError::Internal(other.to_string()),
        })?;
        Ok((session, record))
    }

    fn from_start(record: &EventLogRecord) -> Result<Session, ReplayError> {
        let SessionEvent::SessionStart {
            participant,
            mode,
            phase,
            seed,
            syllabus,
            settings,
            scoring,
        } = &record.event
        else {
            return Err(ReplayError::MissingStart);
        };
        if record.sequence_number != 1 {
            return Err(ReplayError::SequenceGap {
                expected: 1,
                got: record.sequence_number,
            });
        }
        let seq = record.sequence_number;
        let words = syllabus.iter().map(|e| e.word.clone());
        let scheduler = match mode {
            Mode::Activity => SchedulerState::Gir(
                GirQueue::new(words, settings.interval_table.clone()).map_err(|e| reject(seq, e.to_string()))?,
            ),
            Mode::Arcade => SchedulerState::Script {
                script: LevelScript::new(words).map_err(|e| reject(seq, e.to_string()))?,
                position: 0,
            },
            Mode::Test => SchedulerState::Test { cursor: 0 },
        };
        Ok(Session {
            id: record.session_ref.clone(),
            participant: participant.clone(),
            mode: *mode,
            phase: *phase,
            seed: *seed,
            syllabus: syllabus.clone(),
            settings: settings.clone(),
            scoring: *scoring,
            started_at: record.wall_time,
            elapsed_s: 0.0,
            state: SessionState::Presenting,
            scheduler,
            current: None,
            presentations: 0,
            attempts: Vec::new(),
            end_reason: None,
            pending_attempt: None,
            last_sequence: seq,
        })
    }

    /// Rebuilds a session from its complete event log.
    pub fn replay(records: &[EventLogRecord]) -> Result<Session, ReplayError> {
        let (first, rest) = records.split_first().ok_or(ReplayError::Empty)?;
        let mut session = Self::from_start(first)?;
        for r in rest {
            session.apply(r)?;
        }
        Ok(session)
    }

    pub fn last_sequence(&self) -> u64 {
        self.last_sequence
    }

    pub fn entry(&self, word: &str) -> Option<&PronLexEntry> {
        self.syllabus.iter().find(|e| e.word == word)
    }

    /// Seconds since the session started, as of `now_ms`.
    pub fn elapsed_at(&self, now_ms: u64) -> f64 {
        now_ms.saturating_sub(self.started_at) as f64 / 1000.0
    }

    fn over_time(&self, now_ms: u64) -> bool {
        self.mode.is_play() && self.elapsed_at(now_ms) >= self.settings.time_cap_s
    }

    fn test_complete(&self) -> bool {
        matches!(self.scheduler, SchedulerState::Test { cursor } if cursor >= self.syllabus.len())
    }

    /// The word the scheduler would present next, with its chest index.
    fn peek_next(&self) -> (String, Option<usize>) {
        match &self.scheduler {
            SchedulerState::Gir(q) => {
                let mut q = q.clone();
                (q.next().to_string(), None)
            }
            SchedulerState::Script { script, position } => {
                let chest = position % script.chest_words().len();
                (zorro_next(script, chest).expect("chest in range").to_string(), Some(chest))
            }
            SchedulerState::Test { cursor } => (self.syllabus[*cursor].word.clone(), None),
        }
    }

    /// Applies one record. This is the only mutator of session state.
    pub fn apply(&mut self, record: &EventLogRecord) -> Result<(), ReplayError> {
        let seq = record.sequence_number;
        if record.session_ref != self.id {
            return Err(ReplayError::WrongSession {
                expected: self.id.clone(),
                got: record.session_ref.clone(),
            });
        }
        if seq != self.last_sequence + 1 {
            return Err(ReplayError::SequenceGap {
                expected: self.last_sequence + 1,
                got: seq,
            });
        }
        let from = self.state;
        let to = match &record.event {
            SessionEvent::SessionStart { .. } => return Err(reject(seq, "duplicate session_start")),
            SessionEvent::ItemPresented {
                word,
                presentation,
                chest,
            } => {
                if from != SessionState::Presenting {
                    return Err(reject(seq, format!("item_presented while {from}")));
                }
                if *presentation != self.presentations + 1 {
                    return Err(reject(seq, "presentation counter out of order"));
                }
                let (expected, expected_chest) = self.peek_next();
                if *word != expected || *chest != expected_chest {
                    return Err(reject(seq, format!("scheduler would present {expected:?}, log has {word:?}")));
                }
                match &mut self.scheduler {
                    SchedulerState::Gir(q) => {
                        q.next();
                    }
                    SchedulerState::Script { position, .. } => *position += 1,
                    SchedulerState::Test { cursor } => *cursor += 1,
                }
                self.current = Some(word.clone());
                self.presentations += 1;
                SessionState::AwaitingRecording
            }
            SessionEvent::Attempt {
                word,
                attempt_index,
                clip_ref,
                feedback,
            } => {
                if from != SessionState::AwaitingRecording || self.current.as_deref() != Some(word.as_str()) {
                    return Err(reject(seq, format!("attempt at {word:?} while {from}")));
                }
                if self.pending_attempt.is_some() || *attempt_index != self.attempts.len() as u64 + 1 {
                    return Err(reject(seq, "attempt index out of order"));
                }
                let phonemes = self.entry(word).map(|e| e.phonemes.len()).unwrap_or(0);
                if feedback.ratings.len() != phonemes {
                    return Err(reject(seq, "rating count does not match the word"));
                }
                self.attempts.push(AttemptRecord {
                    session_ref: self.id.clone(),
                    word: word.clone(),
                    attempt_index: *attempt_index,
                    clip_ref: clip_ref.clone(),
                    feedback: feedback.clone(),
                    wall_time: record.wall_time,
                });
                self.pending_attempt = Some(*attempt_index);
                SessionState::AwaitingRecording
            }
            SessionEvent::Feedback {
                attempt_index,
                satisfactory,
                revealed,
            } => {
                let last = self
                    .attempts
                    .last()
                    .filter(|a| a.attempt_index == *attempt_index && Some(&a.word) == self.current.as_ref())
                    .ok_or_else(|| reject(seq, "feedback without a matching attempt"))?;
                if from != SessionState::AwaitingRecording || self.pending_attempt != Some(*attempt_index) {
                    return Err(reject(seq, format!("feedback while {from}")));
                }
                self.pending_attempt = None;
                if *satisfactory != is_satisfactory(&last.feedback) || *revealed != self.mode.is_play() {
                    return Err(reject(seq, "feedback disagrees with the attempt"));
                }
                let word = last.word.clone();
                let worst = last.feedback.worst_rating();
                if let SchedulerState::Gir(q) = &mut self.scheduler {
                    q.report(&word, *satisfactory, Some(worst))
                        .map_err(|e| reject(seq, e.to_string()))?;
                }
                SessionState::Feedback
            }
            SessionEvent::FeedbackClosed => {
                if from != SessionState::Feedback {
                    return Err(reject(seq, format!("feedback_closed while {from}")));
                }
                if self.test_complete() {
                    return Err(reject(seq, "test is complete; expected session_end"));
                }
                self.current = None;
                SessionState::Presenting
            }
            SessionEvent::SessionEnd { reason } => {
                if !matches!(from, SessionState::Presenting | SessionState::Feedback) {
                    return Err(reject(seq, format!("session_end while {from}")));
                }
                let allowed = match reason {
                    EndReason::Completed => self.test_complete() && from == SessionState::Feedback,
                    EndReason::TimeLimit => self.over_time(record.wall_time),
                };
                if !allowed {
                    return Err(reject(seq, format!("session_end ({reason:?}) not justified")));
                }
                self.current = None;
                self.end_reason = Some(*reason);
                SessionState::Ended
            }
        };
        debug_assert!(from.can_transition_to(to) || from == to);
        self.state = to;
        self.last_sequence = seq;
        self.elapsed_s = self.elapsed_at(record.wall_time);
        Ok(())
    }

    fn emit(&mut self, event: SessionEvent, now_ms: u64) -> Result<EventLogRecord, SessionError> {
        let record = EventLogRecord {
            sequence_number: self.last_sequence + 1,
            session_ref: self.id.clone(),
            wall_time: now_ms.max(self.started_at),
            event,
        };
        self.apply(&record).map_err(|e| SessionError::Internal(e.to_string()))?;
        Ok(record)
    }

    fn require(&self, op: &'static str, state: SessionState) -> Result<(), SessionError> {
        if self.state == SessionState::Ended {
            return Err(SessionError::Ended);
        }
        if self.state != state {
            return Err(SessionError::InvalidState { op, state: self.state });
        }
        Ok(())
    }

    /// Ends a play session that has reached its time cap at a state
    /// boundary. Attempts in progress are allowed to finish.
    pub fn tick(&mut self, now_ms: u64) -> Result<Vec<EventLogRecord>, SessionError> {
        if self.state == SessionState::Presenting && self.over_time(now_ms) {
            let r = self.emit(SessionEvent::SessionEnd { reason: EndReason::TimeLimit }, now_ms)?;
            return Ok(vec![r]);
        }
        Ok(Vec::new())
    }

    /// Presents the next word. Returns `None` when the play time cap ended
    /// the session instead; the returned records must still be stored.
    pub fn next_item(
        &mut self,
        grader: &dyn Grader,
        now_ms: u64,
    ) -> Result<(Option<Presentation>, Vec<EventLogRecord>), SessionError> {
        let mut records = self.tick(now_ms)?;
        if !records.is_empty() {
            return Ok((None, records));
        }
        self.require("next_item", SessionState::Presenting)?;
        let (word, chest) = self.peek_next();
        let presentation = self.presentations + 1;
        records.push(self.emit(
            SessionEvent::ItemPresented {
                word: word.clone(),
                presentation,
                chest,
            },
            now_ms,
        )?);
        let entry = self.entry(&word).expect("scheduled words come from the syllabus");
        let play = self.mode.is_play();
        let payload = Presentation {
            word,
            spelled_out: entry.spelled_out.clone(),
            presentation,
            chest,
            reference_clip: if play {
                grader.reference_clip(entry, self.participant.voice())
            } else {
                None
            },
            play_count: if play { PLAY_COUNT } else { 0 },
            suppress_feedback: !play,
        };
        Ok((Some(payload), records))
    }

    pub fn submit_attempt(
        &mut self,
        grader: &dyn Grader,
        clip: &AudioClip,
        clip_ref: &str,
        now_ms: u64,
    ) -> Result<(AttemptOutcome, Vec<EventLogRecord>), SessionError> {
        self.require("submit_attempt", SessionState::AwaitingRecording)?;
        let word = self.current.clone().expect("a word is presented while awaiting a recording");
        let entry = self.entry(&word).expect("presented words come from the syllabus").clone();
        let feedback = grader
            .grade(&self.participant, &entry, clip)
            .map_err(SessionError::Grading)?;
        let attempt_index = self.attempts.len() as u64 + 1;
        let satisfactory = is_satisfactory(&feedback);
        let mut records = vec![self.emit(
            SessionEvent::Attempt {
                word: word.clone(),
                attempt_index,
                clip_ref: clip_ref.to_string(),
                feedback: feedback.clone(),
            },
            now_ms,
        )?];
        let revealed = self.mode.is_play();
        records.push(self.emit(
            SessionEvent::Feedback {
                attempt_index,
                satisfactory,
                revealed,
            },
            now_ms,
        )?);
        if !revealed {
            return Ok((AttemptOutcome::Silent { attempt_index }, records));
        }
        Ok((
            AttemptOutcome::Feedback(FeedbackPayload {
                word,
                spelled_out: entry.spelled_out.clone(),
                attempt_index,
                phonemes: entry.phonemes.clone(),
                flagged: feedback.flagged(),
                ratings: feedback.ratings,
                acoustic_scores: feedback.phoneme_scores.iter().map(|s| s.acoustic_score).collect(),
                word_score: feedback.word_score,
                accepted: feedback.accepted,
                satisfactory,
                learner_clip: clip_ref.to_string(),
                reference_clip: grader.reference_clip(&entry, self.participant.voice()),
            }),
            records,
        ))
    }

    /// Leaves the feedback screen: moves on to the next word, or ends the
    /// session when the test is complete or play time is up.
    pub fn dismiss_feedback(&mut self, now_ms: u64) -> Result<Vec<EventLogRecord>, SessionError> {
        self.require("continue", SessionState::Feedback)?;
        let event = if self.test_complete() {
            SessionEvent::SessionEnd {
                reason: EndReason::Completed,
            }
        } else if self.over_time(now_ms) {
            SessionEvent::SessionEnd {
                reason: EndReason::TimeLimit,
            }
        } else {
            SessionEvent::FeedbackClosed
        };
        Ok(vec![self.emit(event, now_ms)?])
    }

    pub fn summarize(&self) -> Result<SessionSummary, SessionError> {
        if self.state != SessionState::Ended {
            return Err(SessionError::NotEnded);
        }
        let mut summary = SessionSummary {
            session_ref: self.id.clone(),
            mode: self.mode,
            words_presented: self.presentations,
            attempts: self.attempts.len(),
            elapsed_s: self.elapsed_s,
            end_reason: self.end_reason,
            repeated_words: Vec::new(),
            mean_first_score: None,
            mean_last_score: None,
            in_session_asgp: None,
        };
        if self.mode == Mode::Test {
            return Ok(summary);
        }
        let mut order: Vec<&str> = Vec::new();
        let mut by_word: HashMap<&str, Vec<f64>> = HashMap::new();
        for a in &self.attempts {
            let scores = by_word.entry(&a.word).or_insert_with(|| {
                order.push(&a.word);
                Vec::new()
            });
            scores.push(a.feedback.word_score);
        }
        summary.repeated_words = order
            .into_iter()
            .filter_map(|w| {
                let s = &by_word[w];
                (s.len() >= 2).then(|| WordProgress {
                    word: w.to_string(),
                    attempts: s.len(),
                    first_score: s[0],
                    last_score: s[s.len() - 1],
                })
            })
            .collect();
        if !summary.repeated_words.is_empty() {
            let n = summary.repeated_words.len() as f64;
            let r = &summary.repeated_words;
            summary.mean_first_score = Some(r.iter().map(|w| w.first_score).sum::<f64>() / n);
            summary.mean_last_score = Some(r.iter().map(|w| w.last_score).sum::<f64>() / n);
            summary.in_session_asgp = Some(
                r.iter()
                    .map(|w| (w.last_score - w.first_score) * 100.0 / w.first_score)
                    .sum::<f64>()
                    / n,
            );
        }
        Ok(summary)
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            id: self.id.clone(),
            participant: self.participant.id.clone(),
            mode: self.mode,
            phase: self.phase,
            state: self.state,
            elapsed_s: self.elapsed_s,
            presentations: self.presentations,
            attempts: self.attempts.len(),
            current_word: self.current.clone(),
            syllabus_len: self.syllabus.len(),
            end_reason: self.end_reason,
        }
    }
}
