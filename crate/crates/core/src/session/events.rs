use serde::{Deserialize, Serialize};

use super::{EndReason, Mode, Participant, SessionSettings};
use crate::aligner::{LikertFeedback, ScoringConfig};
use crate::analytics::Phase;
use crate::curriculum::PronLexEntry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SessionStart,
    ItemPresented,
    Attempt,
    Feedback,
    FeedbackClosed,
    SessionEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum SessionEvent {
    SessionStart {
        participant: Participant,
        mode: Mode,
        phase: Option<Phase>,
        seed: u64,
        syllabus: Vec<PronLexEntry>,
        settings: SessionSettings,
        scoring: ScoringConfig,
    },
    ItemPresented {
        word: String,
        presentation: u64,
        chest: Option<usize>,
    },
    /// A scored attempt. Scores are always logged, even in TEST mode.
    Attempt {
        word: String,
        attempt_index: u64,
        clip_ref: String,
        feedback: LikertFeedback,
    },
    /// Delivery of the attempt's outcome to the learner.
    Feedback {
        attempt_index: u64,
        satisfactory: bool,
        revealed: bool,
    },
    FeedbackClosed,
    SessionEnd {
        reason: EndReason,
    },
}

impl SessionEvent {
    pub fn kind(&self) -> EventKind {
        match self {
            SessionEvent::SessionStart { .. } => EventKind::SessionStart,
            SessionEvent::ItemPresented { .. } => EventKind::ItemPresented,
            SessionEvent::Attempt { .. } => EventKind::Attempt,
            SessionEvent::Feedback { .. } => EventKind::Feedback,
            SessionEvent::FeedbackClosed => EventKind::FeedbackClosed,
            SessionEvent::SessionEnd { .. } => EventKind::SessionEnd,
        }
    }
}

/// One line of a session's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventLogRecord {
    pub sequence_number: u64,
    pub session_ref: String,
    /// Milliseconds since the Unix epoch.
    pub wall_time: u64,
    pub event: SessionEvent,
}

impl EventLogRecord {
    pub fn kind(&self) -> EventKind {
        self.event.kind()
    }
}
