//! Study metrics: acoustic score gain percentage (ASGP), word gain (WG),
//! group statistics and the table replication report.

mod replication;
pub mod stats;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use replication::{
    load_fixture, parse_fixture, replicate_paper, write_fixture, Claim, Comparison, CorrelationNote, FixtureRow,
    GroupStats, StatsReport, BUNDLED_FIXTURE,
};
pub use stats::{pearson_r, t_test_two_tailed, TTest, TTestVariant};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("sample of size {len} is too small (need at least 2)")]
    Undersized { len: usize },
    #[error("zero variance")]
    ZeroVariance,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("scores belong to different participants ({pre:?} vs {post:?})")]
    MismatchedParticipant { pre: String, post: String },
    #[error("pre-test total is zero")]
    ZeroPreTotal,
    #[error("fixture error: {0}")]
    Fixture(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pre,
    Post,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Pre => "pre",
            Phase::Post => "post",
        })
    }
}

impl std::str::FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pre" => Ok(Phase::Pre),
            "post" => Ok(Phase::Post),
            other => Err(format!("unknown phase {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyGroup {
    Control,
    Treatment,
}

impl fmt::Display for StudyGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StudyGroup::Control => "control",
            StudyGroup::Treatment => "treatment",
        })
    }
}

impl std::str::FromStr for StudyGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "control" => Ok(StudyGroup::Control),
            "treatment" => Ok(StudyGroup::Treatment),
            other => Err(format!("unknown group {other:?}")),
        }
    }
}

/// Totals of one participant's 30-word test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestScores {
    pub participant: String,
    pub phase: Phase,
    /// Sum of word scores over the test.
    pub total: f64,
    pub words_accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRecord {
    pub participant: String,
    pub group: StudyGroup,
    pub asgp: f64,
    pub wg: i64,
}

fn same_participant(pre: &TestScores, post: &TestScores) -> Result<(), StatsError> {
    if pre.participant != post.participant {
        return Err(StatsError::MismatchedParticipant {
            pre: pre.participant.clone(),
            post: post.participant.clone(),
        });
    }
    Ok(())
}

/// `(post − pre) · 100 / pre`, sign preserved.
pub fn asgp(pre: &TestScores, post: &TestScores) -> Result<f64, StatsError> {
    same_participant(pre, post)?;
    if pre.total == 0.0 {
        return Err(StatsError::ZeroPreTotal);
    }
    Ok((post.total - pre.total) * 100.0 / pre.total)
}

/// Change in accepted-word count between the tests.
pub fn word_gain(pre: &TestScores, post: &TestScores) -> Result<i64, StatsError> {
    same_participant(pre, post)?;
    Ok(post.words_accepted as i64 - pre.words_accepted as i64)
}

pub fn gain_record(group: StudyGroup, pre: &TestScores, post: &TestScores) -> Result<GainRecord, StatsError> {
    Ok(GainRecord {
        participant: pre.participant.clone(),
        group,
        asgp: asgp(pre, post)?,
        wg: word_gain(pre, post)?,
    })
}
