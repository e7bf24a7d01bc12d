//! On-disk persistence.
//!
//! Layout under the store root:
//!
//! ```text
//! sessions/<id>.log        one JSON event record per line, append-only
//! clips/<sha256>.wav       audio, named by the hash of its WAV bytes
//! participants/<id>.json   registered participants
//! transforms/<key>.json    speaker transforms (participant id or voice default)
//! ```
//!
//! Appends are flushed to disk before they are acknowledged. A crash can
//! leave at most one torn, unacknowledged line at the end of a log; readers
//! ignore it and the next append cuts it off.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adaptation::SpeakerTransform;
use crate::analytics::{gain_record, FixtureRow, GainRecord, Phase, StatsError, StudyGroup, TestScores};
use crate::dsp::{parse_wav, AudioClip, Voice};
use crate::session::{EndReason, EventLogRecord, Mode, Participant, Session};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("sequence gap in session {session}: expected {expected}, got {got}")]
    SequenceGap { session: String, expected: u64, got: u64 },
    #[error("session {session} log line {line} is corrupt: {message}")]
    Corrupt { session: String, line: usize, message: String },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid identifier {0:?}")]
    BadId(String),
    #[error("no matching records")]
    NoMatchingRecords,
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// Ids become file names, so keep them to a safe alphabet.
fn check_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !id.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(StoreError::BadId(id.to_string()))
    }
}

/// Hex SHA-256 of some bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct LogHandle {
    file: File,
    last: u64,
}

pub struct Store {
    root: PathBuf,
    logs: Mutex<HashMap<String, Arc<Mutex<LogHandle>>>>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("root", &self.root).finish()
    }
}

const DIRS: [&str; 4] = ["sessions", "clips", "participants", "transforms"];

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for d in DIRS {
            let p = root.join(d);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        Ok(Self {
            root,
            logs: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn log_path(&self, session: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{session}.log"))
    }

    fn handle(&self, session: &str) -> Result<Arc<Mutex<LogHandle>>, StoreError> {
        let mut logs = self.logs.lock().expect("log table poisoned");
        if let Some(h) = logs.get(session) {
            return Ok(h.clone());
        }
        let path = self.log_path(session);
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(io_err(&path))?;
        let committed = text.rfind('\n').map_or(0, |i| i + 1);
        if committed < text.len() {
            // drop the torn tail of an interrupted append
            file.set_len(committed as u64).map_err(io_err(&path))?;
            file.seek(SeekFrom::End(0)).map_err(io_err(&path))?;
        }
        let last = parse_log(session, &text[..committed])?.last().map_or(0, |r| r.sequence_number);
        let h = Arc::new(Mutex::new(LogHandle { file, last }));
        logs.insert(session.to_string(), h.clone());
        Ok(h)
    }

    /// Appends one record; it must carry the next sequence number.
    pub fn append_event(&self, record: &EventLogRecord) -> Result<(), StoreError> {
        self.append_events(std::slice::from_ref(record))
    }

    /// Appends records in order, syncing once at the end.
    pub fn append_events(&self, records: &[EventLogRecord]) -> Result<(), StoreError> {
        let Some(first) = records.first() else {
            return Ok(());
        };
        let session = &first.session_ref;
        check_id(session)?;
        let handle = self.handle(session)?;
        let mut h = handle.lock().expect("log handle poisoned");
        let mut buf = String::new();
        let mut expected = h.last + 1;
        for r in records {
            if &r.session_ref != session {
                return Err(StoreError::Malformed("records span several sessions".into()));
            }
            if r.sequence_number != expected {
                return Err(StoreError::SequenceGap {
                    session: session.clone(),
                    expected,
                    got: r.sequence_number,
                });
            }
            buf.push_str(&serde_json::to_string(r).map_err(|e| StoreError::Malformed(e.to_string()))?);
            buf.push('\n');
            expected += 1;
        }
        let path = self.log_path(session);
        h.file.write_all(buf.as_bytes()).map_err(io_err(&path))?;
        h.file.sync_data().map_err(io_err(&path))?;
        h.last = expected - 1;
        Ok(())
    }

    pub fn read_log(&self, session: &str) -> Result<Vec<EventLogRecord>, StoreError> {
        check_id(session)?;
        let path = self.log_path(session);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(format!("session {session}")))
            }
            Err(e) => return Err(io_err(&path)(e)),
        };
        let committed = text.rfind('\n').map_or(0, |i| i + 1);
        parse_log(session, &text[..committed])
    }

    pub fn load_session(&self, session: &str) -> Result<Session, StoreError> {
        let log = self.read_log(session)?;
        Session::replay(&log).map_err(|e| StoreError::Corrupt {
            session: session.to_string(),
            line: 0,
            message: e.to_string(),
        })
    }

    pub fn session_ids(&self) -> Result<Vec<String>, StoreError> {
        list_stems(&self.root.join("sessions"), "log")
    }

    /// Stores a clip under its content hash and returns the hash.
    pub fn put_clip(&self, clip: &AudioClip) -> Result<String, StoreError> {
        self.put_clip_bytes(&clip.to_wav_bytes())
    }

    fn put_clip_bytes(&self, bytes: &[u8]) -> Result<String, StoreError> {
        let hash = content_hash(bytes);
        let path = self.root.join("clips").join(format!("{hash}.wav"));
        if !path.exists() {
            write_atomic(&path, bytes)?;
        }
        Ok(hash)
    }

    pub fn clip_bytes(&self, hash: &str) -> Result<Vec<u8>, StoreError> {
        if hash.len() != 64 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(StoreError::BadId(hash.to_string()));
        }
        let path = self.root.join("clips").join(format!("{hash}.wav"));
        fs::read(&path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => StoreError::NotFound(format!("clip {hash}")),
            _ => io_err(&path)(e),
        })
    }

    pub fn clip(&self, hash: &str) -> Result<AudioClip, StoreError> {
        parse_wav(&self.clip_bytes(hash)?).map_err(|e| StoreError::Malformed(e.to_string()))
    }

    pub fn clip_count(&self) -> Result<usize, StoreError> {
        Ok(list_stems(&self.root.join("clips"), "wav")?.len())
    }

    pub fn save_participant(&self, p: &Participant) -> Result<(), StoreError> {
        check_id(&p.id)?;
        let path = self.root.join("participants").join(format!("{}.json", p.id));
        write_atomic(&path, &to_json(p)?)
    }

    pub fn participant(&self, id: &str) -> Result<Participant, StoreError> {
        check_id(id)?;
        read_json(&self.root.join("participants").join(format!("{id}.json")), || format!("participant {id}"))
    }

    pub fn participants(&self) -> Result<Vec<Participant>, StoreError> {
        list_stems(&self.root.join("participants"), "json")?
            .iter()
            .map(|id| self.participant(id))
            .collect()
    }

    fn transform_path(&self, key: &str) -> PathBuf {
        self.root.join("transforms").join(format!("{key}.json"))
    }

    /// Stores a participant's own transform.
    pub fn save_transform(&self, participant: &str, t: &SpeakerTransform) -> Result<(), StoreError> {
        check_id(participant)?;
        t.validate().map_err(|e| StoreError::Malformed(e.to_string()))?;
        write_atomic(&self.transform_path(participant), &to_json(t)?)
    }

    /// Stores the transform shared by every speaker of a voice.
    pub fn save_voice_transform(&self, t: &SpeakerTransform) -> Result<(), StoreError> {
        t.validate().map_err(|e| StoreError::Malformed(e.to_string()))?;
        write_atomic(&self.transform_path(&format!("voice-{}", t.voice)), &to_json(t)?)
    }

    pub fn transform(&self, participant: &str) -> Result<Option<SpeakerTransform>, StoreError> {
        check_id(participant)?;
        self.optional_transform(&self.transform_path(participant))
    }

    pub fn voice_transform(&self, voice: Voice) -> Result<Option<SpeakerTransform>, StoreError> {
        self.optional_transform(&self.transform_path(&format!("voice-{voice}")))
    }

    fn optional_transform(&self, path: &Path) -> Result<Option<SpeakerTransform>, StoreError> {
        if !path.exists() {
            return Ok(None);
        }
        let t: SpeakerTransform = read_json(path, || path.display().to_string())?;
        t.validate().map_err(|e| StoreError::Malformed(e.to_string()))?;
        Ok(Some(t))
    }

    /// Participant transform if enrolled, else the voice default.
    pub fn effective_transform(&self, p: &Participant) -> Result<Option<SpeakerTransform>, StoreError> {
        let key = p.transform_ref.as_deref().unwrap_or(&p.id);
        match self.transform(key)? {
            Some(t) => Ok(Some(t)),
            None => self.voice_transform(p.voice()),
        }
    }

    /// Test totals per (participant, phase) from completed TEST sessions.
    /// A later session for the same pair replaces an earlier one.
    pub fn test_results(&self) -> Result<Vec<ScoreRow>, StoreError> {
        let mut latest: BTreeMap<(String, Phase), (u64, ScoreRow)> = BTreeMap::new();
        for id in self.session_ids()? {
            let s = self.load_session(&id)?;
            if s.mode != Mode::Test || s.end_reason != Some(EndReason::Completed) {
                continue;
            }
            let phase = s.phase.expect("TEST sessions carry a phase");
            let row = ScoreRow {
                participant: s.participant.id.clone(),
                group: s.participant.group,
                phase,
                total: s.attempts.iter().map(|a| a.feedback.word_score).sum(),
                words_accepted: s.attempts.iter().filter(|a| a.feedback.accepted).count(),
            };
            let key = (row.participant.clone(), phase);
            if latest.get(&key).is_none_or(|(t, _)| s.started_at >= *t) {
                latest.insert(key, (s.started_at, row));
            }
        }
        Ok(latest.into_values().map(|(_, r)| r).collect())
    }

    /// Comma-delimited export of test totals with a header row.
    pub fn export_scores(&self, filter: &ExportFilter) -> Result<String, StoreError> {
        let rows: Vec<ScoreRow> = self.test_results()?.into_iter().filter(|r| filter.matches(r)).collect();
        if rows.is_empty() {
            return Err(StoreError::NoMatchingRecords);
        }
        Ok(write_scores(&rows))
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, StoreError> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| StoreError::Malformed(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: impl FnOnce() -> String) -> Result<T, StoreError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(what())),
        Err(e) => return Err(io_err(path)(e)),
    };
    serde_json::from_slice(&bytes).map_err(|e| StoreError::Malformed(format!("{}: {e}", path.display())))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn list_stems(dir: &Path, ext: &str) -> Result<Vec<String>, StoreError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push(stem.to_string());
            }
        }
    }
    out.sort();
    Ok(out)
}

fn parse_log(session: &str, text: &str) -> Result<Vec<EventLogRecord>, StoreError> {
    let mut out: Vec<EventLogRecord> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let r: EventLogRecord = serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
            session: session.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        let expected = out.last().map_or(1, |p| p.sequence_number + 1);
        if r.sequence_number != expected {
            return Err(StoreError::SequenceGap {
                session: session.to_string(),
                expected,
                got: r.sequence_number,
            });
        }
        out.push(r);
    }
    Ok(out)
}

/// Which rows [`Store::export_scores`] keeps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExportFilter {
    pub participant: Option<String>,
    pub group: Option<StudyGroup>,
    pub phase: Option<Phase>,
}

impl ExportFilter {
    pub fn matches(&self, row: &ScoreRow) -> bool {
        self.participant.as_ref().is_none_or(|p| *p == row.participant)
            && self.group.is_none_or(|g| g == row.group)
            && self.phase.is_none_or(|p| p == row.phase)
    }
}

/// One exported row: a participant's total for one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRow {
    pub participant: String,
    pub group: StudyGroup,
    pub phase: Phase,
    pub total: f64,
    pub words_accepted: usize,
}

impl ScoreRow {
    pub fn test_scores(&self) -> TestScores {
        TestScores {
            participant: self.participant.clone(),
            phase: self.phase,
            total: self.total,
            words_accepted: self.words_accepted,
        }
    }
}

pub fn write_scores(rows: &[ScoreRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

pub fn import_scores(text: &str) -> Result<Vec<ScoreRow>, StoreError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<ScoreRow>, _>>()
        .map_err(|e| StoreError::Malformed(e.to_string()))
}

/// Pairs pre and post rows into gain records, in participant order.
/// Participants missing either test are skipped.
pub fn gain_records(rows: &[ScoreRow]) -> Result<Vec<GainRecord>, StoreError> {
    let mut by: BTreeMap<&str, (Option<&ScoreRow>, Option<&ScoreRow>)> = BTreeMap::new();
    for r in rows {
        let e = by.entry(&r.participant).or_default();
        match r.phase {
            Phase::Pre => e.0 = Some(r),
            Phase::Post => e.1 = Some(r),
        }
    }
    by.values()
        .filter_map(|(pre, post)| Some((pre.as_ref()?, post.as_ref()?)))
        .map(|(pre, post)| Ok(gain_record(pre.group, &pre.test_scores(), &post.test_scores())?))
        .collect()
}

/// Converts paired rows into the study-table fixture format.
pub fn fixture_rows(rows: &[ScoreRow]) -> Result<Vec<FixtureRow>, StoreError> {
    let words = |p: &str, ph: Phase| {
        rows.iter()
            .find(|r| r.participant == p && r.phase == ph)
            .map(|r| r.words_accepted as u32)
            .unwrap_or(0)
    };
    Ok(gain_records(rows)?
        .into_iter()
        .map(|g| FixtureRow {
            pre_words: words(&g.participant, Phase::Pre),
            post_words: words(&g.participant, Phase::Post),
            participant: g.participant,
            group: g.group,
            asgp: g.asgp,
        })
        .collect())
}
