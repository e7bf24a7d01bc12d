//! Word lexicon and syllabus sampling.
//!
//! A curriculum is a flat list of words, each carrying its display
//! respelling, its phoneme sequence and the unit group it was taught in.
//! Groups follow the textbook split: A covers units already taught, B the
//! units taught during the study window, C the units not yet taught.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::phoneme::Phoneme;

/// The curriculum shipped with the crate (300 words, 100 per group).
///
/// Fixture data: phonemes come from a public pronouncing dictionary and the
/// respellings are generated, not linguist-reviewed.
pub const BUNDLED_CURRICULUM: &str = include_str!("../data/curriculum.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnitGroup {
    A,
    B,
    C,
}

impl UnitGroup {
    pub const ALL: [UnitGroup; 3] = [UnitGroup::A, UnitGroup::B, UnitGroup::C];
}

impl fmt::Display for UnitGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            UnitGroup::A => "A",
            UnitGroup::B => "B",
            UnitGroup::C => "C",
        };
        f.write_str(s)
    }
}

/// One curriculum word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PronLexEntry {
    pub word: String,
    pub spelled_out: String,
    pub phonemes: Vec<Phoneme>,
    pub unit_group: UnitGroup,
}

impl PronLexEntry {
    pub fn new(
        word: impl Into<String>,
        spelled_out: impl Into<String>,
        phonemes: Vec<Phoneme>,
        unit_group: UnitGroup,
    ) -> Result<Self, CurriculumError> {
        let word = word.into();
        if phonemes.is_empty() {
            return Err(CurriculumError::NoPhonemes { record: 0, word });
        }
        Ok(Self {
            word,
            spelled_out: spelled_out.into(),
            phonemes,
            unit_group,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CurriculumError {
    #[error("cannot read curriculum file: {0}")]
    Io(#[from] std::io::Error),
    #[error("curriculum parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("empty curriculum")]
    Empty,
    #[error("record {record} ({word:?}): unknown phoneme symbol {symbol:?}")]
    UnknownPhoneme {
        record: usize,
        word: String,
        symbol: String,
    },
    #[error("record {record} ({word:?}): phoneme list is empty")]
    NoPhonemes { record: usize, word: String },
    #[error("record {record}: duplicate word {word:?}")]
    DuplicateWord { record: usize, word: String },
    #[error("group {group} has {available} entries, {requested} requested")]
    InsufficientEntries {
        group: UnitGroup,
        available: usize,
        requested: usize,
    },
}

// Wire form: phonemes stay strings so unknown symbols can be reported
// together with the record that holds them.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    word: String,
    spelled_out: String,
    phonemes: Vec<String>,
    unit_group: UnitGroup,
}

/// An immutable, validated word list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Curriculum {
    entries: Vec<PronLexEntry>,
    source_name: String,
}

impl Curriculum {
    /// Builds a curriculum from already-typed entries, enforcing uniqueness.
    pub fn new(
        entries: Vec<PronLexEntry>,
        source_name: impl Into<String>,
    ) -> Result<Self, CurriculumError> {
        if entries.is_empty() {
            return Err(CurriculumError::Empty);
        }
        let mut seen = HashSet::new();
        for (record, e) in entries.iter().enumerate() {
            if e.phonemes.is_empty() {
                return Err(CurriculumError::NoPhonemes {
                    record,
                    word: e.word.clone(),
                });
            }
            if !seen.insert(e.word.to_lowercase()) {
                return Err(CurriculumError::DuplicateWord {
                    record,
                    word: e.word.clone(),
                });
            }
        }
        Ok(Self {
            entries,
            source_name: source_name.into(),
        })
    }

    /// Parses the JSON curriculum format.
    pub fn from_json(text: &str, source_name: impl Into<String>) -> Result<Self, CurriculumError> {
        if text.trim().is_empty() {
            return Err(CurriculumError::Empty);
        }
        let raw: Vec<RawEntry> = serde_json::from_str(text).map_err(|e| CurriculumError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut entries = Vec::with_capacity(raw.len());
        for (record, r) in raw.into_iter().enumerate() {
            let phonemes = r
                .phonemes
                .iter()
                .map(|s| {
                    s.parse::<Phoneme>()
                        .map_err(|_| CurriculumError::UnknownPhoneme {
                            record,
                            word: r.word.clone(),
                            symbol: s.clone(),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            entries.push(PronLexEntry {
                word: r.word,
                spelled_out: r.spelled_out,
                phonemes,
                unit_group: r.unit_group,
            });
        }
        Self::new(entries, source_name)
    }

    /// The curriculum bundled with the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_CURRICULUM, "bundled").expect("bundled curriculum is valid")
    }

    /// Serializes to the on-disk format (pretty JSON, trailing newline).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.entries).expect("entries serialize");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CurriculumError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn entries(&self) -> &[PronLexEntry] {
        &self.entries
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Case-insensitive word lookup.
    pub fn get(&self, word: &str) -> Option<&PronLexEntry> {
        self.entries
            .iter()
            .find(|e| e.word.eq_ignore_ascii_case(word))
    }

    pub fn group(&self, group: UnitGroup) -> impl Iterator<Item = &PronLexEntry> {
        self.entries.iter().filter(move |e| e.unit_group == group)
    }
}

/// Reads and validates a curriculum file.
pub fn load_curriculum(path: impl AsRef<Path>) -> Result<Curriculum, CurriculumError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    Curriculum::from_json(&text, path.display().to_string())
}

/// Draws `per_group` words uniformly without replacement from each of the
/// groups A, B and C, in that order. Deterministic for a given seed.
pub fn sample_syllabus(
    curriculum: &Curriculum,
    per_group: usize,
    seed: u64,
) -> Result<Vec<PronLexEntry>, CurriculumError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_group * 3);
    for group in UnitGroup::ALL {
        let pool: Vec<&PronLexEntry> = curriculum.group(group).collect();
        if pool.len() < per_group {
            return Err(CurriculumError::InsufficientEntries {
                group,
                available: pool.len(),
                requested: per_group,
            });
        }
        for i in index::sample(&mut rng, pool.len(), per_group) {
            out.push(pool[i].clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three_words() -> &'static str {
        r#"[
  {"word": "Menacing", "spelled_out": "MEN-uh-sing", "phonemes": ["M","EH","N","AH","S","IH","NG"], "unit_group": "A"},
  {"word": "Attic", "spelled_out": "AT-ik", "phonemes": ["AE","T","IH","K"], "unit_group": "B"},
  {"word": "Soggy", "spelled_out": "SOG-ee", "phonemes": ["S","AA","G","IY"], "unit_group": "C"}
]"#
    }

    #[test]
    fn loads_three_entries() {
        let c = Curriculum::from_json(three_words(), "t").unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.get("attic").unwrap().phonemes.len(), 4);
    }

    #[test]
    fn empty_file_is_rejected() {
        assert!(matches!(
            Curriculum::from_json("", "t"),
            Err(CurriculumError::Empty)
        ));
        assert!(matches!(
            Curriculum::from_json("[]", "t"),
            Err(CurriculumError::Empty)
        ));
    }

    #[test]
    fn unknown_phoneme_names_symbol_and_record() {
        let text = r#"[{"word": "odd", "spelled_out": "OD", "phonemes": ["AA","ZZ"], "unit_group": "A"}]"#;
        let err = Curriculum::from_json(text, "t").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ZZ"), "{msg}");
        assert!(msg.contains("record 0"), "{msg}");
        assert!(msg.contains("odd"), "{msg}");
    }

    #[test]
    fn duplicate_word_is_rejected() {
        let text = r#"[
  {"word": "attic", "spelled_out": "AT-ik", "phonemes": ["AE","T","IH","K"], "unit_group": "A"},
  {"word": "Attic", "spelled_out": "AT-ik", "phonemes": ["AE","T","IH","K"], "unit_group": "B"}
]"#;
        assert!(matches!(
            Curriculum::from_json(text, "t"),
            Err(CurriculumError::DuplicateWord { record: 1, .. })
        ));
    }

    #[test]
    fn unknown_fields_and_bad_json_report_position() {
        let text = r#"[{"word": "a", "spelled_out": "A", "phonemes": ["AH"], "unit_group": "A", "extra": 1}]"#;
        assert!(matches!(
            Curriculum::from_json(text, "t"),
            Err(CurriculumError::Parse { .. })
        ));
        let err = Curriculum::from_json("[\n{\"word\": }", "t").unwrap_err();
        assert!(matches!(err, CurriculumError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn empty_phoneme_list_is_rejected() {
        let text = r#"[{"word": "a", "spelled_out": "A", "phonemes": [], "unit_group": "A"}]"#;
        assert!(matches!(
            Curriculum::from_json(text, "t"),
            Err(CurriculumError::NoPhonemes { .. })
        ));
    }

    #[test]
    fn bundled_curriculum_shape() {
        let c = Curriculum::bundled();
        assert_eq!(c.len(), 300);
        for g in UnitGroup::ALL {
            assert_eq!(c.group(g).count(), 100);
        }
        for w in ["menacing", "attic", "soggy"] {
            assert!(c.get(w).is_some(), "{w}");
        }
    }

    #[test]
    fn bundled_curriculum_round_trips_byte_identically() {
        let c = Curriculum::bundled();
        assert_eq!(c.to_json(), BUNDLED_CURRICULUM);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        c.save(&path).unwrap();
        let again = load_curriculum(&path).unwrap();
        assert_eq!(again.entries(), c.entries());
        assert_eq!(std::fs::read_to_string(&path).unwrap(), again.to_json());
    }

    #[test]
    fn syllabus_ten_per_group() {
        let c = Curriculum::bundled();
        let s = sample_syllabus(&c, 10, 7).unwrap();
        assert_eq!(s.len(), 30);
        for g in UnitGroup::ALL {
            assert_eq!(s.iter().filter(|e| e.unit_group == g).count(), 10);
        }
    }

    #[test]
    fn syllabus_zero_and_insufficient() {
        let c = Curriculum::from_json(three_words(), "t").unwrap();
        assert!(sample_syllabus(&c, 0, 1).unwrap().is_empty());
        assert!(matches!(
            sample_syllabus(&c, 2, 1),
            Err(CurriculumError::InsufficientEntries { requested: 2, available: 1, .. })
        ));
    }

    #[test]
    fn syllabus_is_deterministic() {
        let c = Curriculum::bundled();
        assert_eq!(
            sample_syllabus(&c, 10, 42).unwrap(),
            sample_syllabus(&c, 10, 42).unwrap()
        );
        assert_ne!(
            sample_syllabus(&c, 10, 42).unwrap(),
            sample_syllabus(&c, 10, 43).unwrap()
        );
    }

    proptest! {
        #[test]
        fn syllabus_has_exact_counts_and_no_duplicates(per_group in 0usize..=100, seed: u64) {
            let c = Curriculum::bundled();
            let s = sample_syllabus(&c, per_group, seed).unwrap();
            for g in UnitGroup::ALL {
                prop_assert_eq!(s.iter().filter(|e| e.unit_group == g).count(), per_group);
            }
            let words: HashSet<_> = s.iter().map(|e| e.word.as_str()).collect();
            prop_assert_eq!(words.len(), s.len());
        }
    }
}
