//! Item sequencing: the graduated-interval recall queue and the fixed
//! five-chest level script.
//!
//! Intervals are counted in presentations, not wall-clock time. The queue
//! keeps a 1-based presentation counter: the n-th call to [`gir_next`] is
//! presentation n, and an item is due at presentation n when its `due_at`
//! is at most n.

use serde::{Deserialize, Serialize};

use crate::aligner::LikertFeedback;

/// Default gaps, in presentations, after 1..=5 consecutive passes.
pub const DEFAULT_INTERVALS: [u64; 5] = [2, 4, 8, 16, 32];

/// Number of chests in a level.
pub const CHESTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchedulerError {
    #[error("empty queue")]
    EmptyQueue,
    #[error("unknown word {0:?}")]
    UnknownWord(String),
    #[error("duplicate word {0:?} in syllabus")]
    DuplicateWord(String),
    #[error("interval table must be non-empty with positive gaps")]
    BadIntervalTable,
    #[error("level script needs exactly {CHESTS} words, got {0}")]
    ScriptLength(usize),
    #[error("chest position {0} out of range 0..{CHESTS}")]
    PositionOutOfRange(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemState {
    pub word: String,
    pub level: u32,
    pub due_at: u64,
    pub last_rating: Option<u8>,
    pub presentations: u64,
}

/// The default satisfaction rule: no phoneme rated 1 and the word
/// accepted.
pub fn is_satisfactory(feedback: &LikertFeedback) -> bool {
    feedback.worst_rating() >= 2 && feedback.accepted
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GirQueue {
    items: Vec<ItemState>,
    presentation_counter: u64,
    interval_table: Vec<u64>,
    last_presented: Option<usize>,
}

impl GirQueue {
    pub fn new<S: Into<String>>(
        words: impl IntoIterator<Item = S>,
        interval_table: Vec<u64>,
    ) -> Result<Self, SchedulerError> {
        if interval_table.is_empty() || interval_table.contains(&0) {
            return Err(SchedulerError::BadIntervalTable);
        }
        let mut items: Vec<ItemState> = Vec::new();
        for w in words {
            let word = w.into();
            if items.iter().any(|i| i.word == word) {
                return Err(SchedulerError::DuplicateWord(word));
            }
            items.push(ItemState {
                word,
                level: 0,
                due_at: 0,
                last_rating: None,
                presentations: 0,
            });
        }
        if items.is_empty() {
            return Err(SchedulerError::EmptyQueue);
        }
        Ok(Self {
            items,
            presentation_counter: 0,
            interval_table,
            last_presented: None,
        })
    }

    pub fn items(&self) -> &[ItemState] {
        &self.items
    }

    pub fn item(&self, word: &str) -> Option<&ItemState> {
        self.items.iter().find(|i| i.word == word)
    }

    pub fn presentation_counter(&self) -> u64 {
        self.presentation_counter
    }

    pub fn interval_table(&self) -> &[u64] {
        &self.interval_table
    }

    /// Gap scheduled after `level` consecutive passes (clamped to the table).
    pub fn interval(&self, level: u32) -> u64 {
        let idx = (level.max(1) as usize - 1).min(self.interval_table.len() - 1);
        self.interval_table[idx]
    }

    /// Picks the next word and counts the presentation.
    pub fn next(&mut self) -> &str {
        self.presentation_counter += 1;
        let now = self.presentation_counter;
        let key = |i: &ItemState, idx: usize| (i.due_at, i.presentations, idx);
        let candidates = || {
            self.items
                .iter()
                .enumerate()
                .filter(|&(idx, _)| self.items.len() == 1 || Some(idx) != self.last_presented)
        };
        let chosen = candidates()
            .filter(|(_, i)| i.due_at <= now)
            .min_by_key(|&(idx, i)| key(i, idx))
            .or_else(|| candidates().min_by_key(|&(idx, i)| key(i, idx)))
            .map(|(idx, _)| idx)
            .expect("queue is non-empty");
        self.last_presented = Some(chosen);
        let item = &mut self.items[chosen];
        item.presentations += 1;
        &item.word
    }

    /// Records the outcome of the latest attempt at `word`.
    pub fn report(&mut self, word: &str, satisfactory: bool, worst_rating: Option<u8>) -> Result<(), SchedulerError> {
        let now = self.presentation_counter;
        let idx = self
            .items
            .iter()
            .position(|i| i.word == word)
            .ok_or_else(|| SchedulerError::UnknownWord(word.to_string()))?;
        let next_level = self.items[idx].level + 1;
        let gap = self.interval(next_level);
        let item = &mut self.items[idx];
        item.last_rating = worst_rating;
        if satisfactory {
            item.level = next_level;
            item.due_at = now + gap;
        } else {
            item.level = 0;
            item.due_at = now + 1;
        }
        Ok(())
    }
}

/// Returns the next word of the queue.
pub fn gir_next(q: &mut GirQueue) -> String {
    q.next().to_string()
}

/// Updates the queue with an attempt's feedback.
pub fn gir_report(q: &mut GirQueue, word: &str, feedback: &LikertFeedback) -> Result<(), SchedulerError> {
    q.report(word, is_satisfactory(feedback), Some(feedback.worst_rating()))
}

/// The five chest words of an arcade level, replayed from the first chest
/// while session time remains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelScript {
    chest_words: Vec<String>,
    pub replay_on_time_remaining: bool,
}

impl LevelScript {
    pub fn new<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Result<Self, SchedulerError> {
        let chest_words: Vec<String> = words.into_iter().map(Into::into).collect();
        if chest_words.len() != CHESTS {
            return Err(SchedulerError::ScriptLength(chest_words.len()));
        }
        Ok(Self {
            chest_words,
            replay_on_time_remaining: true,
        })
    }

    pub fn chest_words(&self) -> &[String] {
        &self.chest_words
    }
}

pub fn zorro_next(script: &LevelScript, position: usize) -> Result<&str, SchedulerError> {
    script
        .chest_words
        .get(position)
        .map(String::as_str)
        .ok_or(SchedulerError::PositionOutOfRange(position))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn queue(words: &[&str]) -> GirQueue {
        GirQueue::new(words.iter().copied(), DEFAULT_INTERVALS.to_vec()).unwrap()
    }

    #[test]
    fn fresh_queue_follows_syllabus_order() {
        let mut q = queue(&["w1", "w2", "w3"]);
        assert_eq!(gir_next(&mut q), "w1");
        assert_eq!(gir_next(&mut q), "w2");
        assert_eq!(gir_next(&mut q), "w3");
        assert_eq!(q.presentation_counter(), 3);
    }

    #[test]
    fn failed_item_returns_before_passed_items_repeat() {
        let mut q = queue(&["w1", "w2", "w3"]);
        let mut log = Vec::new();
        for _ in 0..3 {
            let w = gir_next(&mut q);
            q.report(&w, w != "w1", None).unwrap();
            log.push(w);
        }
        let mut rest = Vec::new();
        for _ in 0..4 {
            let w = gir_next(&mut q);
            q.report(&w, true, None).unwrap();
            rest.push(w);
        }
        let w1 = rest.iter().position(|w| w == "w1").unwrap();
        let w2 = rest.iter().position(|w| w == "w2").unwrap();
        assert!(w1 < w2, "{log:?} then {rest:?}");
    }

    #[test]
    fn single_item_repeats() {
        let mut q = queue(&["only"]);
        for _ in 0..5 {
            assert_eq!(gir_next(&mut q), "only");
            q.report("only", true, Some(3)).unwrap();
        }
    }

    #[test]
    fn report_rules() {
        let mut q = queue(&["a", "b"]);
        gir_next(&mut q);
        q.report("a", true, Some(3)).unwrap();
        assert_eq!(q.item("a").unwrap().due_at, 1 + 2);
        assert_eq!(q.item("a").unwrap().level, 1);
        gir_next(&mut q);
        q.report("b", false, Some(1)).unwrap();
        assert_eq!(q.item("b").unwrap().due_at, 2 + 1);
        assert_eq!(q.item("b").unwrap().level, 0);
        assert_eq!(q.item("b").unwrap().last_rating, Some(1));
        assert_eq!(q.report("zzz", true, None), Err(SchedulerError::UnknownWord("zzz".into())));
    }

    #[test]
    fn interval_clamps_to_last_entry() {
        let q = queue(&["a"]);
        assert_eq!(
            (1..=7).map(|l| q.interval(l)).collect::<Vec<_>>(),
            vec![2, 4, 8, 16, 32, 32, 32]
        );
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            GirQueue::new(Vec::<String>::new(), DEFAULT_INTERVALS.to_vec()),
            Err(SchedulerError::EmptyQueue)
        );
        assert_eq!(GirQueue::new(["a"], vec![]), Err(SchedulerError::BadIntervalTable));
        assert_eq!(
            GirQueue::new(["a", "a"], vec![2]),
            Err(SchedulerError::DuplicateWord("a".into()))
        );
    }

    #[test]
    fn zorro_script() {
        let s = LevelScript::new(["a", "b", "c", "d", "e"]).unwrap();
        assert_eq!(zorro_next(&s, 0), Ok("a"));
        let all: Vec<&str> = (0..5).map(|p| zorro_next(&s, p).unwrap()).collect();
        assert_eq!(all, ["a", "b", "c", "d", "e"]);
        assert_eq!(zorro_next(&s, 5), Err(SchedulerError::PositionOutOfRange(5)));
        assert_eq!(LevelScript::new(["a"]), Err(SchedulerError::ScriptLength(1)));
        assert!(s.replay_on_time_remaining);
    }

    proptest! {
        #[test]
        fn no_consecutive_repeat_with_two_or_more_items(
            n in 2usize..8,
            outcomes in proptest::collection::vec(any::<bool>(), 1..120),
        ) {
            let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
            let mut q = GirQueue::new(words, DEFAULT_INTERVALS.to_vec()).unwrap();
            let mut prev = String::new();
            for pass in outcomes {
                let w = gir_next(&mut q);
                prop_assert_ne!(&w, &prev);
                q.report(&w, pass, None).unwrap();
                prev = w;
            }
        }

        #[test]
        fn report_pushes_due_at_past_the_presentation(
            outcomes in proptest::collection::vec(any::<bool>(), 1..80),
        ) {
            let mut q = queue(&["a", "b", "c", "d"]);
            for pass in outcomes {
                let w = gir_next(&mut q);
                q.report(&w, pass, None).unwrap();
                prop_assert!(q.item(&w).unwrap().due_at > q.presentation_counter());
            }
        }
    }
}
