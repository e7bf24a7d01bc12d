//! Graduated interval recall over a handful of words with a learner who
//! fails "rhythm" twice.

use phonetutor::scheduler::GirQueue;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut q = GirQueue::new(["attic", "rhythm", "valley", "believe"], vec![2, 4, 8, 16, 32])?;
    let mut misses = 0;
    for _ in 0..16 {
        let word = q.next().to_string();
        let ok = !(word == "rhythm" && misses < 2);
        if !ok {
            misses += 1;
        }
        q.report(&word, ok, Some(if ok { 3 } else { 1 }))?;
        let item = q.item(&word).unwrap();
        println!(
            "#{:<2} {:<8} {:<4} level {} due {}",
            q.presentation_counter(),
            word,
            if ok { "ok" } else { "miss" },
            item.level,
            item.due_at
        );
    }
    Ok(())
}
