//! Loads the bundled word list and draws a balanced test syllabus.

use phonetutor::curriculum::{sample_syllabus, Curriculum, UnitGroup};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let curriculum = Curriculum::bundled();
    println!("{} words from {}", curriculum.len(), curriculum.source_name());
    for g in [UnitGroup::A, UnitGroup::B, UnitGroup::C] {
        let first = curriculum.group(g).next().unwrap();
        println!("group {g:?}: {} words, e.g. {} /{}/", curriculum.group(g).count(), first.word, first.spelled_out);
    }
    let syllabus = sample_syllabus(&curriculum, 10, 7)?;
    let words: Vec<&str> = syllabus.iter().map(|e| e.word.as_str()).collect();
    println!("test syllabus ({}): {}", words.len(), words.join(" "));
    Ok(())
}
