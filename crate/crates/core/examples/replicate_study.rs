//! Recomputes the study statistics from the bundled per-participant table
//! and checks each against its published value.

use phonetutor::analytics::{parse_fixture, replicate_paper, BUNDLED_FIXTURE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows = parse_fixture(BUNDLED_FIXTURE)?;
    let report = replicate_paper(&rows)?;
    print!("{report}");
    println!("{}", if report.all_pass() { "all claims reproduced" } else { "some claims differ" });
    Ok(())
}
