//! A simulated control/treatment study with the default cohort of nine
//! learners per group. Pass a seed to vary it.

use phonetutor::analytics::StudyGroup;
use phonetutor::engine::Engine;
use phonetutor::simulate::{simulate_cohort, CohortConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2012);
    let engine = Engine::synthetic();
    let r = simulate_cohort(&engine, &CohortConfig { seed, ..CohortConfig::default() }, None)?;
    for g in &r.gains {
        println!("{:<4} {:<9} ASGP {:+7.2}  WG {:+}", g.participant, g.group, g.asgp, g.wg);
    }
    println!("mean ASGP control {:+.2}, treatment {:+.2}", r.mean_asgp(StudyGroup::Control), r.mean_asgp(StudyGroup::Treatment));
    println!("pooled t = {:.2}, p = {:.2e}", r.asgp_pooled.t, r.asgp_pooled.p);
    println!("{:.0}% of {} practice sessions improved within the session", 100.0 * r.positive_session_fraction(), r.sessions.len());
    Ok(())
}
