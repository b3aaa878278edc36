// Randomized checks of the matrix inequalities and region shapes.
//
// Several of these checks are expected to report FAIL: the corresponding
// inequalities do not hold for general p.d. matrices, and the report carries
// a concrete counterexample.

use hotelling_rao::lemma::{run_lemma, LemmaId, VerifierConfig};
use hotelling_rao::Result;

pub fn run_example() -> Result<()> {
    let cfg = VerifierConfig::new(42, 200, 3, 1);
    for lemma in LemmaId::ALL {
        let r = run_lemma(&cfg, lemma)?;
        println!("{:<20} {:?} worst {:+.3e} ({} of {} trials flagged)", lemma.name(), r.verdict, r.worst_violation, r.violations, r.trials_run);
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
