//! Acceptance criteria, one PASS/FAIL line each, followed by two checks on
//! the suite itself. Exits non-zero if anything fails.

use std::process::ExitCode;

use lagfilt::acceptance::{render, run, run_all, Options, CRITERIA};

fn main() -> ExitCode {
    let reports = run_all(&Options::default());
    assert_eq!(reports.len(), CRITERIA.len());
    print!("{}", render(&reports));
    let mut ok = reports.iter().all(|r| r.passed);

    // a corrupted coefficient must be caught by the table criterion
    let corrupted = run(1, &Options { perturb_b0: 1e-3 }).expect("criterion 1 exists");
    let detected = !corrupted.passed;
    println!(
        "{}  suite: perturbed b[0] by 1e-3, table criterion {}",
        if detected { "PASS" } else { "FAIL" },
        if detected {
            "fails as expected"
        } else {
            "still passes"
        }
    );
    ok &= detected;

    // the cheap criteria again; the flow criterion ran once above
    let again: Vec<_> = (1..=9)
        .filter_map(|id| run(id, &Options::default()))
        .collect();
    let same = render(&again) == render(&reports[..9]);
    println!(
        "{}  suite: second run of criteria 1-9 is byte-identical",
        if same { "PASS" } else { "FAIL" }
    );
    ok &= same;

    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
