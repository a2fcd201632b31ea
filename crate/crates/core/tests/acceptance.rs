//! Acceptance suite: one line per criterion, then a failure if any check failed.

use compound_sums::verify::{
    check_determinism, check_moment_identities, check_oracle_equivalence, check_poisson_thinning,
    check_regression_formulas, check_simulation_consistency, check_structural_laws, check_vandermonde,
    CheckOutcome, DEFAULT_SAMPLES, DEFAULT_SEED,
};

#[test]
fn acceptance() {
    let checks: Vec<(&str, fn() -> CheckOutcome)> = vec![
        ("1", check_oracle_equivalence),
        ("2", || check_moment_identities(100, DEFAULT_SEED)),
        ("3", check_regression_formulas),
        ("4", check_structural_laws),
        ("5", check_poisson_thinning),
        ("6", check_vandermonde),
        ("7", || check_simulation_consistency(DEFAULT_SAMPLES, DEFAULT_SEED)),
        ("8", || check_determinism(DEFAULT_SAMPLES, DEFAULT_SEED)),
    ];
    let mut failed = Vec::new();
    for (id, check) in checks {
        let outcome = check();
        println!("criterion {id}: {outcome}");
        if !outcome.passed {
            failed.push(format!("criterion {id} ({})", outcome.name));
        }
    }
    assert!(failed.is_empty(), "failed: {}", failed.join(", "));
}
