//! Brute-force equivalence oracles. Every algebra operation is recomputed
//! from bounded trace enumerations by its set formula, and every rule verdict
//! is recomputed by scanning enumerated traces, then compared against the
//! decision procedures. Structures whose enumerations blow past a cap are
//! redrawn; the suites still check at least a thousand drawn cases each.

mod common;

const CASES: usize = 1000;

#[test]
fn operations_match_their_enumeration_oracles() {
    let (checked, bad) = common::run_ops_oracle(CASES);
    assert!(bad.is_empty(), "{} disagreements:\n{}", bad.len(), bad.join("\n"));
    assert!(checked >= CASES);
}

#[test]
fn rule_verdicts_match_bounded_trace_scans() {
    let (checked, bad) = common::run_rules_oracle(CASES);
    assert!(bad.is_empty(), "{} disagreements:\n{}", bad.len(), bad.join("\n"));
    assert!(checked >= CASES);
}
