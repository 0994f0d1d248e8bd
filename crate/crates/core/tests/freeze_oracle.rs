//! Regenerates `models/frozen.rs` from the in-memory reference engine.
//!
//! Run with `cargo test -p diskmc-core --test freeze_oracle -- --ignored`
//! and paste the printed file. The reference is iterated far past the
//! corpus epsilon so the frozen digits are limited only by rounding.

use diskmc_core::analyze::{reach_reference, reward_reference, ExplicitMdp};
use diskmc_core::{compile, corpus, ConvergenceConfig, PropertyKind};

const ORACLE_EPSILON: f64 = 1e-14;
const TOLERANCE: f64 = 1e-5;

fn frozen_checks(model: &corpus::CorpusModel, names: &[&str]) -> String {
    let mut out = String::new();
    for name in names {
        let c = compile(model.source, name, None).unwrap();
        let mdp = ExplicitMdp::build(&c.model, &c.property).unwrap();
        let cfg = ConvergenceConfig::with_epsilon(ORACLE_EPSILON);
        let v = match c.property.kind {
            PropertyKind::ReachProbability => reach_reference(&mdp, c.property.direction, &cfg, None),
            PropertyKind::ExpectedReward => reward_reference(&mdp, c.property.direction, &cfg, None),
        }
        .unwrap()
        .initial();
        if v.is_infinite() {
            out += &format!("    CorpusCheck {{ property: {name:?}, expected: Expected::Infinite }},\n");
        } else {
            out += &format!("    value({name:?}, {v:?}, {TOLERANCE:e}),\n");
        }
    }
    out
}

#[test]
#[ignore = "regenerates frozen oracle values; slow"]
fn print_frozen_values() {
    let brp = frozen_checks(&corpus::BRP, &["p_fail", "p_fail_min", "time_max", "time_min"]);
    let consensus = frozen_checks(
        &corpus::CONSENSUS,
        &["all_high", "all_high_min", "decided_min", "steps_max"],
    );
    println!("// Generated by tests/freeze_oracle.rs from the in-memory reference engine");
    println!("// iterated to a relative change below {ORACLE_EPSILON:e}. Tolerances are relative.\n");
    println!("pub const BRP_CHECKS: &[CorpusCheck] = &[\n{brp}];\n");
    println!("pub const CONSENSUS_CHECKS: &[CorpusCheck] = &[\n{consensus}];");
}
