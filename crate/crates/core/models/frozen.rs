// Generated by tests/freeze_oracle.rs from the in-memory reference engine
// iterated to a relative change below 1e-14. Tolerances are relative.

pub const BRP_CHECKS: &[CorpusCheck] = &[
    value("p_fail", 0.9939072916804816, 1e-5),
    value("p_fail_min", 0.026528612805946105, 1e-5),
    value("time_max", 5554.688585048533, 1e-5),
    value("time_min", 1278.0803746369832, 1e-5),
];

pub const CONSENSUS_CHECKS: &[CorpusCheck] = &[
    value("all_high", 0.5384615384613195, 1e-5),
    value("all_high_min", 0.4167480468748229, 1e-5),
    value("decided_min", 0.999999999999212, 1e-5),
    value("steps_max", 587.9999999978969, 1e-5),
];
