//! Bundled benchmark models with known results, used by `selftest`, the
//! acceptance suite and the benches.

/// Expected outcome of one property.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expected {
    /// `tolerance` is relative to `max(1, |value|)`.
    Value { value: f64, tolerance: f64 },
    Infinite,
}

impl Expected {
    pub fn accepts(&self, got: f64) -> bool {
        match *self {
            Expected::Value { value, tolerance } => {
                (got - value).abs() <= tolerance * value.abs().max(1.0)
            }
            Expected::Infinite => got == f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Expected {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Expected::Value { value, tolerance } => write!(f, "{value} ± {tolerance:e} (rel)"),
            Expected::Infinite => f.write_str("infinite"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CorpusCheck {
    pub property: &'static str,
    pub expected: Expected,
}

#[derive(Debug, Clone, Copy)]
pub struct CorpusModel {
    pub name: &'static str,
    pub source: &'static str,
    /// True when the model's partitioning never maps an edge to a lower id.
    pub forward_acyclic: bool,
    /// Epsilon the checks are run with.
    pub epsilon: f64,
    pub checks: &'static [CorpusCheck],
}

const fn value(property: &'static str, value: f64, tolerance: f64) -> CorpusCheck {
    CorpusCheck {
        property,
        expected: Expected::Value { value, tolerance },
    }
}

pub const COIN: CorpusModel = CorpusModel {
    name: "coin",
    source: include_str!("../models/coin.mdp"),
    forward_acyclic: true,
    epsilon: 1e-8,
    checks: &[value("p_heads", 0.5, 1e-8), value("p_heads_min", 0.5, 1e-8)],
};

pub const DIE: CorpusModel = CorpusModel {
    name: "die",
    source: include_str!("../models/die.mdp"),
    forward_acyclic: false,
    epsilon: 1e-8,
    checks: &[
        value("six", 1.0 / 6.0, 1e-6),
        value("six_min", 1.0 / 6.0, 1e-6),
        value("flips", 11.0 / 3.0, 1e-6),
    ],
};

pub const GEOMETRIC: CorpusModel = CorpusModel {
    name: "geometric",
    source: include_str!("../models/geometric.mdp"),
    forward_acyclic: true,
    epsilon: 1e-8,
    checks: &[
        value("attempts", 2.0, 1e-6),
        value("attempts_max", 2.0, 1e-6),
        value("done", 1.0, 1e-8),
    ],
};

pub const INFINITE: CorpusModel = CorpusModel {
    name: "infinite",
    source: include_str!("../models/infinite.mdp"),
    forward_acyclic: true,
    epsilon: 1e-8,
    checks: &[
        CorpusCheck {
            property: "cost_max",
            expected: Expected::Infinite,
        },
        value("cost_min", 1.0, 1e-8),
        CorpusCheck {
            property: "cost_never",
            expected: Expected::Infinite,
        },
        value("reach_min", 0.5, 1e-8),
        value("reach_max", 1.0, 1e-8),
    ],
};

pub const BRP: CorpusModel = CorpusModel {
    name: "brp",
    source: include_str!("../models/brp.mdp"),
    forward_acyclic: true,
    epsilon: 1e-8,
    checks: BRP_CHECKS,
};

pub const CONSENSUS: CorpusModel = CorpusModel {
    name: "consensus",
    source: include_str!("../models/consensus.mdp"),
    forward_acyclic: false,
    epsilon: 1e-8,
    checks: CONSENSUS_CHECKS,
};

include!("../models/frozen.rs");

/// Every bundled model.
pub const ALL: &[CorpusModel] = &[COIN, DIE, GEOMETRIC, INFINITE, BRP, CONSENSUS];

pub fn by_name(name: &str) -> Option<&'static CorpusModel> {
    ALL.iter().find(|m| m.name == name)
}
