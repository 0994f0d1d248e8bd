//! Value iteration and graph precomputation, both in memory (reference) and
//! block-iteratively over an explored working directory.

pub mod block;
pub mod graph;
pub mod reference;
pub mod value;

use std::path::Path;
use std::time::Instant;

pub use block::{Cell, DriverStats, Observer};
pub use graph::{load_bits, precompute_prob0, precompute_prob1, PrecomputeStats, PROB0, PROB1};
pub use reference::{prob0, prob1, reach_reference, reward_reference, ExplicitMdp, ReferenceOutcome};
pub use value::{expected_reward_partitioned, partitioned_value_iteration, IterationOutcome};

use crate::error::{Error, Result};
use crate::explore::{explore, ExplorationConfig, ExplorationReport};
use crate::lang::{Direction, PropertyKind, TypedModel, TypedProperty};
use crate::store::{IoSnapshot, Meta, PartitionStore};

pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceConfig {
    pub epsilon: f64,
    /// Cap on outer iterations (sweeps, for the reference engine).
    pub max_outer: Option<usize>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            epsilon: DEFAULT_EPSILON,
            max_outer: None,
        }
    }
}

impl ConvergenceConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        ConvergenceConfig {
            epsilon,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Workdir(format!(
                "epsilon must be finite and positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Relative change of a state's value; only positive new values count.
#[inline]
pub(crate) fn rel_error(old: f64, new: f64) -> f64 {
    if new > 0.0 && new != old {
        if new.is_infinite() {
            f64::INFINITY
        } else {
            (new - old).abs() / old.max(new)
        }
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn better(direction: Direction, a: f64, b: f64) -> f64 {
    match direction {
        Direction::Max => a.max(b),
        Direction::Min => a.min(b),
    }
}

#[derive(Debug, Clone, Default)]
pub struct AnalysisReport {
    /// Value at the initial state; infinite for unbounded expected rewards.
    pub value: f64,
    pub outer_iterations: usize,
    pub inner_sweeps: u64,
    pub partition_visits: u64,
    /// Present for expected-reward properties only.
    pub precompute: Option<PrecomputeStats>,
    pub precompute_seconds: f64,
    pub iterate_seconds: f64,
    pub io: IoSnapshot,
}

impl AnalysisReport {
    pub fn check_seconds(&self) -> f64 {
        self.precompute_seconds + self.iterate_seconds
    }
}

/// Analyzes an explored working directory. Reachability probabilities run
/// value iteration directly; expected rewards first compute the prob1 set
/// of the dual direction.
pub fn analyze(
    store: &PartitionStore,
    property: &TypedProperty,
    cfg: &ConvergenceConfig,
) -> Result<AnalysisReport> {
    cfg.validate()?;
    let meta = Meta::load(store.dir())?;
    let before = store.stats().snapshot();
    let mut report = AnalysisReport::default();
    let outcome = match property.kind {
        PropertyKind::ReachProbability => {
            let t = Instant::now();
            let o = partitioned_value_iteration(store, &meta, property.direction, cfg, None)?;
            report.iterate_seconds = t.elapsed().as_secs_f64();
            o
        }
        PropertyKind::ExpectedReward => {
            let t = Instant::now();
            let pre = precompute_prob1(store, &meta, property.direction.dual())?;
            report.precompute = Some(pre);
            report.precompute_seconds = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let o = expected_reward_partitioned(store, &meta, property.direction, PROB1, cfg, None)?;
            report.iterate_seconds = t.elapsed().as_secs_f64();
            o
        }
    };
    report.value = outcome.value;
    report.outer_iterations = outcome.outer_iterations;
    report.inner_sweeps = outcome.inner_sweeps;
    report.partition_visits = outcome.partition_visits;
    let after = store.stats().snapshot();
    report.io = IoSnapshot {
        bytes_read: after.bytes_read - before.bytes_read,
        bytes_written: after.bytes_written - before.bytes_written,
        opens: after.opens - before.opens,
        backward_seeks: after.backward_seeks - before.backward_seeks,
    };
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub exploration: ExplorationReport,
    pub analysis: AnalysisReport,
}

/// Full pipeline: explore into `exploration.workdir`, then analyze.
pub fn check(
    model: &TypedModel,
    property: &TypedProperty,
    exploration: &ExplorationConfig,
    convergence: &ConvergenceConfig,
) -> Result<CheckReport> {
    convergence.validate()?;
    let er = explore(model, property, exploration)?;
    let store = PartitionStore::new(&exploration.workdir, exploration.compress);
    let ar = analyze(&store, property, convergence)?;
    Ok(CheckReport {
        exploration: er,
        analysis: ar,
    })
}

/// Opens an explored directory for analysis.
pub fn open_workdir(dir: &Path) -> Result<(PartitionStore, Meta)> {
    let meta = Meta::load(dir)?;
    Ok((PartitionStore::detect(dir), meta))
}
