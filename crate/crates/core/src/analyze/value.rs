//! Partitioned value iteration for reachability probabilities and expected
//! rewards.

use super::block::{self, Block, DriverStats, Kernel, Observer};
use super::{better, rel_error, ConvergenceConfig};
use crate::error::Result;
use crate::lang::Direction;
use crate::semantics::PartitionId;
use crate::store::{FileKind, Meta, PartitionStore, RandomAccessPartition};

pub const VALUES: FileKind = FileKind::Values;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationOutcome {
    /// Value of the initial state; may be infinite for rewards.
    pub value: f64,
    pub outer_iterations: usize,
    pub inner_sweeps: u64,
    pub partition_visits: u64,
}

impl IterationOutcome {
    fn new(value: f64, s: DriverStats) -> Self {
        IterationOutcome {
            value,
            outer_iterations: s.outer_iterations,
            inner_sweeps: s.inner_sweeps,
            partition_visits: s.partition_visits,
        }
    }
}

struct Reach {
    direction: Direction,
    epsilon: f64,
}

impl Kernel for Reach {
    type Cell = f64;

    fn kind(&self) -> FileKind {
        VALUES
    }

    fn init(&self, m: &RandomAccessPartition, k: usize, _: &[bool]) -> f64 {
        if m.is_target(k) {
            1.0
        } else {
            0.0
        }
    }

    fn sweep(&self, b: &mut Block<'_, f64>) -> bool {
        let m = b.matrix;
        let mut error = 0.0f64;
        for k in 0..m.state_count() {
            if m.is_target(k) {
                continue;
            }
            let ts = m.transitions_of(k);
            if ts.is_empty() {
                continue;
            }
            let mut best = 0.0;
            for (ti, t) in ts.iter().enumerate() {
                let mut sum = 0.0;
                for br in m.branches_of(t) {
                    sum += br.probability * b.value(br);
                }
                best = if ti == 0 { sum } else { better(self.direction, best, sum) };
            }
            error = error.max(rel_error(b.own[k], best));
            b.own[k] = best;
        }
        error >= self.epsilon
    }
}

/// Block-iterative value iteration for min/max reachability probabilities
/// over an explored working directory. Returns the value of the initial
/// state.
pub fn partitioned_value_iteration(
    store: &PartitionStore,
    meta: &Meta,
    direction: Direction,
    cfg: &ConvergenceConfig,
    observe: Observer<'_, f64>,
) -> Result<IterationOutcome> {
    let kernel = Reach {
        direction,
        epsilon: cfg.epsilon,
    };
    let stats = block::run(store, meta, &kernel, cfg.max_outer, observe)?;
    Ok(IterationOutcome::new(initial_value(store, meta)?, stats))
}

struct Reward {
    direction: Direction,
    epsilon: f64,
    required: FileKind,
}

impl Kernel for Reward {
    type Cell = f64;

    fn kind(&self) -> FileKind {
        VALUES
    }

    fn aux(&self) -> Option<FileKind> {
        Some(self.required)
    }

    fn init(&self, m: &RandomAccessPartition, k: usize, required: &[bool]) -> f64 {
        if m.is_target(k) || required[k] {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn sweep(&self, b: &mut Block<'_, f64>) -> bool {
        let m = b.matrix;
        let mut error = 0.0f64;
        for k in 0..m.state_count() {
            if m.is_target(k) || !b.aux_own[k] {
                continue;
            }
            let ts = m.transitions_of(k);
            if ts.is_empty() {
                continue;
            }
            let mut best = 0.0;
            for (ti, t) in ts.iter().enumerate() {
                let mut sum = 0.0;
                for br in m.branches_of(t) {
                    sum += br.probability * (br.reward + b.value(br));
                }
                best = if ti == 0 { sum } else { better(self.direction, best, sum) };
            }
            error = error.max(rel_error(b.own[k], best));
            b.own[k] = best;
        }
        error >= self.epsilon
    }
}

/// Block-iterative expected accumulated reward until the target set is
/// first reached.
///
/// `required` names the bit-vector file of states from which the target is
/// reached with probability one under the dual direction; all other states
/// are pinned at infinity.
pub fn expected_reward_partitioned(
    store: &PartitionStore,
    meta: &Meta,
    direction: Direction,
    required: FileKind,
    cfg: &ConvergenceConfig,
    observe: Observer<'_, f64>,
) -> Result<IterationOutcome> {
    let s0_required = block::load_vector::<bool>(
        store,
        PartitionId::FIRST,
        required,
        meta.get(PartitionId::FIRST).state_count as usize,
    )?
    .first()
    .copied()
    .unwrap_or(false);
    if !s0_required {
        return Ok(IterationOutcome::new(f64::INFINITY, DriverStats::default()));
    }
    let kernel = Reward {
        direction,
        epsilon: cfg.epsilon,
        required,
    };
    let stats = block::run(store, meta, &kernel, cfg.max_outer, observe)?;
    Ok(IterationOutcome::new(initial_value(store, meta)?, stats))
}

fn initial_value(store: &PartitionStore, meta: &Meta) -> Result<f64> {
    let n = meta.get(PartitionId::FIRST).state_count as usize;
    let v: Vec<f64> = block::load_vector(store, PartitionId::FIRST, VALUES, n)?;
    Ok(v[0])
}
