//! Block-iterative prob0/prob1 precomputation.
//!
//! Each set is obtained from least fixpoints over the partitioned graph,
//! evaluated with the same load/sweep/unload discipline as value iteration:
//!
//! | set        | computation |
//! |------------|-------------|
//! | prob0, max | complement of `μR. F ∪ {s : ∃t ∃b ∈ R}` |
//! | prob0, min | complement of `μR. F ∪ {s : T(s) ≠ ∅ ∧ ∀t ∃b ∈ R}` |
//! | prob1, max | `νU. μR. F ∪ {s : ∃t (∀b ∈ U) ∧ (∃b ∈ R)}` |
//! | prob1, min | complement of `μB. Z ∪ {s ∉ F : ∃t ∃b ∈ B}` with `Z` = prob0, min |

use super::block::{self, Block, Kernel};
use crate::error::Result;
use crate::lang::Direction;
use crate::store::{FileKind, Meta, PartitionStore, RandomAccessPartition};

pub const PROB0: FileKind = FileKind::Bits("prob0");
pub const PROB1: FileKind = FileKind::Bits("prob1");
const FIX: FileKind = FileKind::Bits("fix");
const OUTER: FileKind = FileKind::Bits("outer");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rule {
    /// `∃t ∃b ∈ R`
    Reach,
    /// `T(s) ≠ ∅ ∧ ∀t ∃b ∈ R`
    Forced,
    /// `∃t (∀b ∈ aux) ∧ (∃b ∈ R)`
    SafeReach,
    /// `s ∉ F ∧ ∃t ∃b ∈ R`, seeded from aux instead of the targets
    ReachAvoiding,
}

struct Fixpoint {
    rule: Rule,
    aux: Option<FileKind>,
}

impl Kernel for Fixpoint {
    type Cell = bool;

    fn kind(&self) -> FileKind {
        FIX
    }

    fn aux(&self) -> Option<FileKind> {
        self.aux
    }

    fn init(&self, m: &RandomAccessPartition, k: usize, aux: &[bool]) -> bool {
        match self.rule {
            Rule::ReachAvoiding => aux[k],
            _ => m.is_target(k),
        }
    }

    fn sweep(&self, b: &mut Block<'_, bool>) -> bool {
        let m = b.matrix;
        let mut flipped = false;
        for k in 0..m.state_count() {
            if b.own[k] {
                continue;
            }
            let ts = m.transitions_of(k);
            let hit = |t| m.branches_of(t).iter().any(|br| b.value(br));
            let add = match self.rule {
                Rule::Reach => ts.iter().any(hit),
                Rule::Forced => !ts.is_empty() && ts.iter().all(hit),
                Rule::SafeReach => ts
                    .iter()
                    .any(|t| hit(t) && m.branches_of(t).iter().all(|br| b.aux(br))),
                Rule::ReachAvoiding => !m.is_target(k) && ts.iter().any(hit),
            };
            if add {
                b.own[k] = true;
                flipped = true;
            }
        }
        flipped
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PrecomputeStats {
    /// Outer passes summed over all fixpoints evaluated.
    pub outer_iterations: usize,
    pub inner_sweeps: u64,
    /// Rounds of the greatest fixpoint (prob1 max only).
    pub nested_rounds: usize,
}

impl PrecomputeStats {
    fn add(&mut self, s: block::DriverStats) {
        self.outer_iterations += s.outer_iterations;
        self.inner_sweeps += s.inner_sweeps;
    }
}

fn fixpoint(
    store: &PartitionStore,
    meta: &Meta,
    rule: Rule,
    aux: Option<FileKind>,
    stats: &mut PrecomputeStats,
) -> Result<()> {
    let s = block::run(store, meta, &Fixpoint { rule, aux }, None, None)?;
    stats.add(s);
    Ok(())
}

/// Streams `from` into `to`, optionally negated; returns whether the two
/// files were already equal before the copy.
fn copy_bits(
    store: &PartitionStore,
    meta: &Meta,
    from: FileKind,
    to: FileKind,
    negate: bool,
    compare: bool,
) -> Result<bool> {
    let mut same = true;
    for id in meta.ids() {
        let n = meta.get(id).state_count as usize;
        let src: Vec<bool> = block::load_vector(store, id, from, n)?;
        let out: Vec<bool> = src.iter().map(|&b| b != negate).collect();
        if compare {
            let old: Vec<bool> = block::load_vector(store, id, to, n)?;
            same &= old == out;
        }
        block::store_vector(store, id, to, &out)?;
    }
    Ok(same)
}

fn cleanup(store: &PartitionStore, meta: &Meta, kinds: &[FileKind]) -> Result<()> {
    for id in meta.ids() {
        for &k in kinds {
            store.remove(id, k)?;
        }
    }
    Ok(())
}

/// States whose `direction`-optimal probability of reaching the target is
/// exactly zero; written to the `prob0` bit files.
pub fn precompute_prob0(
    store: &PartitionStore,
    meta: &Meta,
    direction: Direction,
) -> Result<PrecomputeStats> {
    let mut stats = PrecomputeStats::default();
    let rule = match direction {
        Direction::Max => Rule::Reach,
        Direction::Min => Rule::Forced,
    };
    fixpoint(store, meta, rule, None, &mut stats)?;
    copy_bits(store, meta, FIX, PROB0, true, false)?;
    cleanup(store, meta, &[FIX])?;
    Ok(stats)
}

/// States whose `direction`-optimal probability of reaching the target is
/// exactly one; written to the `prob1` bit files.
pub fn precompute_prob1(
    store: &PartitionStore,
    meta: &Meta,
    direction: Direction,
) -> Result<PrecomputeStats> {
    let mut stats = PrecomputeStats::default();
    match direction {
        Direction::Max => {
            for id in meta.ids() {
                let n = meta.get(id).state_count as usize;
                block::store_vector(store, id, OUTER, &vec![true; n])?;
            }
            loop {
                stats.nested_rounds += 1;
                fixpoint(store, meta, Rule::SafeReach, Some(OUTER), &mut stats)?;
                if copy_bits(store, meta, FIX, OUTER, false, true)? {
                    break;
                }
            }
            copy_bits(store, meta, OUTER, PROB1, false, false)?;
            cleanup(store, meta, &[FIX, OUTER])?;
        }
        Direction::Min => {
            fixpoint(store, meta, Rule::Forced, None, &mut stats)?;
            // complement: prob0 for the min direction
            copy_bits(store, meta, FIX, OUTER, true, false)?;
            fixpoint(store, meta, Rule::ReachAvoiding, Some(OUTER), &mut stats)?;
            copy_bits(store, meta, FIX, PROB1, true, false)?;
            cleanup(store, meta, &[FIX, OUTER])?;
        }
    }
    Ok(stats)
}

/// Loads a per-partition bit vector, indexed by partition slot.
pub fn load_bits(store: &PartitionStore, meta: &Meta, kind: FileKind) -> Result<Vec<Vec<bool>>> {
    meta.ids()
        .map(|id| block::load_vector(store, id, kind, meta.get(id).state_count as usize))
        .collect()
}
