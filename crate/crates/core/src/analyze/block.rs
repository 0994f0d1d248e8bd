//! Generic block-iterative driver.
//!
//! A [`Kernel`] owns one per-state vector file per partition. The driver
//! initializes every vector, then repeatedly visits dirty partitions in
//! descending id order: it loads the partition's matrix, its own vector and
//! the vectors of its successor partitions, sweeps until the kernel reports
//! convergence, writes the own vector back and, if any sweep of the turn saw
//! a significant change, marks the partition's predecessors dirty. The run
//! ends when no partition is dirty.

use crate::error::{Error, Result};
use crate::semantics::PartitionId;
use crate::store::isq::BranchEntry;
use crate::store::{load_partition, FileKind, FormatError, Meta, PartitionStore, RandomAccessPartition};

/// Fixed-width per-state value.
pub trait Cell: Copy + PartialEq {
    const WIDTH: usize;
    fn decode(b: &[u8]) -> Self;
    fn encode(self, out: &mut Vec<u8>);
}

impl Cell for f64 {
    const WIDTH: usize = 8;
    fn decode(b: &[u8]) -> Self {
        f64::from_le_bytes(b.try_into().unwrap())
    }
    fn encode(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl Cell for bool {
    const WIDTH: usize = 1;
    fn decode(b: &[u8]) -> Self {
        b[0] != 0
    }
    fn encode(self, out: &mut Vec<u8>) {
        out.push(self as u8);
    }
}

/// Reads a whole vector file, checking it against the expected length.
pub fn load_vector<T: Cell>(
    store: &PartitionStore,
    id: PartitionId,
    kind: FileKind,
    expected: usize,
) -> Result<Vec<T>> {
    let path = store.path(id, kind);
    let Some(r) = store.reader(id, kind)? else {
        return Err(Error::Workdir(format!("missing {}", path.display())));
    };
    let v = r.read_records(T::WIDTH, T::decode)?;
    if v.len() != expected {
        return Err(Error::format(
            &path,
            FormatError::RecordCount {
                expected,
                found: v.len(),
            },
        ));
    }
    Ok(v)
}

pub fn store_vector<T: Cell>(
    store: &PartitionStore,
    id: PartitionId,
    kind: FileKind,
    values: &[T],
) -> Result<u64> {
    store.write_atomic(id, kind, |w| {
        let mut buf = Vec::with_capacity(values.len() * T::WIDTH);
        for &v in values {
            v.encode(&mut buf);
        }
        w.put(&buf)
    })
}

pub fn load_matrix(store: &PartitionStore, id: PartitionId) -> Result<RandomAccessPartition> {
    let path = store.path(id, FileKind::Matrix);
    let Some(r) = store.reader(id, FileKind::Matrix)? else {
        return Err(Error::Workdir(format!("missing {}", path.display())));
    };
    load_partition(r, id).map_err(|e| Error::format(&path, e))
}

/// Everything a sweep may look at while one partition is loaded.
pub struct Block<'a, T> {
    pub id: PartitionId,
    pub matrix: &'a RandomAccessPartition,
    pub own: &'a mut [T],
    /// Successor vectors by partition slot; empty for partitions not loaded.
    pub succ: &'a [Vec<T>],
    pub aux_own: &'a [bool],
    pub aux_succ: &'a [Vec<bool>],
}

impl<T: Cell> Block<'_, T> {
    #[inline]
    pub fn value(&self, b: &BranchEntry) -> T {
        if b.partition as u32 == self.id.get() {
            self.own[b.index as usize]
        } else {
            self.succ[b.partition as usize - 1][b.index as usize]
        }
    }

    #[inline]
    pub fn aux(&self, b: &BranchEntry) -> bool {
        if b.partition as u32 == self.id.get() {
            self.aux_own[b.index as usize]
        } else {
            self.aux_succ[b.partition as usize - 1][b.index as usize]
        }
    }
}

pub trait Kernel {
    type Cell: Cell;

    /// File holding the kernel's vector.
    fn kind(&self) -> FileKind;

    /// Read-only boolean vector loaded alongside, for own and successors.
    fn aux(&self) -> Option<FileKind> {
        None
    }

    fn init(&self, matrix: &RandomAccessPartition, state: usize, aux: &[bool]) -> Self::Cell;

    /// One in-place sweep in ascending state order; true when it saw a
    /// change large enough to require another sweep.
    fn sweep(&self, block: &mut Block<'_, Self::Cell>) -> bool;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DriverStats {
    pub outer_iterations: usize,
    pub inner_sweeps: u64,
    pub partition_visits: u64,
}

/// Per-sweep callback receiving the partition's own vector.
pub type Observer<'o, T> = Option<&'o mut dyn FnMut(PartitionId, &[T])>;

pub fn run<K: Kernel>(
    store: &PartitionStore,
    meta: &Meta,
    kernel: &K,
    max_outer: Option<usize>,
    mut observe: Observer<'_, K::Cell>,
) -> Result<DriverStats> {
    let count = meta.count() as usize;
    for id in meta.ids() {
        let m = load_matrix(store, id)?;
        let aux = match kernel.aux() {
            Some(kind) => load_vector::<bool>(store, id, kind, m.state_count())?,
            None => Vec::new(),
        };
        let v: Vec<K::Cell> = (0..m.state_count()).map(|k| kernel.init(&m, k, &aux)).collect();
        store_vector(store, id, kernel.kind(), &v)?;
    }

    let preds = meta.predecessors();
    let mut dirty = vec![true; count];
    let mut stats = DriverStats::default();
    while dirty.iter().any(|&d| d) {
        if max_outer.is_some_and(|cap| stats.outer_iterations >= cap) {
            return Err(Error::NotConverged {
                iterations: stats.outer_iterations,
            });
        }
        stats.outer_iterations += 1;
        for id in meta.ids().rev() {
            if !dirty[id.slot()] {
                continue;
            }
            dirty[id.slot()] = false;
            stats.partition_visits += 1;
            let pm = meta.get(id);
            let matrix = load_matrix(store, id)?;
            let n = matrix.state_count();
            let mut own: Vec<K::Cell> = load_vector(store, id, kernel.kind(), n)?;
            let mut succ: Vec<Vec<K::Cell>> = vec![Vec::new(); count];
            let mut aux_succ: Vec<Vec<bool>> = vec![Vec::new(); count];
            let aux_own = match kernel.aux() {
                Some(kind) => load_vector(store, id, kind, n)?,
                None => Vec::new(),
            };
            for &j in &pm.successors {
                let jid = PartitionId(j);
                let len = meta.get(jid).state_count as usize;
                succ[jid.slot()] = load_vector(store, jid, kernel.kind(), len)?;
                if let Some(kind) = kernel.aux() {
                    aux_succ[jid.slot()] = load_vector(store, jid, kind, len)?;
                }
            }
            let mut block = Block {
                id,
                matrix: &matrix,
                own: &mut own,
                succ: &succ,
                aux_own: &aux_own,
                aux_succ: &aux_succ,
            };
            let mut turn_changed = false;
            loop {
                stats.inner_sweeps += 1;
                let again = kernel.sweep(&mut block);
                if let Some(f) = observe.as_mut() {
                    f(id, block.own);
                }
                if !again {
                    break;
                }
                turn_changed = true;
            }
            store_vector(store, id, kernel.kind(), &own)?;
            if turn_changed {
                for &p in &preds[id.slot()] {
                    dirty[p as usize - 1] = true;
                }
            }
        }
    }
    Ok(stats)
}
