//! Partitioned disk-based state-space exploration.
//!
//! Partitions are visited in ascending id order, repeatedly, until a full
//! pass discovers no new state. Each visit has two phases:
//!
//! 1. **Correction.** The partition's matrix is moved aside and copied back
//!    record by record, replacing every preliminary (negative) branch index
//!    `-m` into partition `j` with entry `m-1` of `j`'s updates file.
//! 2. **Search.** The partition's disk queue is drained into the in-memory
//!    state set, recording the final index of every queue entry in the
//!    updates file, and all new states are expanded breadth-first. Local
//!    branches get their final index right away; a cross branch into
//!    partition `j` appends the target to `j`'s queue and records minus its
//!    1-based queue position.
//!
//! Only one partition's explicit states are in memory at a time.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use indexmap::IndexSet;

use crate::error::{Error, Result};
use crate::lang::{TypedModel, TypedProperty};
use crate::semantics::{ExplicitState, ModelError, PartitionId};
use crate::store::isq::{BranchEntry, IsqReader, IsqRecord, IsqWriter};
use crate::store::{FileKind, FormatError, IoSnapshot, Meta, PartitionStore, SeqWriter};

#[derive(Debug, Clone)]
pub struct ExplorationConfig {
    pub workdir: PathBuf,
    pub compress: bool,
    /// Emit the 5-byte record for local branches with probability 1 and
    /// reward 0.
    pub compact_branches: bool,
    /// Instrumentation bound on resident states; exceeding it is reported,
    /// not enforced.
    pub max_resident_states: Option<u64>,
}

impl ExplorationConfig {
    pub fn new(workdir: impl Into<PathBuf>) -> Self {
        ExplorationConfig {
            workdir: workdir.into(),
            compress: false,
            compact_branches: false,
            max_resident_states: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExplorationReport {
    pub partition_count: u32,
    pub states_total: u64,
    /// Indexed by partition slot.
    pub partition_states: Vec<u64>,
    pub n_max: u64,
    /// Largest number of successor partitions.
    pub s_max: u32,
    /// Largest number of cross branches entering one partition.
    pub c_max: u64,
    pub cross_edge_count: u64,
    pub transitions_total: u64,
    pub branches_total: u64,
    pub outer_iterations: u32,
    /// Uncompressed bytes written, by file kind.
    pub bytes_written: BTreeMap<&'static str, u64>,
    /// Uncompressed size of the final matrix files.
    pub matrix_bytes_raw: u64,
    pub matrix_bytes_disk: u64,
    /// Peak number of explicit states held in memory.
    pub peak_resident_states: u64,
    pub resident_bound_exceeded: bool,
    pub io: IoSnapshot,
    pub seconds: f64,
}

/// States of one partition with dense insertion-order indices.
#[derive(Debug, Default)]
pub struct IndexedStateSet {
    set: IndexSet<ExplicitState>,
}

impl IndexedStateSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_states(states: Vec<ExplicitState>) -> Self {
        let mut set = IndexSet::with_capacity(states.len());
        set.extend(states);
        IndexedStateSet { set }
    }

    /// Index of `s`, inserting it if absent; the flag is true when new.
    pub fn insert(&mut self, s: ExplicitState) -> (u32, bool) {
        let (i, new) = self.set.insert_full(s);
        (i as u32, new)
    }

    pub fn index_of(&self, s: &ExplicitState) -> Option<u32> {
        self.set.get_index_of(s).map(|i| i as u32)
    }

    pub fn get(&self, index: u32) -> Option<&ExplicitState> {
        self.set.get_index(index as usize)
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }
}

/// Copies one isq stream to `out`, resolving preliminary indices.
///
/// `updates` maps a partition id to its loaded updates array.
pub fn correct_indices<R: std::io::Read, W: std::io::Write>(
    input: R,
    out: &mut IsqWriter<W>,
    updates: &BTreeMap<u32, Vec<u32>>,
) -> Result<u64, FormatError> {
    let mut reader = IsqReader::new(input);
    let mut fixed = 0;
    while let Some(rec) = reader.next_record()? {
        let rec = match rec {
            IsqRecord::Branch(mut b) if b.index < 0 => {
                let table = updates
                    .get(&(b.partition as u32))
                    .ok_or(FormatError::MissingUpdates {
                        partition: b.partition as u32,
                    })?;
                let m = b.index.unsigned_abs() as usize;
                let resolved = table.get(m - 1).ok_or(FormatError::DanglingIndex {
                    partition: b.partition as u32,
                    index: b.index,
                    available: table.len(),
                })?;
                b.index = *resolved as i32;
                fixed += 1;
                IsqRecord::Branch(b)
            }
            other => other,
        };
        out.write(&rec).map_err(FormatError::from_io)?;
    }
    Ok(fixed)
}

struct Explorer<'a> {
    model: &'a TypedModel,
    target: &'a TypedProperty,
    cfg: &'a ExplorationConfig,
    store: PartitionStore,
    meta: Meta,
    successors: Vec<BTreeSet<u32>>,
    incoming: Vec<u64>,
    matrix_raw: Vec<u64>,
    report: ExplorationReport,
}

impl<'a> Explorer<'a> {
    fn ensure(&mut self, id: PartitionId) {
        self.meta.ensure(id);
        let n = self.meta.partitions.len();
        self.successors.resize(n, BTreeSet::new());
        self.incoming.resize(n, 0);
        self.matrix_raw.resize(n, 0);
    }

    fn account(&mut self, kind: FileKind, bytes: u64) {
        *self.report.bytes_written.entry(kind.name()).or_default() += bytes;
    }

    fn note_resident(&mut self, n: u64) {
        if n > self.report.peak_resident_states {
            self.report.peak_resident_states = n;
        }
        if self.cfg.max_resident_states.is_some_and(|m| n > m) {
            self.report.resident_bound_exceeded = true;
        }
    }

    fn visit(&mut self, i: PartitionId) -> Result<bool> {
        let mut matrix = self.correct(i)?;
        let changed = self.search(i, &mut matrix)?;
        let raw = matrix.into_inner().finish()?;
        self.matrix_raw[i.slot()] = raw;
        self.account(FileKind::Matrix, raw);
        Ok(changed)
    }

    /// Phase 1; returns the rewritten matrix, open for appending.
    fn correct(&mut self, i: PartitionId) -> Result<IsqWriter<SeqWriter>> {
        let old = self.store.take_old(i, FileKind::Matrix)?;
        let mut matrix = IsqWriter::new(self.store.writer(i, FileKind::Matrix)?);
        if let Some(old) = old {
            let mut updates = BTreeMap::new();
            for &j in &self.successors[i.slot()] {
                updates.insert(j, self.store.read_u32s(PartitionId(j), FileKind::Updates)?);
            }
            let path = old.path().to_path_buf();
            correct_indices(old, &mut matrix, &updates).map_err(|e| Error::format(&path, e))?;
            self.store.discard_old(i, FileKind::Matrix)?;
        }
        Ok(matrix)
    }

    fn search(&mut self, i: PartitionId, matrix: &mut IsqWriter<SeqWriter>) -> Result<bool> {
        let vars = self.model.variables.len();
        let width = ExplicitState::width(vars);
        let loaded = self.meta.get(i).state_count as usize;
        let mut states = if vars == 0 {
            // a variable-free model has exactly one state, all-zero width
            let mut s = IndexedStateSet::new();
            if loaded > 0 {
                s.insert(ExplicitState::new(Vec::new()));
            }
            s
        } else {
            IndexedStateSet::from_states(self.store.read_states(i, FileKind::States, vars)?)
        };
        if states.len() != loaded {
            return Err(Error::format(
                &self.store.path(i, FileKind::States),
                FormatError::RecordCount {
                    expected: loaded,
                    found: states.len(),
                },
            ));
        }
        self.note_resident(states.len() as u64);

        let mut updates = self.store.writer(i, FileKind::Updates)?;
        let mut states_out = self.store.appender(i, FileKind::States)?;
        let mut fifo: VecDeque<u32> = VecDeque::new();

        if let Some(mut queue) = self.store.reader(i, FileKind::Queue)? {
            let mut pending = Vec::new();
            queue.for_each_record(width.max(1), |rec| {
                pending.push(ExplicitState::decode(&rec[..width]));
                Ok(())
            })?;
            if vars == 0 {
                // zero-width entries cannot be counted from the file
                pending = vec![ExplicitState::new(Vec::new()); self.meta.get(i).qlen as usize];
            }
            for s in pending {
                let (k, new) = states.insert(s);
                updates.put_u32(k)?;
                if new {
                    states_out.put_state(states.get(k).unwrap())?;
                    fifo.push_back(k);
                }
            }
            self.store.remove(i, FileKind::Queue)?;
        }
        self.meta.get_mut(i).qlen = 0;

        let changed = !fifo.is_empty();
        let mut queues: BTreeMap<u32, SeqWriter> = BTreeMap::new();
        while let Some(k) = fifo.pop_front() {
            let s = states.get(k).unwrap().clone();
            let transitions = self.model.enabled_transitions(&s)?;
            let in_flight: usize = transitions.iter().map(|t| t.branches.len()).sum();
            self.note_resident((states.len() + in_flight) as u64);
            self.report.transitions_total += transitions.len() as u64;
            self.report.branches_total += in_flight as u64;
            for t in transitions {
                for b in t.branches {
                    let j = self.model.partition_of(&b.target)?;
                    let rec = if j == i {
                        let (idx, new) = states.insert(b.target);
                        if new {
                            states_out.put_state(states.get(idx).unwrap())?;
                            fifo.push_back(idx);
                        }
                        if self.cfg.compact_branches && b.probability == 1.0 && b.reward == 0.0 {
                            IsqRecord::LocalCertainBranch { index: idx as i32 }
                        } else {
                            IsqRecord::Branch(BranchEntry {
                                probability: b.probability,
                                reward: b.reward,
                                partition: i.get() as i32,
                                index: idx as i32,
                            })
                        }
                    } else {
                        self.ensure(j);
                        self.successors[i.slot()].insert(j.get());
                        self.incoming[j.slot()] += 1;
                        self.report.cross_edge_count += 1;
                        let q = match queues.entry(j.get()) {
                            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                            std::collections::btree_map::Entry::Vacant(e) => {
                                e.insert(self.store.appender(j, FileKind::Queue)?)
                            }
                        };
                        q.put_state(&b.target)?;
                        let qlen = &mut self.meta.get_mut(j).qlen;
                        *qlen += 1;
                        let index = i32::try_from(*qlen).map_err(|_| {
                            Error::Workdir(format!("queue of partition {j} exceeds i32 range"))
                        })?;
                        IsqRecord::Branch(BranchEntry {
                            probability: b.probability,
                            reward: b.reward,
                            partition: j.get() as i32,
                            index: -index,
                        })
                    };
                    matrix
                        .write(&rec)
                        .map_err(|e| Error::io(&self.store.path(i, FileKind::Matrix), e))?;
                }
                matrix
                    .write(&IsqRecord::TransitionEnd)
                    .map_err(|e| Error::io(&self.store.path(i, FileKind::Matrix), e))?;
            }
            let is_target = self.model.is_target(&s, self.target)?;
            matrix
                .write(&IsqRecord::StateEnd { is_target })
                .map_err(|e| Error::io(&self.store.path(i, FileKind::Matrix), e))?;
        }

        for (_, q) in queues {
            let n = q.finish()?;
            self.account(FileKind::Queue, n);
        }
        let n = updates.finish()?;
        self.account(FileKind::Updates, n);
        let n = states_out.finish()?;
        self.account(FileKind::States, n);

        let pm = self.meta.get_mut(i);
        pm.state_count = states.len() as u32;
        pm.successors = self.successors[i.slot()].iter().copied().collect();
        Ok(changed)
    }
}

/// Explores `model` into `cfg.workdir`, which must be empty or absent.
pub fn explore(
    model: &TypedModel,
    target: &TypedProperty,
    cfg: &ExplorationConfig,
) -> Result<ExplorationReport> {
    let start = Instant::now();
    prepare_workdir(&cfg.workdir)?;
    let store = PartitionStore::new(&cfg.workdir, cfg.compress);

    let s0 = model.initial_state();
    let p0 = model.partition_of(&s0)?;
    if p0 != PartitionId::FIRST {
        return Err(ModelError::InitialPartition {
            state: model.describe(&s0),
            value: p0.get(),
        }
        .into());
    }

    let mut ex = Explorer {
        model,
        target,
        cfg,
        store: store.clone(),
        meta: Meta::default(),
        successors: Vec::new(),
        incoming: Vec::new(),
        matrix_raw: Vec::new(),
        report: ExplorationReport::default(),
    };
    ex.ensure(PartitionId::FIRST);
    let mut q = store.writer(PartitionId::FIRST, FileKind::Queue)?;
    q.put_state(&s0)?;
    ex.account(FileKind::Queue, q.finish()?);
    ex.meta.get_mut(PartitionId::FIRST).qlen = 1;

    loop {
        ex.report.outer_iterations += 1;
        let mut changed = false;
        let mut i = 1;
        while i <= ex.meta.count() {
            changed |= ex.visit(PartitionId(i))?;
            i += 1;
        }
        ex.meta.save(&cfg.workdir)?;
        if !changed {
            break;
        }
    }

    let mut r = ex.report;
    r.partition_count = ex.meta.count();
    r.partition_states = ex.meta.partitions.iter().map(|p| p.state_count as u64).collect();
    r.states_total = r.partition_states.iter().sum();
    r.n_max = r.partition_states.iter().copied().max().unwrap_or(0);
    r.s_max = ex.meta.partitions.iter().map(|p| p.successors.len() as u32).max().unwrap_or(0);
    r.c_max = ex.incoming.iter().copied().max().unwrap_or(0);
    r.matrix_bytes_raw = ex.matrix_raw.iter().sum();
    for id in ex.meta.ids() {
        r.matrix_bytes_disk += store.disk_size(id, FileKind::Matrix)?;
    }
    r.io = store.stats().snapshot();
    r.seconds = start.elapsed().as_secs_f64();
    Ok(r)
}

fn prepare_workdir(dir: &std::path::Path) -> Result<()> {
    match fs::read_dir(dir) {
        Ok(mut entries) => {
            if entries.next().is_some() {
                return Err(Error::Workdir(format!("{} is not empty", dir.display())));
            }
            Ok(())
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        Err(e) => Err(Error::io(dir, e)),
    }
}
