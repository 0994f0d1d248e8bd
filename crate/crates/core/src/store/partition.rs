//! Random-access form of one partition: three parallel arrays of states,
//! transitions and branches, rebuilt from an inverse-sequential stream in a
//! single pass and written back the same way.

use std::io::{Read, Write};
use std::mem::size_of;
use std::ops::Range;

use super::isq::{
    BranchEntry, IsqReader, IsqRecord, IsqWriter, BRANCH_BYTES, STATE_BYTES, TRANSITION_BYTES,
};
use super::FormatError;
use crate::semantics::PartitionId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(C)]
pub struct StateEntry {
    pub transition_count: u32,
    pub first_transition: u32,
    /// 0 or 1.
    pub is_target: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(C)]
pub struct TransitionEntry {
    pub branch_count: u32,
    pub first_branch: u32,
}

pub const STATE_ENTRY_BYTES: usize = 12;
pub const TRANSITION_ENTRY_BYTES: usize = 8;
pub const BRANCH_ENTRY_BYTES: usize = 24;

const _: () = assert!(size_of::<StateEntry>() == STATE_ENTRY_BYTES);
const _: () = assert!(size_of::<TransitionEntry>() == TRANSITION_ENTRY_BYTES);
const _: () = assert!(size_of::<BranchEntry>() == BRANCH_ENTRY_BYTES);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RandomAccessPartition {
    pub states: Vec<StateEntry>,
    pub transitions: Vec<TransitionEntry>,
    pub branches: Vec<BranchEntry>,
}

impl RandomAccessPartition {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn is_target(&self, state: usize) -> bool {
        self.states[state].is_target != 0
    }

    pub fn transition_range(&self, state: usize) -> Range<usize> {
        let s = &self.states[state];
        s.first_transition as usize..(s.first_transition + s.transition_count) as usize
    }

    pub fn transitions_of(&self, state: usize) -> &[TransitionEntry] {
        &self.transitions[self.transition_range(state)]
    }

    pub fn branches_of(&self, t: &TransitionEntry) -> &[BranchEntry] {
        let start = t.first_branch as usize;
        &self.branches[start..start + t.branch_count as usize]
    }

    /// Bytes occupied by the three arrays.
    pub fn memory_bytes(&self) -> usize {
        self.states.len() * size_of::<StateEntry>()
            + self.transitions.len() * size_of::<TransitionEntry>()
            + self.branches.len() * size_of::<BranchEntry>()
    }

    /// Size of the inverse-sequential encoding using full branch records.
    pub fn isq_bytes(&self) -> usize {
        self.branches.len() * BRANCH_BYTES
            + self.transitions.len() * TRANSITION_BYTES
            + self.states.len() * STATE_BYTES
    }
}

/// Rebuilds the random-access arrays from one sequential read.
///
/// `own` fills the partition field of compact local branch records. Every
/// branch index must already be final (non-negative).
pub fn load_partition<R: Read>(
    reader: R,
    own: PartitionId,
) -> Result<RandomAccessPartition, FormatError> {
    let mut p = RandomAccessPartition::default();
    let mut reader = IsqReader::new(reader);
    let mut branch_start = 0usize;
    let mut transition_start = 0usize;
    while let Some(rec) = reader.next_record()? {
        match rec {
            IsqRecord::Branch(b) => {
                if b.index < 0 {
                    return Err(FormatError::PreliminaryIndex {
                        state: p.states.len(),
                        index: b.index,
                    });
                }
                p.branches.push(b);
            }
            IsqRecord::LocalCertainBranch { index } => {
                if index < 0 {
                    return Err(FormatError::PreliminaryIndex {
                        state: p.states.len(),
                        index,
                    });
                }
                p.branches.push(BranchEntry {
                    probability: 1.0,
                    reward: 0.0,
                    partition: own.get() as i32,
                    index,
                });
            }
            IsqRecord::TransitionEnd => {
                p.transitions.push(TransitionEntry {
                    branch_count: (p.branches.len() - branch_start) as u32,
                    first_branch: branch_start as u32,
                });
                branch_start = p.branches.len();
            }
            IsqRecord::StateEnd { is_target } => {
                if branch_start != p.branches.len() {
                    return Err(FormatError::Unterminated {
                        offset: reader.offset(),
                    });
                }
                p.states.push(StateEntry {
                    transition_count: (p.transitions.len() - transition_start) as u32,
                    first_transition: transition_start as u32,
                    is_target: is_target as u32,
                });
                transition_start = p.transitions.len();
            }
        }
    }
    if branch_start != p.branches.len() || transition_start != p.transitions.len() {
        return Err(FormatError::Unterminated {
            offset: reader.offset(),
        });
    }
    Ok(p)
}

/// Writes the arrays back as an inverse-sequential stream in one pass.
///
/// With `compact` set, local branches with probability 1 and reward 0 use
/// the 5-byte record. Ranges must be contiguous and in order, which is the
/// only layout the stream format can express.
pub fn store_partition<W: Write>(
    p: &RandomAccessPartition,
    out: W,
    own: PartitionId,
    compact: bool,
) -> Result<IsqWriter<W>, FormatError> {
    let mut w = IsqWriter::new(out);
    let mut next_transition = 0usize;
    let mut next_branch = 0usize;
    for (k, s) in p.states.iter().enumerate() {
        if s.first_transition as usize != next_transition
            || next_transition + s.transition_count as usize > p.transitions.len()
        {
            return Err(FormatError::InconsistentRanges {
                what: "state",
                index: k,
            });
        }
        for (ti, t) in p.transitions_of(k).iter().enumerate() {
            if t.first_branch as usize != next_branch
                || next_branch + t.branch_count as usize > p.branches.len()
            {
                return Err(FormatError::InconsistentRanges {
                    what: "transition",
                    index: next_transition + ti,
                });
            }
            for b in p.branches_of(t) {
                let rec = if compact
                    && b.probability == 1.0
                    && b.reward == 0.0
                    && b.index >= 0
                    && b.partition == own.get() as i32
                {
                    IsqRecord::LocalCertainBranch { index: b.index }
                } else {
                    IsqRecord::Branch(*b)
                };
                w.write(&rec).map_err(FormatError::from_io)?;
            }
            next_branch += t.branch_count as usize;
            w.write(&IsqRecord::TransitionEnd)
                .map_err(FormatError::from_io)?;
        }
        next_transition += s.transition_count as usize;
        w.write(&IsqRecord::StateEnd {
            is_target: s.is_target != 0,
        })
        .map_err(FormatError::from_io)?;
    }
    if next_transition != p.transitions.len() {
        return Err(FormatError::InconsistentRanges {
            what: "transition",
            index: next_transition,
        });
    }
    if next_branch != p.branches.len() {
        return Err(FormatError::InconsistentRanges {
            what: "branch",
            index: next_branch,
        });
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::isq::encode_record;

    fn branch(probability: f64, partition: i32, index: i32) -> IsqRecord {
        IsqRecord::Branch(BranchEntry {
            probability,
            reward: 0.0,
            partition,
            index,
        })
    }

    fn bytes(records: &[IsqRecord]) -> Vec<u8> {
        let mut out = Vec::new();
        for r in records {
            encode_record(r, &mut out).unwrap();
        }
        out
    }

    fn coin_stream() -> Vec<u8> {
        bytes(&[
            branch(0.5, 1, 1),
            branch(0.5, 1, 2),
            IsqRecord::TransitionEnd,
            IsqRecord::StateEnd { is_target: false },
            IsqRecord::StateEnd { is_target: true },
            IsqRecord::StateEnd { is_target: true },
        ])
    }

    #[test]
    fn coin_layout() {
        let p = load_partition(&coin_stream()[..], PartitionId(1)).unwrap();
        assert_eq!(p.state_count(), 3);
        assert_eq!(p.transitions_of(0).len(), 1);
        let bs = p.branches_of(&p.transitions_of(0)[0]);
        assert_eq!(bs.iter().map(|b| b.index).collect::<Vec<_>>(), vec![1, 2]);
        assert!(!p.is_target(0));
        assert!(p.transitions_of(1).is_empty() && p.is_target(1));
        assert!(p.transitions_of(2).is_empty() && p.is_target(2));
        assert_eq!(p.memory_bytes(), 3 * 12 + 8 + 2 * 24);
        assert_eq!(p.isq_bytes(), coin_stream().len());
    }

    #[test]
    fn store_load_is_byte_identical() {
        let src = coin_stream();
        let p = load_partition(&src[..], PartitionId(1)).unwrap();
        let w = store_partition(&p, Vec::new(), PartitionId(1), false).unwrap();
        assert_eq!(w.into_inner(), src);
    }

    #[test]
    fn negative_index_rejected() {
        let src = bytes(&[
            branch(1.0, 2, -1),
            IsqRecord::TransitionEnd,
            IsqRecord::StateEnd { is_target: false },
        ]);
        assert!(matches!(
            load_partition(&src[..], PartitionId(1)),
            Err(FormatError::PreliminaryIndex { state: 0, index: -1 })
        ));
    }

    #[test]
    fn unterminated_state_rejected() {
        let src = bytes(&[IsqRecord::StateEnd { is_target: false }, branch(1.0, 1, 0)]);
        assert!(matches!(
            load_partition(&src[..], PartitionId(1)),
            Err(FormatError::Unterminated { .. })
        ));
        let src = bytes(&[branch(1.0, 1, 0), IsqRecord::TransitionEnd]);
        assert!(matches!(
            load_partition(&src[..], PartitionId(1)),
            Err(FormatError::Unterminated { .. })
        ));
    }

    #[test]
    fn inconsistent_ranges_rejected() {
        let mut p = load_partition(&coin_stream()[..], PartitionId(1)).unwrap();
        p.states[0].transition_count = 2;
        assert!(matches!(
            store_partition(&p, Vec::new(), PartitionId(1), false),
            Err(FormatError::InconsistentRanges { .. })
        ));
    }

    #[test]
    fn compact_local_branches() {
        let src = bytes(&[
            branch(1.0, 1, 0),
            IsqRecord::TransitionEnd,
            branch(1.0, 2, 0),
            IsqRecord::TransitionEnd,
            IsqRecord::StateEnd { is_target: false },
        ]);
        let p = load_partition(&src[..], PartitionId(1)).unwrap();
        let out = store_partition(&p, Vec::new(), PartitionId(1), true)
            .unwrap()
            .into_inner();
        assert_eq!(out.len(), src.len() - 20);
        assert_eq!(load_partition(&out[..], PartitionId(1)).unwrap(), p);
    }
}
