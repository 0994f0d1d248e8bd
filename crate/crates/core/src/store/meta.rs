//! The `meta` sidecar: partition count and, per partition, state count,
//! pending queue length and successor set. Always uncompressed and rewritten
//! atomically.
//!
//! Layout (all `u32` little-endian): `count`, then per partition
//! `state_count, qlen, successor_count, successor ids...`.

use std::fs;
use std::io;
use std::path::Path;

use super::FormatError;
use crate::error::{Error, Result};
use crate::semantics::PartitionId;

pub const META_FILE: &str = "meta";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartitionMeta {
    pub state_count: u32,
    /// Entries appended to the partition's queue since it was last drained.
    pub qlen: u32,
    /// Sorted, without the partition itself.
    pub successors: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Meta {
    pub partitions: Vec<PartitionMeta>,
}

impl Meta {
    pub fn count(&self) -> u32 {
        self.partitions.len() as u32
    }

    pub fn get(&self, id: PartitionId) -> &PartitionMeta {
        &self.partitions[id.slot()]
    }

    pub fn get_mut(&mut self, id: PartitionId) -> &mut PartitionMeta {
        &mut self.partitions[id.slot()]
    }

    /// Grows the table so that `id` exists.
    pub fn ensure(&mut self, id: PartitionId) {
        if self.partitions.len() < id.get() as usize {
            self.partitions.resize(id.get() as usize, PartitionMeta::default());
        }
    }

    pub fn ids(&self) -> impl DoubleEndedIterator<Item = PartitionId> {
        (1..=self.count()).map(PartitionId)
    }

    /// Inverse of the successor relation.
    pub fn predecessors(&self) -> Vec<Vec<u32>> {
        let mut pred = vec![Vec::new(); self.partitions.len()];
        for (i, p) in self.partitions.iter().enumerate() {
            for &j in &p.successors {
                pred[j as usize - 1].push(i as u32 + 1);
            }
        }
        pred
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.count().to_le_bytes());
        for p in &self.partitions {
            out.extend_from_slice(&p.state_count.to_le_bytes());
            out.extend_from_slice(&p.qlen.to_le_bytes());
            out.extend_from_slice(&(p.successors.len() as u32).to_le_bytes());
            for s in &p.successors {
                out.extend_from_slice(&s.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Meta, FormatError> {
        let mut words = bytes.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap()));
        if !bytes.len().is_multiple_of(4) {
            return Err(FormatError::Meta("length is not a multiple of 4".into()));
        }
        let short = || FormatError::Meta("table ends early".into());
        let count = words.next().ok_or_else(short)?;
        let mut partitions = Vec::new();
        for _ in 0..count {
            let state_count = words.next().ok_or_else(short)?;
            let qlen = words.next().ok_or_else(short)?;
            let n = words.next().ok_or_else(short)?;
            let successors = (0..n)
                .map(|_| words.next().ok_or_else(short))
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(&bad) = successors.iter().find(|&&s| s == 0 || s > count) {
                return Err(FormatError::Meta(format!("successor id {bad} out of range")));
            }
            partitions.push(PartitionMeta {
                state_count,
                qlen,
                successors,
            });
        }
        if words.next().is_some() {
            return Err(FormatError::Meta("trailing data".into()));
        }
        Ok(Meta { partitions })
    }

    pub fn load(dir: &Path) -> Result<Meta> {
        let path = dir.join(META_FILE);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Meta::decode(&bytes).map_err(|e| Error::format(&path, e))
    }

    /// Loads the table, or `None` when the directory has no exploration.
    pub fn try_load(dir: &Path) -> Result<Option<Meta>> {
        if !dir.join(META_FILE).exists() {
            return Ok(None);
        }
        Meta::load(dir).map(Some)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(META_FILE);
        let tmp = dir.join("meta.tmp");
        fs::write(&tmp, self.encode())
            .and_then(|()| fs::rename(&tmp, &path))
            .map_err(|e: io::Error| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = Meta {
            partitions: vec![
                PartitionMeta {
                    state_count: 5,
                    qlen: 0,
                    successors: vec![2, 3],
                },
                PartitionMeta {
                    state_count: 1,
                    qlen: 4,
                    successors: vec![],
                },
                PartitionMeta::default(),
            ],
        };
        let bytes = m.encode();
        assert_eq!(&bytes[..4], &[3, 0, 0, 0]);
        assert_eq!(bytes.len(), 4 * (1 + 3 * 3 + 2));
        assert_eq!(Meta::decode(&bytes).unwrap(), m);
        assert_eq!(m.predecessors(), vec![vec![], vec![1], vec![1]]);
    }

    #[test]
    fn malformed() {
        assert!(Meta::decode(&[1, 0, 0, 0]).is_err());
        assert!(Meta::decode(&[0, 0, 0, 0, 9, 9, 9, 9]).is_err());
        let bad = Meta {
            partitions: vec![PartitionMeta {
                state_count: 1,
                qlen: 0,
                successors: vec![7],
            }],
        };
        assert!(Meta::decode(&bad.encode()).is_err());
    }
}
