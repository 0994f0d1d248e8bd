//! Inverse-sequential record stream.
//!
//! A partition's matrix is a flat sequence of tagged records in which every
//! record is preceded by its children: the branches of a transition come
//! before the transition record, the transitions of a state before the state
//! record. Counts and offsets are therefore implicit.
//!
//! | tag    | record                | bytes |
//! |--------|-----------------------|-------|
//! | `0x01` | branch: `f64` probability, `f64` reward, `i32` partition, `i32` index | 25 |
//! | `0x02` | end of transition     | 1 |
//! | `0x03` | end of state: `u8` is-target (0 or 1) | 2 |
//! | `0x04` | local branch with probability 1 and reward 0: `i32` index | 5 |
//!
//! All multi-byte fields are little-endian. Tag `0x04` is only emitted when
//! compact encoding is requested.

use std::io::{self, Read, Write};

use super::FormatError;

pub const TAG_BRANCH: u8 = 0x01;
pub const TAG_TRANSITION: u8 = 0x02;
pub const TAG_STATE: u8 = 0x03;
pub const TAG_LOCAL_CERTAIN: u8 = 0x04;

pub const BRANCH_BYTES: usize = 25;
pub const TRANSITION_BYTES: usize = 1;
pub const STATE_BYTES: usize = 2;
pub const LOCAL_CERTAIN_BYTES: usize = 5;

/// Branch payload; also the in-memory branch entry of a random-access partition.
#[derive(Debug, Clone, Copy, PartialEq)]
#[repr(C)]
pub struct BranchEntry {
    pub probability: f64,
    pub reward: f64,
    pub partition: i32,
    /// Index of the target within its partition; negative while preliminary.
    pub index: i32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IsqRecord {
    Branch(BranchEntry),
    /// Probability 1, reward 0, target in the partition that owns the stream.
    LocalCertainBranch { index: i32 },
    TransitionEnd,
    StateEnd { is_target: bool },
}

impl IsqRecord {
    /// Encodes into `buf`, returning the number of bytes used.
    pub fn encode(&self, buf: &mut [u8; BRANCH_BYTES]) -> usize {
        match *self {
            IsqRecord::Branch(b) => {
                buf[0] = TAG_BRANCH;
                buf[1..9].copy_from_slice(&b.probability.to_le_bytes());
                buf[9..17].copy_from_slice(&b.reward.to_le_bytes());
                buf[17..21].copy_from_slice(&b.partition.to_le_bytes());
                buf[21..25].copy_from_slice(&b.index.to_le_bytes());
                BRANCH_BYTES
            }
            IsqRecord::LocalCertainBranch { index } => {
                buf[0] = TAG_LOCAL_CERTAIN;
                buf[1..5].copy_from_slice(&index.to_le_bytes());
                LOCAL_CERTAIN_BYTES
            }
            IsqRecord::TransitionEnd => {
                buf[0] = TAG_TRANSITION;
                TRANSITION_BYTES
            }
            IsqRecord::StateEnd { is_target } => {
                buf[0] = TAG_STATE;
                buf[1] = is_target as u8;
                STATE_BYTES
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = [0u8; BRANCH_BYTES];
        let n = self.encode(&mut buf);
        buf[..n].to_vec()
    }
}

pub fn encode_record(r: &IsqRecord, out: &mut impl Write) -> io::Result<()> {
    let mut buf = [0u8; BRANCH_BYTES];
    let n = r.encode(&mut buf);
    out.write_all(&buf[..n])
}

/// Streaming writer that keeps record counts.
pub struct IsqWriter<W: Write> {
    inner: W,
    pub branches: u64,
    pub transitions: u64,
    pub states: u64,
    pub bytes: u64,
}

impl<W: Write> IsqWriter<W> {
    pub fn new(inner: W) -> Self {
        IsqWriter {
            inner,
            branches: 0,
            transitions: 0,
            states: 0,
            bytes: 0,
        }
    }

    pub fn write(&mut self, r: &IsqRecord) -> io::Result<()> {
        let mut buf = [0u8; BRANCH_BYTES];
        let n = r.encode(&mut buf);
        self.inner.write_all(&buf[..n])?;
        self.bytes += n as u64;
        match r {
            IsqRecord::Branch(_) | IsqRecord::LocalCertainBranch { .. } => self.branches += 1,
            IsqRecord::TransitionEnd => self.transitions += 1,
            IsqRecord::StateEnd { .. } => self.states += 1,
        }
        Ok(())
    }

    pub fn get_mut(&mut self) -> &mut W {
        &mut self.inner
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

/// Single-pass decoder over any byte source.
pub struct IsqReader<R: Read> {
    inner: R,
    offset: u64,
}

impl<R: Read> IsqReader<R> {
    pub fn new(inner: R) -> Self {
        IsqReader { inner, offset: 0 }
    }

    /// Byte offset of the next record.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn fill(&mut self, buf: &mut [u8], record_start: u64) -> Result<(), FormatError> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                FormatError::Truncated {
                    offset: record_start,
                }
            } else {
                FormatError::from_io(e)
            }
        })
    }

    pub fn next_record(&mut self) -> Result<Option<IsqRecord>, FormatError> {
        let start = self.offset;
        let mut tag = [0u8; 1];
        loop {
            match self.inner.read(&mut tag) {
                Ok(0) => return Ok(None),
                Ok(_) => break,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(FormatError::from_io(e)),
            }
        }
        let mut buf = [0u8; BRANCH_BYTES - 1];
        let rec = match tag[0] {
            TAG_BRANCH => {
                self.fill(&mut buf, start)?;
                let f64_at = |i: usize| f64::from_le_bytes(buf[i..i + 8].try_into().unwrap());
                let i32_at = |i: usize| i32::from_le_bytes(buf[i..i + 4].try_into().unwrap());
                IsqRecord::Branch(BranchEntry {
                    probability: f64_at(0),
                    reward: f64_at(8),
                    partition: i32_at(16),
                    index: i32_at(20),
                })
            }
            TAG_LOCAL_CERTAIN => {
                self.fill(&mut buf[..4], start)?;
                IsqRecord::LocalCertainBranch {
                    index: i32::from_le_bytes(buf[..4].try_into().unwrap()),
                }
            }
            TAG_TRANSITION => IsqRecord::TransitionEnd,
            TAG_STATE => {
                self.fill(&mut buf[..1], start)?;
                match buf[0] {
                    0 => IsqRecord::StateEnd { is_target: false },
                    1 => IsqRecord::StateEnd { is_target: true },
                    byte => return Err(FormatError::BadFlag { offset: start, byte }),
                }
            }
            tag => return Err(FormatError::UnknownTag { offset: start, tag }),
        };
        let mut scratch = [0u8; BRANCH_BYTES];
        self.offset += rec.encode(&mut scratch) as u64;
        Ok(Some(rec))
    }
}

impl<R: Read> Iterator for IsqReader<R> {
    type Item = Result<IsqRecord, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

/// Decodes a complete in-memory stream.
pub fn decode_stream(bytes: &[u8]) -> Result<Vec<IsqRecord>, FormatError> {
    IsqReader::new(bytes).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn state_record_bytes() {
        assert_eq!(IsqRecord::StateEnd { is_target: true }.to_bytes(), vec![0x03, 0x01]);
        assert_eq!(IsqRecord::StateEnd { is_target: false }.to_bytes(), vec![0x03, 0x00]);
        assert_eq!(IsqRecord::TransitionEnd.to_bytes(), vec![0x02]);
    }

    #[test]
    fn branch_record_bytes() {
        let b = IsqRecord::Branch(BranchEntry {
            probability: 1.0,
            reward: 0.0,
            partition: 1,
            index: 0,
        });
        // IEEE-754 binary64 1.0 = 0x3FF0_0000_0000_0000, little-endian
        let expected: Vec<u8> = vec![
            0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xF0, 0x3F, 0, 0, 0, 0, 0, 0, 0, 0, 0x01,
            0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
        ];
        assert_eq!(b.to_bytes(), expected);
    }

    #[test]
    fn empty_stream() {
        assert_eq!(decode_stream(&[]).unwrap(), vec![]);
    }

    #[test]
    fn truncated_branch_reports_offset() {
        let mut bytes = IsqRecord::TransitionEnd.to_bytes();
        bytes.push(TAG_BRANCH);
        bytes.extend_from_slice(&[0u8; 9]);
        assert_eq!(
            decode_stream(&bytes),
            Err(FormatError::Truncated { offset: 1 })
        );
    }

    #[test]
    fn unknown_tag_and_bad_flag() {
        assert_eq!(
            decode_stream(&[0x02, 0x09]),
            Err(FormatError::UnknownTag { offset: 1, tag: 9 })
        );
        assert_eq!(
            decode_stream(&[0x03, 0x02]),
            Err(FormatError::BadFlag { offset: 0, byte: 2 })
        );
    }

    pub(crate) fn arb_record() -> impl Strategy<Value = IsqRecord> {
        prop_oneof![
            (any::<f64>(), any::<f64>(), any::<i32>(), any::<i32>()).prop_map(
                |(probability, reward, partition, index)| IsqRecord::Branch(BranchEntry {
                    probability,
                    reward,
                    partition,
                    index
                })
            ),
            any::<i32>().prop_map(|index| IsqRecord::LocalCertainBranch { index }),
            Just(IsqRecord::TransitionEnd),
            any::<bool>().prop_map(|is_target| IsqRecord::StateEnd { is_target }),
        ]
    }

    proptest! {
        #[test]
        fn encode_decode_identity(records in proptest::collection::vec(arb_record(), 0..200)) {
            let mut bytes = Vec::new();
            for r in &records {
                encode_record(r, &mut bytes).unwrap();
            }
            let decoded = decode_stream(&bytes).unwrap();
            // compare bitwise so NaN payloads count as equal
            prop_assert_eq!(decoded.len(), records.len());
            for (a, b) in decoded.iter().zip(&records) {
                prop_assert_eq!(a.to_bytes(), b.to_bytes());
            }
        }
    }
}
