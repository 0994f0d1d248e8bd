//! Per-partition file management with an instrumented, forward-only file
//! layer.
//!
//! Files are named `<workdir>/p<id>.<kind>`, with a `.z` suffix when framed
//! compression is on. Uncompressed files are raw record streams; compressed
//! ones carry the frame codec header. Every read and write goes through
//! [`TrackedFile`], which counts bytes and refuses to seek backwards.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::frame::{Codec, FrameReader, FrameWriter};
use super::FormatError;
use crate::error::{Error, Result};
use crate::semantics::{ExplicitState, PartitionId};

const BUF_SIZE: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FileKind {
    Matrix,
    States,
    Queue,
    Updates,
    Values,
    /// Per-state boolean vector used by the graph precomputations.
    Bits(&'static str),
}

impl FileKind {
    pub fn name(self) -> &'static str {
        match self {
            FileKind::Matrix => "matrix",
            FileKind::States => "states",
            FileKind::Queue => "queue",
            FileKind::Updates => "updates",
            FileKind::Values => "values",
            FileKind::Bits(name) => name,
        }
    }
}

#[derive(Debug, Default)]
pub struct IoStats {
    bytes_read: AtomicU64,
    bytes_written: AtomicU64,
    opens: AtomicU64,
    backward_seeks: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IoSnapshot {
    pub bytes_read: u64,
    pub bytes_written: u64,
    pub opens: u64,
    pub backward_seeks: u64,
}

impl IoStats {
    pub fn snapshot(&self) -> IoSnapshot {
        IoSnapshot {
            bytes_read: self.bytes_read.load(Ordering::Relaxed),
            bytes_written: self.bytes_written.load(Ordering::Relaxed),
            opens: self.opens.load(Ordering::Relaxed),
            backward_seeks: self.backward_seeks.load(Ordering::Relaxed),
        }
    }
}

/// A file that only moves forward.
pub struct TrackedFile {
    file: File,
    pos: u64,
    stats: Arc<IoStats>,
}

impl TrackedFile {
    fn new(file: File, pos: u64, stats: Arc<IoStats>) -> Self {
        stats.opens.fetch_add(1, Ordering::Relaxed);
        TrackedFile { file, pos, stats }
    }
}

impl Read for TrackedFile {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.file.read(buf)?;
        self.pos += n as u64;
        self.stats.bytes_read.fetch_add(n as u64, Ordering::Relaxed);
        Ok(n)
    }
}

impl Write for TrackedFile {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.file.write(buf)?;
        self.pos += n as u64;
        self.stats.bytes_written.fetch_add(n as u64, Ordering::Relaxed);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.file.flush()
    }
}

impl Seek for TrackedFile {
    fn seek(&mut self, to: SeekFrom) -> io::Result<u64> {
        let target = match to {
            SeekFrom::Start(n) => Some(n),
            SeekFrom::Current(d) => self.pos.checked_add_signed(d),
            SeekFrom::End(d) => self.file.metadata()?.len().checked_add_signed(d),
        };
        match target {
            Some(t) if t >= self.pos => {
                self.pos = self.file.seek(SeekFrom::Start(t))?;
                Ok(self.pos)
            }
            _ => {
                self.stats.backward_seeks.fetch_add(1, Ordering::Relaxed);
                Err(io::Error::new(
                    io::ErrorKind::Unsupported,
                    "backward seek on a sequential file",
                ))
            }
        }
    }
}

enum ReaderInner {
    Empty,
    Plain(BufReader<TrackedFile>),
    Framed(FrameReader<BufReader<TrackedFile>>),
}

/// Sequential reader over a raw or framed file.
pub struct SeqReader {
    inner: ReaderInner,
    path: PathBuf,
}

impl SeqReader {
    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Reads the whole remaining stream as fixed-width records.
    pub fn read_records<T>(
        mut self,
        width: usize,
        decode: impl Fn(&[u8]) -> T,
    ) -> Result<Vec<T>> {
        let mut out = Vec::new();
        self.for_each_record(width, |b| {
            out.push(decode(b));
            Ok(())
        })?;
        Ok(out)
    }

    /// Calls `f` for each fixed-width record, in order.
    pub fn for_each_record(
        &mut self,
        width: usize,
        mut f: impl FnMut(&[u8]) -> Result<()>,
    ) -> Result<()> {
        let mut buf = vec![0u8; width * 4096];
        let mut filled = 0usize;
        let mut total = 0u64;
        loop {
            let n = match self.read(&mut buf[filled..]) {
                Ok(n) => n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(Error::io(&self.path, e)),
            };
            if n == 0 {
                break;
            }
            filled += n;
            total += n as u64;
            let whole = filled / width * width;
            for rec in buf[..whole].chunks_exact(width) {
                f(rec)?;
            }
            buf.copy_within(whole..filled, 0);
            filled -= whole;
        }
        if filled != 0 {
            return Err(Error::format(
                &self.path,
                FormatError::RecordWidth { len: total, width },
            ));
        }
        Ok(())
    }
}

impl Read for SeqReader {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        match &mut self.inner {
            ReaderInner::Empty => Ok(0),
            ReaderInner::Plain(r) => r.read(buf),
            ReaderInner::Framed(r) => r.read(buf),
        }
    }
}

enum WriterInner {
    Plain(BufWriter<TrackedFile>),
    Framed(FrameWriter<BufWriter<TrackedFile>>),
}

/// Sequential writer; call [`SeqWriter::finish`] to flush the last frame.
pub struct SeqWriter {
    inner: Option<WriterInner>,
    path: PathBuf,
    raw_bytes: u64,
}

impl SeqWriter {
    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Uncompressed bytes written through this writer.
    pub fn raw_bytes(&self) -> u64 {
        self.raw_bytes
    }

    fn finish_inner(&mut self) -> io::Result<()> {
        match self.inner.take() {
            Some(WriterInner::Plain(mut w)) => w.flush(),
            Some(WriterInner::Framed(w)) => w.finish()?.flush(),
            None => Ok(()),
        }
    }

    /// Flushes everything; returns the uncompressed byte count.
    pub fn finish(mut self) -> Result<u64> {
        self.finish_inner()
            .map_err(|e| Error::io(&self.path, e))?;
        Ok(self.raw_bytes)
    }

    pub fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.write_all(bytes).map_err(|e| Error::io(&self.path, e))
    }

    pub fn put_u32(&mut self, v: u32) -> Result<()> {
        self.put(&v.to_le_bytes())
    }

    pub fn put_f64(&mut self, v: f64) -> Result<()> {
        self.put(&v.to_le_bytes())
    }

    pub fn put_state(&mut self, s: &ExplicitState) -> Result<()> {
        let mut buf = Vec::with_capacity(s.values().len() * 4);
        s.encode_into(&mut buf);
        self.put(&buf)
    }
}

impl Write for SeqWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = match self.inner.as_mut() {
            Some(WriterInner::Plain(w)) => w.write(buf)?,
            Some(WriterInner::Framed(w)) => w.write(buf)?,
            None => return Err(io::Error::other("writer already finished")),
        };
        self.raw_bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        match self.inner.as_mut() {
            Some(WriterInner::Plain(w)) => w.flush(),
            Some(WriterInner::Framed(w)) => w.flush(),
            None => Ok(()),
        }
    }
}

impl Drop for SeqWriter {
    fn drop(&mut self) {
        // errors surface only through an explicit finish
        let _ = self.finish_inner();
    }
}

/// The set of partition files in one working directory.
#[derive(Clone)]
pub struct PartitionStore {
    dir: PathBuf,
    compress: bool,
    stats: Arc<IoStats>,
}

impl PartitionStore {
    pub fn new(dir: impl Into<PathBuf>, compress: bool) -> Self {
        PartitionStore {
            dir: dir.into(),
            compress,
            stats: Arc::new(IoStats::default()),
        }
    }

    /// Opens an existing working directory, detecting whether it was
    /// written with compression.
    pub fn detect(dir: impl Into<PathBuf>) -> Self {
        let dir = dir.into();
        let compress = dir.join("p1.matrix.z").exists();
        PartitionStore::new(dir, compress)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn compressed(&self) -> bool {
        self.compress
    }

    pub fn stats(&self) -> &Arc<IoStats> {
        &self.stats
    }

    fn codec(&self) -> Codec {
        if self.compress {
            Codec::Lz4
        } else {
            Codec::None
        }
    }

    pub fn path(&self, id: PartitionId, kind: FileKind) -> PathBuf {
        let suffix = if self.compress { ".z" } else { "" };
        self.dir.join(format!("p{}.{}{}", id.get(), kind.name(), suffix))
    }

    fn side_path(&self, id: PartitionId, kind: FileKind, tag: &str) -> PathBuf {
        let mut p = self.path(id, kind).into_os_string();
        p.push(tag);
        PathBuf::from(p)
    }

    fn reader_at(&self, path: PathBuf) -> Result<Option<SeqReader>> {
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let buf = BufReader::with_capacity(BUF_SIZE, TrackedFile::new(file, 0, self.stats.clone()));
        let inner = if self.compress {
            ReaderInner::Framed(FrameReader::new(buf))
        } else {
            ReaderInner::Plain(buf)
        };
        Ok(Some(SeqReader { inner, path }))
    }

    /// Opens a file for one sequential read; `None` if it does not exist.
    pub fn reader(&self, id: PartitionId, kind: FileKind) -> Result<Option<SeqReader>> {
        self.reader_at(self.path(id, kind))
    }

    /// Like [`PartitionStore::reader`], with a missing file read as empty.
    pub fn reader_or_empty(&self, id: PartitionId, kind: FileKind) -> Result<SeqReader> {
        let path = self.path(id, kind);
        match self.reader_at(path.clone())? {
            Some(r) => Ok(r),
            None => Ok(SeqReader {
                inner: ReaderInner::Empty,
                path,
            }),
        }
    }

    fn writer_at(&self, path: PathBuf, append: bool) -> Result<SeqWriter> {
        let mut opts = OpenOptions::new();
        opts.create(true);
        if append {
            opts.append(true);
        } else {
            opts.write(true).truncate(true);
        }
        let file = opts.open(&path).map_err(|e| Error::io(&path, e))?;
        let len = if append {
            file.metadata().map_err(|e| Error::io(&path, e))?.len()
        } else {
            0
        };
        let buf = BufWriter::with_capacity(BUF_SIZE, TrackedFile::new(file, len, self.stats.clone()));
        let inner = if self.compress {
            let w = if len == 0 {
                FrameWriter::new(buf, self.codec()).map_err(|e| Error::io(&path, e))?
            } else {
                FrameWriter::appending(buf, self.codec())
            };
            WriterInner::Framed(w)
        } else {
            WriterInner::Plain(buf)
        };
        Ok(SeqWriter {
            inner: Some(inner),
            path,
            raw_bytes: 0,
        })
    }

    /// Creates or truncates a file.
    pub fn writer(&self, id: PartitionId, kind: FileKind) -> Result<SeqWriter> {
        self.writer_at(self.path(id, kind), false)
    }

    /// Opens a file for appending, creating it if needed.
    pub fn appender(&self, id: PartitionId, kind: FileKind) -> Result<SeqWriter> {
        self.writer_at(self.path(id, kind), true)
    }

    /// Writes a whole file under a temporary name and renames it into place.
    pub fn write_atomic(
        &self,
        id: PartitionId,
        kind: FileKind,
        fill: impl FnOnce(&mut SeqWriter) -> Result<()>,
    ) -> Result<u64> {
        let tmp = self.side_path(id, kind, ".tmp");
        let mut w = self.writer_at(tmp.clone(), false)?;
        fill(&mut w)?;
        let raw = w.finish()?;
        let dest = self.path(id, kind);
        fs::rename(&tmp, &dest).map_err(|e| Error::io(&dest, e))?;
        Ok(raw)
    }

    /// Moves a file aside and returns a reader over the moved copy, which is
    /// deleted by [`PartitionStore::discard_old`].
    pub fn take_old(&self, id: PartitionId, kind: FileKind) -> Result<Option<SeqReader>> {
        let src = self.path(id, kind);
        let old = self.side_path(id, kind, ".old");
        match fs::rename(&src, &old) {
            Ok(()) => self.reader_at(old),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(&src, e)),
        }
    }

    pub fn discard_old(&self, id: PartitionId, kind: FileKind) -> Result<()> {
        let old = self.side_path(id, kind, ".old");
        match fs::remove_file(&old) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(Error::io(&old, e)),
        }
    }

    pub fn remove(&self, id: PartitionId, kind: FileKind) -> Result<()> {
        let path = self.path(id, kind);
        match fs::remove_file(&path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    /// On-disk size, 0 for a missing file.
    pub fn disk_size(&self, id: PartitionId, kind: FileKind) -> Result<u64> {
        let path = self.path(id, kind);
        match fs::metadata(&path) {
            Ok(m) => Ok(m.len()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(0),
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    pub fn read_u32s(&self, id: PartitionId, kind: FileKind) -> Result<Vec<u32>> {
        self.reader_or_empty(id, kind)?
            .read_records(4, |b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn read_f64s(&self, id: PartitionId, kind: FileKind) -> Result<Vec<f64>> {
        self.reader_or_empty(id, kind)?
            .read_records(8, |b| f64::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn read_bits(&self, id: PartitionId, kind: FileKind) -> Result<Vec<bool>> {
        self.reader_or_empty(id, kind)?.read_records(1, |b| b[0] != 0)
    }

    /// Reads explicit states of `vars` variables each.
    pub fn read_states(&self, id: PartitionId, kind: FileKind, vars: usize) -> Result<Vec<ExplicitState>> {
        if vars == 0 {
            // zero-width records carry no count; only the meta table knows it
            return Ok(Vec::new());
        }
        self.reader_or_empty(id, kind)?
            .read_records(ExplicitState::width(vars), ExplicitState::decode)
    }

    pub fn write_f64s(&self, id: PartitionId, kind: FileKind, values: &[f64]) -> Result<u64> {
        self.write_atomic(id, kind, |w| {
            let mut buf = Vec::with_capacity(values.len() * 8);
            for v in values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.put(&buf)
        })
    }

    pub fn write_bits(&self, id: PartitionId, kind: FileKind, bits: &[bool]) -> Result<u64> {
        self.write_atomic(id, kind, |w| {
            let buf: Vec<u8> = bits.iter().map(|&b| b as u8).collect();
            w.put(&buf)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    const P: PartitionId = PartitionId(1);

    fn stores() -> Vec<(tempfile::TempDir, PartitionStore)> {
        [false, true]
            .into_iter()
            .map(|c| {
                let d = tempfile::tempdir().unwrap();
                let s = PartitionStore::new(d.path(), c);
                (d, s)
            })
            .collect()
    }

    #[test]
    fn values_file_bytes() {
        let (_d, s) = stores().remove(0);
        s.write_f64s(P, FileKind::Values, &[0.0, 0.0, 1.0]).unwrap();
        let bytes = fs::read(s.path(P, FileKind::Values)).unwrap();
        let mut expected = Vec::new();
        for v in [0.0f64, 0.0, 1.0] {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(bytes, expected);
    }

    #[test]
    fn updates_file_bytes() {
        let (_d, s) = stores().remove(0);
        let mut w = s.writer(P, FileKind::Updates).unwrap();
        w.put_u32(4).unwrap();
        w.put_u32(7).unwrap();
        w.finish().unwrap();
        assert_eq!(
            fs::read(s.path(P, FileKind::Updates)).unwrap(),
            vec![4, 0, 0, 0, 7, 0, 0, 0]
        );
        assert_eq!(s.read_u32s(P, FileKind::Updates).unwrap(), vec![4, 7]);
    }

    #[test]
    fn queue_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let states: Vec<_> = (0..1000)
            .map(|_| ExplicitState::new((0..3).map(|_| rng.gen_range(-5..50)).collect::<Vec<_>>()))
            .collect();
        for (_d, s) in stores() {
            let mut w = s.appender(P, FileKind::Queue).unwrap();
            for st in &states[..400] {
                w.put_state(st).unwrap();
            }
            w.finish().unwrap();
            let mut w = s.appender(P, FileKind::Queue).unwrap();
            for st in &states[400..] {
                w.put_state(st).unwrap();
            }
            w.finish().unwrap();
            assert_eq!(s.read_states(P, FileKind::Queue, 3).unwrap(), states);
        }
    }

    #[test]
    fn record_width_mismatch() {
        let (_d, s) = stores().remove(0);
        fs::write(s.path(P, FileKind::Updates), [1u8, 2, 3, 4, 5]).unwrap();
        assert!(matches!(
            s.read_u32s(P, FileKind::Updates),
            Err(Error::Format {
                source: FormatError::RecordWidth { len: 5, width: 4 },
                ..
            })
        ));
    }

    #[test]
    fn missing_files() {
        for (_d, s) in stores() {
            assert!(s.reader(P, FileKind::Matrix).unwrap().is_none());
            assert!(s.read_f64s(P, FileKind::Values).unwrap().is_empty());
            assert_eq!(s.disk_size(P, FileKind::Values).unwrap(), 0);
        }
    }

    #[test]
    fn take_old_moves_file() {
        for (_d, s) in stores() {
            s.write_bits(P, FileKind::Bits("reach"), &[true, false]).unwrap();
            let old = s.take_old(P, FileKind::Bits("reach")).unwrap().unwrap();
            assert!(!s.path(P, FileKind::Bits("reach")).exists());
            assert_eq!(old.read_records(1, |b| b[0]).unwrap(), vec![1, 0]);
            s.discard_old(P, FileKind::Bits("reach")).unwrap();
        }
    }

    #[test]
    fn backward_seek_rejected_and_counted() {
        let d = tempfile::tempdir().unwrap();
        let stats = Arc::new(IoStats::default());
        let path = d.path().join("f");
        fs::write(&path, [0u8; 16]).unwrap();
        let mut f = TrackedFile::new(File::open(&path).unwrap(), 0, stats.clone());
        let mut buf = [0u8; 8];
        f.read_exact(&mut buf).unwrap();
        f.seek(SeekFrom::Current(4)).unwrap();
        assert!(f.seek(SeekFrom::Start(0)).is_err());
        let snap = stats.snapshot();
        assert_eq!((snap.backward_seeks, snap.bytes_read, snap.opens), (1, 8, 1));
    }
}
