//! Framed block compression for sequential streams.
//!
//! A framed stream starts with a one-byte codec id followed by independent
//! frames, each `u32 compressed_len, u32 raw_len` (little-endian) and the
//! payload. A frame holds at most [`FRAME_SIZE`] raw bytes. Appending to an
//! existing stream just adds frames.

use std::io::{self, Read, Write};

use super::FormatError;

pub const FRAME_SIZE: usize = 256 * 1024;
const HEADER_BYTES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Codec {
    /// Frames carry the raw bytes.
    None = 0,
    /// LZ4 block format.
    Lz4 = 1,
}

impl Codec {
    pub fn from_id(id: u8) -> Option<Codec> {
        match id {
            0 => Some(Codec::None),
            1 => Some(Codec::Lz4),
            _ => None,
        }
    }
}

pub struct FrameWriter<W: Write> {
    inner: W,
    codec: Codec,
    buf: Vec<u8>,
    raw_bytes: u64,
}

impl<W: Write> FrameWriter<W> {
    /// Starts a new stream, writing the codec id.
    pub fn new(mut inner: W, codec: Codec) -> io::Result<Self> {
        inner.write_all(&[codec as u8])?;
        Ok(Self::appending(inner, codec))
    }

    /// Continues a stream whose codec id is already on disk.
    pub fn appending(inner: W, codec: Codec) -> Self {
        FrameWriter {
            inner,
            codec,
            buf: Vec::with_capacity(FRAME_SIZE),
            raw_bytes: 0,
        }
    }

    pub fn raw_bytes(&self) -> u64 {
        self.raw_bytes
    }

    fn emit(&mut self) -> io::Result<()> {
        if self.buf.is_empty() {
            return Ok(());
        }
        let compressed;
        let payload: &[u8] = match self.codec {
            Codec::None => &self.buf,
            Codec::Lz4 => {
                compressed = lz4_flex::block::compress(&self.buf);
                &compressed
            }
        };
        let mut header = [0u8; HEADER_BYTES];
        header[..4].copy_from_slice(&(payload.len() as u32).to_le_bytes());
        header[4..].copy_from_slice(&(self.buf.len() as u32).to_le_bytes());
        self.inner.write_all(&header)?;
        self.inner.write_all(payload)?;
        self.buf.clear();
        Ok(())
    }

    /// Flushes the last partial frame and returns the underlying writer.
    pub fn finish(mut self) -> io::Result<W> {
        self.emit()?;
        self.inner.flush()?;
        Ok(self.inner)
    }
}

impl<W: Write> Write for FrameWriter<W> {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        let room = FRAME_SIZE - self.buf.len();
        let n = room.min(data.len());
        self.buf.extend_from_slice(&data[..n]);
        self.raw_bytes += n as u64;
        if self.buf.len() == FRAME_SIZE {
            self.emit()?;
        }
        Ok(n)
    }

    /// Only flushes the inner writer; frames are cut at `FRAME_SIZE` or `finish`.
    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

pub struct FrameReader<R: Read> {
    inner: R,
    codec: Option<Codec>,
    started: bool,
    frame: Vec<u8>,
    pos: usize,
    offset: u64,
    payload: Vec<u8>,
}

fn corrupt(offset: u64, reason: &str) -> io::Error {
    io::Error::new(
        io::ErrorKind::InvalidData,
        FormatError::CorruptFrame {
            offset,
            reason: reason.to_string(),
        },
    )
}

/// Reads until `buf` is full or the source ends; returns the byte count.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(got)
}

impl<R: Read> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        FrameReader {
            inner,
            codec: None,
            started: false,
            frame: Vec::new(),
            pos: 0,
            offset: 0,
            payload: Vec::new(),
        }
    }

    /// Loads the next frame; false at a clean end of stream.
    fn next_frame(&mut self) -> io::Result<bool> {
        if !self.started {
            self.started = true;
            let mut id = [0u8; 1];
            if read_full(&mut self.inner, &mut id)? == 0 {
                return Ok(false);
            }
            self.offset = 1;
            self.codec =
                Some(Codec::from_id(id[0]).ok_or_else(|| corrupt(0, "unknown codec id"))?);
        }
        let Some(codec) = self.codec else {
            return Ok(false);
        };
        let start = self.offset;
        let mut header = [0u8; HEADER_BYTES];
        match read_full(&mut self.inner, &mut header)? {
            0 => return Ok(false),
            HEADER_BYTES => {}
            _ => return Err(corrupt(start, "truncated frame header")),
        }
        let clen = u32::from_le_bytes(header[..4].try_into().unwrap()) as usize;
        let rlen = u32::from_le_bytes(header[4..].try_into().unwrap()) as usize;
        if rlen == 0 || rlen > FRAME_SIZE {
            return Err(corrupt(start, "raw length out of range"));
        }
        let max_clen = match codec {
            Codec::None => rlen,
            Codec::Lz4 => lz4_flex::block::get_maximum_output_size(rlen),
        };
        if clen > max_clen || (codec == Codec::None && clen != rlen) {
            return Err(corrupt(start, "compressed length out of range"));
        }
        self.payload.resize(clen, 0);
        if read_full(&mut self.inner, &mut self.payload)? != clen {
            return Err(corrupt(start, "truncated frame payload"));
        }
        self.offset += (HEADER_BYTES + clen) as u64;
        match codec {
            Codec::None => std::mem::swap(&mut self.frame, &mut self.payload),
            Codec::Lz4 => {
                self.frame.resize(rlen, 0);
                let n = lz4_flex::block::decompress_into(&self.payload, &mut self.frame)
                    .map_err(|_| corrupt(start, "payload does not decompress"))?;
                if n != rlen {
                    return Err(corrupt(start, "payload size mismatch"));
                }
            }
        }
        self.pos = 0;
        Ok(true)
    }
}

impl<R: Read> Read for FrameReader<R> {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        if out.is_empty() {
            return Ok(0);
        }
        while self.pos == self.frame.len() {
            if !self.next_frame()? {
                return Ok(0);
            }
        }
        let n = out.len().min(self.frame.len() - self.pos);
        out[..n].copy_from_slice(&self.frame[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

/// Compresses a whole buffer into a framed stream.
pub fn frame_compress(raw: &[u8], codec: Codec) -> Vec<u8> {
    let mut w = FrameWriter::new(Vec::new(), codec).expect("in-memory write");
    w.write_all(raw).expect("in-memory write");
    w.finish().expect("in-memory write")
}

pub fn frame_decompress(framed: &[u8]) -> Result<Vec<u8>, FormatError> {
    let mut out = Vec::new();
    FrameReader::new(framed)
        .read_to_end(&mut out)
        .map_err(FormatError::from_io)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeros_compress_well() {
        let raw = vec![0u8; 1 << 20];
        let z = frame_compress(&raw, Codec::Lz4);
        assert!(z.len() * 20 < raw.len(), "{} bytes", z.len());
        assert_eq!(frame_decompress(&z).unwrap(), raw);
    }

    #[test]
    fn empty_streams() {
        assert_eq!(frame_decompress(&[]).unwrap(), Vec::<u8>::new());
        assert_eq!(frame_compress(&[], Codec::Lz4), vec![1]);
        assert_eq!(frame_decompress(&[1]).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn appended_frames_concatenate() {
        let mut w = FrameWriter::new(Vec::new(), Codec::Lz4).unwrap();
        w.write_all(b"hello ").unwrap();
        let buf = w.finish().unwrap();
        let mut w = FrameWriter::appending(buf, Codec::Lz4);
        w.write_all(b"world").unwrap();
        let buf = w.finish().unwrap();
        assert_eq!(frame_decompress(&buf).unwrap(), b"hello world");
    }

    #[test]
    fn corrupt_headers_detected() {
        let mut z = frame_compress(&[7u8; 1000], Codec::Lz4);
        assert!(frame_decompress(&z[..z.len() - 1]).is_err());
        assert!(frame_decompress(&z[..5]).is_err());
        z[5] = 0xff; // raw_len byte
        assert!(matches!(
            frame_decompress(&z),
            Err(FormatError::CorruptFrame { .. })
        ));
        assert!(frame_decompress(&[9]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(raw in proptest::collection::vec(any::<u8>(), 0..(FRAME_SIZE * 2 + 17)),
                      lz4 in any::<bool>()) {
            let codec = if lz4 { Codec::Lz4 } else { Codec::None };
            let z = frame_compress(&raw, codec);
            prop_assert_eq!(frame_decompress(&z).unwrap(), raw);
        }
    }
}
