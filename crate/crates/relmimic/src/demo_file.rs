//! Binary demonstration files.
//!
//! Layout (little endian): magic `RMDEMO01`; `u32` episode count; `u32`
//! resolution; per episode a `u32` frame count followed by
//! `count · resolution²` grayscale bytes; a trailing CRC-32 of every byte
//! between the magic and the checksum. Frames are stored unstacked.

use std::path::Path;

use relmimic_core::env::{DemonstrationSet, Frame};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RMDEMO01";

pub fn encode(demos: &DemonstrationSet) -> Vec<u8> {
    let r = demos.resolution();
    let mut out = Vec::from(&MAGIC[..]);
    out.extend((demos.len() as u32).to_le_bytes());
    out.extend((r as u32).to_le_bytes());
    for ep in demos.episodes() {
        out.extend((ep.len() as u32).to_le_bytes());
        for f in ep {
            out.extend_from_slice(f.pixels());
        }
    }
    let crc = crc32fast::hash(&out[MAGIC.len()..]);
    out.extend(crc.to_le_bytes());
    out
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(
                self.path,
                format!("truncated while reading {what} at byte {}", self.pos),
            )),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("four bytes")))
    }
}

/// Decode and verify a file body. `path` is only used in diagnostics.
pub fn decode(bytes: &[u8], path: &Path) -> Result<DemonstrationSet> {
    if bytes.len() < MAGIC.len() + 12 {
        return Err(Error::format(path, format!("file too short ({} bytes) for a demonstration header", bytes.len())));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::format(
            path,
            format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(&bytes[..MAGIC.len()]), "RMDEMO01"),
        ));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("four bytes"));
    let computed = crc32fast::hash(&body[MAGIC.len()..]);
    if stored != computed {
        return Err(Error::format(
            path,
            format!("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}"),
        ));
    }
    let mut rd = Reader {
        path,
        bytes: body,
        pos: MAGIC.len(),
    };
    let count = rd.u32("episode count")? as usize;
    let res = rd.u32("resolution")? as usize;
    if res == 0 {
        return Err(Error::format(path, "resolution is zero"));
    }
    let mut episodes = Vec::with_capacity(count.min(1 << 16));
    for e in 0..count {
        let len = rd.u32("episode length")? as usize;
        let mut frames = Vec::with_capacity(len.min(1 << 16));
        for _ in 0..len {
            let px = rd.take(res * res, &format!("episode {e}"))?;
            frames.push(Frame::new(res, px.to_vec()).expect("frame size matches resolution"));
        }
        episodes.push(frames);
    }
    if rd.pos != body.len() {
        return Err(Error::format(path, format!("{} trailing bytes after the last episode", body.len() - rd.pos)));
    }
    DemonstrationSet::new(res, episodes).map_err(|e| Error::format(path, e.to_string()))
}

pub fn save(demos: &DemonstrationSet, path: &Path) -> Result<()> {
    std::fs::write(path, encode(demos)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<DemonstrationSet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Load and check the resolution against the run configuration.
pub fn load_expecting(path: &Path, resolution: usize) -> Result<DemonstrationSet> {
    let d = load(path)?;
    if d.resolution() != resolution {
        return Err(Error::Resolution {
            expected: resolution,
            found: d.resolution(),
        });
    }
    Ok(d)
}
