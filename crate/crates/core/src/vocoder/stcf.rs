//! "STCF v1" feature files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "STCF" | u32 version | u32 frames | f32 hop_seconds | u32 sp_bins | u32 ap_bands
//! f32 f0[frames] | f32 sp[frames * sp_bins] | f32 ap[frames * ap_bands]
//! optional: "FEAT" | u32 domain_id | u32 columns | f32 data[frames * columns]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{VocoderFrames, AP_BANDS, HOP_SECONDS, SP_BINS, SP_FLOOR};
use crate::error::{Result, StcError};

pub const MAGIC: &[u8; 4] = b"STCF";
pub const VERSION: u32 = 1;
pub const FEATURE_MAGIC: &[u8; 4] = b"FEAT";

/// Network features stored after the vocoder arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureChunk {
    pub domain: u32,
    pub columns: u32,
    /// Row-major `frames x columns`.
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StcfFile {
    pub frames: VocoderFrames,
    pub features: Option<FeatureChunk>,
}

pub fn write(path: impl AsRef<Path>, file: &StcfFile) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    write_to(&mut w, file)?;
    w.flush()?;
    Ok(())
}

pub fn write_to(w: &mut impl Write, file: &StcfFile) -> Result<()> {
    let frames = &file.frames;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(frames.len() as u32).to_le_bytes())?;
    w.write_all(&(HOP_SECONDS as f32).to_le_bytes())?;
    w.write_all(&(SP_BINS as u32).to_le_bytes())?;
    w.write_all(&(AP_BANDS as u32).to_le_bytes())?;
    for v in frames.f0.iter().chain(&frames.sp).chain(&frames.ap) {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    if let Some(chunk) = &file.features {
        if chunk.data.len() != frames.len() * chunk.columns as usize {
            return Err(StcError::Argument(format!(
                "feature chunk has {} values for {} frames x {} columns",
                chunk.data.len(),
                frames.len(),
                chunk.columns
            )));
        }
        w.write_all(FEATURE_MAGIC)?;
        w.write_all(&chunk.domain.to_le_bytes())?;
        w.write_all(&chunk.columns.to_le_bytes())?;
        for v in &chunk.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<StcfFile> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path.as_ref())?).read_to_end(&mut bytes)?;
    parse(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(StcError::Format(format!(
                "STCF truncated at byte {} (needed {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| StcError::Format("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn parse(bytes: &[u8]) -> Result<StcfFile> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(StcError::Format("missing STCF magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(StcError::Unsupported(format!("STCF version {version}")));
    }
    let n = c.u32()? as usize;
    let hop = c.f32()?;
    let bins = c.u32()? as usize;
    let bands = c.u32()? as usize;
    if (hop as f64 - HOP_SECONDS).abs() > 1e-6 || bins != SP_BINS || bands != AP_BANDS {
        return Err(StcError::Unsupported(format!(
            "STCF geometry hop={hop} bins={bins} bands={bands}"
        )));
    }
    let f0 = c.f32s(n)?.into_iter().map(f64::from).collect();
    // f32 rounding can dip just below the floor.
    let sp = c
        .f32s(n * bins)?
        .into_iter()
        .map(|v| (v as f64).max(SP_FLOOR))
        .collect();
    let ap = c
        .f32s(n * bands)?
        .into_iter()
        .map(|v| (v as f64).clamp(0.0, 1.0))
        .collect();
    let frames = VocoderFrames::new(f0, sp, ap).map_err(|e| StcError::Format(e.to_string()))?;

    let features = if c.pos == bytes.len() {
        None
    } else {
        if c.take(4)? != FEATURE_MAGIC {
            return Err(StcError::Format("unknown trailing chunk".into()));
        }
        let domain = c.u32()?;
        let columns = c.u32()?;
        let data = c.f32s(n * columns as usize)?;
        Some(FeatureChunk {
            domain,
            columns,
            data,
        })
    };
    if c.pos != bytes.len() {
        return Err(StcError::Format("trailing bytes after STCF payload".into()));
    }
    Ok(StcfFile { frames, features })
}
