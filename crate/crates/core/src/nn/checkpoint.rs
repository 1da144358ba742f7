//! "STCK v1" parameter files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "STCK" | u32 version | u32 meta_len | meta (UTF-8 JSON) | u32 count
//! per parameter:
//!   u32 name_len | name | u32 rank | u32 dims[rank] | f32 value[numel]
//!   u64 adam_t | f32 adam_m[numel] | f32 adam_v[numel]
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::param::Parameter;
use super::tensor::Tensor;
use crate::error::{Result, StcError};

pub const MAGIC: &[u8; 4] = b"STCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct StckFile {
    /// Free-form metadata (training state, config, normalization).
    pub meta: serde_json::Value,
    pub params: Vec<Parameter<f32>>,
}

pub fn write(path: impl AsRef<Path>, file: &StckFile) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    write_to(&mut w, file)?;
    w.flush()?;
    Ok(())
}

fn put_f32s(w: &mut impl Write, v: &[f32]) -> Result<()> {
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_to(w: &mut impl Write, file: &StckFile) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let meta = serde_json::to_vec(&file.meta)?;
    w.write_all(&(meta.len() as u32).to_le_bytes())?;
    w.write_all(&meta)?;
    w.write_all(&(file.params.len() as u32).to_le_bytes())?;
    for p in &file.params {
        w.write_all(&(p.name.len() as u32).to_le_bytes())?;
        w.write_all(p.name.as_bytes())?;
        let shape = p.value().shape();
        w.write_all(&(shape.len() as u32).to_le_bytes())?;
        for &d in shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        put_f32s(w, p.value().data())?;
        w.write_all(&p.t.to_le_bytes())?;
        put_f32s(w, &p.m)?;
        put_f32s(w, &p.v)?;
    }
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<StckFile> {
    parse(&std::fs::read(path.as_ref())?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| StcError::Format(format!("STCK truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| StcError::Format("STCK size overflow".into()))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn parse(bytes: &[u8]) -> Result<StckFile> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(StcError::Format("missing STCK magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(StcError::Unsupported(format!("STCK version {version}")));
    }
    let meta_len = r.u32()? as usize;
    let meta = serde_json::from_slice(r.take(meta_len)?)?;
    let count = r.u32()? as usize;
    let mut params = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| StcError::Format("parameter name is not UTF-8".into()))?;
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(StcError::Format(format!("parameter {name} has rank {rank}")));
        }
        let shape: Vec<usize> = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_>>()?;
        let numel = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| StcError::Format("STCK size overflow".into()))?;
        let value = Tensor::new(shape, r.f32s(numel)?)?;
        let t = r.u64()?;
        let m = r.f32s(numel)?;
        let v = r.f32s(numel)?;
        params.push(Parameter::with_state(name, value, m, v, t)?);
    }
    if r.pos != bytes.len() {
        return Err(StcError::Format("trailing bytes after STCK payload".into()));
    }
    Ok(StckFile { meta, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Adam;

    #[test]
    fn round_trip_keeps_values_and_adam_state_bit_exact() {
        let mut params = vec![
            Parameter::new("g.w", Tensor::<f32>::from_f64(&[2, 1, 1, 3], &[0.1, -0.2, 0.3, 1e-7, 5.0, -1.0]).unwrap()),
            Parameter::new("g.b", Tensor::<f32>::zeros(&[2])),
        ];
        let grads = vec![
            Some(Tensor::from_f64(&[2, 1, 1, 3], &[1.0, 2.0, -3.0, 0.5, 0.25, -0.1]).unwrap()),
            None,
        ];
        Adam::default().step(&mut params, &grads, 1e-3).unwrap();
        let file = StckFile {
            meta: serde_json::json!({"iteration": 7}),
            params,
        };
        let mut buf = Vec::new();
        write_to(&mut buf, &file).unwrap();
        assert_eq!(&buf[..4], b"STCK");
        assert_eq!(parse(&buf).unwrap(), file);
    }

    #[test]
    fn corrupt_files_are_format_errors() {
        let file = StckFile {
            meta: serde_json::json!({}),
            params: vec![Parameter::new("x", Tensor::<f32>::zeros(&[3]))],
        };
        let mut buf = Vec::new();
        write_to(&mut buf, &file).unwrap();
        assert!(matches!(parse(&buf[..buf.len() - 2]), Err(StcError::Format(_))));
        assert!(matches!(parse(b"NOPE"), Err(StcError::Format(_))));
        buf[4] = 2;
        assert!(matches!(parse(&buf), Err(StcError::Unsupported(_))));
    }
}
