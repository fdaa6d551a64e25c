use std::fs;
use std::path::Path;

use crate::binio::{put_f32, put_u32, to_u32, Reader};
use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &str = "TNS1";
pub const TENSOR_VERSION: u32 = 1;
const WHAT: &str = "tensor file";

/// Labels carried by each tensor record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RecordMeta {
    pub category: u32,
    pub speaker: u32,
    pub token_id: u32,
}

/// Fixed-width labeled f32 records.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    dim: usize,
    meta: Vec<RecordMeta>,
    data: Vec<f32>,
}

impl TensorFile {
    pub fn new(dim: usize) -> Self {
        Self { dim, meta: Vec::new(), data: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    /// Append a record; returns its index.
    pub fn push(&mut self, meta: RecordMeta, values: &[f64]) -> Result<usize> {
        if values.len() != self.dim {
            return Err(Error::DimMismatch { expected: self.dim, got: values.len() });
        }
        self.meta.push(meta);
        self.data.extend(values.iter().map(|&v| v as f32));
        Ok(self.meta.len() - 1)
    }

    pub fn meta(&self, i: usize) -> RecordMeta {
        self.meta[i]
    }

    pub fn values(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Records `start..start + n` as f64, row-major.
    pub fn rows_f64(&self, start: usize, n: usize) -> Result<Vec<f64>> {
        let end = start.checked_add(n).filter(|&e| e <= self.len()).ok_or_else(|| {
            Error::malformed(WHAT, format!("rows {start}..{} out of range (len {})", start + n, self.len()))
        })?;
        Ok(self.data[start * self.dim..end * self.dim].iter().map(|&v| f64::from(v)).collect())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(16 + self.len() * (12 + 4 * self.dim));
        out.extend_from_slice(TENSOR_MAGIC.as_bytes());
        put_u32(&mut out, TENSOR_VERSION);
        put_u32(&mut out, to_u32(self.len(), WHAT)?);
        put_u32(&mut out, to_u32(self.dim, WHAT)?);
        for (i, m) in self.meta.iter().enumerate() {
            put_u32(&mut out, m.category);
            put_u32(&mut out, m.speaker);
            put_u32(&mut out, m.token_id);
            for &v in self.values(i) {
                put_f32(&mut out, v);
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, WHAT);
        r.magic(TENSOR_MAGIC)?;
        let version = r.u32()?;
        if version != TENSOR_VERSION {
            return Err(Error::UnsupportedVersion { what: WHAT, version });
        }
        let count = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let record = 12 + 4 * dim;
        let payload = count.checked_mul(record).ok_or_else(|| Error::malformed(WHAT, "size overflow"))?;
        r.expect_remaining(payload)?;
        let mut meta = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        for _ in 0..count {
            meta.push(RecordMeta { category: r.u32()?, speaker: r.u32()?, token_id: r.u32()? });
            data.extend(r.f32s(dim)?);
        }
        r.finish()?;
        Ok(Self { dim, meta, data })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorFile {
        let mut t = TensorFile::new(3);
        t.push(RecordMeta { category: 1, speaker: 2, token_id: 3 }, &[0.5, -1.25, 3.0]).unwrap();
        t.push(RecordMeta { category: 4, speaker: 5, token_id: 6 }, &[1e-3, 0.0, -7.5]).unwrap();
        t
    }

    #[test]
    fn round_trip() {
        let t = sample();
        let bytes = t.to_bytes().unwrap();
        assert_eq!(bytes.len(), 16 + 2 * (12 + 12));
        let back = TensorFile::from_bytes(&bytes).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.rows_f64(1, 1).unwrap(), vec![f64::from(1e-3f32), 0.0, -7.5]);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = sample().to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[1] = b'X';
        assert!(matches!(TensorFile::from_bytes(&bad), Err(Error::BadMagic { .. })));
        assert!(matches!(TensorFile::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Truncated { .. })));
        let mut long = bytes.clone();
        long.extend_from_slice(&[0, 0]);
        assert!(matches!(TensorFile::from_bytes(&long), Err(Error::TrailingBytes { extra: 2, .. })));
        assert!(matches!(TensorFile::from_bytes(&bytes[..6]), Err(Error::Truncated { .. })));
    }

    #[test]
    fn wrong_width_is_rejected() {
        let mut t = TensorFile::new(2);
        assert!(matches!(
            t.push(RecordMeta { category: 0, speaker: 0, token_id: 0 }, &[1.0]),
            Err(Error::DimMismatch { .. })
        ));
    }
}
