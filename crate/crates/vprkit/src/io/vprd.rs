//! The "VPRD" descriptor interchange format.
//!
//! Layout, all integers little-endian:
//! magic `VPRD` | u32 version (=1) | u32 n | u32 d | u8 has_labels |
//! n*d float32 row-major | optional n strings, each u32 length + UTF-8 bytes.

use std::path::Path;

use crate::data::{DescriptorMatrix, MetricTag, SimilarityMatrix};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"VPRD";
const VERSION: u32 = 1;

fn matrix_to_bytes(n: usize, d: usize, values: &[f64], labels: Option<&[String]>) -> Vec<u8> {
    let mut out = Vec::with_capacity(17 + n * d * 4);
    out.extend_from_slice(MAGIC);
    out.extend(VERSION.to_le_bytes());
    out.extend((n as u32).to_le_bytes());
    out.extend((d as u32).to_le_bytes());
    out.push(labels.is_some() as u8);
    for v in values {
        out.extend((*v as f32).to_le_bytes());
    }
    if let Some(labels) = labels {
        for label in labels {
            out.extend((label.len() as u32).to_le_bytes());
            out.extend(label.as_bytes());
        }
    }
    out
}

pub fn descriptors_to_bytes(m: &DescriptorMatrix) -> Vec<u8> {
    matrix_to_bytes(m.n(), m.d(), m.values(), m.labels())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(Error::format(
                self.bytes.len(),
                format!("truncated file while reading {what}"),
            ));
        }
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

type RawMatrix = (usize, usize, Vec<f64>, Option<Vec<String>>);

fn matrix_from_bytes(bytes: &[u8]) -> Result<RawMatrix> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(0, "bad magic, expected 'VPRD'"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let n = r.u32("row count")? as usize;
    let d = r.u32("dimension")? as usize;
    let has_labels = r.take(1, "label flag")?[0];
    if has_labels > 1 {
        return Err(Error::format(16, "label flag must be 0 or 1"));
    }

    let payload = r.take(n * d * 4, "float payload")?;
    let mut values = Vec::with_capacity(n * d);
    for chunk in payload.chunks_exact(4) {
        values.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64);
    }

    let labels = if has_labels == 1 {
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let at = r.pos;
            let len = r.u32("label length")? as usize;
            let raw = r.take(len, "label bytes")?;
            let s = std::str::from_utf8(raw)
                .map_err(|_| Error::format(at, "label is not valid UTF-8"))?;
            labels.push(s.to_owned());
        }
        Some(labels)
    } else {
        None
    };

    if r.pos != bytes.len() {
        return Err(Error::format(
            r.pos,
            format!("{} trailing bytes after payload", bytes.len() - r.pos),
        ));
    }
    Ok((n, d, values, labels))
}

pub fn descriptors_from_bytes(bytes: &[u8]) -> Result<DescriptorMatrix> {
    let (n, d, values, labels) = matrix_from_bytes(bytes)?;
    let m = DescriptorMatrix::new(n, d, values)?;
    match labels {
        Some(labels) => m.with_labels(labels),
        None => Ok(m),
    }
}

pub fn write_descriptors(m: &DescriptorMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, descriptors_to_bytes(m)).map_err(|e| Error::io(path, e))
}

pub fn read_descriptors(path: impl AsRef<Path>) -> Result<DescriptorMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    descriptors_from_bytes(&bytes)
}

/// Similarity matrices share the descriptor container: rows = database,
/// columns = query. Unlike descriptors they may carry the negative-infinity
/// exclusion sentinel.
pub fn write_similarity(s: &SimilarityMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = matrix_to_bytes(s.rows(), s.cols(), s.values(), None);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_similarity(path: impl AsRef<Path>) -> Result<SimilarityMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (n, d, values, _) = matrix_from_bytes(&bytes)?;
    SimilarityMatrix::new(n, d, values, MetricTag::External)
}
