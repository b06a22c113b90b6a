//! The "VPRB" boolean matrix format.
//!
//! Layout, all integers little-endian:
//! magic `VPRB` | u32 version (=1) | u32 rows | u32 cols |
//! row-major bit-packed cells, each row padded to a byte boundary.
//! Within a byte the most significant bit holds the leftmost cell.

use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"VPRB";
const VERSION: u32 = 1;

pub fn bool_matrix_to_bytes(rows: usize, cols: usize, values: &[bool]) -> Result<Vec<u8>> {
    if values.len() != rows * cols {
        return Err(Error::Shape(format!(
            "{} cells for a {rows}x{cols} matrix",
            values.len()
        )));
    }
    let row_bytes = cols.div_ceil(8);
    let mut out = Vec::with_capacity(16 + rows * row_bytes);
    out.extend_from_slice(MAGIC);
    out.extend(VERSION.to_le_bytes());
    out.extend((rows as u32).to_le_bytes());
    out.extend((cols as u32).to_le_bytes());
    for row in 0..rows {
        let cells = &values[row * cols..(row + 1) * cols];
        for chunk in cells.chunks(8) {
            let mut byte = 0u8;
            for (bit, cell) in chunk.iter().enumerate() {
                if *cell {
                    byte |= 1 << (7 - bit);
                }
            }
            out.push(byte);
        }
    }
    Ok(out)
}

pub fn bool_matrix_from_bytes(bytes: &[u8]) -> Result<(usize, usize, Vec<bool>)> {
    if bytes.len() < 16 {
        return Err(Error::format(bytes.len(), "truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(0, "bad magic, expected 'VPRB'"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let row_bytes = cols.div_ceil(8);
    let expected = 16 + rows * row_bytes;
    if bytes.len() != expected {
        return Err(Error::format(
            bytes.len().min(expected),
            format!("payload is {} bytes, expected {}", bytes.len() - 16, rows * row_bytes),
        ));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        let base = 16 + row * row_bytes;
        for col in 0..cols {
            let byte = bytes[base + col / 8];
            values.push(byte & (1 << (7 - col % 8)) != 0);
        }
    }
    Ok((rows, cols, values))
}

pub fn write_bool_matrix(
    rows: usize,
    cols: usize,
    values: &[bool],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, bool_matrix_to_bytes(rows, cols, values)?)
        .map_err(|e| Error::io(path, e))
}

pub fn read_bool_matrix(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<bool>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    bool_matrix_from_bytes(&bytes)
}
