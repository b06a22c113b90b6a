//! Netpbm PGM reader (P2 and P5, maxval up to 65535) and P5 writer.

use std::path::Path;

use crate::data::GrayImage;
use crate::error::{Error, Result};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        Some(b)
    }

    /// Skips whitespace and `#` comments (which run to end of line).
    fn skip_separators(&mut self) {
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(c) = self.bump() {
                    if c == b'\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn read_uint(&mut self, what: &str) -> Result<u64> {
        self.skip_separators();
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(b) = self.peek() {
            if b.is_ascii_digit() {
                value = value
                    .checked_mul(10)
                    .and_then(|v| v.checked_add((b - b'0') as u64))
                    .ok_or_else(|| Error::format(start, format!("{what} overflows")))?;
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(Error::format(self.pos, format!("expected {what}")));
        }
        Ok(value)
    }
}

/// Parses a PGM image from raw bytes.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut cur = Cursor::new(bytes);
    let magic = [cur.bump(), cur.bump()];
    let binary = match magic {
        [Some(b'P'), Some(b'2')] => false,
        [Some(b'P'), Some(b'5')] => true,
        _ => return Err(Error::format(0, "expected PGM magic 'P2' or 'P5'")),
    };

    let width = cur.read_uint("width")? as usize;
    let height = cur.read_uint("height")? as usize;
    let maxval_pos = cur.pos;
    let maxval = cur.read_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format(2, "zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(
            maxval_pos,
            format!("maxval {maxval} outside 1..=65535"),
        ));
    }

    let samples = width * height;
    let scale = maxval as f64;
    let mut data = Vec::with_capacity(samples);

    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        match cur.bump() {
            Some(b) if b.is_ascii_whitespace() => {}
            _ => {
                return Err(Error::format(
                    cur.pos.saturating_sub(1),
                    "expected single whitespace byte before binary raster",
                ))
            }
        }
        let wide = maxval > 255;
        let needed = samples * if wide { 2 } else { 1 };
        let raster = &cur.bytes[cur.pos.min(cur.bytes.len())..];
        if raster.len() < needed {
            return Err(Error::format(
                cur.bytes.len(),
                format!(
                    "truncated raster: have {} bytes, need {}",
                    raster.len(),
                    needed
                ),
            ));
        }
        if wide {
            for chunk in raster[..needed].chunks_exact(2) {
                // two bytes per sample, most significant first
                let v = u16::from_be_bytes([chunk[0], chunk[1]]) as u64;
                if v > maxval {
                    return Err(Error::format(cur.pos, format!("sample {v} exceeds maxval")));
                }
                data.push(v as f64 / scale);
            }
        } else {
            for &b in &raster[..needed] {
                data.push(b as f64 / scale);
            }
        }
    } else {
        for _ in 0..samples {
            let at = cur.pos;
            let v = cur.read_uint("pixel value")?;
            if v > maxval {
                return Err(Error::format(at, format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 / scale);
        }
    }

    GrayImage::new(height, width, data)
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes)
}

/// Serializes an image as binary P5 with maxval 255. Intensities are scaled
/// by 255 and rounded to nearest.
pub fn pgm_bytes(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(
        image
            .data()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn write_pgm(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, pgm_bytes(image)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_small_ascii_pgm() {
        let img = parse_pgm(b"P2\n2 2\n255\n0 255\n255 0\n").unwrap();
        assert_eq!(img.data(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn parses_binary_pgm_with_comment() {
        let mut bytes = b"P5 # comment\n2 2\n255\n".to_vec();
        bytes.extend([128u8; 4]);
        let img = parse_pgm(&bytes).unwrap();
        for v in img.data() {
            assert!((v - 128.0 / 255.0).abs() < 1e-12);
        }
    }

    #[test]
    fn parses_16_bit_binary_pgm() {
        let mut bytes = b"P5\n1 2\n65535\n".to_vec();
        bytes.extend(1000u16.to_be_bytes());
        bytes.extend(65535u16.to_be_bytes());
        let img = parse_pgm(&bytes).unwrap();
        assert!((img.data()[0] - 1000.0 / 65535.0).abs() < 1e-12);
        assert_eq!(img.data()[1], 1.0);
    }

    #[test]
    fn reports_header_errors_with_offset() {
        let err = parse_pgm(b"P7\n2 2\n255\n").unwrap_err();
        match err {
            Error::Format { offset, .. } => assert_eq!(offset, 0),
            other => panic!("unexpected error {other:?}"),
        }
        let err = parse_pgm(b"P2\n2 2\n70000\n0 0 0 0").unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn reports_truncated_raster() {
        let err = parse_pgm(b"P5\n2 2\n255\nab").unwrap_err();
        match err {
            Error::Format { detail, .. } => assert!(detail.contains("truncated")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn ascii_sample_above_maxval_is_rejected() {
        assert!(parse_pgm(b"P2\n1 1\n10\n11\n").is_err());
    }

    #[test]
    fn p5_round_trip_is_byte_identical() {
        // Oracle: writing a loaded maxval-255 P5 file must reproduce it.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0x9e3779b9);
        for _ in 0..100 {
            let w = rng.random_range(1..12usize);
            let h = rng.random_range(1..12usize);
            let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
            bytes.extend((0..w * h).map(|_| rng.random::<u8>()));
            let img = parse_pgm(&bytes).unwrap();
            assert_eq!(pgm_bytes(&img), bytes);
        }
    }
}
