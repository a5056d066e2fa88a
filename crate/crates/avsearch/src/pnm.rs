//! Binary PPM (P6) and PGM (P5) readers/writers.
//!
//! Dependency-free, byte-deterministic image I/O: 8-bit color for rendered
//! views, 16-bit big-endian gray for belief/saliency heatmap exports.

use std::io::Write;
use std::path::Path;

use crate::error::AvsError;
use crate::raster::{GrayMap, Rgb, RgbImage};

/// Writes an 8-bit binary PPM (P6, maxval 255).
pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<(), AvsError> {
    let mut buf = Vec::with_capacity(img.len() * 3 + 32);
    write!(&mut buf, "P6\n{} {}\n255\n", img.width, img.height)?;
    for px in &img.pixels {
        buf.extend_from_slice(px);
    }
    std::fs::write(path, buf)?;
    Ok(())
}

/// Reads an 8-bit binary PPM (P6, maxval 255).
pub fn read_ppm(path: &Path) -> Result<RgbImage, AvsError> {
    let bytes = std::fs::read(path)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    cur.expect_magic(b"P6")?;
    let width = cur.next_number()?;
    let height = cur.next_number()?;
    let maxval = cur.next_number()?;
    if maxval != 255 {
        return Err(AvsError::Validation(format!(
            "unsupported PPM maxval {maxval}, want 255"
        )));
    }
    cur.skip_single_whitespace()?;
    let n = width * height;
    let raster = cur.rest();
    if raster.len() < n * 3 {
        return Err(AvsError::Validation(format!(
            "PPM raster truncated: {} bytes for {}x{}",
            raster.len(),
            width,
            height
        )));
    }
    let pixels: Vec<Rgb> = raster[..n * 3]
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    Ok(RgbImage { width, height, pixels })
}

/// Writes a 16-bit binary PGM (P5, maxval 65535, big-endian samples).
pub fn write_pgm16(path: &Path, width: usize, height: usize, data: &[u16]) -> Result<(), AvsError> {
    assert_eq!(data.len(), width * height, "PGM data length mismatch");
    let mut buf = Vec::with_capacity(data.len() * 2 + 32);
    write!(&mut buf, "P5\n{width} {height}\n65535\n")?;
    for v in data {
        buf.extend_from_slice(&v.to_be_bytes());
    }
    std::fs::write(path, buf)?;
    Ok(())
}

/// Reads a 16-bit binary PGM (P5, maxval 65535).
pub fn read_pgm16(path: &Path) -> Result<(usize, usize, Vec<u16>), AvsError> {
    let bytes = std::fs::read(path)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    cur.expect_magic(b"P5")?;
    let width = cur.next_number()?;
    let height = cur.next_number()?;
    let maxval = cur.next_number()?;
    if maxval != 65535 {
        return Err(AvsError::Validation(format!(
            "unsupported PGM maxval {maxval}, want 65535"
        )));
    }
    cur.skip_single_whitespace()?;
    let n = width * height;
    let raster = cur.rest();
    if raster.len() < n * 2 {
        return Err(AvsError::Validation("PGM raster truncated".into()));
    }
    let data = raster[..n * 2]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((width, height, data))
}

/// Quantizes a nonnegative map to 16-bit gray: `round(65535 * v / max)`,
/// all-zero when the map has no positive value.
pub fn quantize16(map: &GrayMap) -> Vec<u16> {
    let max = map.max();
    if max <= 0.0 {
        return vec![0; map.data.len()];
    }
    map.data
        .iter()
        .map(|&v| (65535.0 * (v.max(0.0) / max)).round() as u16)
        .collect()
}

// --- header scanning -------------------------------------------------------

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn expect_magic(&mut self, magic: &[u8]) -> Result<(), AvsError> {
        if self.bytes.len() < magic.len() || &self.bytes[..magic.len()] != magic {
            return Err(AvsError::Validation(format!(
                "bad magic, want {}",
                String::from_utf8_lossy(magic)
            )));
        }
        self.pos = magic.len();
        Ok(())
    }

    /// Next ASCII decimal, skipping whitespace and `#` comment lines.
    fn next_number(&mut self) -> Result<usize, AvsError> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .map_or(false, |b| b.is_ascii_digit())
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(AvsError::Validation("expected number in PNM header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| AvsError::Validation("bad number in PNM header".into()))
    }

    /// Exactly one whitespace byte separates the header from the raster.
    fn skip_single_whitespace(&mut self) -> Result<(), AvsError> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(AvsError::Validation("missing raster separator".into())),
        }
    }

    fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }
}
