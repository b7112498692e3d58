//! Binary netpbm reading/writing: P6 color pixmaps for photographs and
//! overlays, P5 graymaps for label maps (gray value = class id, 255 = ignore).
//!
//! Only the binary variants with maxval <= 255 are supported; that is enough
//! for the dataset workflow and keeps the formats parseable anywhere.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::label::LabelMap;

/// Interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// `3 * width * height` bytes, row-major, RGB order.
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> RgbImage {
        let mut data = Vec::with_capacity(3 * width * height);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        RgbImage { width, height, data }
    }

    #[inline]
    pub fn put(&mut self, y: usize, x: usize, rgb: [u8; 3]) {
        let at = 3 * (y * self.width + x);
        self.data[at..at + 3].copy_from_slice(&rgb);
    }
}

struct HeaderParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderParser<'a> {
    fn skip_separators(&mut self) -> Result<()> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if *b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => return Ok(()),
                None => return Err(Error::Netpbm("truncated header".into())),
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_separators()?;
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::Netpbm(format!("expected {what} in header")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Netpbm(format!("{what} out of range")))
    }

    // Header fields end at exactly one whitespace byte before the payload.
    fn payload(mut self, expect_len: usize) -> Result<&'a [u8]> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => self.pos += 1,
            _ => return Err(Error::Netpbm("missing separator before pixel data".into())),
        }
        let payload = &self.bytes[self.pos..];
        if payload.len() < expect_len {
            return Err(Error::Netpbm(format!(
                "truncated pixel data: {} of {expect_len} bytes",
                payload.len()
            )));
        }
        Ok(&payload[..expect_len])
    }
}

fn parse(
    bytes: &[u8],
    magic: &[u8; 2],
    samples_per_pixel: usize,
) -> Result<(usize, usize, Vec<u8>)> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::Netpbm(format!(
            "not a binary {} file (bad magic)",
            std::str::from_utf8(magic).unwrap()
        )));
    }
    let mut p = HeaderParser { bytes, pos: 2 };
    let width = p.number("width")?;
    let height = p.number("height")?;
    let maxval = p.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Netpbm("image dimensions must be positive".into()));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::Netpbm(format!("unsupported maxval {maxval} (need 1..=255)")));
    }
    let expect = width
        .checked_mul(height)
        .and_then(|px| px.checked_mul(samples_per_pixel))
        .ok_or_else(|| Error::Netpbm(format!("implausible dimensions {width}x{height}")))?;
    let payload = p.payload(expect)?;
    Ok((width, height, payload.to_vec()))
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage> {
    let bytes = fs::read(path)?;
    let (width, height, data) = parse(&bytes, b"P6", 3)?;
    Ok(RgbImage { width, height, data })
}

pub fn write_ppm(path: impl AsRef<Path>, image: &RgbImage) -> Result<()> {
    let mut out = Vec::with_capacity(image.data.len() + 32);
    out.extend_from_slice(format!("P6\n{} {}\n255\n", image.width, image.height).as_bytes());
    out.extend_from_slice(&image.data);
    fs::write(path, out)?;
    Ok(())
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<LabelMap> {
    let bytes = fs::read(path)?;
    let (width, height, data) = parse(&bytes, b"P5", 1)?;
    LabelMap::new(height, width, data)
}

pub fn write_pgm(path: impl AsRef<Path>, map: &LabelMap) -> Result<()> {
    let mut out = Vec::with_capacity(map.data().len() + 32);
    out.extend_from_slice(format!("P5\n{} {}\n255\n", map.width(), map.height()).as_bytes());
    out.extend_from_slice(map.data());
    fs::write(path, out)?;
    Ok(())
}
