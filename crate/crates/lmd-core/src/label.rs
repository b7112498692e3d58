use crate::error::{Error, Result};

/// A 2-D map of per-pixel class ids. Value 255 is conventionally reserved
/// for "ignore" in datasets that have an undefined class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    h: usize,
    w: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(h: usize, w: usize, data: Vec<u8>) -> Result<LabelMap> {
        if data.len() != h * w {
            return Err(Error::shape(
                "LabelMap::new",
                format!("{} values for {}x{}", h * w, h, w),
                format!("{}", data.len()),
            ));
        }
        Ok(LabelMap { h, w, data })
    }

    pub fn filled(h: usize, w: usize, value: u8) -> LabelMap {
        LabelMap { h, w, data: vec![value; h * w] }
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, value: u8) {
        self.data[y * self.w + x] = value;
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}
