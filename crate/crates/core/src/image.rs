//! RGB image buffer and pixel coordinate conventions.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::error::{invalid, Error, Result};

pub const CHANNELS: usize = 3;

/// A dense `height × width × 3` image of linear values, nominally in [0, 1],
/// stored row-major with interleaved channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * CHANNELS {
            return Err(invalid!(
                "image buffer has {} values, expected {height}x{width}x3 = {}",
                data.len(),
                height * width * CHANNELS
            ));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width * CHANNELS],
        }
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for row in 0..height {
            for col in 0..width {
                for ch in 0..CHANNELS {
                    data.push(f(row, col, ch));
                }
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.width + col) * CHANNELS + ch
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[self.index(row, col, ch)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, value: f64) {
        let i = self.index(row, col, ch);
        self.data[i] = value;
    }

    /// Clamps every value into [0, 1] in place.
    pub fn clamp_in_place(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Copy with every value replaced by `min(1, max(0, v))`.
    pub fn clamped(&self) -> Self {
        let mut out = self.clone();
        out.clamp_in_place();
        out
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Converts 8-bit RGB to linear values `v / 255`.
    pub fn from_rgb8(img: &RgbImage) -> Self {
        let (w, h) = img.dimensions();
        let data = img.as_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
        Self {
            height: h as usize,
            width: w as usize,
            data,
        }
    }

    /// Quantizes to 8 bits, rounding `255 v` half to even after clamping.
    pub fn to_rgb8(&self) -> RgbImage {
        let raw: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8)
            .collect();
        RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions")
    }

    /// Decodes any PNG or JPEG file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let decoded = image::load_from_memory(&bytes).map_err(|source| Error::Codec {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_rgb8(&decoded.to_rgb8()))
    }

    /// Lossless PNG encoding of the 8-bit quantization.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Cursor::new(Vec::new());
        self.to_rgb8()
            .write_to(&mut out, ImageFormat::Png)
            .map_err(|source| Error::Codec {
                path: "<memory>".into(),
                source,
            })?;
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.encode_png()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

/// Returns a copy of `img` with every value clamped to [0, 1].
pub fn clamp_image(img: &Image) -> Image {
    img.clamped()
}

/// Maps pixel indices to normalized coordinates in [0, 1].
///
/// Index `i` of an axis with `n` samples maps to `i / (n - 1)`, so the first
/// and last pixels sit exactly on 0 and 1.
#[derive(Clone, Copy, Debug)]
pub struct CoordGrid {
    pub height: usize,
    pub width: usize,
}

impl CoordGrid {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn axis(index: usize, len: usize) -> f64 {
        if len <= 1 {
            return 0.0;
        }
        index as f64 / (len - 1) as f64
    }

    /// `(r1, r2)` for pixel `(row, col)`.
    pub fn coord(&self, row: usize, col: usize) -> (f64, f64) {
        (Self::axis(row, self.height), Self::axis(col, self.width))
    }
}
