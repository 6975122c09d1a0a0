//! Pixel buffers, the sRGB transfer curve and PNG I/O.
//!
//! Three raster types cover everything downstream:
//!
//! * [`LinearImage`]: linear-light RGB, `f32`, unbounded above. The HDR
//!   working representation rendered exposures are derived from.
//! * [`SrgbImage`]: 8-bit display-referred RGB, what a camera ISP emits.
//! * [`GrayImage`]: a single `f32` plane. Used for luminance, weight maps,
//!   pyramid levels and MSCN fields, so its range is not constrained.

mod color;
mod io;

pub use color::{
    decode_code, encode_value, luminance, mean_intensity, srgb_decode, srgb_encode,
    RgbSource, LUMA_WEIGHTS,
};
pub use io::{load_image, load_srgb, save_gray, save_image, save_srgb};

use crate::error::{Error, Result};

/// Linear-light RGB raster, row-major interleaved triples.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl LinearImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_len(width, height, 3, data.len())?;
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidPixel { index, value });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image filled with one colour.
    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Result<Self> {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Self::new(width, height, data)
    }

    /// Builds an image from a per-pixel function.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Multiplies every value by `gain` (which must be finite and >= 0).
    pub fn scaled(&self, gain: f32) -> LinearImage {
        debug_assert!(gain.is_finite() && gain >= 0.0);
        LinearImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| v * gain).collect(),
        }
    }

    /// Splits into three single-channel planes.
    pub fn planes(&self) -> [GrayImage; 3] {
        let n = self.width * self.height;
        let mut out = [
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        ];
        for px in self.data.chunks_exact(3) {
            for c in 0..3 {
                out[c].push(px[c]);
            }
        }
        out.map(|data| GrayImage {
            width: self.width,
            height: self.height,
            data,
        })
    }

    /// Re-interleaves three planes, clamping negatives to zero.
    pub fn from_planes(planes: &[GrayImage; 3]) -> Result<Self> {
        let (w, h) = planes[0].dims();
        for p in &planes[1..] {
            if p.dims() != (w, h) {
                return Err(Error::DimensionMismatch {
                    expected: (w, h),
                    actual: p.dims(),
                });
            }
        }
        let mut data = Vec::with_capacity(w * h * 3);
        for i in 0..w * h {
            for p in planes {
                let v = p.data[i];
                data.push(if v.is_finite() { v.max(0.0) } else { 0.0 });
            }
        }
        Self::new(w, h, data)
    }
}

/// 8-bit sRGB raster, row-major interleaved triples.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SrgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl SrgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_len(width, height, 3, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self {
            width,
            height,
            data: (0..width * height).flat_map(|_| rgb).collect(),
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Number of pixels with at least one channel at code 0 or 255.
    pub fn clipped_pixels(&self) -> usize {
        self.data
            .chunks_exact(3)
            .filter(|px| px.iter().any(|&c| c == 0 || c == 255))
            .count()
    }
}

/// Single-channel `f32` raster.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_len(width, height, 1, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Clamp-to-edge sample with signed coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copy of the rectangle `[x0, x0 + w) x [y0, y0 + h)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> GrayImage {
        debug_assert!(x0 + w <= self.width && y0 + h <= self.height);
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let row = y * self.width;
            data.extend_from_slice(&self.data[row + x0..row + x0 + w]);
        }
        GrayImage {
            width: w,
            height: h,
            data,
        }
    }

    pub fn max_abs_diff(&self, other: &GrayImage) -> f32 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

fn check_len(width: usize, height: usize, channels: usize, actual: usize) -> Result<()> {
    if width.checked_mul(height).and_then(|n| n.checked_mul(channels)) != Some(actual) {
        return Err(Error::BufferSize {
            width,
            height,
            channels,
            actual,
        });
    }
    Ok(())
}
