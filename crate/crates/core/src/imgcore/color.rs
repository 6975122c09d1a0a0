use std::sync::OnceLock;

use super::{GrayImage, LinearImage, SrgbImage};
use crate::error::{Error, Result};

/// Rec. 709 luma weights.
pub const LUMA_WEIGHTS: [f32; 3] = [0.2126, 0.7152, 0.0722];

/// sRGB opto-electronic transfer: linear value to an 8-bit code.
/// Values are clipped to [0, 1] first; that clip is the sensor saturation.
#[inline]
pub fn encode_value(linear: f32) -> u8 {
    let v = f64::from(linear).clamp(0.0, 1.0);
    let e = if v <= 0.003_130_8 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    };
    (e * 255.0).round().clamp(0.0, 255.0) as u8
}

fn decode_table() -> &'static [f32; 256] {
    static TABLE: OnceLock<[f32; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0f32; 256];
        for (code, slot) in t.iter_mut().enumerate() {
            let v = code as f64 / 255.0;
            let lin = if v <= 0.040_45 {
                v / 12.92
            } else {
                ((v + 0.055) / 1.055).powf(2.4)
            };
            *slot = lin as f32;
        }
        t
    })
}

/// Inverse of [`encode_value`] on the code lattice.
#[inline]
pub fn decode_code(code: u8) -> f32 {
    decode_table()[code as usize]
}

pub fn srgb_encode(img: &LinearImage) -> SrgbImage {
    let data = img.data().iter().map(|&v| encode_value(v)).collect();
    SrgbImage::new(img.width(), img.height(), data).expect("dimensions preserved")
}

pub fn srgb_decode(img: &SrgbImage) -> LinearImage {
    let data = img.data().iter().map(|&c| decode_code(c)).collect();
    LinearImage::new(img.width(), img.height(), data).expect("decoded values are valid")
}

/// Anything that can hand out RGB triples normalized to [0, 1].
pub trait RgbSource {
    fn dims(&self) -> (usize, usize);
    /// Pixel `i` (row-major) as unit-range RGB.
    fn unit_rgb(&self, i: usize) -> [f32; 3];
}

impl RgbSource for SrgbImage {
    fn dims(&self) -> (usize, usize) {
        SrgbImage::dims(self)
    }

    #[inline]
    fn unit_rgb(&self, i: usize) -> [f32; 3] {
        let d = &self.data()[i * 3..i * 3 + 3];
        [
            f32::from(d[0]) / 255.0,
            f32::from(d[1]) / 255.0,
            f32::from(d[2]) / 255.0,
        ]
    }
}

impl RgbSource for LinearImage {
    fn dims(&self) -> (usize, usize) {
        LinearImage::dims(self)
    }

    #[inline]
    fn unit_rgb(&self, i: usize) -> [f32; 3] {
        let d = &self.data()[i * 3..i * 3 + 3];
        [d[0].min(1.0), d[1].min(1.0), d[2].min(1.0)]
    }
}

/// Rec. 709 luminance of unit-range values. Linear images are clipped to
/// [0, 1] first so the output always stays in [0, 1].
pub fn luminance(img: &impl RgbSource) -> GrayImage {
    let (w, h) = img.dims();
    let data = (0..w * h)
        .map(|i| {
            let [r, g, b] = img.unit_rgb(i);
            (LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b).clamp(0.0, 1.0)
        })
        .collect();
    GrayImage::new(w, h, data).expect("dimensions preserved")
}

/// Mean of all channel codes, divided by 255.
pub fn mean_intensity(img: &SrgbImage) -> Result<f64> {
    if img.data().is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: u64 = img.data().iter().map(|&c| u64::from(c)).sum();
    Ok(sum as f64 / (img.data().len() as f64 * 255.0))
}
