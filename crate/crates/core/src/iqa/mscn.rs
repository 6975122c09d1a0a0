use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::imgcore::GrayImage;

/// Smallest side accepted by [`mscn`].
pub const MSCN_MIN_DIM: usize = 16;

const RADIUS: usize = 3;
const KERNEL_SIGMA: f64 = 7.0 / 6.0;

fn window() -> &'static [f64; 2 * RADIUS + 1] {
    static W: OnceLock<[f64; 2 * RADIUS + 1]> = OnceLock::new();
    W.get_or_init(|| {
        let mut w = [0.0; 2 * RADIUS + 1];
        for (i, v) in w.iter_mut().enumerate() {
            let d = i as f64 - RADIUS as f64;
            *v = (-d * d / (2.0 * KERNEL_SIGMA * KERNEL_SIGMA)).exp();
        }
        let s: f64 = w.iter().sum();
        w.map(|v| v / s)
    })
}

/// Separable 7x7 Gaussian filter with clamp-to-edge borders.
fn gaussian_filter(data: &[f64], w: usize, h: usize) -> Vec<f64> {
    let k = window();
    let r = RADIUS as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| {
                    let xi = (x as isize + i as isize - r).clamp(0, w as isize - 1) as usize;
                    kv * row[xi]
                })
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (i, kv) in k.iter().enumerate() {
            let yi = (y as isize + i as isize - r).clamp(0, h as isize - 1) as usize;
            let src = &tmp[yi * w..(yi + 1) * w];
            for (o, s) in out[y * w..(y + 1) * w].iter_mut().zip(src) {
                *o += kv * s;
            }
        }
    }
    out
}

/// MSCN field and the local standard-deviation field it was divided by.
pub struct MscnField {
    pub coefficients: GrayImage,
    pub local_sigma: GrayImage,
}

/// `(I - mu) / (sigma + 1)` with `mu`, `sigma` the local Gaussian-weighted
/// mean and standard deviation. Values are used as given, so callers pick
/// the intensity scale (the NR metrics work on 0..255).
pub fn mscn(img: &GrayImage) -> Result<GrayImage> {
    Ok(mscn_field(img)?.coefficients)
}

pub fn mscn_field(img: &GrayImage) -> Result<MscnField> {
    let (w, h) = img.dims();
    if w.min(h) < MSCN_MIN_DIM {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: MSCN_MIN_DIM,
        });
    }
    let data: Vec<f64> = img.data().iter().map(|&v| f64::from(v)).collect();
    let sq: Vec<f64> = data.iter().map(|v| v * v).collect();
    let mu = gaussian_filter(&data, w, h);
    let mu_sq = gaussian_filter(&sq, w, h);
    let mut coeffs = Vec::with_capacity(w * h);
    let mut sigmas = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let sigma = (mu_sq[i] - mu[i] * mu[i]).abs().sqrt();
        coeffs.push(((data[i] - mu[i]) / (sigma + 1.0)) as f32);
        sigmas.push(sigma as f32);
    }
    Ok(MscnField {
        coefficients: GrayImage::new(w, h, coeffs)?,
        local_sigma: GrayImage::new(w, h, sigmas)?,
    })
}
