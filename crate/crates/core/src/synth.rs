//! Seeded synthetic scenes used as fixtures and for demos.
//!
//! Scenes are dead-leaves collages (occluding discs with power-law radii)
//! with log-normal radiance, multiplicative fractal texture and a smooth
//! illumination gradient, which gives them natural-image-like statistics
//! and several stops of dynamic range.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::imgcore::{luminance, LUMA_WEIGHTS, save_image, srgb_encode, LinearImage, SrgbImage};

/// Multi-octave value noise in roughly `[-1, 1]`.
pub fn fractal_noise(rng: &mut impl Rng, width: usize, height: usize, largest_cell: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; width * height];
    let mut cell = largest_cell.max(2);
    let mut amp = 0.5f32;
    while cell >= 2 {
        let gw = width / cell + 2;
        let gh = height / cell + 2;
        let grid: Vec<f32> = (0..gw * gh).map(|_| rng.random_range(-1.0..1.0)).collect();
        for y in 0..height {
            let fy = y as f32 / cell as f32;
            let (y0, ty) = (fy as usize, smooth(fy.fract()));
            for x in 0..width {
                let fx = x as f32 / cell as f32;
                let (x0, tx) = (fx as usize, smooth(fx.fract()));
                let g = |i: usize, j: usize| grid[j * gw + i];
                let top = g(x0, y0) + tx * (g(x0 + 1, y0) - g(x0, y0));
                let bot = g(x0, y0 + 1) + tx * (g(x0 + 1, y0 + 1) - g(x0, y0 + 1));
                out[y * width + x] += amp * (top + ty * (bot - top));
            }
        }
        cell /= 2;
        amp *= 0.6;
    }
    out
}

fn smooth(t: f32) -> f32 {
    t * t * (3.0 - 2.0 * t)
}

/// Linear HDR scene; luminance is unnormalized (median near 0.18).
pub fn hdr_scene(seed: u64, width: usize, height: usize) -> LinearImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rmin, rmax) = (2.0f64, (width.min(height) as f64 / 8.0).max(4.0));
    let mean_area = 2.0 * std::f64::consts::PI * rmin * rmin * (rmax / rmin).ln();
    let count = ((2.5 * (width * height) as f64 / mean_area) as usize).max(20);
    let stops = Normal::<f64>::new(0.0, 1.3).expect("valid");
    let chroma = Normal::<f64>::new(0.0, 0.35).expect("valid");

    let mut data = vec![0.0f32; width * height * 3];
    let bg = 2f32.powf(stops.sample(&mut rng) as f32) * 0.18;
    data.iter_mut().for_each(|v| *v = bg);
    for _ in 0..count {
        let u: f64 = rng.random();
        let r = (rmin.powi(-2) - u * (rmin.powi(-2) - rmax.powi(-2))).powf(-0.5);
        let cx = rng.random_range(0.0..width as f64);
        let cy = rng.random_range(0.0..height as f64);
        let level = 0.18 * 2f64.powf(stops.sample(&mut rng));
        let rgb: [f32; 3] = std::array::from_fn(|_| (level * chroma.sample(&mut rng).exp()) as f32);
        let x0 = (cx - r).floor().max(0.0) as usize;
        let x1 = ((cx + r).ceil() as usize).min(width - 1);
        let y0 = (cy - r).floor().max(0.0) as usize;
        let y1 = ((cy + r).ceil() as usize).min(height - 1);
        for y in y0..=y1 {
            let dy = y as f64 + 0.5 - cy;
            for x in x0..=x1 {
                let dx = x as f64 + 0.5 - cx;
                if dx * dx + dy * dy <= r * r {
                    data[(y * width + x) * 3..][..3].copy_from_slice(&rgb);
                }
            }
        }
    }

    let texture = fractal_noise(&mut rng, width, height, 32);
    let theta = rng.random_range(0.0..std::f32::consts::TAU);
    let gradient_stops = rng.random_range(1.0f32..3.0);
    let texture_amp = rng.random_range(0.15f32..0.45);
    let span = width.max(height) as f32;
    for y in 0..height {
        for x in 0..width {
            let t = ((x as f32 - width as f32 / 2.0) * theta.cos()
                + (y as f32 - height as f32 / 2.0) * theta.sin())
                / span;
            let gain = 2f32.powf(gradient_stops * t) * (1.0 + texture_amp * texture[y * width + x]).max(0.05);
            for v in &mut data[(y * width + x) * 3..][..3] {
                *v *= gain;
            }
        }
    }
    LinearImage::new(width, height, data).expect("finite non-negative by construction")
}

/// A scene rendered to 8-bit sRGB with its 99th-percentile luminance at
/// 0.9, so only the brightest highlights clip, plus faint sensor grain
/// (0.5 to 1.5 code values).
pub fn natural_srgb(seed: u64, width: usize, height: usize) -> SrgbImage {
    let scene = hdr_scene(seed, width, height);
    let mut lum: Vec<f32> = scene
        .data()
        .chunks_exact(3)
        .map(|p| p.iter().zip(LUMA_WEIGHTS).map(|(v, w)| v * w).sum())
        .collect();
    let k = lum.len() * 99 / 100;
    let (_, p99, _) = lum.select_nth_unstable_by(k, f32::total_cmp);
    let clean = srgb_encode(&scene.scaled(0.9 / p99.max(1e-12)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6A09_E667_F3BC_C908);
    let grain = rng.random_range(0.5..1.5) / 255.0;
    add_gaussian_noise(&clean, grain, rng.random())
}

/// Adds seeded Gaussian noise with standard deviation `sigma` (in units of
/// full scale) to every code value.
pub fn add_gaussian_noise(img: &SrgbImage, sigma: f64, seed: u64) -> SrgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, sigma * 255.0).expect("sigma must be finite and >= 0");
    let data = img
        .data()
        .iter()
        .map(|&c| (f64::from(c) + n.sample(&mut rng)).round().clamp(0.0, 255.0) as u8)
        .collect();
    SrgbImage::new(img.width(), img.height(), data).expect("same size")
}

/// Horizontal log-radiance ramp with a warm tint and mild texture, spanning
/// more range than one 8-bit exposure can hold. Red covers about 12.7 stops
/// ending at +2; green and blue sit 2 and 4 stops lower.
pub fn bracketed_ramp(width: usize, height: usize) -> LinearImage {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let texture = fractal_noise(&mut rng, width, height, 16);
    let tint = [0.0f32, -2.0, -4.0];
    LinearImage::from_fn(width, height, |x, y| {
        let t = x as f32 / (width.max(2) - 1) as f32;
        let l = -10.7 + 12.7 * t + 0.3 * texture[y * width + x];
        tint.map(|s| 2f32.powf(l + s))
    })
    .expect("finite")
}

/// Scene scaled so that its mean luminance equals `key`, as stored in a
/// 16-bit linear file (values above 1 clip).
pub fn fixture_source(seed: u64, width: usize, height: usize) -> LinearImage {
    let scene = hdr_scene(seed, width, height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let key = 0.05 * 6f64.powf(rng.random::<f64>());
    let lum = luminance(&scene);
    let mean = lum.data().iter().map(|&v| f64::from(v)).sum::<f64>() / lum.data().len() as f64;
    let gain = (key / mean.max(1e-12)) as f32;
    let data = scene.data().iter().map(|&v| (v * gain).min(1.0)).collect();
    LinearImage::new(width, height, data).expect("finite")
}

/// Writes `count` fixture sources as `scene_NNN.png` (16-bit linear).
pub fn write_fixture_corpus(
    dir: &Path,
    count: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    (0..count)
        .map(|i| {
            let p = dir.join(format!("scene_{i:03}.png"));
            save_image(&p, &fixture_source(seed.wrapping_add(i as u64), width, height))?;
            Ok(p)
        })
        .collect()
}
