use crate::error::{Error, Result};
use crate::imgcore::{luminance, GrayImage, RgbSource, SrgbImage};

use super::{sum_unordered, FusionConfig};

/// Well-exposedness: Gaussian closeness to mid-gray.
pub const WELL_EXPOSED_MEAN: f32 = 0.5;
pub const WELL_EXPOSED_SIGMA: f32 = 0.2;

/// Per-frame, per-pixel fusion weights. Stored in `f64` so normalized maps
/// keep the sum bounds of the normalization exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMaps {
    width: usize,
    height: usize,
    maps: Vec<Vec<f64>>,
    normalized: bool,
}

impl WeightMaps {
    pub fn new(width: usize, height: usize, maps: Vec<Vec<f64>>, normalized: bool) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::EmptyInput);
        }
        for m in &maps {
            if m.len() != width * height {
                return Err(Error::BufferSize {
                    width,
                    height,
                    channels: 1,
                    actual: m.len(),
                });
            }
            if m.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidFusionConfig(
                    "weights must be finite and non-negative".into(),
                ));
            }
        }
        Ok(Self {
            width,
            height,
            maps,
            normalized,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn maps(&self) -> &[Vec<f64>] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Map `j` as an `f32` plane (for pyramids and PNG dumps).
    pub fn plane(&self, j: usize) -> GrayImage {
        let data = self.maps[j].iter().map(|&v| v as f32).collect();
        GrayImage::new(self.width, self.height, data).expect("dims checked")
    }

    /// Per-pixel sum over frames.
    pub fn pixel_sums(&self) -> Vec<f64> {
        let mut buf = Vec::with_capacity(self.maps.len());
        (0..self.width * self.height)
            .map(|i| {
                buf.clear();
                buf.extend(self.maps.iter().map(|m| m[i]));
                sum_unordered(&mut buf)
            })
            .collect()
    }
}

/// `b^e` with `0^0 = 1`, so a zero exponent disables a criterion.
#[inline]
fn pow0(base: f32, exp: f32) -> f32 {
    if exp == 0.0 {
        1.0
    } else {
        base.powf(exp)
    }
}

#[inline]
pub(crate) fn well_exposedness(rgb: [f32; 3]) -> f32 {
    let two_s2 = 2.0 * WELL_EXPOSED_SIGMA * WELL_EXPOSED_SIGMA;
    rgb.iter()
        .map(|c| (-(c - WELL_EXPOSED_MEAN).powi(2) / two_s2).exp())
        .product()
}

#[inline]
fn saturation(rgb: [f32; 3]) -> f32 {
    let mean = (rgb[0] + rgb[1] + rgb[2]) / 3.0;
    let var = rgb.iter().map(|c| (c - mean).powi(2)).sum::<f32>() / 3.0;
    var.sqrt()
}

fn check_frames(frames: &[SrgbImage]) -> Result<(usize, usize)> {
    let first = frames.first().ok_or(Error::EmptyInput)?;
    let dims = first.dims();
    if let Some(f) = frames.iter().find(|f| f.dims() != dims) {
        return Err(Error::DimensionMismatch {
            expected: dims,
            actual: f.dims(),
        });
    }
    Ok(dims)
}

/// Contrast x saturation x well-exposedness, each raised to its exponent.
///
/// Contrast is the absolute 4-neighbour Laplacian of Rec. 709 luminance,
/// saturation the standard deviation across R, G, B, and well-exposedness
/// the product over channels of `exp(-(c - 0.5)^2 / (2 * 0.2^2))`. All
/// on display values in [0, 1].
pub fn mertens_weights(frames: &[SrgbImage], cfg: &FusionConfig) -> Result<WeightMaps> {
    cfg.validate()?;
    let (w, h) = check_frames(frames)?;
    let [wc, ws, we] = cfg.exponents;
    let maps = frames
        .iter()
        .map(|frame| {
            let lum = luminance(frame);
            (0..w * h)
                .map(|i| {
                    let (x, y) = ((i % w) as isize, (i / w) as isize);
                    let lap = lum.get_clamped(x - 1, y)
                        + lum.get_clamped(x + 1, y)
                        + lum.get_clamped(x, y - 1)
                        + lum.get_clamped(x, y + 1)
                        - 4.0 * lum.get_clamped(x, y);
                    let rgb = frame.unit_rgb(i);
                    let v = pow0(lap.abs(), wc)
                        * pow0(saturation(rgb), ws)
                        * pow0(well_exposedness(rgb), we);
                    f64::from(v)
                })
                .collect()
        })
        .collect();
    WeightMaps::new(w, h, maps, false)
}

/// Forward-difference gradient magnitude of luminance times
/// well-exposedness. Flat or clipped regions get (near) zero weight.
pub fn gradient_weights(frames: &[SrgbImage], cfg: &FusionConfig) -> Result<WeightMaps> {
    cfg.validate()?;
    let (w, h) = check_frames(frames)?;
    let [wc, _, we] = cfg.exponents;
    let maps = frames
        .iter()
        .map(|frame| {
            let lum = luminance(frame);
            (0..w * h)
                .map(|i| {
                    let (x, y) = (i % w, i / w);
                    let l = lum.get(x, y);
                    let gx = if x + 1 < w { lum.get(x + 1, y) - l } else { 0.0 };
                    let gy = if y + 1 < h { lum.get(x, y + 1) - l } else { 0.0 };
                    let g = (gx * gx + gy * gy).sqrt();
                    f64::from(pow0(g, wc) * pow0(well_exposedness(frame.unit_rgb(i)), we))
                })
                .collect()
        })
        .collect();
    WeightMaps::new(w, h, maps, false)
}

/// `w'_j = w_j / (sum_k w_k + epsilon)`.
///
/// Quotients are rounded toward zero so the per-pixel sum never exceeds 1.
pub fn normalize_weights(w: &WeightMaps, epsilon: f64) -> Result<WeightMaps> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidFusionConfig("epsilon must be > 0".into()));
    }
    let sums = w.pixel_sums();
    let maps = w
        .maps
        .iter()
        .map(|m| {
            m.iter()
                .zip(&sums)
                .map(|(&v, &s)| {
                    let q = v / (s + epsilon);
                    if q > 0.0 {
                        q.next_down()
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    WeightMaps::new(w.width, w.height, maps, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> FusionConfig {
        FusionConfig::default()
    }

    #[test]
    fn flat_mid_gray_has_zero_contrast_weight() {
        let f = SrgbImage::filled(5, 5, [128, 128, 128]);
        let w = mertens_weights(std::slice::from_ref(&f), &cfg()).unwrap();
        assert!(w.maps()[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_exponents_are_neutral() {
        // 127.5 is not a code; build the exact 0.5 case from unit values
        let e = well_exposedness([0.5, 0.5, 0.5]);
        assert_eq!(e, 1.0);
        assert_eq!(pow0(0.0, 0.0), 1.0);
        assert_eq!(pow0(0.0, 1.0), 0.0);
        let f = SrgbImage::filled(3, 3, [128, 128, 128]);
        let c = FusionConfig {
            exponents: [0.0, 0.0, 1.0],
            ..cfg()
        };
        let w = mertens_weights(std::slice::from_ref(&f), &c).unwrap();
        let expected = well_exposedness([128.0 / 255.0; 3]);
        assert!(w.maps()[0].iter().all(|&v| v == f64::from(expected)));
        assert!(expected > 0.999);
    }

    #[test]
    fn well_exposedness_peaks_at_half_and_is_symmetric() {
        let ramp: Vec<f32> = (0..=100).map(|k| k as f32 / 100.0).collect();
        let e: Vec<f32> = ramp.iter().map(|&v| well_exposedness([v; 3])).collect();
        let peak = e
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(peak, 50);
        for k in 0..=50 {
            assert!((e[50 - k] - e[50 + k]).abs() < 1e-6, "{k}");
        }
        // exp(-3 * 0.25 / 0.08) at the extremes
        assert!((e[0] - (-3.0f32 * 0.25 / 0.08).exp()).abs() < 1e-7);
    }

    #[test]
    fn gradient_weights_cases() {
        let white = SrgbImage::filled(6, 6, [255, 255, 255]);
        let gray = SrgbImage::filled(6, 6, [128, 128, 128]);
        let w = gradient_weights(&[white, gray], &cfg()).unwrap();
        assert!(w.maps()[0].iter().all(|&v| v < 1e-6));
        assert!(w.maps()[1].iter().all(|&v| v == 0.0));

        let step = SrgbImage::from_fn(16, 4, |x, _| if x < 8 { [90; 3] } else { [170; 3] });
        let w = gradient_weights(std::slice::from_ref(&step), &cfg()).unwrap();
        let dl = (170.0f32 - 90.0) / 255.0;
        for y in 0..4 {
            for x in 0..16 {
                let v = w.maps()[0][y * 16 + x];
                if x == 7 {
                    let e = well_exposedness([90.0 / 255.0; 3]);
                    assert!((v - f64::from(dl * e)).abs() < 1e-6);
                } else {
                    assert_eq!(v, 0.0, "({x},{y})");
                }
            }
        }
    }

    #[test]
    fn normalization_examples() {
        let w = WeightMaps::new(1, 1, vec![vec![0.0], vec![0.0]], false).unwrap();
        let n = normalize_weights(&w, 1e-12).unwrap();
        assert_eq!(n.maps(), &[vec![0.0], vec![0.0]]);
        assert!(n.is_normalized());

        let w = WeightMaps::new(1, 1, vec![vec![1.0], vec![1.0]], false).unwrap();
        let n = normalize_weights(&w, 1e-12).unwrap();
        for m in n.maps() {
            assert!((m[0] - 0.5).abs() < 1e-12);
        }

        let w = WeightMaps::new(1, 1, vec![vec![0.2], vec![0.3], vec![0.5]], false).unwrap();
        let n = normalize_weights(&w, 1e-12).unwrap();
        for (m, want) in n.maps().iter().zip([0.2, 0.3, 0.5]) {
            assert!((m[0] - want / (1.0 + 1e-12)).abs() < 1e-15);
        }
        assert!(normalize_weights(&w, 0.0).is_err());
    }
}
