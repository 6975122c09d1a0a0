//! Gaussian and Laplacian pyramids over single-channel planes.
//!
//! Reduction blurs with the separable binomial kernel `[1, 4, 6, 4, 1] / 16`
//! (clamp-to-edge) and keeps every other sample, so each level measures
//! `ceil(previous / 2)`. Expansion zero-inserts up to the exact size of the
//! finer level and blurs with the same kernel at gain 4. The Laplacian
//! levels store `G[k] - expand(G[k + 1])`, which makes collapse an exact
//! inverse up to float rounding for any image size.

use crate::error::{Error, Result};
use crate::imgcore::GrayImage;

const KERNEL: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PyramidKind {
    Gaussian,
    Laplacian,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pyramid {
    levels: Vec<GrayImage>,
    kind: PyramidKind,
}

impl Pyramid {
    /// Assembles a pyramid from levels, checking the size chain.
    pub fn from_levels(levels: Vec<GrayImage>, kind: PyramidKind) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::EmptyInput);
        }
        for pair in levels.windows(2) {
            let (w, h) = pair[0].dims();
            let expected = (w.div_ceil(2), h.div_ceil(2));
            if pair[1].dims() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    actual: pair[1].dims(),
                });
            }
        }
        Ok(Self { levels, kind })
    }

    pub fn levels(&self) -> &[GrayImage] {
        &self.levels
    }

    pub fn into_levels(self) -> Vec<GrayImage> {
        self.levels
    }

    pub fn kind(&self) -> PyramidKind {
        self.kind
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }
}

/// Default depth: `floor(log2(min(w, h))) - 1`, at least 1.
pub fn auto_depth(width: usize, height: usize) -> usize {
    let m = width.min(height);
    if m < 2 {
        return 1;
    }
    (m.ilog2() as usize).saturating_sub(1).max(1)
}

fn check_depth(img: &GrayImage, depth: usize) -> Result<()> {
    let (w, h) = img.dims();
    let min = w.min(h);
    let ok = depth >= 1 && min > 0 && depth - 1 < usize::BITS as usize && (min >> (depth - 1)) >= 1;
    if ok {
        Ok(())
    } else {
        Err(Error::DepthTooLarge {
            depth,
            width: w,
            height: h,
        })
    }
}

fn blur_rows(src: &GrayImage, gain: f32) -> GrayImage {
    let (w, h) = src.dims();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let row = &src.data()[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0f32;
            for (k, &kv) in KERNEL.iter().enumerate() {
                let xi = (x as isize + k as isize - 2).clamp(0, w as isize - 1) as usize;
                acc += kv * row[xi];
            }
            out.push(acc * gain);
        }
    }
    GrayImage::new(w, h, out).expect("same dims")
}

fn blur_cols(src: &GrayImage, gain: f32) -> GrayImage {
    let (w, h) = src.dims();
    let d = src.data();
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for (k, &kv) in KERNEL.iter().enumerate() {
            let yi = (y as isize + k as isize - 2).clamp(0, h as isize - 1) as usize;
            let src_row = &d[yi * w..(yi + 1) * w];
            let dst_row = &mut out[y * w..(y + 1) * w];
            for (o, s) in dst_row.iter_mut().zip(src_row) {
                *o += kv * s;
            }
        }
        if gain != 1.0 {
            for o in &mut out[y * w..(y + 1) * w] {
                *o *= gain;
            }
        }
    }
    GrayImage::new(w, h, out).expect("same dims")
}

/// Blur then keep even rows and columns.
pub fn reduce(img: &GrayImage) -> GrayImage {
    let blurred = blur_cols(&blur_rows(img, 1.0), 1.0);
    let (w, h) = img.dims();
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    GrayImage::from_fn(nw, nh, |x, y| blurred.get(2 * x, 2 * y))
}

/// Zero-insert to `width x height` (which must be `2n` or `2n - 1` of the
/// input) and blur with gain 4.
pub fn expand(img: &GrayImage, width: usize, height: usize) -> GrayImage {
    debug_assert_eq!(width.div_ceil(2), img.width());
    debug_assert_eq!(height.div_ceil(2), img.height());
    let sparse = GrayImage::from_fn(width, height, |x, y| {
        if x % 2 == 0 && y % 2 == 0 {
            img.get(x / 2, y / 2)
        } else {
            0.0
        }
    });
    blur_cols(&blur_rows(&sparse, 2.0), 2.0)
}

pub fn gaussian_pyramid(img: &GrayImage, depth: usize) -> Result<Pyramid> {
    check_depth(img, depth)?;
    let mut levels = Vec::with_capacity(depth);
    levels.push(img.clone());
    for _ in 1..depth {
        let next = reduce(levels.last().expect("non-empty"));
        levels.push(next);
    }
    Ok(Pyramid {
        levels,
        kind: PyramidKind::Gaussian,
    })
}

pub fn laplacian_pyramid(img: &GrayImage, depth: usize) -> Result<Pyramid> {
    let gauss = gaussian_pyramid(img, depth)?.into_levels();
    let mut levels = Vec::with_capacity(depth);
    for k in 0..depth - 1 {
        let (w, h) = gauss[k].dims();
        let up = expand(&gauss[k + 1], w, h);
        let diff = gauss[k]
            .data()
            .iter()
            .zip(up.data())
            .map(|(a, b)| a - b)
            .collect();
        levels.push(GrayImage::new(w, h, diff)?);
    }
    levels.push(gauss[depth - 1].clone());
    Ok(Pyramid {
        levels,
        kind: PyramidKind::Laplacian,
    })
}

/// Upsample-and-add from the coarsest level to the finest.
pub fn collapse(pyr: &Pyramid) -> Result<GrayImage> {
    if pyr.kind != PyramidKind::Laplacian {
        return Err(Error::CollapseGaussian);
    }
    let mut acc = pyr.levels.last().expect("non-empty").clone();
    for level in pyr.levels.iter().rev().skip(1) {
        let (w, h) = level.dims();
        let mut up = expand(&acc, w, h);
        for (u, l) in up.data_mut().iter_mut().zip(level.data()) {
            *u += l;
        }
        acc = up;
    }
    Ok(acc)
}
