use crate::error::{Error, Result};
use crate::imgcore::{srgb_decode, srgb_encode, GrayImage, LinearImage, SrgbImage};
use crate::pyramid::{auto_depth, collapse, gaussian_pyramid, laplacian_pyramid, Pyramid, PyramidKind};

use super::{sum_unordered, Depth, WeightMaps};

/// Below this normalized weight mass a pixel counts as degenerate and is
/// filled with the plain average of the frames.
const DEGENERATE_MASS: f64 = 0.5;

fn check_inputs(frames: &[SrgbImage], w: &WeightMaps) -> Result<(usize, usize)> {
    if !w.is_normalized() {
        return Err(Error::InvalidFusionConfig(
            "weights must be normalized before fusion".into(),
        ));
    }
    let first = frames.first().ok_or(Error::EmptyInput)?;
    let dims = first.dims();
    if frames.len() != w.len() {
        return Err(Error::InvalidFusionConfig(format!(
            "{} frames but {} weight maps",
            frames.len(),
            w.len()
        )));
    }
    for d in frames.iter().map(|f| f.dims()).chain([w.dims()]) {
        if d != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: d,
            });
        }
    }
    Ok(dims)
}

/// Weights actually used for composition. Where the normalized mass `s` is
/// below 0.5 every frame gets `1/N`; elsewhere the missing mass `1 - s`
/// (at most `eps / (sum + eps)`) is spread evenly, so weights sum to one.
pub fn effective_weights(w: &WeightMaps) -> Vec<Vec<f64>> {
    let n = w.len() as f64;
    let sums = w.pixel_sums();
    w.maps()
        .iter()
        .map(|m| {
            m.iter()
                .zip(&sums)
                .map(|(&v, &s)| {
                    if s < DEGENERATE_MASS {
                        1.0 / n
                    } else {
                        v + (1.0 - s) / n
                    }
                })
                .collect()
        })
        .collect()
}

/// Pixel-wise weighted sum of the frames in linear light.
pub fn fuse_flat(frames: &[SrgbImage], w: &WeightMaps) -> Result<SrgbImage> {
    let (width, height) = check_inputs(frames, w)?;
    let eff = effective_weights(w);
    let linear: Vec<LinearImage> = frames.iter().map(srgb_decode).collect();
    let mut terms = Vec::with_capacity(frames.len());
    let mut out = Vec::with_capacity(width * height * 3);
    for i in 0..width * height {
        for c in 0..3 {
            terms.clear();
            terms.extend(
                linear
                    .iter()
                    .zip(&eff)
                    .map(|(f, wj)| wj[i] * f64::from(f.data()[i * 3 + c])),
            );
            out.push(sum_unordered(&mut terms).max(0.0) as f32);
        }
    }
    Ok(srgb_encode(&LinearImage::new(width, height, out)?))
}

/// Multi-scale blend: the Laplacian pyramid of every frame (linear light,
/// per channel) is weighted by the Gaussian pyramid of its weight map,
/// summed over frames level by level and collapsed.
pub fn fuse_pyramid(frames: &[SrgbImage], w: &WeightMaps, depth: Depth) -> Result<SrgbImage> {
    let (width, height) = check_inputs(frames, w)?;
    let depth = match depth {
        Depth::Auto => auto_depth(width, height),
        Depth::Levels(d) => d,
    };
    let eff = effective_weights(w);
    let weight_pyrs = eff
        .iter()
        .map(|m| {
            let plane = GrayImage::new(width, height, m.iter().map(|&v| v as f32).collect())?;
            gaussian_pyramid(&plane, depth)
        })
        .collect::<Result<Vec<Pyramid>>>()?;
    let frame_pyrs = frames
        .iter()
        .map(|f| {
            let [r, g, b] = srgb_decode(f).planes();
            Ok([
                laplacian_pyramid(&r, depth)?,
                laplacian_pyramid(&g, depth)?,
                laplacian_pyramid(&b, depth)?,
            ])
        })
        .collect::<Result<Vec<[Pyramid; 3]>>>()?;

    let mut terms = Vec::with_capacity(frames.len());
    let mut channels = Vec::with_capacity(3);
    for c in 0..3 {
        let mut levels = Vec::with_capacity(depth);
        for l in 0..depth {
            let (lw, lh) = weight_pyrs[0].levels()[l].dims();
            let data = (0..lw * lh)
                .map(|i| {
                    terms.clear();
                    terms.extend(weight_pyrs.iter().zip(&frame_pyrs).map(|(wp, fp)| {
                        f64::from(wp.levels()[l].data()[i]) * f64::from(fp[c].levels()[l].data()[i])
                    }));
                    sum_unordered(&mut terms) as f32
                })
                .collect();
            levels.push(GrayImage::new(lw, lh, data)?);
        }
        let blended = Pyramid::from_levels(levels, PyramidKind::Laplacian)?;
        channels.push(collapse(&blended)?);
    }
    let channels: [GrayImage; 3] = channels.try_into().expect("three channels");
    Ok(srgb_encode(&LinearImage::from_planes(&channels)?))
}
