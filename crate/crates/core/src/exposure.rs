//! Exposure manipulation through a simplified ISP: scale linear light by
//! `2^ev`, clip at sensor saturation and apply the sRGB curve.
//!
//! Two entry points build multi-exposure stacks. [`render_mes`] works from
//! a linear (HDR) source and a list of EVs. [`synthesize_mes`] works from a
//! single 8-bit image and a list of target mean intensities ("style codes"),
//! solving for the gain that reaches each target.

use crate::error::{Error, Result};
use crate::imgcore::{decode_code, encode_value, srgb_encode, LinearImage, SrgbImage};

/// EV brackets rendered per source when none are given.
pub const DEFAULT_EVS: [f64; 7] = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];

/// Style-code targets used to synthesize a stack from one 8-bit image.
pub const DEFAULT_TARGETS: [f64; 3] = [0.25, 0.5, 0.75];

/// Tolerance on the achieved mean intensity.
pub const RETARGET_TOLERANCE: f64 = 1e-3;

/// Gain search range in stops, either side of zero.
pub const MAX_GAIN_STOPS: f64 = 10.0;

const BISECTION_STEPS: usize = 40;

/// An ordered multi-exposure sequence of one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct ExposureStack {
    frames: Vec<SrgbImage>,
    evs: Vec<f64>,
    source_id: String,
}

impl ExposureStack {
    pub fn new(frames: Vec<SrgbImage>, evs: Vec<f64>, source_id: impl Into<String>) -> Result<Self> {
        if frames.len() != evs.len() {
            return Err(Error::InvalidStack(format!(
                "{} frames but {} EV labels",
                frames.len(),
                evs.len()
            )));
        }
        if frames.len() < 2 {
            return Err(Error::StackTooShort(frames.len()));
        }
        let dims = frames[0].dims();
        if let Some(f) = frames.iter().find(|f| f.dims() != dims) {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: f.dims(),
            });
        }
        if evs.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidStack("non-finite EV label".into()));
        }
        for pair in evs.windows(2) {
            if pair[1] == pair[0] {
                return Err(Error::DuplicateExposure(pair[0]));
            }
            if pair[1] < pair[0] {
                return Err(Error::InvalidStack("EV labels must be increasing".into()));
            }
        }
        Ok(Self {
            frames,
            evs,
            source_id: source_id.into(),
        })
    }

    pub fn frames(&self) -> &[SrgbImage] {
        &self.frames
    }

    pub fn evs(&self) -> &[f64] {
        &self.evs
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }
}

/// Mean intensity in (0, 1) used as an exposure target.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct StyleCode(f64);

impl StyleCode {
    pub fn new(z: f64) -> Result<Self> {
        if z > 0.0 && z < 1.0 {
            Ok(Self(z))
        } else {
            Err(Error::InvalidStyleCode(z))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn render_ev(img: &LinearImage, ev: f64) -> SrgbImage {
    srgb_encode(&img.scaled(ev.exp2() as f32))
}

/// Renders one frame per EV. The list is sorted first; duplicates are an
/// error, as is anything shorter than two frames.
pub fn render_mes(img: &LinearImage, evs: &[f64], source_id: &str) -> Result<ExposureStack> {
    let mut sorted = evs.to_vec();
    if sorted.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidStack("non-finite EV".into()));
    }
    sorted.sort_by(f64::total_cmp);
    if let Some(pair) = sorted.windows(2).find(|p| p[0] == p[1]) {
        return Err(Error::DuplicateExposure(pair[0]));
    }
    if sorted.len() < 2 {
        return Err(Error::StackTooShort(sorted.len()));
    }
    let frames = sorted.iter().map(|&ev| render_ev(img, ev)).collect();
    ExposureStack::new(frames, sorted, source_id)
}

/// Outcome of a gain search.
#[derive(Clone, Debug, PartialEq)]
pub struct Retarget {
    pub image: SrgbImage,
    /// Linear gain applied to the decoded input.
    pub gain: f64,
    /// Mean intensity of `image`.
    pub achieved: f64,
    /// False when no gain within +/-10 stops met the tolerance; `image` is
    /// then the closest result found.
    pub reachable: bool,
}

/// Code histogram of an sRGB image, so the mean after any gain costs 256
/// evaluations instead of a pass over the pixels.
struct CodeHistogram {
    counts: [u64; 256],
    total: u64,
}

impl CodeHistogram {
    fn new(img: &SrgbImage) -> Self {
        let mut counts = [0u64; 256];
        for &c in img.data() {
            counts[c as usize] += 1;
        }
        Self {
            counts,
            total: img.data().len() as u64,
        }
    }

    fn mean_after_gain(&self, gain: f32) -> f64 {
        let sum: u64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(code, &n)| n * u64::from(encode_value(decode_code(code as u8) * gain)))
            .sum();
        sum as f64 / (self.total as f64 * 255.0)
    }
}

fn apply_gain(img: &SrgbImage, gain: f32) -> SrgbImage {
    let mut lut = [0u8; 256];
    for (code, slot) in lut.iter_mut().enumerate() {
        *slot = encode_value(decode_code(code as u8) * gain);
    }
    let data = img.data().iter().map(|&c| lut[c as usize]).collect();
    SrgbImage::new(img.width(), img.height(), data).expect("same dims")
}

/// Re-exposes an 8-bit image so its mean intensity matches `target`.
///
/// Bisection runs over log2 gain in [-10, 10]; the first probe is gain 1,
/// so a target equal to the current mean returns the input unchanged.
pub fn retarget_exposure(img: &SrgbImage, target: StyleCode) -> Result<Retarget> {
    if img.data().is_empty() {
        return Err(Error::EmptyInput);
    }
    let hist = CodeHistogram::new(img);
    if hist.counts[0] == hist.total {
        return Err(Error::ZeroIntensity);
    }
    let z = target.value();
    let eval = |stops: f64| hist.mean_after_gain(stops.exp2() as f32);

    // targets outside the achievable range resolve to the boundary gain
    let (lo_mean, hi_mean) = (eval(-MAX_GAIN_STOPS), eval(MAX_GAIN_STOPS));
    let boundary = if z > hi_mean + RETARGET_TOLERANCE {
        Some((MAX_GAIN_STOPS, hi_mean))
    } else if z < lo_mean - RETARGET_TOLERANCE {
        Some((-MAX_GAIN_STOPS, lo_mean))
    } else {
        None
    };

    let (best_stops, best_mean) = match boundary {
        Some(b) => b,
        None => {
            let mut best = (f64::INFINITY, 0.0, 0.0);
            let (mut lo, mut hi) = (-MAX_GAIN_STOPS, MAX_GAIN_STOPS);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                let mean = eval(mid);
                let err = (mean - z).abs();
                if err < best.0 {
                    best = (err, mid, mean);
                }
                if err <= RETARGET_TOLERANCE {
                    break;
                }
                if mean < z {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (best.1, best.2)
        }
    };
    let best_err = (best_mean - z).abs();

    let gain = best_stops.exp2();
    Ok(Retarget {
        image: apply_gain(img, gain as f32),
        gain,
        achieved: best_mean,
        reachable: best_err <= RETARGET_TOLERANCE,
    })
}

/// Builds a pseudo stack from one 8-bit image, one frame per target.
/// Frames are labelled `log2(gain)`. Returns the per-frame search reports
/// alongside the stack.
pub fn synthesize_mes(
    img: &SrgbImage,
    targets: &[StyleCode],
    source_id: &str,
) -> Result<(ExposureStack, Vec<Retarget>)> {
    if targets.windows(2).any(|p| p[1].value() <= p[0].value()) {
        return Err(Error::InvalidStack(
            "style-code targets must be strictly increasing".into(),
        ));
    }
    let reports = targets
        .iter()
        .map(|&t| retarget_exposure(img, t))
        .collect::<Result<Vec<_>>>()?;
    let frames = reports.iter().map(|r| r.image.clone()).collect();
    let evs = reports.iter().map(|r| r.gain.log2()).collect();
    let stack = ExposureStack::new(frames, evs, source_id)?;
    Ok((stack, reports))
}
