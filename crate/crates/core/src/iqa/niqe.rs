//! NIQE: distance between a multivariate Gaussian fitted to natural-scene
//! statistics of a pristine corpus and one fitted to the test image.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::imgcore::{luminance, GrayImage, SrgbImage};
use crate::pyramid::reduce;

use super::aggd::fit_aggd;
use super::mscn::mscn_field;
use super::{IqaScore, Polarity, FEATURE_COUNT};

pub const DEFAULT_PATCH_SIZE: usize = 96;
pub const DEFAULT_SHARPNESS_FRACTION: f64 = 0.75;
pub const MIN_CORPUS: usize = 10;
const MODEL_HEADER: &str = "niqe-model v1";

pub type FeatureVector = [f64; FEATURE_COUNT];

/// Pristine model: mean and covariance of pooled patch features.
#[derive(Clone, Debug, PartialEq)]
pub struct NiqeModel {
    pub feature_mean: Vec<f64>,
    /// Row-major 36x36.
    pub feature_cov: Vec<f64>,
    pub patch_size: usize,
    pub sharpness_fraction: f64,
}

fn check_patch_params(patch_size: usize, sharpness_fraction: f64) -> Result<()> {
    if patch_size < 32 || !patch_size.is_multiple_of(2) {
        return Err(Error::InvalidModel(format!(
            "NIQE patch size must be even and >= 32, got {patch_size}"
        )));
    }
    if !(sharpness_fraction > 0.0 && sharpness_fraction <= 1.0) {
        return Err(Error::InvalidModel(format!(
            "sharpness fraction must lie in (0, 1], got {sharpness_fraction}"
        )));
    }
    Ok(())
}

/// Natural-scene statistics of one MSCN block: the AGGD fit of the
/// coefficients (shape, mean square) and of the horizontal, vertical and
/// two diagonal neighbour products (shape, mean, left and right variance).
pub(crate) fn nss_features(block: &GrayImage) -> Result<[f64; FEATURE_COUNT / 2]> {
    let (w, h) = block.dims();
    let v = |x: usize, y: usize| f64::from(block.get(x, y));
    let mut out = [0.0; FEATURE_COUNT / 2];
    let all: Vec<f64> = block.data().iter().map(|&x| f64::from(x)).collect();
    let fit = fit_aggd(&all)?;
    out[0] = fit.alpha;
    out[1] = fit.mean_square;
    let mut buf = Vec::with_capacity(w * h);
    // (dx, dy) offsets of the neighbour: right, below, below-right, below-left
    let shifts: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (-1, 1)];
    for (k, (dx, dy)) in shifts.into_iter().enumerate() {
        buf.clear();
        for y in 0..h {
            let ny = y as isize + dy;
            if ny >= h as isize {
                continue;
            }
            for x in 0..w {
                let nx = x as isize + dx;
                if nx < 0 || nx >= w as isize {
                    continue;
                }
                buf.push(v(x, y) * v(nx as usize, ny as usize));
            }
        }
        let fit = fit_aggd(&buf)?;
        let base = 2 + 4 * k;
        out[base] = fit.alpha;
        out[base + 1] = fit.mean();
        out[base + 2] = fit.sigma_l * fit.sigma_l;
        out[base + 3] = fit.sigma_r * fit.sigma_r;
    }
    Ok(out)
}

/// Rec. 709 luminance on the 0..255 scale the metrics are defined on.
pub fn gray255(img: &SrgbImage) -> GrayImage {
    luminance(img).map(|v| v * 255.0)
}

/// Patch features at two scales (native and 2x reduced). The image is
/// cropped to whole patches. A patch is kept when its mean local deviation
/// reaches the `sharpness_fraction` quantile (linearly interpolated) over all
/// patches and is non-zero; patches with degenerate statistics are dropped.
pub fn niqe_features(
    img: &GrayImage,
    patch_size: usize,
    sharpness_fraction: f64,
) -> Result<Vec<FeatureVector>> {
    check_patch_params(patch_size, sharpness_fraction)?;
    let (w, h) = img.dims();
    let (nx, ny) = (w / patch_size, h / patch_size);
    if nx == 0 || ny == 0 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: patch_size,
        });
    }
    let cropped = img.crop(0, 0, nx * patch_size, ny * patch_size);
    let fine = mscn_field(&cropped)?;
    let coarse = mscn_field(&reduce(&cropped))?.coefficients;
    let half = patch_size / 2;

    let sharpness: Vec<f64> = (0..nx * ny)
        .map(|p| {
            let (px, py) = (p % nx, p / nx);
            let patch = fine
                .local_sigma
                .crop(px * patch_size, py * patch_size, patch_size, patch_size);
            patch.data().iter().map(|&s| f64::from(s)).sum::<f64>() / patch.data().len() as f64
        })
        .collect();
    let mut sorted = sharpness.clone();
    sorted.sort_by(f64::total_cmp);
    let pos = sharpness_fraction * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let threshold = sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]);

    let mut features = Vec::new();
    for (p, &s) in sharpness.iter().enumerate() {
        if !(s >= threshold && s > 0.0) {
            continue;
        }
        let (px, py) = (p % nx, p / nx);
        let a = fine
            .coefficients
            .crop(px * patch_size, py * patch_size, patch_size, patch_size);
        let b = coarse.crop(px * half, py * half, half, half);
        let (Ok(fa), Ok(fb)) = (nss_features(&a), nss_features(&b)) else {
            continue;
        };
        let mut v = [0.0; FEATURE_COUNT];
        v[..FEATURE_COUNT / 2].copy_from_slice(&fa);
        v[FEATURE_COUNT / 2..].copy_from_slice(&fb);
        features.push(v);
    }
    if features.is_empty() {
        return Err(Error::NoValidPatches);
    }
    Ok(features)
}

/// Mean and (n - 1)-normalized covariance. Rows are sorted first so the
/// result does not depend on their order. A single row gives zero
/// covariance.
fn moments(mut rows: Vec<FeatureVector>) -> (Vec<f64>, Vec<f64>) {
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let n = rows.len() as f64;
    let mut mean = vec![0.0; FEATURE_COUNT];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; FEATURE_COUNT * FEATURE_COUNT];
    if rows.len() > 1 {
        for r in &rows {
            for i in 0..FEATURE_COUNT {
                let di = r[i] - mean[i];
                for j in i..FEATURE_COUNT {
                    cov[i * FEATURE_COUNT + j] += di * (r[j] - mean[j]);
                }
            }
        }
        for i in 0..FEATURE_COUNT {
            for j in i..FEATURE_COUNT {
                let v = cov[i * FEATURE_COUNT + j] / (n - 1.0);
                cov[i * FEATURE_COUNT + j] = v;
                cov[j * FEATURE_COUNT + i] = v;
            }
        }
    }
    (mean, cov)
}

fn pseudo_inverse(m: DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.svd(true, true);
    let max_sv = svd.singular_values.max();
    let tol = max_sv * FEATURE_COUNT as f64 * f64::EPSILON;
    if max_sv == 0.0 {
        return DMatrix::zeros(FEATURE_COUNT, FEATURE_COUNT);
    }
    svd.pseudo_inverse(tol).expect("tolerance is non-negative")
}

/// Numerical rank of a covariance matrix.
fn rank(cov: &[f64]) -> usize {
    let m = DMatrix::from_row_slice(FEATURE_COUNT, FEATURE_COUNT, cov);
    let sv = m.singular_values();
    let tol = sv.max() * FEATURE_COUNT as f64 * f64::EPSILON;
    sv.iter().filter(|&&s| s > tol).count()
}

impl NiqeModel {
    pub fn new(
        feature_mean: Vec<f64>,
        feature_cov: Vec<f64>,
        patch_size: usize,
        sharpness_fraction: f64,
    ) -> Result<Self> {
        check_patch_params(patch_size, sharpness_fraction)?;
        if feature_mean.len() != FEATURE_COUNT || feature_cov.len() != FEATURE_COUNT * FEATURE_COUNT {
            return Err(Error::InvalidModel(
                "NIQE model needs a 36-vector and a 36x36 matrix".into(),
            ));
        }
        for i in 0..FEATURE_COUNT {
            for j in 0..i {
                let (a, b) = (feature_cov[i * FEATURE_COUNT + j], feature_cov[j * FEATURE_COUNT + i]);
                if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidModel(format!(
                        "NIQE covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            feature_mean,
            feature_cov,
            patch_size,
            sharpness_fraction,
        })
    }

    pub fn covariance_rank(&self) -> usize {
        rank(&self.feature_cov)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut s = String::new();
        let _ = writeln!(s, "{MODEL_HEADER}");
        let _ = writeln!(s, "{} {}", self.patch_size, self.sharpness_fraction);
        let join = |xs: &[f64]| xs.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "{}", join(&self.feature_mean));
        for row in self.feature_cov.chunks(FEATURE_COUNT) {
            let _ = writeln!(s, "{}", join(row));
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |cause: String| Error::ModelFormat {
            path: path.to_path_buf(),
            cause,
        };
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MODEL_HEADER) {
            return Err(bad(format!("expected header {MODEL_HEADER:?}")));
        }
        let nums = |line: Option<&str>, n: usize, what: &str| -> Result<Vec<f64>> {
            let line = line.ok_or_else(|| bad(format!("missing {what}")))?;
            let v = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("{what}: {e}")))?;
            if v.len() != n {
                return Err(bad(format!("{what}: expected {n} values, got {}", v.len())));
            }
            Ok(v)
        };
        let params = nums(lines.next(), 2, "patch parameters")?;
        if params[0].fract() != 0.0 || params[0] < 1.0 {
            return Err(bad(format!("invalid patch size {}", params[0])));
        }
        let mean = nums(lines.next(), FEATURE_COUNT, "feature means")?;
        let mut cov = Vec::with_capacity(FEATURE_COUNT * FEATURE_COUNT);
        for r in 0..FEATURE_COUNT {
            cov.extend(nums(lines.next(), FEATURE_COUNT, &format!("covariance row {}", r + 1))?);
        }
        Self::new(mean, cov, params[0] as usize, params[1]).map_err(|e| bad(e.to_string()))
    }
}

/// Fits a pristine model from a corpus of clean images.
pub fn fit_niqe_model(
    corpus: &[SrgbImage],
    patch_size: usize,
    sharpness_fraction: f64,
) -> Result<NiqeModel> {
    if corpus.len() < MIN_CORPUS {
        return Err(Error::CorpusTooSmall {
            got: corpus.len(),
            need: MIN_CORPUS,
        });
    }
    let mut rows = Vec::new();
    for img in corpus {
        match niqe_features(&gray255(img), patch_size, sharpness_fraction) {
            Ok(f) => rows.extend(f),
            Err(Error::NoValidPatches) => log::warn!("corpus image contributes no patches"),
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(Error::NoValidPatches);
    }
    let (mean, cov) = moments(rows);
    let model = NiqeModel::new(mean, cov, patch_size, sharpness_fraction)?;
    let r = model.covariance_rank();
    if r < FEATURE_COUNT {
        log::warn!("NIQE covariance is rank-deficient ({r} of {FEATURE_COUNT}); scoring uses the pseudo-inverse");
    }
    Ok(model)
}

/// Mahalanobis-like distance between the model and the image's patch
/// statistics, pooling both covariances.
pub fn niqe(img: &SrgbImage, model: &NiqeModel) -> Result<IqaScore> {
    let feats = niqe_features(&gray255(img), model.patch_size, model.sharpness_fraction)?;
    let (mean, cov) = moments(feats);
    let d = DVector::from_iterator(
        FEATURE_COUNT,
        model.feature_mean.iter().zip(&mean).map(|(a, b)| a - b),
    );
    let pooled = DMatrix::from_iterator(
        FEATURE_COUNT,
        FEATURE_COUNT,
        model.feature_cov.iter().zip(&cov).map(|(a, b)| 0.5 * (a + b)),
    );
    let inv = pseudo_inverse(pooled);
    let q = d.dot(&(inv * &d));
    Ok(IqaScore::new("niqe", q.max(0.0).sqrt(), Polarity::LowerBetter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn corpus(n: usize, size: usize) -> Vec<SrgbImage> {
        (0..n as u64).map(|s| synth::natural_srgb(s + 100, size, size)).collect()
    }

    #[test]
    fn features_have_expected_shape() {
        let img = synth::natural_srgb(3, 200, 150);
        let f = niqe_features(&gray255(&img), 48, 0.75).unwrap();
        assert!(!f.is_empty() && f.len() <= 4 * 3);
        for v in &f {
            assert!(v.iter().all(|x| x.is_finite()));
            // shape parameters on the grid
            for idx in [0, 2, 6, 10, 14, 18, 20, 24, 28, 32] {
                assert!((0.2..=10.0).contains(&v[idx]));
            }
        }
    }

    #[test]
    fn constant_image_has_no_valid_patches() {
        let img = SrgbImage::filled(128, 128, [90, 90, 90]);
        let err = niqe_features(&gray255(&img), 64, 0.75).unwrap_err();
        assert_eq!(err.to_string(), "no valid patches");
    }

    #[test]
    fn small_corpus_rejected() {
        let c = corpus(3, 64);
        assert!(matches!(fit_niqe_model(&c, 32, 0.75), Err(Error::CorpusTooSmall { .. })));
    }

    #[test]
    fn model_is_order_invariant_and_round_trips() {
        let mut c = corpus(10, 128);
        let a = fit_niqe_model(&c, 64, 0.75).unwrap();
        c.reverse();
        c.swap(2, 7);
        let b = fit_niqe_model(&c, 64, 0.75).unwrap();
        assert_eq!(a, b);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        a.save(&p).unwrap();
        assert_eq!(NiqeModel::load(&p).unwrap(), a);
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 39);
        assert!(text.starts_with("niqe-model v1\n64 0.75\n"));
    }

    #[test]
    fn load_rejects_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        std::fs::write(&p, "niqe-model v1\n96 0.75\n1 2 3\n").unwrap();
        assert!(matches!(NiqeModel::load(&p), Err(Error::ModelFormat { .. })));
        std::fs::write(&p, "something else\n").unwrap();
        assert!(NiqeModel::load(&p).is_err());
    }

    #[test]
    fn score_is_deterministic() {
        let model = fit_niqe_model(&corpus(10, 128), 64, 0.75).unwrap();
        let img = synth::natural_srgb(999, 128, 128);
        let a = niqe(&img, &model).unwrap();
        let b = niqe(&img, &model).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert!(a.value.is_finite() && a.value >= 0.0);
    }
}
