//! Multi-exposure fusion.
//!
//! Each engine computes per-pixel weights for every frame, normalizes them
//! with `w'_j = w_j / (sum_k w_k + eps)` and composes the frames as the
//! pixel-wise weighted sum `sum_j w'_j * frame_j`. Composition happens in
//! linear light; the result is clipped and re-encoded to sRGB.
//!
//! Per-pixel sums over frames go through [`sum_unordered`], which makes
//! every output bit-identical under any permutation of the input frames.

mod blend;
mod engine;
mod weights;

pub use blend::{effective_weights, fuse_flat, fuse_pyramid};
pub use engine::{run_engine, Engine};
pub use weights::{
    gradient_weights, mertens_weights, normalize_weights, WeightMaps, WELL_EXPOSED_MEAN,
    WELL_EXPOSED_SIGMA,
};

use crate::error::{Error, Result};

/// Default normalization constant; only there to keep 0/0 defined.
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Pyramid depth for blending.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Depth {
    #[default]
    Auto,
    Levels(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionConfig {
    /// Exponents for contrast, saturation and well-exposedness.
    pub exponents: [f32; 3],
    pub epsilon: f64,
    pub pyramid_depth: Depth,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            exponents: [1.0, 1.0, 1.0],
            epsilon: DEFAULT_EPSILON,
            pyramid_depth: Depth::Auto,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidFusionConfig("epsilon must be > 0".into()));
        }
        if self.exponents.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::InvalidFusionConfig("exponents must be >= 0".into()));
        }
        if self.exponents.iter().all(|&e| e == 0.0) {
            return Err(Error::InvalidFusionConfig(
                "at least one exponent must be non-zero".into(),
            ));
        }
        if self.pyramid_depth == Depth::Levels(0) {
            return Err(Error::InvalidFusionConfig("pyramid depth must be >= 1".into()));
        }
        Ok(())
    }
}

/// Sum whose result does not depend on the order of `terms`: the values
/// are sorted before accumulating in `f64`. `terms` is reordered.
#[inline]
pub fn sum_unordered(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}
