//! Moment-matching fit of an asymmetric generalized Gaussian.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub const ALPHA_MIN: f64 = 0.2;
pub const ALPHA_MAX: f64 = 10.0;
pub const ALPHA_STEP: f64 = 1e-3;
pub const MIN_SAMPLES: usize = 100;

/// Fitted shape and one-sided spreads.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggdFit {
    pub alpha: f64,
    /// RMS of the negative samples.
    pub sigma_l: f64,
    /// RMS of the positive samples.
    pub sigma_r: f64,
    /// Mean of the squared samples.
    pub mean_square: f64,
}

impl AggdFit {
    fn scale_factor(&self) -> f64 {
        (0.5 * (ln_gamma(1.0 / self.alpha) - ln_gamma(3.0 / self.alpha))).exp()
    }

    pub fn beta_l(&self) -> f64 {
        self.sigma_l * self.scale_factor()
    }

    pub fn beta_r(&self) -> f64 {
        self.sigma_r * self.scale_factor()
    }

    /// Mean of the fitted distribution.
    pub fn mean(&self) -> f64 {
        (self.beta_r() - self.beta_l())
            * (ln_gamma(2.0 / self.alpha) - ln_gamma(1.0 / self.alpha)).exp()
    }
}

/// `rho(a) = Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a))`, increasing in `a`.
pub fn generalized_gaussian_ratio(alpha: f64) -> f64 {
    (2.0 * ln_gamma(2.0 / alpha) - ln_gamma(1.0 / alpha) - ln_gamma(3.0 / alpha)).exp()
}

struct AlphaGrid {
    alphas: Vec<f64>,
    ratios: Vec<f64>,
}

fn grid() -> &'static AlphaGrid {
    static GRID: OnceLock<AlphaGrid> = OnceLock::new();
    GRID.get_or_init(|| {
        let n = ((ALPHA_MAX - ALPHA_MIN) / ALPHA_STEP).round() as usize + 1;
        let alphas: Vec<f64> = (0..n).map(|i| ALPHA_MIN + i as f64 * ALPHA_STEP).collect();
        let ratios = alphas.iter().map(|&a| generalized_gaussian_ratio(a)).collect();
        AlphaGrid { alphas, ratios }
    })
}

/// Grid alpha whose ratio is nearest to `r`.
fn lookup_alpha(r: f64) -> f64 {
    let g = grid();
    let idx = g.ratios.partition_point(|&v| v < r);
    let best = match idx {
        0 => 0,
        i if i >= g.ratios.len() => g.ratios.len() - 1,
        i => {
            if (g.ratios[i] - r).abs() < (r - g.ratios[i - 1]).abs() {
                i
            } else {
                i - 1
            }
        }
    };
    g.alphas[best]
}

/// Fits `(alpha, sigma_l, sigma_r)` to the samples.
pub fn fit_aggd(samples: &[f64]) -> Result<AggdFit> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: samples.len(),
            need: MIN_SAMPLES,
        });
    }
    let (mut sum_l, mut n_l, mut sum_r, mut n_r) = (0.0, 0usize, 0.0, 0usize);
    let (mut sum_abs, mut sum_sq, mut sum) = (0.0, 0.0, 0.0);
    for &x in samples {
        if x < 0.0 {
            sum_l += x * x;
            n_l += 1;
        } else if x > 0.0 {
            sum_r += x * x;
            n_r += 1;
        }
        sum_abs += x.abs();
        sum_sq += x * x;
        sum += x;
    }
    let n = samples.len() as f64;
    let mean = sum / n;
    let variance = sum_sq / n - mean * mean;
    if n_l == 0 || n_r == 0 || variance.is_nan() || variance <= 1e-12 * (sum_sq / n) || sum_sq == 0.0 {
        return Err(Error::InsufficientVariance);
    }
    let sigma_l = (sum_l / n_l as f64).sqrt();
    let sigma_r = (sum_r / n_r as f64).sqrt();
    let gamma_hat = sigma_l / sigma_r;
    let r_hat = (sum_abs / n).powi(2) / (sum_sq / n);
    let r_norm = r_hat * (gamma_hat.powi(3) + 1.0) * (gamma_hat + 1.0)
        / (gamma_hat * gamma_hat + 1.0).powi(2);
    Ok(AggdFit {
        alpha: lookup_alpha(r_norm),
        sigma_l,
        sigma_r,
        mean_square: sum_sq / n,
    })
}
