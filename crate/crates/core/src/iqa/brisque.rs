use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::imgcore::SrgbImage;
use crate::process::{run_captured, Limiter};
use crate::pyramid::reduce;

use super::mscn::mscn;
use super::niqe::{gray255, nss_features};
use super::{parse_score, IqaScore, Polarity, FEATURE_COUNT};

const HEADER: &str = "brisque-linear v1";

/// Whole-image natural-scene statistics at native and half resolution.
pub fn brisque_features(img: &SrgbImage) -> Result<[f64; FEATURE_COUNT]> {
    let gray = gray255(img);
    let fine = nss_features(&mscn(&gray)?)?;
    let coarse = nss_features(&mscn(&reduce(&gray))?)?;
    let mut out = [0.0; FEATURE_COUNT];
    out[..FEATURE_COUNT / 2].copy_from_slice(&fine);
    out[FEATURE_COUNT / 2..].copy_from_slice(&coarse);
    Ok(out)
}

/// Maps features to a quality score (lower is better).
#[derive(Clone, Debug)]
pub enum BrisqueRegressor {
    /// `bias + sum_i c_i * f_i'` with `f_i'` the feature rescaled from its
    /// `(min, max)` range to `[-1, 1]`.
    Linear {
        coefficients: Vec<f64>,
        bias: f64,
        ranges: Vec<(f64, f64)>,
    },
    /// A program invoked as `argv... <features.txt>`, the file holding the
    /// 36 features separated by whitespace. It prints the score.
    External {
        argv: Vec<String>,
        timeout: Duration,
        limiter: Limiter,
    },
}

impl PartialEq for BrisqueRegressor {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                Self::Linear { coefficients: a, bias: b, ranges: r },
                Self::Linear { coefficients: a2, bias: b2, ranges: r2 },
            ) => a == a2 && b == b2 && r == r2,
            (Self::External { argv: a, timeout: t, .. }, Self::External { argv: a2, timeout: t2, .. }) => {
                a == a2 && t == t2
            }
            _ => false,
        }
    }
}

impl BrisqueRegressor {
    pub fn linear(coefficients: Vec<f64>, bias: f64, ranges: Vec<(f64, f64)>) -> Result<Self> {
        if coefficients.len() != FEATURE_COUNT || ranges.len() != FEATURE_COUNT {
            return Err(Error::InvalidModel(format!(
                "BRISQUE regressor needs {FEATURE_COUNT} coefficients and ranges, got {} and {}",
                coefficients.len(),
                ranges.len()
            )));
        }
        if coefficients.iter().chain([&bias]).any(|c| !c.is_finite())
            || ranges.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return Err(Error::InvalidModel(
                "BRISQUE regressor values must be finite with min <= max".into(),
            ));
        }
        Ok(Self::Linear {
            coefficients,
            bias,
            ranges,
        })
    }

    /// Built-in ranking-only regressor: the sum of the MSCN shape
    /// parameters at both scales.
    pub fn fallback() -> Self {
        let mut coefficients = vec![0.0; FEATURE_COUNT];
        coefficients[0] = 1.0;
        coefficients[FEATURE_COUNT / 2] = 1.0;
        Self::Linear {
            coefficients,
            bias: 2.0,
            ranges: vec![(0.0, 2.0); FEATURE_COUNT],
        }
    }

    pub fn external(argv: Vec<String>, timeout: Duration, limiter: Limiter) -> Self {
        Self::External {
            argv,
            timeout,
            limiter,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingRegressor(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |cause: String| Error::ModelFormat {
            path: path.to_path_buf(),
            cause,
        };
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(HEADER) {
            return Err(bad(format!("expected header {HEADER:?}")));
        }
        let nums = lines
            .flat_map(str::split_whitespace)
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(e.to_string()))?;
        let expected = FEATURE_COUNT + 1 + 2 * FEATURE_COUNT;
        if nums.len() != expected {
            return Err(bad(format!("expected {expected} values, got {}", nums.len())));
        }
        let coefficients = nums[..FEATURE_COUNT].to_vec();
        let bias = nums[FEATURE_COUNT];
        let ranges = nums[FEATURE_COUNT + 1..]
            .chunks(2)
            .map(|p| (p[0], p[1]))
            .collect();
        Self::linear(coefficients, bias, ranges).map_err(|e| bad(e.to_string()))
    }

    /// Writes a linear regressor; external regressors have no file form.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let Self::Linear {
            coefficients,
            bias,
            ranges,
        } = self
        else {
            return Err(Error::InvalidModel(
                "only linear regressors can be saved".into(),
            ));
        };
        let mut s = format!("{HEADER}\n");
        for c in coefficients {
            let _ = write!(s, "{c:e} ");
        }
        let _ = writeln!(s, "{bias:e}");
        for (lo, hi) in ranges {
            let _ = writeln!(s, "{lo:e} {hi:e}");
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn predict(&self, features: &[f64; FEATURE_COUNT]) -> Result<f64> {
        match self {
            Self::Linear {
                coefficients,
                bias,
                ranges,
            } => {
                let mut acc = *bias;
                for ((f, c), (lo, hi)) in features.iter().zip(coefficients).zip(ranges) {
                    let scaled = if hi > lo {
                        2.0 * (f - lo) / (hi - lo) - 1.0
                    } else {
                        0.0
                    };
                    acc += c * scaled;
                }
                Ok(acc)
            }
            Self::External {
                argv,
                timeout,
                limiter,
            } => {
                let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
                let path = dir.path().join("features.txt");
                let text: Vec<String> = features.iter().map(|f| format!("{f:e}")).collect();
                std::fs::write(&path, text.join(" ") + "\n").map_err(|e| Error::io(&path, e))?;
                let mut cmd = argv.clone();
                cmd.push(path.display().to_string());
                let _permit = limiter.acquire();
                parse_score(&run_captured(&cmd, *timeout)?)
            }
        }
    }
}

pub fn brisque(img: &SrgbImage, reg: &BrisqueRegressor) -> Result<IqaScore> {
    let f = brisque_features(img)?;
    Ok(IqaScore::new("brisque", reg.predict(&f)?, Polarity::LowerBetter))
}
