//! No-reference quality metrics: NIQE, BRISQUE and external scorers.

mod aggd;
mod brisque;
mod external;
mod mscn;
mod niqe;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use aggd::{fit_aggd, generalized_gaussian_ratio, AggdFit, ALPHA_MAX, ALPHA_MIN, ALPHA_STEP, MIN_SAMPLES};
pub use brisque::{brisque, brisque_features, BrisqueRegressor};
pub use external::{external_score, ExternalScorer, DEFAULT_CONCURRENCY, DEFAULT_TIMEOUT};
pub use mscn::{mscn, mscn_field, MscnField, MSCN_MIN_DIM};
pub use niqe::{
    fit_niqe_model, gray255, niqe, niqe_features, FeatureVector, NiqeModel, DEFAULT_PATCH_SIZE,
    DEFAULT_SHARPNESS_FRACTION, MIN_CORPUS,
};

use crate::error::{Error, Result};
use crate::imgcore::SrgbImage;

/// Length of the NIQE/BRISQUE feature vector (18 per scale, 2 scales).
pub const FEATURE_COUNT: usize = 36;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarity {
    LowerBetter,
    HigherBetter,
}

impl Polarity {
    /// Orders two scores so that the better one comes first.
    pub fn best_first(self, a: f64, b: f64) -> Ordering {
        match self {
            Polarity::LowerBetter => a.total_cmp(&b),
            Polarity::HigherBetter => b.total_cmp(&a),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::LowerBetter => "lower-better",
            Polarity::HigherBetter => "higher-better",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "lower-better" | "lower" => Ok(Polarity::LowerBetter),
            "higher-better" | "higher" => Ok(Polarity::HigherBetter),
            other => Err(format!("unknown polarity {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IqaScore {
    pub metric: String,
    pub value: f64,
    pub polarity: Polarity,
}

impl IqaScore {
    pub fn new(metric: impl Into<String>, value: f64, polarity: Polarity) -> Self {
        Self {
            metric: metric.into(),
            value,
            polarity,
        }
    }
}

/// Parses scorer output: the whole trimmed text must be one finite number.
pub(crate) fn parse_score(out: &str) -> Result<f64> {
    let t = out.trim();
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::ScorerOutput(t.chars().take(80).collect())),
    }
}

/// A configured metric. Models are shared, so cloning is cheap.
#[derive(Clone, Debug)]
pub enum Scorer {
    Niqe(Arc<NiqeModel>),
    Brisque(Arc<BrisqueRegressor>),
    External(ExternalScorer),
}

impl Scorer {
    pub fn name(&self) -> &str {
        match self {
            Scorer::Niqe(_) => "niqe",
            Scorer::Brisque(_) => "brisque",
            Scorer::External(s) => &s.name,
        }
    }

    pub fn polarity(&self) -> Polarity {
        match self {
            Scorer::Niqe(_) | Scorer::Brisque(_) => Polarity::LowerBetter,
            Scorer::External(s) => s.polarity,
        }
    }

    pub fn score(&self, img: &SrgbImage) -> Result<IqaScore> {
        let s = match self {
            Scorer::Niqe(m) => niqe(img, m)?,
            Scorer::Brisque(r) => brisque(img, r)?,
            Scorer::External(s) => s.score(img)?,
        };
        if !s.value.is_finite() {
            return Err(Error::NonFiniteScore(s.metric));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polarity_ordering() {
        assert_eq!(Polarity::LowerBetter.best_first(1.0, 2.0), Ordering::Less);
        assert_eq!(Polarity::HigherBetter.best_first(1.0, 2.0), Ordering::Greater);
        assert_eq!("higher-better".parse::<Polarity>().unwrap(), Polarity::HigherBetter);
        assert_eq!(Polarity::LowerBetter.to_string(), "lower-better");
        assert!("sideways".parse::<Polarity>().is_err());
    }

    #[test]
    fn score_parsing() {
        assert_eq!(parse_score(" 0.7\n").unwrap(), 0.7);
        assert_eq!(parse_score("-3e-2").unwrap(), -0.03);
        for bad in ["abc", "", "0.5 0.6", "nan", "inf"] {
            assert!(matches!(parse_score(bad), Err(Error::ScorerOutput(_))), "{bad}");
        }
    }
}
