use std::time::Duration;

use crate::error::{Error, Result};
use crate::imgcore::{save_srgb, SrgbImage};
use crate::process::{run_captured, Limiter};

use super::{parse_score, IqaScore, Polarity};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
pub const DEFAULT_CONCURRENCY: usize = 4;

/// A scoring program invoked as `argv... <image.png>` that prints one
/// decimal number.
#[derive(Clone, Debug)]
pub struct ExternalScorer {
    pub name: String,
    pub argv: Vec<String>,
    pub polarity: Polarity,
    pub timeout: Duration,
    limiter: Limiter,
}

impl ExternalScorer {
    pub fn new(name: impl Into<String>, argv: Vec<String>, polarity: Polarity) -> Self {
        Self {
            name: name.into(),
            argv,
            polarity,
            timeout: DEFAULT_TIMEOUT,
            limiter: Limiter::new(DEFAULT_CONCURRENCY),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Shares a concurrency cap with other scorers.
    pub fn with_limiter(mut self, limiter: Limiter) -> Self {
        self.limiter = limiter;
        self
    }

    pub fn score(&self, img: &SrgbImage) -> Result<IqaScore> {
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let path = dir.path().join("image.png");
        save_srgb(&path, img)?;
        let mut cmd = self.argv.clone();
        cmd.push(path.display().to_string());
        let out = {
            let _permit = self.limiter.acquire();
            run_captured(&cmd, self.timeout)?
        };
        Ok(IqaScore::new(self.name.clone(), parse_score(&out)?, self.polarity))
    }
}

/// Convenience wrapper around [`ExternalScorer::score`].
pub fn external_score(img: &SrgbImage, scorer: &ExternalScorer) -> Result<IqaScore> {
    scorer.score(img)
}
