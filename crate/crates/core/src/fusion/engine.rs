use std::fmt;
use std::time::Duration;

use crate::ensemble::FusionCandidate;
use crate::error::{Error, Result};
use crate::imgcore::{load_srgb, save_srgb, SrgbImage};
use crate::process::{run_captured, split_command};

use super::{
    fuse_flat, fuse_pyramid, gradient_weights, mertens_weights, normalize_weights, FusionConfig,
    WeightMaps,
};

/// A registered fusion method.
#[derive(Clone, Debug, PartialEq)]
pub enum Engine {
    /// Contrast/saturation/well-exposedness weights, pyramid blend.
    Mertens,
    /// Gradient-magnitude x well-exposedness weights, pyramid blend.
    Gradient,
    /// Mertens weights, single-level (pixel-wise) blend.
    FlatWeighted,
    /// An external program invoked as `argv... <output.png> <frame.png>...`.
    External { argv: Vec<String>, timeout: Duration },
}

impl Engine {
    pub const BUILTIN: [&'static str; 3] = ["mertens", "gradient", "flat-weighted"];

    /// Parses `mertens`, `gradient`, `flat-weighted` or `ext:<command>`.
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim() {
            "mertens" => Ok(Engine::Mertens),
            "gradient" => Ok(Engine::Gradient),
            "flat-weighted" | "flat" => Ok(Engine::FlatWeighted),
            other => match other.strip_prefix("ext:") {
                Some(cmd) if !cmd.trim().is_empty() => Ok(Engine::External {
                    argv: split_command(cmd),
                    timeout: Duration::from_secs(60),
                }),
                _ => Err(Error::UnknownEngine(other.to_owned())),
            },
        }
    }

    pub fn name(&self) -> String {
        match self {
            Engine::Mertens => "mertens".into(),
            Engine::Gradient => "gradient".into(),
            Engine::FlatWeighted => "flat-weighted".into(),
            Engine::External { argv, .. } => format!("ext:{}", argv.join(" ")),
        }
    }

    /// Normalized weight maps, or `None` for external engines.
    pub fn weights(&self, frames: &[SrgbImage], cfg: &FusionConfig) -> Option<Result<WeightMaps>> {
        let raw = match self {
            Engine::Mertens | Engine::FlatWeighted => mertens_weights(frames, cfg),
            Engine::Gradient => gradient_weights(frames, cfg),
            Engine::External { .. } => return None,
        };
        Some(raw.and_then(|w| normalize_weights(&w, cfg.epsilon)))
    }

    pub fn fuse(&self, frames: &[SrgbImage], cfg: &FusionConfig) -> Result<SrgbImage> {
        match self {
            Engine::External { argv, timeout } => run_external(argv, *timeout, frames),
            Engine::FlatWeighted => {
                let w = self.weights(frames, cfg).expect("builtin")?;
                fuse_flat(frames, &w)
            }
            Engine::Mertens | Engine::Gradient => {
                let w = self.weights(frames, cfg).expect("builtin")?;
                fuse_pyramid(frames, &w, cfg.pyramid_depth)
            }
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn run_external(argv: &[String], timeout: Duration, frames: &[SrgbImage]) -> Result<SrgbImage> {
    let engine = argv.join(" ");
    let fail = |cause: String| Error::EngineFailed {
        engine: engine.clone(),
        cause,
    };
    let dir = tempfile::tempdir().map_err(|e| fail(e.to_string()))?;
    let out = dir.path().join("fused.png");
    let mut cmd = argv.to_vec();
    cmd.push(out.display().to_string());
    for (i, frame) in frames.iter().enumerate() {
        let p = dir.path().join(format!("frame{i}.png"));
        save_srgb(&p, frame)?;
        cmd.push(p.display().to_string());
    }
    run_captured(&cmd, timeout).map_err(|e| fail(e.to_string()))?;
    let fused = load_srgb(&out).map_err(|e| fail(e.to_string()))?;
    if fused.dims() != frames[0].dims() {
        return Err(fail(format!(
            "output is {:?}, frames are {:?}",
            fused.dims(),
            frames[0].dims()
        )));
    }
    Ok(fused)
}

/// Runs one engine on a set of frames and wraps the result with its
/// provenance.
pub fn run_engine(frames: &[SrgbImage], engine: &Engine, cfg: &FusionConfig) -> Result<FusionCandidate> {
    let image = engine.fuse(frames, cfg)?;
    Ok(FusionCandidate::from_engine(engine.name(), image))
}
