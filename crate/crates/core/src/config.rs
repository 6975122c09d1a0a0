//! `key = value` configuration for dataset generation.
//!
//! Blank lines and text after `#` are ignored. Lists are comma separated.
//! Relative paths resolve against the config file's directory. External
//! scorers are declared as `scorer.<name>.command`, `scorer.<name>.polarity`
//! and optionally `scorer.<name>.timeout` (seconds), then referenced by name
//! in `metrics` or `quality_metric`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use crate::dataset::Pairing;
use crate::ensemble::{EnsembleConfig, QualityGate};
use crate::error::{Error, Result};
use crate::exposure::{DEFAULT_EVS, DEFAULT_TARGETS};
use crate::fusion::{Depth, Engine, FusionConfig, DEFAULT_EPSILON};
use crate::iqa::{BrisqueRegressor, ExternalScorer, NiqeModel, Polarity, Scorer, DEFAULT_CONCURRENCY};
use crate::process::{split_command, Limiter};

type PartialScorer = (Option<Vec<String>>, Option<Polarity>, Option<f64>, usize);

#[derive(Clone, Debug, PartialEq)]
pub struct ScorerSpec {
    pub command: Vec<String>,
    pub polarity: Polarity,
    pub timeout_secs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub engines: Vec<String>,
    pub metrics: Vec<String>,
    pub scorers: BTreeMap<String, ScorerSpec>,
    pub scorer_concurrency: usize,
    pub niqe_model: Option<PathBuf>,
    pub brisque_model: Option<PathBuf>,
    pub n_blends: usize,
    pub blend_pick: usize,
    pub calibration_groups: usize,
    pub calibration_sources: usize,
    pub seed: u64,
    pub quality_metric: Option<String>,
    pub quality_threshold: f64,
    pub evs: Vec<f64>,
    pub from_srgb: bool,
    pub targets: Vec<f64>,
    pub pairing: Pairing,
    pub epsilon: f64,
    pub exponents: [f32; 3],
    pub pyramid_depth: Depth,
    pub engine_timeout_secs: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            engines: Engine::BUILTIN.iter().map(|s| s.to_string()).collect(),
            metrics: vec!["niqe".into()],
            scorers: BTreeMap::new(),
            scorer_concurrency: DEFAULT_CONCURRENCY,
            niqe_model: None,
            brisque_model: None,
            n_blends: 10,
            blend_pick: 3,
            calibration_groups: 1000,
            calibration_sources: 64,
            seed: 0,
            quality_metric: None,
            quality_threshold: 0.5,
            evs: DEFAULT_EVS.to_vec(),
            from_srgb: false,
            targets: DEFAULT_TARGETS.to_vec(),
            pairing: Pairing::AllFrames,
            epsilon: DEFAULT_EPSILON,
            exponents: [1.0, 1.0, 1.0],
            pyramid_depth: Depth::Auto,
            engine_timeout_secs: 60.0,
        }
    }
}

fn list(v: &str) -> Vec<String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

fn parse<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("{v:?}: {e}"))
}

fn parse_floats(v: &str) -> std::result::Result<Vec<f64>, String> {
    list(v).iter().map(|s| parse::<f64>(s)).collect()
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got {v:?}")),
    }
}

fn parse_depth(v: &str) -> std::result::Result<Depth, String> {
    if v == "auto" {
        Ok(Depth::Auto)
    } else {
        parse::<usize>(v).map(Depth::Levels)
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, path, base)
    }

    /// Parses config text; `origin` only labels errors.
    pub fn parse(text: &str, origin: &Path, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut partial: BTreeMap<String, PartialScorer> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |cause: String| Error::Config {
                path: origin.to_path_buf(),
                line: line_no,
                cause,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let (key, v) = (key.trim(), value.trim());
            let resolve = |v: &str| {
                let p = PathBuf::from(v);
                if p.is_absolute() {
                    p
                } else {
                    base.join(p)
                }
            };
            let r: std::result::Result<(), String> = (|| {
                match key {
                    "engines" => cfg.engines = list(v),
                    "metrics" => cfg.metrics = list(v),
                    "scorer_concurrency" => cfg.scorer_concurrency = parse(v)?,
                    "niqe_model" => cfg.niqe_model = Some(resolve(v)),
                    "brisque_model" => cfg.brisque_model = Some(resolve(v)),
                    "n_blends" => cfg.n_blends = parse(v)?,
                    "blend_pick" => cfg.blend_pick = parse(v)?,
                    "calibration_groups" => cfg.calibration_groups = parse(v)?,
                    "calibration_sources" => cfg.calibration_sources = parse(v)?,
                    "seed" => cfg.seed = parse(v)?,
                    "quality_metric" => {
                        cfg.quality_metric = match v {
                            "" | "none" => None,
                            name => Some(name.to_owned()),
                        }
                    }
                    "quality_threshold" => cfg.quality_threshold = parse(v)?,
                    "evs" => cfg.evs = parse_floats(v)?,
                    "from_srgb" => cfg.from_srgb = parse_bool(v)?,
                    "targets" => cfg.targets = parse_floats(v)?,
                    "pairing" => cfg.pairing = parse(v)?,
                    "epsilon" => cfg.epsilon = parse(v)?,
                    "exponents" => {
                        let e = parse_floats(v)?;
                        if e.len() != 3 {
                            return Err(format!("exponents needs 3 values, got {}", e.len()));
                        }
                        cfg.exponents = [e[0] as f32, e[1] as f32, e[2] as f32];
                    }
                    "pyramid_depth" => cfg.pyramid_depth = parse_depth(v)?,
                    "engine_timeout" => cfg.engine_timeout_secs = parse(v)?,
                    k => {
                        let Some((name, field)) = k.strip_prefix("scorer.").and_then(|r| r.rsplit_once('.')) else {
                            return Err(format!("unknown key {k:?}"));
                        };
                        let entry = partial.entry(name.to_owned()).or_insert((None, None, None, line_no));
                        match field {
                            "command" => entry.0 = Some(split_command(v)),
                            "polarity" => entry.1 = Some(parse(v)?),
                            "timeout" => entry.2 = Some(parse(v)?),
                            f => return Err(format!("unknown scorer field {f:?}")),
                        }
                    }
                }
                Ok(())
            })();
            r.map_err(err)?;
        }
        for (name, (command, polarity, timeout, line)) in partial {
            let err = |cause: String| Error::Config {
                path: origin.to_path_buf(),
                line,
                cause,
            };
            let command = command
                .filter(|c| !c.is_empty())
                .ok_or_else(|| err(format!("scorer {name:?} has no command")))?;
            cfg.scorers.insert(
                name,
                ScorerSpec {
                    command,
                    polarity: polarity.unwrap_or(Polarity::HigherBetter),
                    timeout_secs: timeout.unwrap_or(60.0),
                },
            );
        }
        cfg.check().map_err(|cause| Error::Config {
            path: origin.to_path_buf(),
            line: 0,
            cause,
        })?;
        Ok(cfg)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.evs.len() < 2 && !self.from_srgb {
            return Err("evs needs at least 2 values".into());
        }
        if self.from_srgb && self.targets.len() < 2 {
            return Err("targets needs at least 2 values".into());
        }
        if self.engine_timeout_secs.is_nan() || self.engine_timeout_secs <= 0.0 {
            return Err("engine_timeout must be > 0".into());
        }
        for s in self.scorers.values() {
            if s.timeout_secs.is_nan() || s.timeout_secs <= 0.0 {
                return Err("scorer timeouts must be > 0".into());
            }
        }
        Ok(())
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "engines = {}", self.engines.join(","));
        let _ = writeln!(s, "metrics = {}", self.metrics.join(","));
        for (name, sc) in &self.scorers {
            let _ = writeln!(s, "scorer.{name}.command = {}", sc.command.join(" "));
            let _ = writeln!(s, "scorer.{name}.polarity = {}", sc.polarity);
            let _ = writeln!(s, "scorer.{name}.timeout = {}", sc.timeout_secs);
        }
        let _ = writeln!(s, "scorer_concurrency = {}", self.scorer_concurrency);
        if let Some(p) = &self.niqe_model {
            let _ = writeln!(s, "niqe_model = {}", p.display());
        }
        if let Some(p) = &self.brisque_model {
            let _ = writeln!(s, "brisque_model = {}", p.display());
        }
        let _ = writeln!(s, "n_blends = {}", self.n_blends);
        let _ = writeln!(s, "blend_pick = {}", self.blend_pick);
        let _ = writeln!(s, "calibration_groups = {}", self.calibration_groups);
        let _ = writeln!(s, "calibration_sources = {}", self.calibration_sources);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "quality_metric = {}", self.quality_metric.as_deref().unwrap_or("none"));
        let _ = writeln!(s, "quality_threshold = {}", self.quality_threshold);
        let _ = writeln!(s, "evs = {}", join(&self.evs));
        let _ = writeln!(s, "from_srgb = {}", self.from_srgb);
        let _ = writeln!(s, "targets = {}", join(&self.targets));
        let _ = writeln!(
            s,
            "pairing = {}",
            match self.pairing {
                Pairing::AllFrames => "all-frames",
                Pairing::RandomFrame => "random-frame",
            }
        );
        let _ = writeln!(s, "epsilon = {:e}", self.epsilon);
        let e = self.exponents;
        let _ = writeln!(s, "exponents = {},{},{}", e[0], e[1], e[2]);
        let depth = match self.pyramid_depth {
            Depth::Auto => "auto".to_string(),
            Depth::Levels(n) => n.to_string(),
        };
        let _ = writeln!(s, "pyramid_depth = {depth}");
        let _ = writeln!(s, "engine_timeout = {}", self.engine_timeout_secs);
        s
    }

    pub fn fusion(&self) -> FusionConfig {
        FusionConfig {
            exponents: self.exponents,
            epsilon: self.epsilon,
            pyramid_depth: self.pyramid_depth,
        }
    }

    /// Resolves a metric name: `niqe`, `brisque`, a declared scorer or an
    /// inline `ext:<command>` (higher-better).
    pub fn scorer(&self, name: &str, limiter: &Limiter, cache: &mut ModelCache) -> Result<Scorer> {
        match name {
            "niqe" => {
                let path = self.niqe_model.as_ref().ok_or_else(|| {
                    Error::InvalidEnsembleConfig("metric niqe needs niqe_model".into())
                })?;
                Ok(Scorer::Niqe(cache.niqe(path)?))
            }
            "brisque" => Ok(Scorer::Brisque(cache.brisque(self.brisque_model.as_deref())?)),
            other => {
                if let Some(spec) = self.scorers.get(other) {
                    return Ok(Scorer::External(
                        ExternalScorer::new(other, spec.command.clone(), spec.polarity)
                            .with_timeout(Duration::from_secs_f64(spec.timeout_secs))
                            .with_limiter(limiter.clone()),
                    ));
                }
                match other.strip_prefix("ext:") {
                    Some(cmd) if !cmd.trim().is_empty() => Ok(Scorer::External(
                        ExternalScorer::new(other, split_command(cmd), Polarity::HigherBetter)
                            .with_limiter(limiter.clone()),
                    )),
                    _ => Err(Error::UnknownMetric(other.to_owned())),
                }
            }
        }
    }

    /// Builds engines and scorers, loading model files.
    pub fn ensemble(&self) -> Result<EnsembleConfig> {
        let timeout = Duration::from_secs_f64(self.engine_timeout_secs);
        let engines = self
            .engines
            .iter()
            .map(|n| {
                Engine::parse(n).map(|e| match e {
                    Engine::External { argv, .. } => Engine::External { argv, timeout },
                    e => e,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let limiter = Limiter::new(self.scorer_concurrency);
        let mut cache = ModelCache::default();
        let metrics = self
            .metrics
            .iter()
            .map(|m| self.scorer(m, &limiter, &mut cache))
            .collect::<Result<Vec<_>>>()?;
        let quality = match &self.quality_metric {
            None => None,
            Some(m) => Some(QualityGate {
                scorer: self.scorer(m, &limiter, &mut cache)?,
                threshold: self.quality_threshold,
            }),
        };
        let cfg = EnsembleConfig {
            engines,
            metrics,
            n_blends: self.n_blends,
            blend_pick: self.blend_pick,
            calibration_groups: self.calibration_groups,
            rng_seed: self.seed,
            quality,
            fusion: self.fusion(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Loads each model file once.
#[derive(Default)]
pub struct ModelCache {
    niqe: Option<Arc<NiqeModel>>,
    brisque: Option<Arc<BrisqueRegressor>>,
}

impl ModelCache {
    fn niqe(&mut self, path: &Path) -> Result<Arc<NiqeModel>> {
        if self.niqe.is_none() {
            self.niqe = Some(Arc::new(NiqeModel::load(path)?));
        }
        Ok(Arc::clone(self.niqe.as_ref().expect("set")))
    }

    fn brisque(&mut self, path: Option<&Path>) -> Result<Arc<BrisqueRegressor>> {
        if self.brisque.is_none() {
            let reg = match path {
                Some(p) => BrisqueRegressor::load(p)?,
                None => BrisqueRegressor::fallback(),
            };
            self.brisque = Some(Arc::new(reg));
        }
        Ok(Arc::clone(self.brisque.as_ref().expect("set")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(text: &str) -> Result<PipelineConfig> {
        PipelineConfig::parse(text, Path::new("test.cfg"), Path::new("/base"))
    }

    #[test]
    fn parses_all_kinds_of_values() {
        let cfg = parse_str(
            "# comment\n\
             engines = mertens, gradient\n\
             metrics = niqe, arniqa\n\
             niqe_model = models/n.txt   # trailing\n\
             scorer.arniqa.command = python3 score.py --fast\n\
             scorer.arniqa.polarity = higher-better\n\
             quality_metric = arniqa\n\
             quality_threshold = 0.5\n\
             evs = -2, 0, 2\n\
             pairing = random-frame\n\
             pyramid_depth = 4\n\
             seed = 42\n",
        )
        .unwrap();
        assert_eq!(cfg.engines, ["mertens", "gradient"]);
        assert_eq!(cfg.niqe_model, Some(PathBuf::from("/base/models/n.txt")));
        assert_eq!(cfg.scorers["arniqa"].command, ["python3", "score.py", "--fast"]);
        assert_eq!(cfg.evs, [-2.0, 0.0, 2.0]);
        assert_eq!(cfg.pairing, Pairing::RandomFrame);
        assert_eq!(cfg.pyramid_depth, Depth::Levels(4));
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.quality_metric.as_deref(), Some("arniqa"));
    }

    #[test]
    fn errors_name_the_line() {
        let err = parse_str("seed = 1\nfoo = 2\n").unwrap_err();
        assert_eq!(err.to_string(), "config test.cfg:2: unknown key \"foo\"");
        let err = parse_str("n_blends = many").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
        assert!(parse_str("just words").is_err());
        assert!(parse_str("scorer.x.polarity = lower-better").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = parse_str("scorer.s.command = echo 1\nscorer.s.timeout = 5\nbrisque_model = /abs/r.txt\n").unwrap();
        cfg.exponents = [1.0, 0.5, 2.0];
        cfg.epsilon = 1e-9;
        let again = parse_str(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn builds_ensemble_without_models() {
        let cfg = parse_str("metrics = brisque, ext:echo 0.5\nengines = mertens,flat-weighted\nblend_pick = 2\n").unwrap();
        let ens = cfg.ensemble().unwrap();
        assert_eq!(ens.engines.len(), 2);
        assert_eq!(ens.metrics[1].name(), "ext:echo 0.5");
        let cfg = parse_str("metrics = niqe").unwrap();
        assert!(cfg.ensemble().is_err());
        let cfg = parse_str("metrics = psnr").unwrap();
        assert!(matches!(cfg.ensemble(), Err(Error::UnknownMetric(_))));
    }
}
