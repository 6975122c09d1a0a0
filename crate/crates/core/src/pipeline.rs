//! End-to-end dataset generation over a directory of source images.

use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::dataset::{
    emit_records, sort_records, stats_for_records, write_manifest, write_rejections, write_stack,
    CorpusStats, DatasetRecord, Rejection, MANIFEST_NAME, REJECTIONS_NAME,
};
use crate::ensemble::{
    calibrate_engine_scores, derive_seed, process_stack, Calibration, EnsembleConfig, GateDecision,
};
use crate::error::{Error, Result};
use crate::exposure::{render_mes, synthesize_mes, ExposureStack, StyleCode};
use crate::imgcore::{load_image, load_srgb};

pub const SNAPSHOT_NAME: &str = "config.snapshot";
pub const STATS_NAME: &str = "stats.txt";
pub const CALIBRATION_NAME: &str = "calibration.tsv";

/// PNG files directly inside `dir` (or `dir` itself if it is a file),
/// sorted by path.
pub fn discover_inputs(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = p
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if p.is_file() && is_png {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// File stem with anything outside `[A-Za-z0-9_-]` replaced by `_`.
pub fn source_id(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("source");
    stem.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Builds the exposure stack for one source. Linear sources are rendered at
/// the configured EVs. With `from_srgb`, the 8-bit image is retargeted to
/// each style code and EVs are re-expressed relative to the frame whose
/// target is nearest 0.5, so that frame lands in the zero class.
pub fn build_stack(path: &Path, id: &str, cfg: &PipelineConfig) -> Result<ExposureStack> {
    if !cfg.from_srgb {
        return render_mes(&load_image(path)?, &cfg.evs, id);
    }
    let mut targets = cfg.targets.clone();
    targets.sort_by(f64::total_cmp);
    let codes = targets
        .iter()
        .map(|&t| StyleCode::new(t))
        .collect::<Result<Vec<_>>>()?;
    let (stack, _) = synthesize_mes(&load_srgb(path)?, &codes, id)?;
    let pos = (0..targets.len())
        .min_by(|&a, &b| (targets[a] - 0.5).abs().total_cmp(&(targets[b] - 0.5).abs()))
        .expect("at least two targets");
    let offset = stack.evs()[pos];
    let evs = stack.evs().iter().map(|e| e - offset).collect();
    ExposureStack::new(stack.frames().to_vec(), evs, id)
}

/// Per-source result.
#[derive(Clone, Debug)]
pub enum SourceResult {
    Accepted(Vec<DatasetRecord>),
    Rejected(Rejection),
    /// I/O problems; the source could not be processed at all.
    Failed { source_id: String, error: String },
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub sources: usize,
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
    pub failed: Vec<(String, String)>,
    pub records: Vec<DatasetRecord>,
    pub calibration: Calibration,
    pub stats: CorpusStats,
}

impl RunSummary {
    pub fn all_processed(&self) -> bool {
        self.failed.is_empty()
    }
}

fn calibrate(inputs: &[(String, PathBuf)], cfg: &PipelineConfig, ens: &EnsembleConfig) -> Result<Calibration> {
    if cfg.calibration_groups == 0 || inputs.is_empty() {
        return Ok(Calibration::uniform(ens.engines.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "calibration-sample"));
    let k = cfg.calibration_sources.clamp(1, inputs.len());
    let mut picked = sample(&mut rng, inputs.len(), k).into_vec();
    picked.sort_unstable();
    let stacks: Vec<ExposureStack> = picked
        .par_iter()
        .filter_map(|&i| {
            let (id, path) = &inputs[i];
            build_stack(path, id, cfg)
                .map_err(|e| log::warn!("calibration source {id} skipped: {e}"))
                .ok()
        })
        .collect();
    if stacks.is_empty() {
        log::warn!("no calibration stacks; blends use uniform weights");
        return Ok(Calibration::uniform(ens.engines.len()));
    }
    calibrate_engine_scores(&stacks, ens)
}

fn run_source(
    id: &str,
    path: &Path,
    out_dir: &Path,
    calib: &Calibration,
    cfg: &PipelineConfig,
    ens: &EnsembleConfig,
) -> SourceResult {
    let reject = |reason: String, score: Option<f64>| {
        SourceResult::Rejected(Rejection {
            source_id: id.to_owned(),
            reason,
            score,
        })
    };
    let stack = match build_stack(path, id, cfg) {
        Ok(s) => s,
        Err(e) if e.is_io() => {
            return SourceResult::Failed {
                source_id: id.to_owned(),
                error: e.to_string(),
            }
        }
        Err(e) => return reject(e.to_string(), None),
    };
    let outcome = match process_stack(&stack, calib, ens) {
        Ok(o) => o,
        Err(e) if e.is_io() => {
            return SourceResult::Failed {
                source_id: id.to_owned(),
                error: e.to_string(),
            }
        }
        Err(e) => return reject(e.to_string(), None),
    };
    if let GateDecision::Reject { reason, score } = &outcome.gate {
        return reject(reason.clone(), *score);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(outcome.seed, "pairing"));
    let written = write_stack(&stack, out_dir).and_then(|_| {
        emit_records(
            &stack,
            &outcome.selection.winner,
            &outcome.gate,
            out_dir,
            cfg.pairing,
            &mut rng,
            outcome.seed,
        )
    });
    match written {
        Ok(records) => SourceResult::Accepted(records),
        Err(e) => SourceResult::Failed {
            source_id: id.to_owned(),
            error: e.to_string(),
        },
    }
}

/// Runs the whole pipeline on `inputs` and writes the manifest, rejection
/// log, stats report, calibration counts and a config snapshot into
/// `out_dir`. Runs on the current rayon pool; results do not depend on its
/// size.
pub fn generate_dataset(inputs: &[PathBuf], out_dir: &Path, cfg: &PipelineConfig) -> Result<RunSummary> {
    let ens = cfg.ensemble()?;
    let mut named: Vec<(String, PathBuf)> = inputs.iter().map(|p| (source_id(p), p.clone())).collect();
    named.sort();
    if let Some(w) = named.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidEnsembleConfig(format!(
            "duplicate source id {:?} ({} and {})",
            w[0].0,
            w[0].1.display(),
            w[1].1.display()
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let snapshot = out_dir.join(SNAPSHOT_NAME);
    std::fs::write(&snapshot, cfg.to_text()).map_err(|e| Error::io(&snapshot, e))?;

    let calib = calibrate(&named, cfg, &ens)?;
    let cal_path = out_dir.join(CALIBRATION_NAME);
    let mut cal_text = String::new();
    for (e, w) in ens.engines.iter().zip(&calib.wins) {
        cal_text.push_str(&format!("{}\t{w}\n", e.name()));
    }
    std::fs::write(&cal_path, cal_text).map_err(|e| Error::io(&cal_path, e))?;

    let results: Vec<SourceResult> = named
        .par_iter()
        .map(|(id, path)| run_source(id, path, out_dir, &calib, cfg, &ens))
        .collect();

    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let mut failed = Vec::new();
    let mut accepted = 0;
    for r in results {
        match r {
            SourceResult::Accepted(recs) => {
                accepted += 1;
                records.extend(recs);
            }
            SourceResult::Rejected(rej) => {
                log::info!("rejected {}: {}", rej.source_id, rej.reason);
                rejected.push(rej);
            }
            SourceResult::Failed { source_id, error } => {
                log::error!("{source_id}: {error}");
                failed.push((source_id, error));
            }
        }
    }
    sort_records(&mut records);
    write_manifest(&records, out_dir.join(MANIFEST_NAME))?;
    write_rejections(&rejected, out_dir.join(REJECTIONS_NAME))?;
    let stats = stats_for_records(&records, out_dir, rejected.len())?;
    let stats_path = out_dir.join(STATS_NAME);
    std::fs::write(&stats_path, stats.to_table()).map_err(|e| Error::io(&stats_path, e))?;
    Ok(RunSummary {
        sources: named.len(),
        accepted,
        rejected,
        failed,
        records,
        calibration: calib,
        stats,
    })
}
