//! Output layout, NDJSON manifests pairing inputs with pseudo-GTs, the
//! rejection log and corpus statistics.
//!
//! ```text
//! out_dir/
//!   gt/<id>/<id>_gt.png
//!   input/<id>/<id>_ev+0.00.png    frames used as training inputs
//!   mes/<id>/<id>_ev-3.00.png ...  the full exposure stack
//!   manifest.ndjson
//!   rejections.tsv
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensemble::{FusionCandidate, GateDecision};
use crate::error::{Error, Result};
use crate::exposure::ExposureStack;
use crate::imgcore::{load_srgb, mean_intensity, save_srgb};

pub const MANIFEST_NAME: &str = "manifest.ndjson";
pub const REJECTIONS_NAME: &str = "rejections.tsv";
pub const HISTOGRAM_BINS: usize = 64;
pub const QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// One training pair. Paths are relative to the dataset root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub source_id: String,
    pub input_path: String,
    pub input_ev: f64,
    pub pseudo_gt_path: String,
    pub scores: BTreeMap<String, f64>,
    pub provenance: String,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Pairing {
    /// Every stack frame becomes an input.
    #[default]
    AllFrames,
    /// One uniformly chosen frame per source.
    RandomFrame,
}

impl FromStr for Pairing {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "all-frames" => Ok(Pairing::AllFrames),
            "random-frame" => Ok(Pairing::RandomFrame),
            other => Err(format!("unknown pairing {other:?} (all-frames | random-frame)")),
        }
    }
}

/// `<id>_ev+1.00.png`
pub fn frame_file_name(source_id: &str, ev: f64) -> String {
    // avoid "-0.00"
    let ev = if ev.abs() < 0.005 { 0.0 } else { ev };
    format!("{source_id}_ev{ev:+.2}.png")
}

/// Parses the EV back out of a [`frame_file_name`].
pub fn parse_frame_ev(file_name: &str) -> Option<f64> {
    let stem = file_name.strip_suffix(".png")?;
    let (_, ev) = stem.rsplit_once("_ev")?;
    ev.parse().ok().filter(|v: &f64| v.is_finite())
}

fn rel(parts: &[&str]) -> String {
    parts.join("/")
}

fn save_under(root: &Path, relative: &str, img: &crate::imgcore::SrgbImage) -> Result<()> {
    let path = root.join(relative);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_srgb(&path, img)
}

/// Writes a stack as `mes/<id>/<id>_ev<±N.NN>.png`.
pub fn write_stack(stack: &ExposureStack, out_dir: &Path) -> Result<Vec<String>> {
    let id = stack.source_id();
    stack
        .frames()
        .iter()
        .zip(stack.evs())
        .map(|(f, &ev)| {
            let r = rel(&["mes", id, &frame_file_name(id, ev)]);
            save_under(out_dir, &r, f)?;
            Ok(r)
        })
        .collect()
}

/// Writes the pseudo-GT once and one input file and record per selected
/// frame. Refuses gate-rejected candidates before touching the disk.
pub fn emit_records(
    stack: &ExposureStack,
    pseudo_gt: &FusionCandidate,
    gate: &GateDecision,
    out_dir: &Path,
    pairing: Pairing,
    rng: &mut impl Rng,
    seed: u64,
) -> Result<Vec<DatasetRecord>> {
    if !gate.is_keep() {
        return Err(Error::GateRejected(stack.source_id().to_owned()));
    }
    let id = stack.source_id();
    let selected: Vec<usize> = match pairing {
        Pairing::AllFrames => (0..stack.len()).collect(),
        Pairing::RandomFrame => vec![rng.random_range(0..stack.len())],
    };
    let gt = rel(&["gt", id, &format!("{id}_gt.png")]);
    save_under(out_dir, &gt, &pseudo_gt.image)?;
    let scores: BTreeMap<String, f64> = pseudo_gt
        .scores
        .iter()
        .map(|(k, v)| (k.clone(), v.value))
        .collect();
    let provenance = pseudo_gt.describe();
    selected
        .into_iter()
        .map(|i| {
            let ev = stack.evs()[i];
            let input = rel(&["input", id, &frame_file_name(id, ev)]);
            save_under(out_dir, &input, &stack.frames()[i])?;
            Ok(DatasetRecord {
                source_id: id.to_owned(),
                input_path: input,
                input_ev: ev,
                pseudo_gt_path: gt.clone(),
                scores: scores.clone(),
                provenance: provenance.clone(),
                seed,
            })
        })
        .collect()
}

/// Sorts records by source then EV, the canonical manifest order.
pub fn sort_records(records: &mut [DatasetRecord]) {
    records.sort_by(|a, b| {
        a.source_id
            .cmp(&b.source_id)
            .then(a.input_ev.total_cmp(&b.input_ev))
            .then_with(|| a.input_path.cmp(&b.input_path))
    });
}

/// One JSON object per line, in the given order.
pub fn write_manifest(records: &[DatasetRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::io(path, e))?;
        out.push(b'\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let record = serde_json::from_str(&line).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            line: i + 1,
            cause: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// A source excluded from the dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Rejection {
    pub source_id: String,
    pub reason: String,
    pub score: Option<f64>,
}

/// Tab-separated `source_id reason score`, one line per rejection; the
/// score column is empty when there is none.
pub fn write_rejections(rejections: &[Rejection], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for r in rejections {
        let reason = r.reason.replace(['\t', '\n'], " ");
        let score = r.score.map(|s| s.to_string()).unwrap_or_default();
        writeln!(f, "{}\t{}\t{}", r.source_id, reason, score).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_rejections(path: impl AsRef<Path>) -> Result<Vec<Rejection>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let bad = |cause: &str| Error::Manifest {
                path: path.to_path_buf(),
                line: i + 1,
                cause: cause.to_owned(),
            };
            let mut cols = line.splitn(3, '\t');
            let (Some(id), Some(reason), Some(score)) = (cols.next(), cols.next(), cols.next()) else {
                return Err(bad("expected 3 tab-separated columns"));
            };
            let score = match score {
                "" => None,
                s => Some(s.parse().map_err(|_| bad("score is not a number"))?),
            };
            Ok(Rejection {
                source_id: id.to_owned(),
                reason: reason.to_owned(),
                score,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusStats {
    /// Accepted sources.
    pub image_count: usize,
    /// Input frames (manifest records).
    pub frame_count: usize,
    pub rejected_count: usize,
    /// Input-frame mean intensities, 64 bins over [0, 1].
    pub histogram: Vec<u64>,
    /// Per metric: p5, p25, p50, p75, p95 over accepted sources.
    pub quantiles: BTreeMap<String, [f64; 5]>,
}

impl CorpusStats {
    pub fn empty() -> Self {
        Self {
            image_count: 0,
            frame_count: 0,
            rejected_count: 0,
            histogram: vec![0; HISTOGRAM_BINS],
            quantiles: BTreeMap::new(),
        }
    }

    pub fn nonempty_bins(&self) -> usize {
        self.histogram.iter().filter(|&&c| c > 0).count()
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "sources   {}", self.image_count);
        let _ = writeln!(s, "frames    {}", self.frame_count);
        let _ = writeln!(s, "rejected  {}", self.rejected_count);
        let _ = writeln!(
            s,
            "intensity histogram ({} of {HISTOGRAM_BINS} bins non-empty)",
            self.nonempty_bins()
        );
        let peak = self.histogram.iter().copied().max().unwrap_or(0).max(1);
        for (i, &c) in self.histogram.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let lo = i as f64 / HISTOGRAM_BINS as f64;
            let bar = "#".repeat(((c * 40).div_ceil(peak)) as usize);
            let _ = writeln!(s, "  [{lo:.4}, {:.4})  {c:>6}  {bar}", lo + 1.0 / HISTOGRAM_BINS as f64);
        }
        if !self.quantiles.is_empty() {
            let _ = writeln!(s, "{:<12} {:>10} {:>10} {:>10} {:>10} {:>10}", "metric", "p5", "p25", "p50", "p75", "p95");
            for (m, q) in &self.quantiles {
                let _ = writeln!(
                    s,
                    "{m:<12} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                    q[0], q[1], q[2], q[3], q[4]
                );
            }
        }
        s
    }

    /// `kind,key,value` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,key,value\n");
        let _ = writeln!(s, "count,sources,{}", self.image_count);
        let _ = writeln!(s, "count,frames,{}", self.frame_count);
        let _ = writeln!(s, "count,rejected,{}", self.rejected_count);
        for (i, c) in self.histogram.iter().enumerate() {
            let _ = writeln!(s, "histogram,{i},{c}");
        }
        for (m, q) in &self.quantiles {
            for (p, v) in QUANTILES.iter().zip(q) {
                let _ = writeln!(s, "quantile,{m}:p{},{v}", (p * 100.0).round());
            }
        }
        s
    }
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn histogram_bin(mean: f64) -> usize {
    ((mean * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)
}

/// Statistics over records whose input paths are relative to `root`.
pub fn stats_for_records(records: &[DatasetRecord], root: &Path, rejected: usize) -> Result<CorpusStats> {
    let mut stats = CorpusStats::empty();
    stats.rejected_count = rejected;
    stats.frame_count = records.len();
    for r in records {
        let img = load_srgb(root.join(&r.input_path))?;
        stats.histogram[histogram_bin(mean_intensity(&img)?)] += 1;
    }
    let mut per_source: BTreeMap<&str, &BTreeMap<String, f64>> = BTreeMap::new();
    for r in records {
        per_source.entry(&r.source_id).or_insert(&r.scores);
    }
    stats.image_count = per_source.len();
    let mut by_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for scores in per_source.values() {
        for (m, v) in *scores {
            by_metric.entry(m.clone()).or_default().push(*v);
        }
    }
    for (m, mut v) in by_metric {
        v.sort_by(f64::total_cmp);
        stats.quantiles.insert(m, QUANTILES.map(|p| quantile(&v, p)));
    }
    Ok(stats)
}

/// Statistics for a manifest; input paths resolve against its directory
/// and rejections come from `rejections.tsv` beside it, when present.
pub fn corpus_stats(manifest: impl AsRef<Path>) -> Result<CorpusStats> {
    let manifest = manifest.as_ref();
    let records = read_manifest(manifest)?;
    let root: PathBuf = manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let rej_path = root.join(REJECTIONS_NAME);
    let rejected = if rej_path.is_file() {
        read_rejections(&rej_path)?.len()
    } else {
        0
    };
    stats_for_records(&records, &root, rejected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_names_round_trip() {
        assert_eq!(frame_file_name("a", -3.0), "a_ev-3.00.png");
        assert_eq!(frame_file_name("a", 0.0), "a_ev+0.00.png");
        assert_eq!(frame_file_name("a", -0.001), "a_ev+0.00.png");
        assert_eq!(frame_file_name("x_ev1", 1.234), "x_ev1_ev+1.23.png");
        assert_eq!(parse_frame_ev("x_ev1_ev+1.23.png"), Some(1.23));
        assert_eq!(parse_frame_ev("plain.png"), None);
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert!((quantile(&v, 0.05) - 1.2).abs() < 1e-12);
        assert_eq!(quantile(&[], 0.5), 0.0);
    }

    #[test]
    fn histogram_edges() {
        assert_eq!(histogram_bin(0.0), 0);
        assert_eq!(histogram_bin(1.0), 63);
        assert_eq!(histogram_bin(0.5), 32);
        assert_eq!(histogram_bin(0.5 - 1e-9), 31);
    }

    #[test]
    fn pairing_parse() {
        assert_eq!("all-frames".parse::<Pairing>().unwrap(), Pairing::AllFrames);
        assert_eq!("random-frame".parse::<Pairing>().unwrap(), Pairing::RandomFrame);
        assert!("some".parse::<Pairing>().is_err());
    }
}
