//! Pseudo ground-truth generation: fuse a sampled exposure triplet with
//! every engine, add random score-weighted blends of those results, rank
//! the pool with the configured metrics and gate the winner.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exposure::ExposureStack;
use crate::fusion::{Engine, FusionConfig};
use crate::imgcore::{decode_code, encode_value, SrgbImage};
use crate::iqa::{IqaScore, Polarity, Scorer};

/// Frames with `|EV|` below this count as the zero class.
pub const ZERO_EV_TOLERANCE: f64 = 0.25;

/// A fused image and how it was made.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionCandidate {
    pub id: String,
    pub image: SrgbImage,
    /// Contributing engines and their blend weights (positive, summing to 1).
    pub provenance: Vec<(String, f64)>,
    /// EVs of the triplet the candidate was fused from.
    pub triplet_evs: Vec<f64>,
    pub scores: BTreeMap<String, IqaScore>,
    /// Fractional rank per metric, 1 = best.
    pub rank_stats: BTreeMap<String, f64>,
}

impl FusionCandidate {
    pub fn from_engine(name: impl Into<String>, image: SrgbImage) -> Self {
        let name = name.into();
        Self {
            id: name.clone(),
            image,
            provenance: vec![(name, 1.0)],
            triplet_evs: Vec::new(),
            scores: BTreeMap::new(),
            rank_stats: BTreeMap::new(),
        }
    }

    /// One-line description, e.g. `mertens=0.6+gradient=0.4 @ ev[-2,0,1]`.
    pub fn describe(&self) -> String {
        let mut s = self
            .provenance
            .iter()
            .map(|(n, w)| format!("{n}={w}"))
            .collect::<Vec<_>>()
            .join("+");
        if !self.triplet_evs.is_empty() {
            let evs: Vec<String> = self.triplet_evs.iter().map(|e| format!("{e}")).collect();
            let _ = write!(s, " @ ev[{}]", evs.join(","));
        }
        s
    }
}

/// Threshold filter applied to the selected pseudo-GT.
#[derive(Clone, Debug)]
pub struct QualityGate {
    pub scorer: Scorer,
    pub threshold: f64,
}

#[derive(Clone, Debug)]
pub struct EnsembleConfig {
    pub engines: Vec<Engine>,
    /// Ranking metrics; the first one also decides calibration.
    pub metrics: Vec<Scorer>,
    pub n_blends: usize,
    pub blend_pick: usize,
    pub calibration_groups: usize,
    pub rng_seed: u64,
    pub quality: Option<QualityGate>,
    pub fusion: FusionConfig,
}

impl EnsembleConfig {
    pub fn new(engines: Vec<Engine>, metrics: Vec<Scorer>) -> Self {
        Self {
            engines,
            metrics,
            n_blends: 10,
            blend_pick: 3,
            calibration_groups: 1000,
            rng_seed: 0,
            quality: None,
            fusion: FusionConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidEnsembleConfig(m));
        if self.engines.is_empty() {
            return bad("at least one engine is required".into());
        }
        if self.metrics.is_empty() {
            return bad("at least one metric is required".into());
        }
        if self.n_blends > 0 && (self.blend_pick == 0 || self.blend_pick > self.engines.len()) {
            return bad(format!(
                "blend_pick must lie in 1..={} (engine count), got {}",
                self.engines.len(),
                self.blend_pick
            ));
        }
        let mut names: Vec<&str> = self.metrics.iter().map(Scorer::name).collect();
        names.sort_unstable();
        if names.windows(2).any(|p| p[0] == p[1]) {
            return bad("metric names must be unique".into());
        }
        if let Some(q) = &self.quality {
            if !q.threshold.is_finite() {
                return bad("quality threshold must be finite".into());
            }
        }
        self.fusion.validate()
    }
}

/// Deterministic 64-bit seed for `label` under a global seed: the first
/// eight bytes of `sha256(seed_le || label)`.
pub fn derive_seed(global: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Three frames, one per EV sign class, in increasing EV order.
#[derive(Clone, Debug, PartialEq)]
pub struct Triplet {
    pub indices: [usize; 3],
    pub evs: [f64; 3],
    pub frames: Vec<SrgbImage>,
}

/// Samples one frame from each of the negative, zero and positive classes.
pub fn pick_triplet(stack: &ExposureStack, rng: &mut impl Rng) -> Result<Triplet> {
    let evs = stack.evs();
    let class = |pred: &dyn Fn(f64) -> bool| -> Vec<usize> {
        (0..evs.len()).filter(|&i| pred(evs[i])).collect()
    };
    let neg = class(&|e| e <= -ZERO_EV_TOLERANCE);
    let zero = class(&|e| e.abs() < ZERO_EV_TOLERANCE);
    let pos = class(&|e| e >= ZERO_EV_TOLERANCE);
    if neg.is_empty() || zero.is_empty() || pos.is_empty() {
        return Err(Error::SignCoverage);
    }
    let indices = [
        neg[rng.random_range(0..neg.len())],
        zero[rng.random_range(0..zero.len())],
        pos[rng.random_range(0..pos.len())],
    ];
    Ok(Triplet {
        indices,
        evs: indices.map(|i| evs[i]),
        frames: indices.iter().map(|&i| stack.frames()[i].clone()).collect(),
    })
}

/// Win counts per engine (in configuration order).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Calibration {
    pub wins: Vec<u64>,
    pub groups_run: usize,
    pub groups_failed: usize,
}

impl Calibration {
    /// All-zero counts; blends fall back to uniform weights.
    pub fn uniform(engines: usize) -> Self {
        Self {
            wins: vec![0; engines],
            ..Self::default()
        }
    }
}

/// Index of the best score; ties go to the lowest index.
fn argbest(values: &[f64], polarity: Polarity) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if polarity.best_first(values[i], values[best]).is_lt() {
            best = i;
        }
    }
    best
}

fn run_all_engines(frames: &[SrgbImage], cfg: &EnsembleConfig) -> Result<Vec<SrgbImage>> {
    cfg.engines
        .par_iter()
        .map(|e| e.fuse(frames, &cfg.fusion))
        .collect()
}

/// For each calibration group, fuses a sampled triplet with every engine and
/// credits the engine ranked first by the primary metric. Groups where an
/// engine or the metric fails are skipped and counted.
pub fn calibrate_engine_scores(stacks: &[ExposureStack], cfg: &EnsembleConfig) -> Result<Calibration> {
    cfg.validate()?;
    if stacks.is_empty() {
        return Err(Error::EmptyInput);
    }
    let primary = &cfg.metrics[0];
    let outcomes: Vec<Option<usize>> = (0..cfg.calibration_groups)
        .into_par_iter()
        .map(|g| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, &format!("calibration/{g}")));
            let stack = &stacks[rng.random_range(0..stacks.len())];
            let result = pick_triplet(stack, &mut rng)
                .and_then(|t| run_all_engines(&t.frames, cfg))
                .and_then(|images| {
                    images
                        .iter()
                        .map(|img| primary.score(img).map(|s| s.value))
                        .collect::<Result<Vec<f64>>>()
                });
            match result {
                Ok(values) => Some(argbest(&values, primary.polarity())),
                Err(e) => {
                    log::warn!("calibration group {g} ({}) skipped: {e}", stack.source_id());
                    None
                }
            }
        })
        .collect();
    let mut cal = Calibration::uniform(cfg.engines.len());
    for o in outcomes {
        match o {
            Some(w) => {
                cal.wins[w] += 1;
                cal.groups_run += 1;
            }
            None => cal.groups_failed += 1,
        }
    }
    if cal.groups_failed > 0 {
        log::warn!(
            "{} of {} calibration groups failed",
            cal.groups_failed,
            cfg.calibration_groups
        );
    }
    Ok(cal)
}

/// Blend weights for the picked engines: proportional to their win counts,
/// uniform when all are zero.
pub fn blend_weights(wins: &[u64], picked: &[usize]) -> Vec<f64> {
    let total: u64 = picked.iter().map(|&i| wins[i]).sum();
    if total == 0 {
        return vec![1.0 / picked.len() as f64; picked.len()];
    }
    picked
        .iter()
        .map(|&i| wins[i] as f64 / total as f64)
        .collect()
}

/// Pixel-wise weighted sum in linear light.
pub fn blend_linear(images: &[&SrgbImage], weights: &[f64]) -> Result<SrgbImage> {
    let first = images.first().ok_or(Error::EmptyInput)?;
    if images.len() != weights.len() {
        return Err(Error::InvalidEnsembleConfig(format!(
            "{} images but {} weights",
            images.len(),
            weights.len()
        )));
    }
    if let Some(m) = images.iter().find(|i| i.dims() != first.dims()) {
        return Err(Error::DimensionMismatch {
            expected: first.dims(),
            actual: m.dims(),
        });
    }
    let n = first.data().len();
    let data = (0..n)
        .map(|k| {
            let v: f64 = images
                .iter()
                .zip(weights)
                .map(|(img, w)| w * f64::from(decode_code(img.data()[k])))
                .sum();
            encode_value(v as f32)
        })
        .collect();
    SrgbImage::new(first.width(), first.height(), data)
}

/// One candidate per engine on a shared sampled triplet, plus `n_blends`
/// blends of `blend_pick` engine results each.
pub fn generate_candidates(
    stack: &ExposureStack,
    calib: &Calibration,
    cfg: &EnsembleConfig,
    rng: &mut impl Rng,
) -> Result<Vec<FusionCandidate>> {
    cfg.validate()?;
    if calib.wins.len() != cfg.engines.len() {
        return Err(Error::InvalidEnsembleConfig(format!(
            "calibration has {} engines, config has {}",
            calib.wins.len(),
            cfg.engines.len()
        )));
    }
    let triplet = pick_triplet(stack, rng)?;
    let images = run_all_engines(&triplet.frames, cfg)?;
    let mut pool: Vec<FusionCandidate> = cfg
        .engines
        .iter()
        .zip(&images)
        .map(|(e, img)| {
            let mut c = FusionCandidate::from_engine(e.name(), img.clone());
            c.triplet_evs = triplet.evs.to_vec();
            c
        })
        .collect();
    for b in 0..cfg.n_blends {
        let mut picked = sample(rng, cfg.engines.len(), cfg.blend_pick).into_vec();
        picked.sort_unstable();
        let weights = blend_weights(&calib.wins, &picked);
        let parts: Vec<(usize, f64)> = picked
            .into_iter()
            .zip(weights)
            .filter(|&(_, w)| w > 0.0)
            .collect();
        let refs: Vec<&SrgbImage> = parts.iter().map(|&(i, _)| &images[i]).collect();
        let ws: Vec<f64> = parts.iter().map(|&(_, w)| w).collect();
        pool.push(FusionCandidate {
            id: format!("blend-{b}"),
            image: blend_linear(&refs, &ws)?,
            provenance: parts.iter().map(|&(i, w)| (cfg.engines[i].name(), w)).collect(),
            triplet_evs: triplet.evs.to_vec(),
            scores: BTreeMap::new(),
            rank_stats: BTreeMap::new(),
        });
    }
    Ok(pool)
}

/// Fractional ranks (1 = best, ties share the mean of their positions).
pub fn fractional_ranks(values: &[f64], polarity: Polarity) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| polarity.best_first(values[a], values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Winner and the candidates dropped because a metric failed on them.
#[derive(Clone, Debug)]
pub struct Selection {
    pub winner: FusionCandidate,
    pub winner_index: usize,
    pub excluded: Vec<(String, String)>,
}

/// Scores every candidate on every metric (keeping scores already present),
/// ranks the scorable ones per metric and returns the lowest mean rank.
/// Ties go to the better raw score on the first metric, then to the
/// earlier candidate.
pub fn select_pseudo_gt(mut candidates: Vec<FusionCandidate>, metrics: &[Scorer]) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::NoScorableCandidates);
    }
    if metrics.is_empty() {
        return Err(Error::InvalidEnsembleConfig("no metrics configured".into()));
    }
    let failures: Vec<Option<String>> = candidates
        .par_iter_mut()
        .map(|c| {
            for m in metrics {
                if c.scores.contains_key(m.name()) {
                    continue;
                }
                match m.score(&c.image) {
                    Ok(s) => {
                        c.scores.insert(m.name().to_owned(), s);
                    }
                    Err(e) => return Some(format!("{}: {e}", m.name())),
                }
            }
            None
        })
        .collect();
    let mut excluded = Vec::new();
    let mut live = Vec::new();
    for (i, f) in failures.into_iter().enumerate() {
        match f {
            Some(reason) => {
                log::warn!("candidate {} excluded: {reason}", candidates[i].id);
                excluded.push((candidates[i].id.clone(), reason));
            }
            None => live.push(i),
        }
    }
    if live.is_empty() {
        return Err(Error::NoScorableCandidates);
    }
    let mut mean_rank = vec![0.0; live.len()];
    for m in metrics {
        let values: Vec<f64> = live.iter().map(|&i| candidates[i].scores[m.name()].value).collect();
        let ranks = fractional_ranks(&values, m.polarity());
        for (k, &i) in live.iter().enumerate() {
            candidates[i].rank_stats.insert(m.name().to_owned(), ranks[k]);
            mean_rank[k] += ranks[k] / metrics.len() as f64;
        }
    }
    let first = &metrics[0];
    let key = |k: usize| candidates[live[k]].scores[first.name()].value;
    let best = (0..live.len())
        .min_by(|&a, &b| {
            mean_rank[a]
                .total_cmp(&mean_rank[b])
                .then_with(|| first.polarity().best_first(key(a), key(b)))
                .then(a.cmp(&b))
        })
        .expect("non-empty");
    let winner_index = live[best];
    Ok(Selection {
        winner: candidates.swap_remove(winner_index),
        winner_index,
        excluded,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum GateDecision {
    Keep { score: Option<f64> },
    Reject { reason: String, score: Option<f64> },
}

impl GateDecision {
    pub fn is_keep(&self) -> bool {
        matches!(self, GateDecision::Keep { .. })
    }
}

/// Keeps the candidate unless its quality score fails the threshold
/// (boundary values pass). Without a configured gate everything is kept;
/// a scorer failure rejects.
pub fn quality_gate(candidate: &FusionCandidate, gate: Option<&QualityGate>) -> GateDecision {
    let Some(gate) = gate else {
        return GateDecision::Keep { score: None };
    };
    let score = match candidate.scores.get(gate.scorer.name()) {
        Some(s) => Ok(s.value),
        None => gate.scorer.score(&candidate.image).map(|s| s.value),
    };
    match score {
        Err(e) => {
            log::warn!("quality scorer failed on {}: {e}", candidate.id);
            GateDecision::Reject {
                reason: "quality scorer unavailable".into(),
                score: None,
            }
        }
        Ok(v) => {
            let fails = match gate.scorer.polarity() {
                Polarity::HigherBetter => v < gate.threshold,
                Polarity::LowerBetter => v > gate.threshold,
            };
            if fails {
                GateDecision::Reject {
                    reason: format!("{} {v} fails threshold {}", gate.scorer.name(), gate.threshold),
                    score: Some(v),
                }
            } else {
                GateDecision::Keep { score: Some(v) }
            }
        }
    }
}

/// Everything decided for one source.
#[derive(Clone, Debug)]
pub struct SourceOutcome {
    pub selection: Selection,
    pub gate: GateDecision,
    pub seed: u64,
}

/// Candidate generation, selection and gating for one stack, driven by the
/// per-source seed `derive_seed(cfg.rng_seed, source_id)`.
pub fn process_stack(stack: &ExposureStack, calib: &Calibration, cfg: &EnsembleConfig) -> Result<SourceOutcome> {
    let seed = derive_seed(cfg.rng_seed, stack.source_id());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = generate_candidates(stack, calib, cfg, &mut rng)?;
    let selection = select_pseudo_gt(pool, &cfg.metrics)?;
    let gate = quality_gate(&selection.winner, cfg.quality.as_ref());
    Ok(SourceOutcome { selection, gate, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exposure::render_mes;
    use crate::imgcore::LinearImage;
    use crate::iqa::ExternalScorer;

    fn stack(evs: &[f64]) -> ExposureStack {
        let img = LinearImage::from_fn(24, 16, |x, y| {
            let v = 0.02 + 0.3 * (x as f32 / 24.0) + 0.1 * (y % 3) as f32;
            [v, v * 0.8, v * 0.5]
        })
        .unwrap();
        render_mes(&img, evs, "s").unwrap()
    }

    fn stub(value: &str, polarity: Polarity) -> Scorer {
        Scorer::External(ExternalScorer::new(
            "stub",
            vec!["sh".into(), "-c".into(), format!("echo {value}"), "sh".into()],
            polarity,
        ))
    }

    fn scored(id: &str, values: &[(&str, f64, Polarity)]) -> FusionCandidate {
        let mut c = FusionCandidate::from_engine(id, SrgbImage::filled(2, 2, [0, 0, 0]));
        for (m, v, p) in values {
            c.scores.insert((*m).into(), IqaScore::new(*m, *v, *p));
        }
        c
    }

    fn fixed(name: &str, polarity: Polarity) -> Scorer {
        // only used where scores are pre-filled
        Scorer::External(ExternalScorer::new(name, vec!["false".into()], polarity))
    }

    #[test]
    fn default_stack_has_nine_triplets() {
        let s = stack(&crate::exposure::DEFAULT_EVS);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..500 {
            let t = pick_triplet(&s, &mut rng).unwrap();
            assert!(t.evs[0] < 0.0 && t.evs[1] == 0.0 && t.evs[2] > 0.0);
            seen.insert(t.indices);
        }
        assert_eq!(seen.len(), 9);
    }

    #[test]
    fn triplet_needs_all_classes() {
        let s = stack(&[-3.0, -2.0, -1.0]);
        let err = pick_triplet(&s, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert_eq!(err.to_string(), "stack lacks EV sign coverage");
        // 0.2 counts as zero, 0.3 does not
        assert!(pick_triplet(&stack(&[-1.0, 0.2, 1.0]), &mut ChaCha8Rng::seed_from_u64(0)).is_ok());
        assert!(pick_triplet(&stack(&[-1.0, 0.3, 1.0]), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn triplets_are_reproducible() {
        let s = stack(&crate::exposure::DEFAULT_EVS);
        let seq = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| pick_triplet(&s, &mut rng).unwrap().indices).collect::<Vec<_>>()
        };
        assert_eq!(seq(5), seq(5));
    }

    #[test]
    fn blend_weight_examples() {
        let w = blend_weights(&[600, 300, 100], &[0, 1, 2]);
        assert_eq!(w, vec![0.6, 0.3, 0.1]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(blend_weights(&[0, 0, 0], &[0, 1, 2]), vec![1.0 / 3.0; 3]);
        assert_eq!(blend_weights(&[5, 0, 5], &[1, 2]), vec![0.0, 1.0]);
    }

    #[test]
    fn blending_copies_is_identity() {
        let img = SrgbImage::from_fn(16, 9, |x, y| [(x * 15) as u8, (y * 27) as u8, 200]);
        let out = blend_linear(&[&img, &img, &img], &[0.6, 0.3, 0.1]).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!(a.abs_diff(*b) <= 1);
        }
    }

    #[test]
    fn fractional_rank_ties() {
        let r = fractional_ranks(&[3.0, 1.0, 3.0, 2.0], Polarity::LowerBetter);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        let r = fractional_ranks(&[3.0, 1.0], Polarity::HigherBetter);
        assert_eq!(r, vec![1.0, 2.0]);
    }

    #[test]
    fn mean_rank_tie_broken_by_first_metric() {
        use Polarity::*;
        let metrics = [fixed("m1", LowerBetter), fixed("m2", LowerBetter)];
        // A ranks (1, 2), B ranks (2, 1), C ranks (3, 3)
        let pool = vec![
            scored("C", &[("m1", 9.0, LowerBetter), ("m2", 9.0, LowerBetter)]),
            scored("B", &[("m1", 2.0, LowerBetter), ("m2", 1.0, LowerBetter)]),
            scored("A", &[("m1", 1.0, LowerBetter), ("m2", 2.0, LowerBetter)]),
        ];
        let sel = select_pseudo_gt(pool, &metrics).unwrap();
        assert_eq!(sel.winner.id, "A");
        assert_eq!(sel.winner.rank_stats["m1"], 1.0);
        assert_eq!(sel.winner.rank_stats["m2"], 2.0);
    }

    #[test]
    fn single_candidate_and_single_metric() {
        use Polarity::*;
        let metrics = [fixed("q", HigherBetter)];
        let one = vec![scored("only", &[("q", 0.1, HigherBetter)])];
        assert_eq!(select_pseudo_gt(one, &metrics).unwrap().winner.id, "only");
        let pool: Vec<_> = [0.3, 0.9, 0.5, 0.9]
            .iter()
            .enumerate()
            .map(|(i, v)| scored(&format!("c{i}"), &[("q", *v, HigherBetter)]))
            .collect();
        let sel = select_pseudo_gt(pool, &metrics).unwrap();
        assert_eq!(sel.winner.id, "c1");
        assert_eq!(sel.winner_index, 1);
    }

    #[test]
    fn failing_candidates_are_excluded() {
        let metrics = [fixed("q", Polarity::LowerBetter)];
        let pool = vec![
            FusionCandidate::from_engine("unscored", SrgbImage::filled(2, 2, [1, 1, 1])),
            scored("ok", &[("q", 5.0, Polarity::LowerBetter)]),
        ];
        let sel = select_pseudo_gt(pool, &metrics).unwrap();
        assert_eq!(sel.winner.id, "ok");
        assert_eq!(sel.excluded.len(), 1);
        let pool = vec![FusionCandidate::from_engine("x", SrgbImage::filled(2, 2, [1, 1, 1]))];
        let err = select_pseudo_gt(pool, &metrics).unwrap_err();
        assert_eq!(err.to_string(), "no scorable candidates");
    }

    #[test]
    fn gate_examples() {
        let c = FusionCandidate::from_engine("c", SrgbImage::filled(4, 4, [100, 100, 100]));
        let gate = |v: &str, p, t| QualityGate {
            scorer: stub(v, p),
            threshold: t,
        };
        let hb = Polarity::HigherBetter;
        assert!(!quality_gate(&c, Some(&gate("0.49", hb, 0.5))).is_keep());
        assert!(quality_gate(&c, Some(&gate("0.50", hb, 0.5))).is_keep());
        assert!(quality_gate(&c, Some(&gate("0.51", hb, 0.5))).is_keep());
        assert!(quality_gate(&c, Some(&gate("4.0", Polarity::LowerBetter, 6.0))).is_keep());
        assert!(!quality_gate(&c, Some(&gate("7.0", Polarity::LowerBetter, 6.0))).is_keep());
        assert!(quality_gate(&c, None).is_keep());
        let broken = QualityGate {
            scorer: stub("abc", hb),
            threshold: 0.5,
        };
        assert_eq!(
            quality_gate(&c, Some(&broken)),
            GateDecision::Reject {
                reason: "quality scorer unavailable".into(),
                score: None
            }
        );
    }

    #[test]
    fn seeds_are_stable() {
        assert_eq!(derive_seed(7, "a"), derive_seed(7, "a"));
        assert_ne!(derive_seed(7, "a"), derive_seed(8, "a"));
        assert_ne!(derive_seed(7, "a"), derive_seed(7, "b"));
        // independent check of the definition
        let d = Sha256::digest([&7u64.to_le_bytes()[..], b"a"].concat());
        assert_eq!(derive_seed(7, "a"), u64::from_le_bytes(d[..8].try_into().unwrap()));
    }
}
