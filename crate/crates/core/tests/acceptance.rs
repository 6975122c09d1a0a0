//! Acceptance run: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use pseudogt::dataset::{read_manifest, MANIFEST_NAME};
use pseudogt::ensemble::{
    derive_seed, generate_candidates, quality_gate, select_pseudo_gt, Calibration, EnsembleConfig,
    FusionCandidate, GateDecision, QualityGate,
};
use pseudogt::exposure::{render_ev, render_mes, retarget_exposure, StyleCode, DEFAULT_EVS};
use pseudogt::fusion::{normalize_weights, Engine, FusionConfig, WeightMaps};
use pseudogt::imgcore::{load_image, save_srgb, srgb_encode, GrayImage, SrgbImage};
use pseudogt::iqa::{fit_aggd, niqe, ExternalScorer, NiqeModel, Polarity, Scorer};
use pseudogt::pyramid::{auto_depth, collapse, laplacian_pyramid};
use pseudogt::synth::{add_gaussian_noise, bracketed_ramp, fixture_source, natural_srgb, write_fixture_corpus};

type Outcome = Result<String, String>;
type Check = fn(&mut Workspace) -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

struct Workspace {
    root: tempfile::TempDir,
    model: Option<PathBuf>,
    fixtures: Option<PathBuf>,
    seven_ev_run: Option<PathBuf>,
}

impl Workspace {
    fn path(&self, name: &str) -> PathBuf {
        self.root.path().join(name)
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pseudogt"))
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = bin().args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn pyramid_round_trip(_: &mut Workspace) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f32;
    let mut odd = 0;
    for _ in 0..50 {
        let w = rng.random_range(8..=257);
        let h = rng.random_range(8..=257);
        odd += usize::from(w % 2 == 1 || h % 2 == 1);
        let img = GrayImage::from_fn(w, h, |_, _| rng.random::<f32>());
        let back = collapse(&laplacian_pyramid(&img, auto_depth(w, h)).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        worst = worst.max(back.max_abs_diff(&img));
    }
    let elapsed = start.elapsed();
    ensure!(odd > 0, "no odd dimensions drawn");
    ensure!(worst <= 1e-5, "max abs error {worst:e}");
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("max abs error {worst:.1e}, {odd} of 50 with odd dims, {elapsed:.2?}"))
}

fn normalization_suite(_: &mut Workspace) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pixels = 0usize;
    for _ in 0..200 {
        let n = rng.random_range(1..=7);
        let len = rng.random_range(1..=256);
        let maps: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..len)
                    .map(|_| match rng.random_range(0..4) {
                        0 => 0.0,
                        1 => rng.random_range(0.0..1e-7),
                        2 => rng.random_range(0.0..1.0),
                        _ => rng.random_range(0.0..1e3),
                    })
                    .collect()
            })
            .collect();
        let w = WeightMaps::new(len, 1, maps, false).map_err(|e| e.to_string())?;
        let before = w.pixel_sums();
        let out = normalize_weights(&w, 1e-12).map_err(|e| e.to_string())?;
        let after = out.pixel_sums();
        for i in 0..len {
            for m in out.maps() {
                ensure!((0.0..=1.0).contains(&m[i]), "weight {} out of [0, 1]", m[i]);
            }
            ensure!(after[i] <= 1.0, "sum {} > 1", after[i]);
            if before[i] >= 1e-6 {
                ensure!(after[i] >= 0.999999, "sum {} < 0.999999 for raw sum {}", after[i], before[i]);
            }
        }
        pixels += len;
    }
    Ok(format!("{pixels} pixels over 200 random weight sets"))
}

fn fusion_invariance(_: &mut Workspace) -> Outcome {
    let cfg = FusionConfig::default();
    let frames: Vec<SrgbImage> = (0..4).map(|s| natural_srgb(300 + s, 67, 45)).collect();
    let orders: [[usize; 4]; 3] = [[3, 2, 1, 0], [1, 3, 0, 2], [2, 0, 3, 1]];
    for name in Engine::BUILTIN {
        let engine = Engine::parse(name).map_err(|e| e.to_string())?;
        for n in 1..=5 {
            let same = engine.fuse(&vec![frames[0].clone(); n], &cfg).map_err(|e| e.to_string())?;
            let worst = same.data().iter().zip(frames[0].data()).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0);
            ensure!(worst <= 1, "{name} on {n} identical frames differs by {worst}/255");
        }
        let base = engine.fuse(&frames, &cfg).map_err(|e| e.to_string())?;
        for order in orders {
            let permuted: Vec<SrgbImage> = order.iter().map(|&i| frames[i].clone()).collect();
            ensure!(engine.fuse(&permuted, &cfg).map_err(|e| e.to_string())? == base, "{name} depends on frame order {order:?}");
        }
    }
    Ok("mertens, gradient, flat-weighted: idempotent within 1/255, order-free".into())
}

fn dynamic_range(_: &mut Workspace) -> Outcome {
    let scene = bracketed_ramp(512, 256);
    let frames: Vec<SrgbImage> = [-2.0, 0.0, 2.0].iter().map(|&ev| render_ev(&scene, ev)).collect();
    let total = 512 * 256;
    let min_in = frames.iter().map(SrgbImage::clipped_pixels).min().unwrap_or(0);
    let mut parts = Vec::new();
    for name in Engine::BUILTIN {
        let fused = Engine::parse(name)
            .and_then(|e| e.fuse(&frames, &FusionConfig::default()))
            .map_err(|e| e.to_string())?;
        let clipped = fused.clipped_pixels();
        ensure!(clipped <= min_in, "{name}: {clipped} clipped > input min {min_in}");
        ensure!(
            (min_in - clipped) * 5 >= total,
            "{name}: reduction {} < 20% of {total} pixels",
            min_in - clipped
        );
        parts.push(format!("{name} {:.1}%", 100.0 * clipped as f64 / total as f64));
    }
    Ok(format!(
        "min input clipped {:.1}%, fused {}",
        100.0 * min_in as f64 / total as f64,
        parts.join(", ")
    ))
}

fn exposure_identity(_: &mut Workspace) -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..4 {
        let src = fixture_source(400 + seed, 96, 80);
        ensure!(render_ev(&src, 0.0) == srgb_encode(&src), "EV 0 differs from plain encode");
        let evs: Vec<f64> = (-12..=12).map(|k| f64::from(k) * 0.25).collect();
        let renders: Vec<SrgbImage> = evs.iter().map(|&ev| render_ev(&src, ev)).collect();
        for pair in renders.windows(2) {
            ensure!(pair[0].data().iter().zip(pair[1].data()).all(|(a, b)| a <= b), "codes decrease with EV");
        }
        let img = natural_srgb(500 + seed, 128, 96);
        for t in [0.25, 0.4, 0.5, 0.6, 0.75] {
            let r = retarget_exposure(&img, StyleCode::new(t).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            ensure!(r.reachable, "target {t} unreachable");
            worst = worst.max((r.achieved - t).abs());
        }
    }
    ensure!(worst <= 1e-3, "retarget error {worst:e}");
    Ok(format!("exact at EV 0, monotone over 25 EVs, retarget error <= {worst:.1e}"))
}

fn aggd_recovery(_: &mut Workspace) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let normal = Normal::new(0.0, 1.0).expect("valid");
    let gauss: Vec<f64> = (0..1_000_000).map(|_| normal.sample(&mut rng)).collect();
    let laplace: Vec<f64> = (0..1_000_000)
        .map(|_| {
            let u: f64 = rng.random_range(-0.5..0.5);
            -u.signum() * (1.0 - 2.0 * u.abs()).ln()
        })
        .collect();
    let a2 = fit_aggd(&gauss).map_err(|e| e.to_string())?.alpha;
    let a1 = fit_aggd(&laplace).map_err(|e| e.to_string())?.alpha;
    ensure!((a2 - 2.0).abs() <= 0.2, "Gaussian alpha {a2}");
    ensure!((a1 - 1.0).abs() <= 0.1, "Laplacian alpha {a1}");
    Ok(format!("alpha {a2:.3} (Gaussian), {a1:.3} (Laplacian)"))
}

fn niqe_monotonicity(ws: &mut Workspace) -> Outcome {
    let start = Instant::now();
    let corpus = ws.path("clean");
    std::fs::create_dir_all(&corpus).map_err(|e| e.to_string())?;
    for s in 0..10 {
        save_srgb(corpus.join(format!("clean_{s:02}.png")), &natural_srgb(1000 + s, 512, 512)).map_err(|e| e.to_string())?;
    }
    let model_path = ws.path("niqe.model");
    run_cli(&["fit-niqe", "--corpus", &format!("{}/*.png", p(&corpus)), "--out", p(&model_path)])?;
    let model = NiqeModel::load(&model_path).map_err(|e| e.to_string())?;
    let img = natural_srgb(50, 512, 512);
    let scores: Vec<f64> = [5.0, 15.0, 30.0]
        .iter()
        .map(|s| niqe(&add_gaussian_noise(&img, s / 255.0, 7), &model).map(|q| q.value))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ws.model = Some(model_path);
    ensure!(scores[0] < scores[1] && scores[1] < scores[2], "not increasing: {scores:?}");
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "NIQE {:.2} < {:.2} < {:.2} for sigma 5/15/30, {elapsed:.1?}",
        scores[0], scores[1], scores[2]
    ))
}

fn fixtures(ws: &mut Workspace) -> Result<PathBuf, String> {
    if let Some(f) = &ws.fixtures {
        return Ok(f.clone());
    }
    let dir = ws.path("fixtures");
    write_fixture_corpus(&dir, 20, 320, 240, 0).map_err(|e| e.to_string())?;
    ws.fixtures = Some(dir.clone());
    Ok(dir)
}

fn model(ws: &Workspace) -> Result<Arc<NiqeModel>, String> {
    let path = ws.model.as_ref().ok_or("NIQE model missing (criterion 7 did not produce one)")?;
    NiqeModel::load(path).map(Arc::new).map_err(|e| e.to_string())
}

fn ensemble_beats_individual(ws: &mut Workspace) -> Outcome {
    let dir = fixtures(ws)?;
    let scorer = Scorer::Niqe(model(ws)?);
    let engines = Engine::BUILTIN
        .iter()
        .map(|n| Engine::parse(n))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let mut cfg = EnsembleConfig::new(engines, vec![scorer.clone()]);
    cfg.rng_seed = 9;
    let calib = Calibration::uniform(cfg.engines.len());
    let mut wins = 0;
    let mut sources = 0;
    for entry in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("src").to_owned();
        let stack = load_image(&path)
            .and_then(|img| render_mes(&img, &DEFAULT_EVS, &id))
            .map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, &id));
        let pool = generate_candidates(&stack, &calib, &cfg, &mut rng).map_err(|e| e.to_string())?;
        let individual: Vec<FusionCandidate> = pool[..cfg.engines.len()].to_vec();
        let sel = select_pseudo_gt(pool, &cfg.metrics).map_err(|e| e.to_string())?;
        let best = sel.winner.scores["niqe"].value;
        for c in &individual {
            let v = scorer.score(&c.image).map_err(|e| e.to_string())?.value;
            ensure!(best <= v, "{id}: selected {best} worse than {} {v}", c.id);
        }
        wins += usize::from(sel.winner.id.starts_with("blend-"));
        sources += 1;
    }
    ensure!(sources == 20, "expected 20 fixture sources, found {sources}");
    Ok(format!("selected NIQE <= every engine on {sources} sources ({wins} won by blends)"))
}

fn pipeline_determinism(ws: &mut Workspace) -> Outcome {
    let dir = fixtures(ws)?;
    let model = ws.model.clone().ok_or("NIQE model missing")?;
    let cfg = ws.path("run.cfg");
    std::fs::write(
        &cfg,
        format!("metrics = niqe\nniqe_model = {}\ncalibration_groups = 64\ncalibration_sources = 20\n", p(&model)),
    )
    .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut manifests = Vec::new();
    for (name, workers) in [("run_a", "1"), ("run_b", "1"), ("run_c", "8")] {
        let out = ws.path(name);
        run_cli(&["gen-dataset", "--in", p(&dir), "--out", p(&out), "--config", p(&cfg), "--seed", "42", "--workers", workers])?;
        manifests.push(std::fs::read(out.join(MANIFEST_NAME)).map_err(|e| e.to_string())?);
    }
    let elapsed = start.elapsed();
    ws.seven_ev_run = Some(ws.path("run_a"));
    ensure!(!manifests[0].is_empty(), "empty manifest");
    ensure!(manifests[0] == manifests[1], "two runs differ");
    ensure!(manifests[0] == manifests[2], "--workers 1 and 8 differ");
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    Ok(format!(
        "3 runs byte-identical ({} bytes), {:.1?} per run",
        manifests[0].len(),
        elapsed / 3
    ))
}

fn quality_gate_threshold(ws: &mut Workspace) -> Outcome {
    let img = natural_srgb(7, 32, 32);
    let mut got = Vec::new();
    for value in ["0.49", "0.50", "0.51"] {
        let script = ws.path(&format!("gate_{value}.sh"));
        std::fs::write(&script, format!("#!/bin/sh\necho {value}\n")).map_err(|e| e.to_string())?;
        let gate = QualityGate {
            scorer: Scorer::External(ExternalScorer::new("gate", vec!["sh".into(), p(&script).into()], Polarity::HigherBetter)),
            threshold: 0.5,
        };
        let decision = quality_gate(&FusionCandidate::from_engine("mertens", img.clone()), Some(&gate));
        got.push(match decision {
            GateDecision::Keep { .. } => "keep",
            GateDecision::Reject { .. } => "reject",
        });
    }
    ensure!(got == ["reject", "keep", "keep"], "got {got:?}");
    Ok("0.49/0.50/0.51 -> reject/keep/keep".into())
}

fn pairing_ratio(ws: &mut Workspace) -> Outcome {
    let run = ws.seven_ev_run.clone().ok_or("criterion 9 run missing")?;
    let records = read_manifest(run.join(MANIFEST_NAME)).map_err(|e| e.to_string())?;
    let mut per_source = std::collections::BTreeMap::<&str, usize>::new();
    for r in &records {
        *per_source.entry(r.source_id.as_str()).or_default() += 1;
    }
    ensure!(!per_source.is_empty(), "no accepted sources");
    ensure!(per_source.values().all(|&n| n == 7), "per-source counts {per_source:?}");
    ensure!(records.len() == 7 * per_source.len(), "{} records", records.len());
    Ok(format!("{} records / {} accepted sources = 7", records.len(), per_source.len()))
}

fn main() {
    let criteria: [(&str, Check); 11] = [
        ("pyramid round-trip", pyramid_round_trip),
        ("weight normalization", normalization_suite),
        ("fusion idempotence and permutation invariance", fusion_invariance),
        ("dynamic-range recovery", dynamic_range),
        ("exposure identity and monotonicity", exposure_identity),
        ("AGGD fit recovery", aggd_recovery),
        ("NIQE noise monotonicity", niqe_monotonicity),
        ("ensemble beats individual engines", ensemble_beats_individual),
        ("pipeline determinism", pipeline_determinism),
        ("quality gate", quality_gate_threshold),
        ("pairing ratio", pairing_ratio),
    ];
    let mut ws = Workspace {
        root: tempfile::tempdir().expect("temp dir"),
        model: None,
        fixtures: None,
        seven_ev_run: None,
    };
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(|| check(&mut ws)))
            .unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
