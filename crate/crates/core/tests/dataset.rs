use std::collections::BTreeMap;

use proptest::prelude::*;
use pseudogt::dataset::{
    corpus_stats, emit_records, read_manifest, write_manifest, DatasetRecord, Pairing, MANIFEST_NAME,
};
use pseudogt::ensemble::{FusionCandidate, GateDecision};
use pseudogt::exposure::{render_mes, ExposureStack, DEFAULT_EVS};
use pseudogt::imgcore::{LinearImage, SrgbImage};
use pseudogt::synth::fixture_source;
use pseudogt::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn record(i: usize) -> DatasetRecord {
    let mut scores = BTreeMap::new();
    scores.insert("niqe".to_string(), 3.0 + i as f64 / 7.0);
    scores.insert("ext:score \"q\"".to_string(), -(i as f64) * 1e-9);
    DatasetRecord {
        source_id: format!("src_{i:04}"),
        input_path: format!("input/src_{i:04}/src_{i:04}_ev+1.00.png"),
        input_ev: (i % 7) as f64 - 3.0,
        pseudo_gt_path: format!("gt/src_{i:04}/src_{i:04}_gt.png"),
        scores,
        provenance: "mertens=0.5+gradient=0.5 @ ev[-2,0,2]".into(),
        seed: (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    }
}

fn seven_frame_stack() -> ExposureStack {
    render_mes(&fixture_source(3, 48, 32), &DEFAULT_EVS, "scene").unwrap()
}

fn gt() -> FusionCandidate {
    FusionCandidate::from_engine("mertens", SrgbImage::filled(48, 32, [120, 110, 100]))
}

fn keep() -> GateDecision {
    GateDecision::Keep { score: Some(0.9) }
}

fn count_files(dir: &std::path::Path) -> usize {
    if !dir.exists() {
        return 0;
    }
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            if p.is_dir() {
                count_files(&p)
            } else {
                1
            }
        })
        .sum()
}

#[test]
fn manifest_round_trip_thousand_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(MANIFEST_NAME);
    let records: Vec<_> = (0..1000).map(record).collect();
    write_manifest(&records, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1000);
    assert!(text.lines().all(|l| l.starts_with("{\"source_id\":")));
    assert_eq!(read_manifest(&path).unwrap(), records);
}

#[test]
fn truncated_line_is_reported_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(MANIFEST_NAME);
    write_manifest(&(0..5).map(record).collect::<Vec<_>>(), &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() - 20]).unwrap();
    match read_manifest(&path) {
        Err(Error::Manifest { line, .. }) => assert_eq!(line, 5),
        other => panic!("expected manifest error, got {other:?}"),
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(MANIFEST_NAME);
    let mut line = serde_json::to_value(record(0)).unwrap();
    line["extra"] = serde_json::json!(1);
    std::fs::write(&path, format!("{line}\n")).unwrap();
    assert!(matches!(read_manifest(&path), Err(Error::Manifest { line: 1, .. })));
}

#[test]
fn empty_manifest_is_empty_file_and_zeroed_stats() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(MANIFEST_NAME);
    write_manifest(&[], &path).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 0);
    assert!(read_manifest(&path).unwrap().is_empty());
    let stats = corpus_stats(&path).unwrap();
    assert_eq!(stats.image_count, 0);
    assert_eq!(stats.frame_count, 0);
    assert!(stats.histogram.iter().all(|&c| c == 0));
    assert!(stats.quantiles.is_empty());
}

#[test]
fn all_frames_gives_seven_records_and_one_gt() {
    let dir = tempfile::tempdir().unwrap();
    let stack = seven_frame_stack();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let records = emit_records(&stack, &gt(), &keep(), dir.path(), Pairing::AllFrames, &mut rng, 11).unwrap();
    assert_eq!(records.len(), 7);
    assert_eq!(count_files(&dir.path().join("gt")), 1);
    assert_eq!(count_files(&dir.path().join("input")), 7);
    for (r, ev) in records.iter().zip(DEFAULT_EVS) {
        assert_eq!(r.input_ev, ev);
        assert!(dir.path().join(&r.input_path).is_file());
        assert!(dir.path().join(&r.pseudo_gt_path).is_file());
        assert_eq!(r.seed, 11);
    }
}

#[test]
fn random_frame_is_reproducible() {
    let stack = seven_frame_stack();
    let pick = |seed| {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = emit_records(&stack, &gt(), &keep(), dir.path(), Pairing::RandomFrame, &mut rng, seed).unwrap();
        assert_eq!(r.len(), 1);
        r[0].input_ev
    };
    assert_eq!(pick(5), pick(5));
    let distinct: std::collections::BTreeSet<i64> = (0..40).map(|s| pick(s) as i64).collect();
    assert!(distinct.len() > 1);
}

#[test]
fn gate_rejected_candidate_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let reject = GateDecision::Reject {
        reason: "below threshold".into(),
        score: Some(0.1),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let err = emit_records(&seven_frame_stack(), &gt(), &reject, &out, Pairing::AllFrames, &mut rng, 0).unwrap_err();
    assert!(matches!(err, Error::GateRejected(_)));
    assert!(!out.exists());
}

#[test]
fn all_black_inputs_land_in_bin_zero() {
    let dir = tempfile::tempdir().unwrap();
    let black = LinearImage::filled(16, 16, [0.0; 3]).unwrap();
    let mut records = Vec::new();
    for i in 0..3 {
        let stack = render_mes(&black, &[-1.0, 0.0, 1.0], &format!("b{i}")).unwrap();
        let gt = FusionCandidate::from_engine("mertens", SrgbImage::filled(16, 16, [0; 3]));
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        records.extend(emit_records(&stack, &gt, &keep(), dir.path(), Pairing::AllFrames, &mut rng, i).unwrap());
    }
    let path = dir.path().join(MANIFEST_NAME);
    write_manifest(&records, &path).unwrap();
    let stats = corpus_stats(&path).unwrap();
    assert_eq!(stats.image_count, 3);
    assert_eq!(stats.histogram[0], 9);
    assert_eq!(stats.histogram.iter().sum::<u64>(), 9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn manifest_round_trip_arbitrary(
        ids in proptest::collection::vec("[a-z0-9_-]{1,12}", 0..20),
        evs in proptest::collection::vec(-6.0f64..6.0, 20),
        scores in proptest::collection::vec(-1e6f64..1e6, 20),
        seed in any::<u64>(),
        prov in "\\PC{0,40}",
    ) {
        let records: Vec<DatasetRecord> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| DatasetRecord {
                source_id: id.clone(),
                input_path: format!("input/{id}/{id}_ev{:+.2}.png", evs[i]),
                input_ev: evs[i],
                pseudo_gt_path: format!("gt/{id}/{id}_gt.png"),
                scores: [("niqe".to_string(), scores[i])].into_iter().collect(),
                provenance: prov.clone(),
                seed: seed.wrapping_add(i as u64),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_NAME);
        write_manifest(&records, &path).unwrap();
        prop_assert_eq!(read_manifest(&path).unwrap(), records);
    }
}
