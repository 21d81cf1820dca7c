//! Whole-pipeline properties that only show up when synthesis, extraction,
//! training, and scoring run against each other: generalization to a fresh
//! corpus draw, and files long enough to span several segments.

use coughnet::harness::{
    prepare_corpus, roc_auc, run_crossval, run_final_train, EvalTarget, FeatureExtractor,
    PreparedCorpus,
};
use coughnet::models::{FeatureSet, ModelSpec};
use coughnet::synth::{generate_corpus, SynthSpec};
use coughnet::Config;

fn make_corpus(spec: &SynthSpec, dir: &std::path::Path, cfg: &Config) -> PreparedCorpus {
    let entries = generate_corpus(spec, dir).unwrap();
    prepare_corpus(&entries, dir, cfg).unwrap()
}

fn dnn_target(cfg: &Config) -> EvalTarget {
    let extractor = FeatureExtractor::new(cfg).unwrap();
    EvalTarget::Single(ModelSpec::dnn(
        FeatureSet::LogMel,
        extractor.functional_dim(FeatureSet::LogMel),
    ))
}

/// A model trained on the full corpus should score a disjoint draw from the
/// same generator about as well as cross-validation predicted: the held-out
/// AUC must land within 0.1 of the cross-validation mean. A train/serve skew
/// in extraction or aggregation would break this long before the tolerance.
#[test]
fn final_training_generalizes_to_a_fresh_draw() {
    let mut cfg = Config::default();
    cfg.epochs = 6;
    let dir = tempfile::tempdir().unwrap();

    let train_spec = SynthSpec {
        n_files: 60,
        imbalance: (2, 1),
        duration_secs: (0.5, 0.9),
        seed: 21,
    };
    let heldout_spec = SynthSpec {
        seed: 22,
        n_files: 30,
        ..train_spec
    };
    let train = make_corpus(&train_spec, &dir.path().join("train"), &cfg);
    let heldout = make_corpus(&heldout_spec, &dir.path().join("heldout"), &cfg);

    let target = dnn_target(&cfg);
    let report = run_crossval(&train, &target, &cfg).unwrap();
    let model = run_final_train(&train, &target, &cfg).unwrap();

    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for file in &heldout.files {
        scores.push(model.score_segments(&file.segments).unwrap());
        labels.push(file.label);
    }
    let heldout_auc = roc_auc(&scores, &labels).unwrap();

    assert!(
        (heldout_auc - report.mean.auc).abs() <= 0.1,
        "held-out AUC {heldout_auc:.4} vs cross-validation mean {:.4}",
        report.mean.auc
    );
}

/// Clips longer than one segment window must flow through as several segments
/// per file, score once per file, and aggregate as the plain mean of their
/// per-segment probabilities.
#[test]
fn long_clips_span_segments_and_average_cleanly() {
    let mut cfg = Config::default();
    cfg.epochs = 1;
    let dir = tempfile::tempdir().unwrap();

    // 4.2–4.4 s at 16 kHz is 67,200+ samples: two segments per file.
    let spec = SynthSpec {
        n_files: 10,
        imbalance: (1, 1),
        duration_secs: (4.2, 4.4),
        seed: 5,
    };
    let corpus = make_corpus(&spec, dir.path(), &cfg);
    for file in &corpus.files {
        assert_eq!(file.segments.len(), 2, "{}", file.path.display());
    }

    let target = dnn_target(&cfg);
    let report = run_crossval(&corpus, &target, &cfg).unwrap();
    let scored: usize = report.folds.iter().map(|f| f.scores.len()).sum();
    assert_eq!(
        scored,
        corpus.files.len(),
        "one score per file, not per segment"
    );

    let model = run_final_train(&corpus, &target, &cfg).unwrap();
    for file in &corpus.files {
        let per_segment: Vec<f64> = file
            .segments
            .iter()
            .map(|seg| model.score_segment(seg).unwrap())
            .collect();
        let mean = per_segment.iter().sum::<f64>() / per_segment.len() as f64;
        let file_score = model.score_segments(&file.segments).unwrap();
        assert!((file_score - mean).abs() < 1e-12);
    }
}
