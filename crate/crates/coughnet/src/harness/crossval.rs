//! Five-fold cross-validation, final training, and run reporting.
//!
//! Folds are independent given their derived seeds, so they run on scoped
//! threads and are merged by fold index — never by completion order. Fold
//! `k` trains on the other four folds and scores fold `k`'s files; a
//! fusion target additionally retrains every member model inside each
//! fold before fitting the fusion head on the members' frozen embeddings,
//! so no validation file ever leaks into any trainable parameter.

use std::io::Write as _;
use std::path::Path;
use std::process::Command;

use serde::Serialize;
use serde_json::json;

use crate::audio::{Label, N_FOLDS};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::fusion::{train_fusion, validate_members, EmbeddingStack, FusionHead, FusionStrategy};
use crate::models::{ModelSpec, SingleModel};

use super::extract::{FileFeatures, PreparedCorpus, SegmentFeatures};
use super::metrics::{aggregate_file_score, evaluate, mean_std, MetricsReport, TARGET_SENSITIVITY};
use super::trainer::{train_single, TrainExample};

/// Offset between the seeds of co-trained fusion members, so member
/// initializations and epoch shuffles are decorrelated while the first
/// member still reproduces the equivalent single-model run exactly.
const MEMBER_SEED_STRIDE: u64 = 7919;

/// What a cross-validation or final-training run evaluates.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EvalTarget {
    /// One architecture trained end to end.
    Single(ModelSpec),
    /// Member architectures retrained per fold, combined by a fusion head.
    Fusion {
        strategy: FusionStrategy,
        members: Vec<ModelSpec>,
    },
}

impl EvalTarget {
    pub fn validate(&self) -> Result<()> {
        if let EvalTarget::Fusion { members, .. } = self {
            let kinds: Vec<_> = members.iter().map(ModelSpec::kind).collect();
            validate_members(&kinds)?;
        }
        Ok(())
    }

    /// Short human-readable form for logs.
    pub fn summary(&self) -> String {
        match self {
            EvalTarget::Single(spec) => spec.kind().to_string(),
            EvalTarget::Fusion { strategy, members } => {
                let kinds: Vec<String> = members.iter().map(|m| m.kind().to_string()).collect();
                format!("{strategy}[{}]", kinds.join(", "))
            }
        }
    }
}

/// One fold's per-file scores and the metrics computed from them.
#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    /// `(file, label, score)` for every validation file of the fold.
    pub scores: Vec<FileScore>,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct FileScore {
    pub file: String,
    pub label: Label,
    pub score: f64,
}

/// All five folds plus their per-metric mean and population std.
#[derive(Debug, Clone)]
pub struct CrossvalReport {
    pub folds: Vec<FoldResult>,
    pub mean: MetricsReport,
    pub std: MetricsReport,
}

/// Runs five-fold cross-validation of `target` over an extracted corpus.
///
/// Fold `k` derives its seed as `config seed + k`; fusion member `m`
/// within a fold adds `m ·` [`MEMBER_SEED_STRIDE`] on top, and the fusion
/// head reuses the fold seed. Every fold must contain both classes.
pub fn run_crossval(
    corpus: &PreparedCorpus,
    target: &EvalTarget,
    cfg: &Config,
) -> Result<CrossvalReport> {
    target.validate()?;
    validate_fold_classes(corpus)?;

    let fold_results: Vec<Result<FoldResult>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..N_FOLDS)
            .map(|fold| scope.spawn(move || run_fold(corpus, target, cfg, fold)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fold thread panicked"))
            .collect()
    });
    let folds = fold_results.into_iter().collect::<Result<Vec<_>>>()?;

    let stat = |pick: fn(&MetricsReport) -> f64| {
        let values: Vec<f64> = folds.iter().map(|f| pick(&f.metrics)).collect();
        mean_std(&values)
    };
    let (sens, spec, auc, thr) = (
        stat(|m| m.sensitivity),
        stat(|m| m.specificity),
        stat(|m| m.auc),
        stat(|m| m.threshold),
    );
    Ok(CrossvalReport {
        folds,
        mean: MetricsReport {
            sensitivity: sens.0,
            specificity: spec.0,
            auc: auc.0,
            threshold: thr.0,
        },
        std: MetricsReport {
            sensitivity: sens.1,
            specificity: spec.1,
            auc: auc.1,
            threshold: thr.1,
        },
    })
}

fn validate_fold_classes(corpus: &PreparedCorpus) -> Result<()> {
    for fold in 0..N_FOLDS {
        let files = corpus.fold_files(fold);
        let n_pos = files.iter().filter(|f| f.label.is_positive()).count();
        if files.is_empty() || n_pos == 0 || n_pos == files.len() {
            return Err(Error::InvalidArg(format!(
                "fold {fold} must contain both classes ({} positive of {} files)",
                n_pos,
                files.len()
            )));
        }
    }
    Ok(())
}

/// Trains on every fold except `fold` and evaluates on `fold` — the unit of
/// work that [`run_crossval`] runs five of. Public so single-fold experiments
/// (seed sweeps, ablations) can reuse the exact training-and-scoring path.
pub fn run_fold(
    corpus: &PreparedCorpus,
    target: &EvalTarget,
    cfg: &Config,
    fold: usize,
) -> Result<FoldResult> {
    let train = corpus.complement_files(fold);
    let val = corpus.fold_files(fold);
    let fold_seed = cfg.seed + fold as u64;

    let scores = match target {
        EvalTarget::Single(spec) => {
            let examples = segment_examples(&train, spec)?;
            let (model, _) = train_single(spec, &examples, cfg, fold_seed)?;
            score_files(&val, |seg| {
                Ok(model.predict(seg.input_for(spec)?)?.probability())
            })?
        }
        EvalTarget::Fusion { strategy, members } => {
            let trained = train_member_models(&train, members, cfg, fold_seed)?;
            let mut head = FusionHead::new(*strategy);
            if strategy.is_trainable() {
                let stacks = build_stacks(&trained, &train)?;
                train_fusion(&mut head, &stacks, cfg, fold_seed)?;
            }
            score_files(&val, |seg| {
                let outputs = member_outputs(&trained, seg)?;
                head.score(&outputs)
            })?
        }
    };

    let labels: Vec<Label> = scores.iter().map(|s| s.label).collect();
    let values: Vec<f64> = scores.iter().map(|s| s.score).collect();
    let metrics = evaluate(&values, &labels, TARGET_SENSITIVITY)?;
    Ok(FoldResult {
        fold,
        scores,
        metrics,
    })
}

fn segment_examples(files: &[&FileFeatures], spec: &ModelSpec) -> Result<Vec<TrainExample>> {
    let mut examples = Vec::new();
    for file in files {
        for seg in &file.segments {
            examples.push(TrainExample {
                input: seg.input_for(spec)?.to_vec(),
                label: file.label.as_f64(),
            });
        }
    }
    Ok(examples)
}

fn train_member_models(
    files: &[&FileFeatures],
    members: &[ModelSpec],
    cfg: &Config,
    base_seed: u64,
) -> Result<Vec<SingleModel>> {
    members
        .iter()
        .enumerate()
        .map(|(m, spec)| {
            let examples = segment_examples(files, spec)?;
            let seed = base_seed + m as u64 * MEMBER_SEED_STRIDE;
            Ok(train_single(spec, &examples, cfg, seed)?.0)
        })
        .collect()
}

fn member_outputs(
    members: &[SingleModel],
    seg: &SegmentFeatures,
) -> Result<Vec<crate::models::ModelOutput>> {
    members
        .iter()
        .map(|m| m.predict(seg.input_for(m.spec())?))
        .collect()
}

/// Runs every training-split segment through the frozen members and pairs
/// each resulting embedding stack with its file label.
pub fn build_stacks(
    members: &[SingleModel],
    files: &[&FileFeatures],
) -> Result<Vec<(EmbeddingStack, f64)>> {
    let mut stacks = Vec::new();
    for file in files {
        for seg in &file.segments {
            let outputs = member_outputs(members, seg)?;
            stacks.push((EmbeddingStack::from_outputs(&outputs)?, file.label.as_f64()));
        }
    }
    Ok(stacks)
}

fn score_files(
    files: &[&FileFeatures],
    mut segment_score: impl FnMut(&SegmentFeatures) -> Result<f64>,
) -> Result<Vec<FileScore>> {
    files
        .iter()
        .map(|file| {
            let probs = file
                .segments
                .iter()
                .map(&mut segment_score)
                .collect::<Result<Vec<f64>>>()?;
            Ok(FileScore {
                file: file.path.display().to_string(),
                label: file.label,
                score: aggregate_file_score(&probs)?,
            })
        })
        .collect()
}

/// A model trained on the full corpus, ready to score held-out audio.
pub enum TrainedModel {
    Single(SingleModel),
    Fusion {
        members: Vec<SingleModel>,
        head: FusionHead,
    },
}

impl TrainedModel {
    /// Probability for one segment.
    pub fn score_segment(&self, seg: &SegmentFeatures) -> Result<f64> {
        match self {
            TrainedModel::Single(model) => {
                Ok(model.predict(seg.input_for(model.spec())?)?.probability())
            }
            TrainedModel::Fusion { members, head } => head.score(&member_outputs(members, seg)?),
        }
    }

    /// Mean segment probability for one file.
    pub fn score_segments(&self, segments: &[SegmentFeatures]) -> Result<f64> {
        let probs = segments
            .iter()
            .map(|seg| self.score_segment(seg))
            .collect::<Result<Vec<f64>>>()?;
        aggregate_file_score(&probs)
    }
}

/// Trains `target` on the whole corpus — no validation split — for
/// checkpointing and blind-test scoring.
pub fn run_final_train(
    corpus: &PreparedCorpus,
    target: &EvalTarget,
    cfg: &Config,
) -> Result<TrainedModel> {
    target.validate()?;
    if corpus.files.is_empty() {
        return Err(Error::InvalidArg("empty corpus".into()));
    }
    let all: Vec<&FileFeatures> = corpus.files.iter().collect();
    match target {
        EvalTarget::Single(spec) => {
            let examples = segment_examples(&all, spec)?;
            let (model, _) = train_single(spec, &examples, cfg, cfg.seed)?;
            Ok(TrainedModel::Single(model))
        }
        EvalTarget::Fusion { strategy, members } => {
            let trained = train_member_models(&all, members, cfg, cfg.seed)?;
            let mut head = FusionHead::new(*strategy);
            if strategy.is_trainable() {
                let stacks = build_stacks(&trained, &all)?;
                train_fusion(&mut head, &stacks, cfg, cfg.seed)?;
            }
            Ok(TrainedModel::Fusion {
                members: trained,
                head,
            })
        }
    }
}

/// Run identity echoed into `results.json` alongside the hyperparameters.
#[derive(Debug, Clone, Default)]
pub struct RunInfo {
    /// SHA-256 digests of the member checkpoints, when the run was
    /// launched from a fusion checkpoint; empty otherwise.
    pub member_checkpoints: Vec<String>,
}

/// The repository's `git describe` output, or `"unknown"` outside a
/// checkout.
pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|out| out.status.success())
        .and_then(|out| String::from_utf8(out.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

/// Writes the run report: config echo, per-fold metrics, aggregate
/// mean/std, and a `meta` block. Everything outside `meta` is a pure
/// function of (corpus, target, config), so repeated runs agree byte for
/// byte up to that block.
pub fn write_results_json(
    path: &Path,
    report: &CrossvalReport,
    target: &EvalTarget,
    cfg: &Config,
    info: &RunInfo,
) -> Result<()> {
    let mut config_echo = serde_json::Map::new();
    for (k, v) in cfg.to_pairs() {
        config_echo.insert(k, json!(v));
    }
    config_echo.insert(
        "target".into(),
        serde_json::to_value(target).expect("target serializes"),
    );
    config_echo.insert("member_checkpoints".into(), json!(info.member_checkpoints));
    config_echo.insert("git".into(), json!(git_describe()));

    let fold_json = |f: &FoldResult| {
        json!({
            "fold": f.fold,
            "sensitivity": f.metrics.sensitivity,
            "specificity": f.metrics.specificity,
            "auc": f.metrics.auc,
            "threshold": f.metrics.threshold,
        })
    };
    let doc = json!({
        "config": config_echo,
        "folds": report.folds.iter().map(fold_json).collect::<Vec<_>>(),
        "aggregate": { "mean": report.mean, "std": report.std },
        "meta": { "timestamp_unix": unix_timestamp() },
    });
    let text = serde_json::to_string_pretty(&doc).expect("report serializes") + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Writes every fold's per-file scores as `file,label,score` rows for
/// external ROC plotting.
pub fn write_scores_csv(path: &Path, folds: &[FoldResult]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let write = |out: &mut std::io::BufWriter<std::fs::File>, line: String| {
        out.write_all(line.as_bytes())
            .map_err(|e| Error::io(path, e))
    };
    write(&mut out, "file,label,score\n".into())?;
    for fold in folds {
        for s in &fold.scores {
            write(
                &mut out,
                format!("{},{},{}\n", s.file, s.label.as_u8(), s.score),
            )?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::FeatureSet;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;
    use std::path::PathBuf;

    const DIM: usize = 6;
    const TOY_MELS: usize = 4;
    const TOY_FRAMES: usize = 8;

    /// A corpus whose functionals and spectrogram slots are both linearly
    /// separable by class, with four files (two per class) in each fold.
    fn toy_corpus(n_files: usize, sep: f64, seed: u64) -> PreparedCorpus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let files = (0..n_files)
            .map(|i| {
                let label = Label::from_u8((i % 2) as u8).unwrap();
                let center = if label.is_positive() { sep } else { -sep };
                let n_segs = 1 + i % 2;
                let mut noisy = |dim: usize, c: f64| -> Vec<f64> {
                    (0..dim).map(|_| c + rng.random_range(-0.4..0.4)).collect()
                };
                let segments = (0..n_segs)
                    .map(|_| SegmentFeatures {
                        functionals_logmel: noisy(DIM, center),
                        functionals_mfcc: noisy(DIM, -center),
                        logmel_image: noisy(TOY_MELS * TOY_FRAMES, center),
                        logmel_audio: noisy(TOY_MELS * TOY_FRAMES, -center),
                        n_frames: TOY_FRAMES,
                    })
                    .collect();
                FileFeatures {
                    path: PathBuf::from(format!("clip_{i:03}.wav")),
                    label,
                    fold: (i / 2) % N_FOLDS,
                    segments,
                }
            })
            .collect();
        PreparedCorpus { files }
    }

    fn quick_cfg(epochs: usize) -> Config {
        let mut cfg = Config::default();
        cfg.epochs = epochs;
        cfg.batch_size = 8;
        cfg
    }

    fn dnn_target() -> EvalTarget {
        EvalTarget::Single(ModelSpec::dnn(FeatureSet::LogMel, DIM))
    }

    #[test]
    fn every_fold_scores_its_own_files_exactly_once() {
        let corpus = toy_corpus(20, 0.8, 1);
        let report = run_crossval(&corpus, &dnn_target(), &quick_cfg(2)).unwrap();

        assert_eq!(report.folds.len(), N_FOLDS);
        let mut seen = BTreeSet::new();
        for (k, fold) in report.folds.iter().enumerate() {
            assert_eq!(fold.fold, k);
            let expected: BTreeSet<String> = corpus
                .fold_files(k)
                .iter()
                .map(|f| f.path.display().to_string())
                .collect();
            let got: BTreeSet<String> = fold.scores.iter().map(|s| s.file.clone()).collect();
            assert_eq!(got, expected);
            assert_eq!(got.len(), fold.scores.len(), "no file scored twice");
            assert!(fold.scores.iter().all(|s| (0.0..=1.0).contains(&s.score)));
            seen.extend(got);
        }
        assert_eq!(seen.len(), corpus.n_files(), "folds partition the corpus");
    }

    #[test]
    fn single_class_fold_is_rejected() {
        let mut corpus = toy_corpus(20, 0.8, 2);
        for f in corpus.files.iter_mut().filter(|f| f.fold == 3) {
            f.label = Label::Negative;
        }
        let err = run_crossval(&corpus, &dnn_target(), &quick_cfg(1)).unwrap_err();
        assert!(err.to_string().contains("fold 3"), "{err}");
    }

    #[test]
    fn duplicate_member_kinds_are_rejected() {
        let corpus = toy_corpus(20, 0.8, 3);
        let target = EvalTarget::Fusion {
            strategy: FusionStrategy::FeatureAvg,
            members: vec![
                ModelSpec::dnn(FeatureSet::LogMel, DIM),
                ModelSpec::dnn(FeatureSet::Mfcc, DIM),
            ],
        };
        assert!(run_crossval(&corpus, &target, &quick_cfg(1)).is_err());
    }

    #[test]
    fn crossval_is_deterministic_per_seed() {
        let corpus = toy_corpus(20, 0.8, 4);
        let cfg = quick_cfg(2);
        let a = run_crossval(&corpus, &dnn_target(), &cfg).unwrap();
        let b = run_crossval(&corpus, &dnn_target(), &cfg).unwrap();
        for (fa, fb) in a.folds.iter().zip(&b.folds) {
            for (sa, sb) in fa.scores.iter().zip(&fb.scores) {
                assert_eq!(sa.score, sb.score);
            }
        }

        let mut other = quick_cfg(2);
        other.seed += 1;
        let c = run_crossval(&corpus, &dnn_target(), &other).unwrap();
        assert_ne!(a.folds[0].scores[0].score, c.folds[0].scores[0].score);
    }

    #[test]
    fn aggregate_is_the_mean_and_std_of_the_folds() {
        let corpus = toy_corpus(20, 0.8, 5);
        let report = run_crossval(&corpus, &dnn_target(), &quick_cfg(2)).unwrap();
        let aucs: Vec<f64> = report.folds.iter().map(|f| f.metrics.auc).collect();
        let mean: f64 = aucs.iter().sum::<f64>() / aucs.len() as f64;
        let var: f64 =
            aucs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / aucs.len() as f64;
        assert!((report.mean.auc - mean).abs() < 1e-12);
        assert!((report.std.auc - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn separable_corpus_is_nearly_solved() {
        let corpus = toy_corpus(20, 0.9, 6);
        let report = run_crossval(&corpus, &dnn_target(), &quick_cfg(8)).unwrap();
        assert!(
            report.mean.auc >= 0.9,
            "mean AUC {} on separable toy data",
            report.mean.auc
        );
    }

    #[test]
    fn fusion_target_runs_end_to_end() {
        let corpus = toy_corpus(20, 0.9, 7);
        let target = EvalTarget::Fusion {
            strategy: FusionStrategy::FeatureAvg,
            members: vec![
                ModelSpec::dnn(FeatureSet::LogMel, DIM),
                ModelSpec::cnn_a(TOY_MELS),
            ],
        };
        let report = run_crossval(&corpus, &target, &quick_cfg(2)).unwrap();
        assert_eq!(report.folds.len(), N_FOLDS);
        assert!(report.mean.auc.is_finite());
        assert!(report
            .folds
            .iter()
            .flat_map(|f| &f.scores)
            .all(|s| (0.0..=1.0).contains(&s.score)));
    }

    #[test]
    fn final_train_uses_every_file_and_scores_new_audio() {
        let corpus = toy_corpus(20, 0.9, 8);
        let model = run_final_train(&corpus, &dnn_target(), &quick_cfg(6)).unwrap();

        let heldout = toy_corpus(10, 0.9, 99);
        let mut correct = 0;
        for file in &heldout.files {
            let p = model.score_segments(&file.segments).unwrap();
            assert!((0.0..=1.0).contains(&p));
            if (p > 0.5) == file.label.is_positive() {
                correct += 1;
            }
        }
        assert!(correct >= 8, "{correct}/10 held-out files classified");
    }

    #[test]
    fn results_json_echoes_config_and_member_hashes() {
        let corpus = toy_corpus(20, 0.8, 9);
        let cfg = quick_cfg(2);
        let report = run_crossval(&corpus, &dnn_target(), &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.json");
        let info = RunInfo {
            member_checkpoints: vec!["abc123".into(), "def456".into()],
        };
        write_results_json(&path, &report, &dnn_target(), &cfg, &info).unwrap();

        let doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(doc["config"]["epochs"], "2");
        assert_eq!(doc["config"]["seed"], cfg.seed.to_string());
        assert_eq!(doc["config"]["target"]["mode"], "single");
        assert_eq!(doc["config"]["member_checkpoints"][1], "def456");
        assert!(doc["config"]["git"].is_string());
        assert_eq!(doc["folds"].as_array().unwrap().len(), N_FOLDS);
        assert!(doc["aggregate"]["mean"]["auc"].is_number());
        assert!(doc["aggregate"]["std"]["sensitivity"].is_number());
        assert!(doc["meta"]["timestamp_unix"].is_number());
    }

    #[test]
    fn scores_csv_lists_every_file_once() {
        let corpus = toy_corpus(20, 0.8, 10);
        let report = run_crossval(&corpus, &dnn_target(), &quick_cfg(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        write_scores_csv(&path, &report.folds).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("file,label,score"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), corpus.n_files());
        for row in rows {
            let parts: Vec<&str> = row.split(',').collect();
            assert_eq!(parts.len(), 3);
            assert!(parts[1] == "0" || parts[1] == "1");
            let score: f64 = parts[2].parse().unwrap();
            assert!((0.0..=1.0).contains(&score));
        }
    }
}
