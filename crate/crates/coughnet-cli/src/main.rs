//! Command-line front end: corpus synthesis, feature extraction, training,
//! cross-validation, fusion, and single-file scoring.
//!
//! Every subcommand resolves its configuration the same way — defaults,
//! then `--config FILE`, then repeated `--set key=value`, then `--seed` —
//! and writes its artifacts under `--out`. Errors leave on stderr as one
//! `error: <category>: <message>` line with exit code 1.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coughnet::audio::load_manifest;
use coughnet::fusion::{
    train_fusion, validate_members, FusionHead, FusionMemberRef, FusionSpec, FusionStrategy,
};
use coughnet::harness::{
    build_stacks, prepare_corpus, run_crossval, run_final_train, write_results_json,
    write_scores_csv, EvalTarget, FeatureExtractor, FileFeatures, PreparedCorpus, RunInfo,
    TrainedModel,
};
use coughnet::models::{FeatureSet, ModelKind, ModelSpec, SingleModel};
use coughnet::nnet::{file_sha256, load_checkpoint, save_checkpoint};
use coughnet::synth::{generate_corpus, SynthSpec};
use coughnet::{Config, Error, Result};

#[derive(Parser)]
#[command(
    name = "coughnet",
    version,
    about = "Cough-audio screening: synthesize corpora, train classifiers, cross-validate, fuse"
)]
struct Cli {
    /// Flat `key = value` config file; later flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Random seed (shorthand for `--set seed=N`, applied last).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Directory artifacts are written to.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic two-class corpus with manifest.
    Synth {
        /// Number of WAV files to generate.
        #[arg(long, default_value_t = 200)]
        files: usize,
        /// Class ratio as `negatives:positives`, e.g. `9:1`.
        #[arg(long, default_value = "9:1", value_name = "NEG:POS")]
        imbalance: String,
        /// Clip duration range in seconds as `lo:hi`.
        #[arg(long, default_value = "2.0:4.0", value_name = "LO:HI")]
        secs: String,
    },
    /// Extract per-segment functionals for a manifest into `features.csv`.
    Extract {
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
        /// Functional set to emit: `logmel` or `mfcc`.
        #[arg(long, default_value = "logmel")]
        features: String,
    },
    /// Train one model on the full manifest and write its checkpoint.
    Train {
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
        /// `handcrafted_dnn`, `spec_cnn_a`, or `spec_cnn_b`.
        #[arg(long)]
        model: String,
        /// Feature set for the handcrafted DNN: `logmel` or `mfcc`.
        #[arg(long, default_value = "logmel")]
        features: String,
        /// Checkpoint file name under --out (default derived from the model).
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
    },
    /// Five-fold cross-validation; writes `results.json` and `scores.csv`.
    Crossval {
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
        /// Single model to evaluate (see `train --model`).
        #[arg(long, conflicts_with = "fusion_checkpoint")]
        model: Option<String>,
        /// Feature set for the handcrafted DNN.
        #[arg(long, default_value = "logmel")]
        features: String,
        /// Fusion checkpoint whose member models are retrained per fold.
        #[arg(long, value_name = "PATH")]
        fusion_checkpoint: Option<PathBuf>,
    },
    /// Fit a fusion head over already-trained member checkpoints.
    Fuse {
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
        /// `feature_max`, `feature_avg`, `feature_attention`,
        /// `decision_max`, `decision_avg`, or `decision_attention`.
        #[arg(long)]
        strategy: String,
        /// Comma-separated member checkpoints of distinct model kinds.
        #[arg(long, value_name = "CKPT,CKPT,...")]
        members: String,
    },
    /// Score one WAV file; prints `path,probability`.
    Predict {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "WAV")]
        input: PathBuf,
        /// Member checkpoints for a fusion checkpoint, in `fuse` order.
        #[arg(long, value_name = "CKPT,CKPT,...")]
        members: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::Io {
        path: cli.out.clone(),
        source: e,
    })?;
    let out = cli.out;
    match cli.command {
        Command::Synth {
            files,
            imbalance,
            secs,
        } => cmd_synth(&cfg, &out, files, &imbalance, &secs),
        Command::Extract { manifest, features } => cmd_extract(&cfg, &out, &manifest, &features),
        Command::Train {
            manifest,
            model,
            features,
            checkpoint,
        } => cmd_train(&cfg, &out, &manifest, &model, &features, checkpoint),
        Command::Crossval {
            manifest,
            model,
            features,
            fusion_checkpoint,
        } => cmd_crossval(
            &cfg,
            &out,
            &manifest,
            model.as_deref(),
            &features,
            fusion_checkpoint,
        ),
        Command::Fuse {
            manifest,
            strategy,
            members,
        } => cmd_fuse(&cfg, &out, &manifest, &strategy, &members),
        Command::Predict {
            checkpoint,
            input,
            members,
        } => cmd_predict(&cfg, &checkpoint, &input, members.as_deref()),
    }
}

fn resolve_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    for pair in &cli.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got `{pair}`")))?;
        cfg.set(key.trim(), value.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_pair<T: std::str::FromStr>(s: &str, what: &str) -> Result<(T, T)> {
    let invalid = || Error::InvalidArg(format!("{what} expects `a:b`, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(invalid)?;
    Ok((
        a.trim().parse().map_err(|_| invalid())?,
        b.trim().parse().map_err(|_| invalid())?,
    ))
}

fn cmd_synth(cfg: &Config, out: &Path, files: usize, imbalance: &str, secs: &str) -> Result<()> {
    let spec = SynthSpec {
        n_files: files,
        imbalance: parse_pair(imbalance, "--imbalance")?,
        duration_secs: parse_pair(secs, "--secs")?,
        seed: cfg.seed,
    };
    let entries = generate_corpus(&spec, out)?;
    let n_pos = entries.iter().filter(|e| e.label.is_positive()).count();
    println!(
        "wrote {} files ({} positive) and manifest.csv to {}",
        entries.len(),
        n_pos,
        out.display()
    );
    Ok(())
}

fn load_corpus(manifest: &Path, cfg: &Config) -> Result<PreparedCorpus> {
    let entries = load_manifest(manifest)?;
    let base = match manifest.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    prepare_corpus(&entries, base, cfg)
}

fn cmd_extract(cfg: &Config, out: &Path, manifest: &Path, features: &str) -> Result<()> {
    let feature_set: FeatureSet = features.parse()?;
    let dim = FeatureExtractor::new(cfg)?.functional_dim(feature_set);
    let corpus = load_corpus(manifest, cfg)?;

    let mut text = String::from("file,segment,label,fold");
    for i in 0..dim {
        text.push_str(&format!(",f{i:03}"));
    }
    text.push('\n');
    let mut rows = 0usize;
    for file in &corpus.files {
        for (index, seg) in file.segments.iter().enumerate() {
            let values = match feature_set {
                FeatureSet::LogMel => &seg.functionals_logmel,
                FeatureSet::Mfcc => &seg.functionals_mfcc,
            };
            text.push_str(&format!(
                "{},{},{},{}",
                file.path.display(),
                index,
                file.label.as_u8(),
                file.fold
            ));
            for v in values {
                text.push_str(&format!(",{v}"));
            }
            text.push('\n');
            rows += 1;
        }
    }
    let path = out.join("features.csv");
    std::fs::write(&path, text).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    println!(
        "wrote {} ({rows} segment rows, {dim} features)",
        path.display()
    );
    Ok(())
}

/// Architecture for a `--model`/`--features` pair, with input shapes taken
/// from the active config.
fn model_spec_for(kind: ModelKind, features: FeatureSet, cfg: &Config) -> Result<ModelSpec> {
    Ok(match kind {
        ModelKind::HandcraftedDnn => {
            let dim = FeatureExtractor::new(cfg)?.functional_dim(features);
            ModelSpec::dnn(features, dim)
        }
        ModelKind::SpecCnnA => ModelSpec::cnn_a(cfg.mel_bins_image_slot),
        ModelKind::SpecCnnB => ModelSpec::cnn_b(cfg.mel_bins_audio_slot),
    })
}

fn default_ckpt_name(kind: ModelKind, features: FeatureSet) -> String {
    match kind {
        ModelKind::HandcraftedDnn => format!("{kind}_{features}.ckpt"),
        ModelKind::SpecCnnA | ModelKind::SpecCnnB => format!("{kind}.ckpt"),
    }
}

fn cmd_train(
    cfg: &Config,
    out: &Path,
    manifest: &Path,
    model: &str,
    features: &str,
    checkpoint: Option<PathBuf>,
) -> Result<()> {
    let kind: ModelKind = model.parse()?;
    let feature_set: FeatureSet = features.parse()?;
    let spec = model_spec_for(kind, feature_set, cfg)?;
    let corpus = load_corpus(manifest, cfg)?;

    let trained = run_final_train(&corpus, &EvalTarget::Single(spec.clone()), cfg)?;
    let TrainedModel::Single(model) = trained else {
        unreachable!("a single-model target trains a single model");
    };
    let path = out.join(checkpoint.unwrap_or_else(|| default_ckpt_name(kind, feature_set).into()));
    save_checkpoint(&path, &spec, &model.params())?;
    println!("wrote {} (sha256 {})", path.display(), file_sha256(&path)?);
    Ok(())
}

fn cmd_crossval(
    cfg: &Config,
    out: &Path,
    manifest: &Path,
    model: Option<&str>,
    features: &str,
    fusion_checkpoint: Option<PathBuf>,
) -> Result<()> {
    let (target, info) = match (model, fusion_checkpoint) {
        (Some(model), None) => {
            let spec = model_spec_for(model.parse()?, features.parse()?, cfg)?;
            (EvalTarget::Single(spec), RunInfo::default())
        }
        (None, Some(path)) => {
            let loaded = load_checkpoint::<FusionSpec>(&path)?;
            let members: Vec<ModelSpec> =
                loaded.spec.members.iter().map(|m| m.spec.clone()).collect();
            let hashes = loaded
                .spec
                .members
                .iter()
                .map(|m| m.file_sha256.clone())
                .collect();
            (
                EvalTarget::Fusion {
                    strategy: loaded.spec.strategy,
                    members,
                },
                RunInfo {
                    member_checkpoints: hashes,
                },
            )
        }
        _ => {
            return Err(Error::InvalidArg(
                "pass either --model KIND or --fusion-checkpoint PATH".into(),
            ))
        }
    };

    let corpus = load_corpus(manifest, cfg)?;
    let report = run_crossval(&corpus, &target, cfg)?;

    let results_path = out.join("results.json");
    let scores_path = out.join("scores.csv");
    write_results_json(&results_path, &report, &target, cfg, &info)?;
    write_scores_csv(&scores_path, &report.folds)?;
    println!(
        "{}: auc {:.4} ± {:.4} | sensitivity {:.4} ± {:.4} | specificity {:.4} ± {:.4}",
        target.summary(),
        report.mean.auc,
        report.std.auc,
        report.mean.sensitivity,
        report.std.sensitivity,
        report.mean.specificity,
        report.std.specificity,
    );
    println!(
        "wrote {} and {}",
        results_path.display(),
        scores_path.display()
    );
    Ok(())
}

fn load_member(path: &Path) -> Result<(SingleModel, FusionMemberRef)> {
    let loaded = load_checkpoint::<ModelSpec>(path)?;
    let mut model = loaded.spec.build()?;
    model.load_params(&loaded.params)?;
    let member = FusionMemberRef {
        spec: loaded.spec,
        file_sha256: file_sha256(path)?,
    };
    Ok((model, member))
}

fn split_paths(list: &str) -> Vec<PathBuf> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .collect()
}

fn cmd_fuse(
    cfg: &Config,
    out: &Path,
    manifest: &Path,
    strategy: &str,
    members: &str,
) -> Result<()> {
    let strategy: FusionStrategy = strategy.parse()?;
    let mut models = Vec::new();
    let mut refs = Vec::new();
    for path in split_paths(members) {
        let (model, member) = load_member(&path)?;
        models.push(model);
        refs.push(member);
    }
    let kinds: Vec<ModelKind> = refs.iter().map(|r| r.spec.kind()).collect();
    validate_members(&kinds)?;

    let corpus = load_corpus(manifest, cfg)?;
    let all: Vec<&FileFeatures> = corpus.files.iter().collect();
    let mut head = FusionHead::new(strategy);
    if strategy.is_trainable() {
        let stacks = build_stacks(&models, &all)?;
        train_fusion(&mut head, &stacks, cfg, cfg.seed)?;
    }

    let path = out.join(format!("{strategy}.ckpt"));
    let spec = FusionSpec {
        strategy,
        members: refs,
    };
    save_checkpoint(&path, &spec, &head.params())?;
    println!("wrote {} (sha256 {})", path.display(), file_sha256(&path)?);
    Ok(())
}

fn cmd_predict(cfg: &Config, checkpoint: &Path, input: &Path, members: Option<&str>) -> Result<()> {
    let model = match load_checkpoint::<ModelSpec>(checkpoint) {
        Ok(loaded) => {
            if members.is_some() {
                return Err(Error::InvalidArg(
                    "--members only applies to fusion checkpoints".into(),
                ));
            }
            let mut model = loaded.spec.build()?;
            model.load_params(&loaded.params)?;
            TrainedModel::Single(model)
        }
        Err(_) => load_fusion_model(checkpoint, members)?,
    };

    let segments = FeatureExtractor::new(cfg)?.file_features(input)?;
    let score = model.score_segments(&segments)?;
    println!("{},{score}", input.display());
    Ok(())
}

/// Rebuilds a fusion model, verifying each member checkpoint's content
/// hash against the digest recorded when the head was fitted.
fn load_fusion_model(checkpoint: &Path, members: Option<&str>) -> Result<TrainedModel> {
    let loaded = load_checkpoint::<FusionSpec>(checkpoint)?;
    let paths = members.map(split_paths).unwrap_or_default();
    if paths.len() != loaded.spec.members.len() {
        return Err(Error::InvalidArg(format!(
            "fusion checkpoint has {} members; pass --members with the same \
             checkpoints, in `fuse` order ({} given)",
            loaded.spec.members.len(),
            paths.len()
        )));
    }

    let mut models = Vec::new();
    for (path, expected) in paths.iter().zip(&loaded.spec.members) {
        let found = file_sha256(path)?;
        if found != expected.file_sha256 {
            return Err(Error::Checkpoint {
                path: path.clone(),
                reason: format!(
                    "member hash mismatch: fusion head was fitted against {}, file is {found}",
                    expected.file_sha256
                ),
            });
        }
        let (model, _) = load_member(path)?;
        models.push(model);
    }

    let mut head = FusionHead::new(loaded.spec.strategy);
    head.load_params(&loaded.params)?;
    Ok(TrainedModel::Fusion {
        members: models,
        head,
    })
}
