//! The experiment harness: feature extraction over a manifest, the
//! training loop, five-fold cross-validation, and evaluation metrics.
//!
//! The harness owns everything between "a manifest of labeled WAV files"
//! and "a metrics report": extracting every segment representation once
//! per corpus, training single models and fusion heads on fold splits,
//! averaging segment probabilities into file scores, and computing
//! sensitivity/specificity at the fixed operating point alongside AUC.

mod crossval;
mod extract;
mod metrics;
mod trainer;

pub use crossval::{
    build_stacks, git_describe, run_crossval, run_final_train, run_fold, write_results_json,
    write_scores_csv, CrossvalReport, EvalTarget, FileScore, FoldResult, RunInfo, TrainedModel,
};
pub use extract::{
    prepare_corpus, FeatureExtractor, FileFeatures, PreparedCorpus, SegmentFeatures,
};
pub use metrics::{
    aggregate_file_score, evaluate, mean_std, roc_auc, sens_spec_at_operating_point, MetricsReport,
    TARGET_SENSITIVITY,
};
pub use trainer::{resolve_pos_weight, train_single, TrainExample};
