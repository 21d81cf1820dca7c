//! Screening metrics: AUC, and sensitivity/specificity at a fixed
//! operating point.
//!
//! AUC uses the rank formulation of the Mann-Whitney statistic, but all
//! rank bookkeeping happens in *doubled integer units* (twice the average
//! rank is always an integer), so the result is the quotient of two exact
//! integers. That makes the value identical — bit for bit — to brute-force
//! pair counting, and invariant under any strictly increasing score
//! transform, since only the ordering and tie pattern of the scores enter
//! the integers.

use crate::audio::Label;
use crate::error::{Error, Result};

/// Sensitivity floor the operating point is chosen for.
pub const TARGET_SENSITIVITY: f64 = 0.80;

/// Metrics of one evaluation set at the chosen operating point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricsReport {
    pub sensitivity: f64,
    pub specificity: f64,
    pub auc: f64,
    pub threshold: f64,
}

/// Mean of a clip's per-segment probabilities — the file-level score.
pub fn aggregate_file_score(segment_probs: &[f64]) -> Result<f64> {
    if segment_probs.is_empty() {
        return Err(Error::Metrics(
            "no segment probabilities to aggregate".into(),
        ));
    }
    for &p in segment_probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Metrics(format!("probability {p} outside [0, 1]")));
        }
    }
    Ok(segment_probs.iter().sum::<f64>() / segment_probs.len() as f64)
}

fn validate_two_classes(scores: &[f64], labels: &[Label]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Metrics(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    let n_pos = labels.iter().filter(|l| l.is_positive()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metrics(
            "need at least one positive and one negative".into(),
        ));
    }
    Ok((n_pos, n_neg))
}

/// Area under the ROC curve via average ranks.
///
/// Equal to (#pairs ranking a positive above a negative + ½·#tied pairs)
/// divided by #positive·#negative, which is also the trapezoidal area.
pub fn roc_auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    let (n_pos, n_neg) = validate_two_classes(scores, labels)?;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Twice the sum of positives' average ranks, exactly in u64: a tie
    // group occupying sorted positions i..=j gives each member the 1-based
    // average rank (i + j + 2) / 2.
    let mut pos_rank_doubled: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let doubled_rank = (i + j + 2) as u64;
        for &idx in &order[i..=j] {
            if labels[idx].is_positive() {
                pos_rank_doubled += doubled_rank;
            }
        }
        i = j + 1;
    }

    // 2·U = 2·ΣR⁺ − 2·P(P+1)/2.
    let u_doubled = pos_rank_doubled - (n_pos as u64) * (n_pos as u64 + 1);
    Ok(u_doubled as f64 / (2 * n_pos * n_neg) as f64)
}

/// Chooses the operating threshold: the largest score value whose
/// "score ≥ threshold ⇒ positive" rule reaches at least
/// `target_sensitivity`, then reports the achieved sensitivity and the
/// resulting specificity.
///
/// The lowest score always yields sensitivity 1, so any target in (0, 1]
/// is achievable and the sweep cannot fail; targets outside that range are
/// rejected. Discrete scores can push the achieved sensitivity above the
/// target.
pub fn sens_spec_at_operating_point(
    scores: &[f64],
    labels: &[Label],
    target_sensitivity: f64,
) -> Result<(f64, f64, f64)> {
    let (n_pos, n_neg) = validate_two_classes(scores, labels)?;
    if !(target_sensitivity > 0.0 && target_sensitivity <= 1.0) {
        return Err(Error::Metrics(format!(
            "target sensitivity {target_sensitivity} outside (0, 1]"
        )));
    }

    let mut candidates: Vec<f64> = scores.to_vec();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    for &threshold in candidates.iter().rev() {
        let hit_pos = scores
            .iter()
            .zip(labels)
            .filter(|(s, l)| l.is_positive() && **s >= threshold)
            .count();
        let sensitivity = hit_pos as f64 / n_pos as f64;
        if sensitivity >= target_sensitivity {
            let hit_neg = scores
                .iter()
                .zip(labels)
                .filter(|(s, l)| !l.is_positive() && **s < threshold)
                .count();
            let specificity = hit_neg as f64 / n_neg as f64;
            return Ok((threshold, sensitivity, specificity));
        }
    }
    unreachable!("the minimum score reaches sensitivity 1.0");
}

/// Full per-set report: operating point plus AUC.
pub fn evaluate(
    scores: &[f64],
    labels: &[Label],
    target_sensitivity: f64,
) -> Result<MetricsReport> {
    let auc = roc_auc(scores, labels)?;
    let (threshold, sensitivity, specificity) =
        sens_spec_at_operating_point(scores, labels, target_sensitivity)?;
    Ok(MetricsReport {
        sensitivity,
        specificity,
        auc,
        threshold,
    })
}

/// Mean and population standard deviation (the folds are the whole
/// population of interest, so the divisor is n, not n−1).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty(), "mean of an empty slice");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
