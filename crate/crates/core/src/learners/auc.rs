use crate::error::{Error, Result};
use crate::scalar::Real;

/// Area under the ROC curve via the Mann-Whitney statistic; tied scores
/// count one half.
pub fn roc_auc<F: Real>(scores: &[F], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass("AUC needs both positive and negative labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite"));
    // Twice the rank sum keeps average ranks of ties integral.
    let mut pos_rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, average (i + j + 2) / 2
        let avg2 = (i + j + 2) as u128;
        for &idx in &order[i..=j] {
            if labels[idx] {
                pos_rank_sum2 += avg2;
            }
        }
        i = j + 1;
    }
    let n_pos = n_pos as u128;
    let n_neg = n_neg as u128;
    // 2U = 2R - n_pos (n_pos + 1)
    let u2 = pos_rank_sum2 - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2 * n_pos * n_neg) as f64)
}
