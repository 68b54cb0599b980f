use crate::error::{Error, Result};

/// Area under the ROC curve by the rank-sum formula; tied scores share
/// their average rank, so each tied positive/negative pair counts one half.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::domain(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::NonFinite(format!("score of example {i}")));
    }
    let positives = labels.iter().filter(|&&y| y == 1.0).count();
    let negatives = labels.iter().filter(|&&y| y == 0.0).count();
    if positives + negatives != labels.len() {
        return Err(Error::domain("labels must be 0 or 1"));
    }
    if positives == 0 || negatives == 0 {
        return Err(Error::domain("AUC needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let mean_rank = 0.5 * ((i + 1 + j) as f64);
        let tied_positives = order[i..j].iter().filter(|&&k| labels[k] == 1.0).count();
        rank_sum += mean_rank * tied_positives as f64;
        i = j;
    }
    let p = positives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}
