//! Threshold-free ranking metrics. Label 1 marks an anomaly.

use crate::error::{GramError, Result};

fn check(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(GramError::shape("metric inputs", scores.len(), labels.len()));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(GramError::Domain(format!("label {l} is not 0 or 1")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(GramError::Domain("NaN score".into()));
    }
    Ok(())
}

/// Mann-Whitney estimate of `P(anomaly > normal) + ½ P(tie)` using midranks.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(GramError::Domain("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        // Ranks k+1..=end share their average.
        let midrank = (k + 1 + end) as f64 / 2.0;
        for &i in &order[k..end] {
            if labels[i] == 1 {
                rank_sum += midrank;
            }
        }
        k = end;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// `Σ_k (R_k − R_{k−1}) · P_k` over a stable descending sort, so tied scores
/// keep their input order.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 {
        return Err(GramError::Domain("average precision needs a positive label".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut ap = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            hits += 1;
            ap += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(ap / pos as f64)
}

pub const AP_TIE_POLICY: &str = "stable descending sort by score; tied scores keep test-set order";
