use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (pos, labels.len() - pos)
}

fn check_len(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::dim("scores vs labels", labels.len(), scores.len()));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric(format!("score {s} is not a number")));
    }
    Ok(())
}

/// Indices sorted by descending score, ties by index.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Area under the ROC curve via the Mann-Whitney statistic with midranks
/// (tied scores count one half).
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_len(scores, labels)?;
    let (pos, neg) = counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("AUC-ROC needs both classes".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Step-wise area under the precision-recall curve: tied scores form one
/// threshold, and each threshold adds `precision · Δrecall`.
pub fn auc_prc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_len(scores, labels)?;
    let (pos, _) = counts(labels);
    if pos == 0 {
        return Err(Error::UndefinedMetric("AUC-PRC needs at least one positive".into()));
    }
    let idx = descending(scores);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut group_tp = 0;
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if labels[idx[j]] {
                group_tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        tp += group_tp;
        if group_tp > 0 {
            area += (tp as f64 / (tp + fp) as f64) * (group_tp as f64 / pos as f64);
        }
        i = j;
    }
    Ok(area)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub f_score: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Confusion-matrix metrics for predictions `score > tau`, positives being
/// the minority class. Zero denominators give 0.
pub fn threshold_metrics(scores: &[f64], labels: &[bool], tau: f64) -> Result<ThresholdMetrics> {
    check_len(scores, labels)?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s > tau, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(from_confusion(tp, fp, fn_, tn))
}

pub fn from_confusion(tp: usize, fp: usize, fn_: usize, tn: usize) -> ThresholdMetrics {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f_score = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    ThresholdMetrics { f_score, accuracy: ratio(tp + tn, tp + fp + fn_ + tn), precision, recall }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roc_examples() {
        let l = [false, false, true, true];
        assert_eq!(auc_roc(&[0.1, 0.2, 0.8, 0.9], &l).unwrap(), 1.0);
        assert_eq!(auc_roc(&[0.9, 0.8, 0.2, 0.1], &l).unwrap(), 0.0);
        assert_eq!(auc_roc(&[0.5; 4], &l).unwrap(), 0.5);
        assert!(matches!(auc_roc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn prc_examples() {
        let l = [false, true, false, true];
        assert_eq!(auc_prc(&[0.1, 0.9, 0.2, 0.8], &l).unwrap(), 1.0);
        // all tied: one threshold with precision = prevalence
        assert_eq!(auc_prc(&[0.3; 4], &l).unwrap(), 0.5);
        // ranking + - + : 1·½ + ⅔·½
        let v = auc_prc(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap();
        assert!((v - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
        assert!(auc_prc(&[0.1], &[false]).is_err());
    }

    #[test]
    fn confusion_examples() {
        let m = from_confusion(3, 1, 2, 4);
        assert_eq!(m.precision, 0.75);
        assert_eq!(m.recall, 0.6);
        assert!((m.f_score - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.accuracy, 0.7);

        let labels = [true, false, false, false];
        let none = threshold_metrics(&[0.1, 0.2, 0.3, 0.4], &labels, 0.5).unwrap();
        assert_eq!((none.recall, none.f_score, none.precision, none.accuracy), (0.0, 0.0, 0.0, 0.75));
        let perfect = threshold_metrics(&[0.9, 0.2, 0.3, 0.4], &labels, 0.5).unwrap();
        assert_eq!(perfect, ThresholdMetrics { f_score: 1.0, accuracy: 1.0, precision: 1.0, recall: 1.0 });
        // exactly tau is negative
        let at = threshold_metrics(&[0.5, 0.2, 0.3, 0.4], &labels, 0.5).unwrap();
        assert_eq!(at.recall, 0.0);
    }
}
