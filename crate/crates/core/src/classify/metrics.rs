use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub acc: f64,
    pub auc: f64,
    pub n_real: usize,
    pub n_fake: usize,
}

/// Fraction of `scores` whose 0.5-threshold verdict matches the label.
pub fn accuracy(scores: &[f64], labels: &[Verdict]) -> f64 {
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(s, l)| Verdict::from_score(**s) == **l)
        .count();
    correct as f64 / scores.len().max(1) as f64
}

/// Area under the ROC curve via the Mann–Whitney rank statistic with
/// average ranks for ties. Fake is the positive class.
pub fn auc(scores: &[f64], labels: &[Verdict]) -> Result<f64> {
    let n_fake = labels.iter().filter(|&&l| l == Verdict::Fake).count();
    let n_real = labels.len() - n_fake;
    if n_fake == 0 || n_real == 0 {
        return Err(Error::SingleClass { n_real, n_fake });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut fake_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their average.
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == Verdict::Fake {
                fake_rank_sum += avg;
            }
        }
        i = j + 1;
    }
    let (nf, nr) = (n_fake as f64, n_real as f64);
    Ok((fake_rank_sum - nf * (nf + 1.0) / 2.0) / (nf * nr))
}

pub fn evaluate_scores(scores: &[f64], labels: &[Verdict]) -> Result<Evaluation> {
    let n_fake = labels.iter().filter(|&&l| l == Verdict::Fake).count();
    Ok(Evaluation {
        acc: accuracy(scores, labels),
        auc: auc(scores, labels)?,
        n_real: labels.len() - n_fake,
        n_fake,
    })
}
