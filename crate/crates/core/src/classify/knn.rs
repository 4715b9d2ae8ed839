use serde::{Deserialize, Serialize};

use crate::types::Verdict;

/// Euclidean k-nearest-neighbours; the score is the fake fraction among the
/// `k` nearest stored vectors (distance ties go to the earlier vector).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub dim: usize,
    /// Row-major `n × dim`.
    pub points: Vec<f64>,
    pub labels: Vec<Verdict>,
}

impl Knn {
    pub fn fit(xs: &[&[f64]], labels: &[Verdict], k: usize) -> Self {
        let dim = xs.first().map_or(0, |x| x.len());
        Self {
            k: k.max(1),
            dim,
            points: xs.iter().flat_map(|x| x.iter().copied()).collect(),
            labels: labels.to_vec(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .points
            .chunks_exact(self.dim)
            .enumerate()
            .map(|(i, p)| (p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let k = self.k.min(dist.len());
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let fakes = dist[..k].iter().filter(|(_, i)| self.labels[*i] == Verdict::Fake).count();
        fakes as f64 / k as f64
    }
}
