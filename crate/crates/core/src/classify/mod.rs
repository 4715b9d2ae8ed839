//! Binary classifiers over spectral feature vectors, per-clip majority
//! voting, and ACC/AUC evaluation. Label convention: fake = 1, so a score
//! reads as "fakeness".

pub mod knn;
pub mod metrics;
pub mod network;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Verdict;

pub use knn::Knn;
pub use metrics::{accuracy, auc, evaluate_scores, Evaluation};
pub use network::{bce_with_logit, fit, sigmoid, Differentiable, Logistic, Optimizer, TwoLayer};

pub const DEFAULT_HIDDEN: usize = 30;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_LR: f64 = 0.01;
pub const DEFAULT_EPOCHS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Logistic,
    #[default]
    Nn2,
    Knn,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Logistic => "logistic",
            Variant::Nn2 => "nn2",
            Variant::Knn => "knn",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(Variant::Logistic),
            "nn2" => Ok(Variant::Nn2),
            "knn" => Ok(Variant::Knn),
            other => Err(Error::invalid("classifier", format!("{other:?} (expected logistic|nn2|knn)"))),
        }
    }
}

fn default_lr() -> f64 {
    DEFAULT_LR
}
fn default_epochs() -> usize {
    DEFAULT_EPOCHS
}
fn default_hidden() -> usize {
    DEFAULT_HIDDEN
}
fn default_k() -> usize {
    DEFAULT_K
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: default_lr(),
            epochs: default_epochs(),
            seed: 0,
            hidden: DEFAULT_HIDDEN,
            k: DEFAULT_K,
            optimizer: Optimizer::default(),
        }
    }
}

/// Where a feature vector came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub clip: String,
    pub region: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<Verdict>,
    pub provenance: Vec<Provenance>,
}

impl LabeledDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, vector: Vec<f64>, label: Verdict, provenance: Provenance) {
        self.vectors.push(vector);
        self.labels.push(label);
        self.provenance.push(provenance);
    }

    pub fn extend(&mut self, other: LabeledDataset) {
        self.vectors.extend(other.vectors);
        self.labels.extend(other.labels);
        self.provenance.extend(other.provenance);
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.vectors.first().map(Vec::len)
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let fake = self.labels.iter().filter(|&&l| l == Verdict::Fake).count();
        (self.labels.len() - fake, fake)
    }

    pub fn validate(&self) -> Result<usize> {
        if self.labels.len() != self.vectors.len() {
            return Err(Error::FrameCountMismatch {
                what: "labels",
                expected: self.vectors.len(),
                found: self.labels.len(),
            });
        }
        let dim = self.dim().ok_or_else(|| Error::invalid("dataset", "no feature vectors"))?;
        if let Some(v) = self.vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        if self.vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("dataset", "non-finite feature value"));
        }
        Ok(dim)
    }

    /// Samples sorted by (label, vector) so that full-batch sums do not
    /// depend on input order.
    fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.labels[a].target().total_cmp(&self.labels[b].target()).then_with(|| {
                self.vectors[a]
                    .iter()
                    .zip(&self.vectors[b])
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| *o != Ordering::Equal)
                    .unwrap_or(Ordering::Equal)
            })
        });
        idx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weights {
    Nn2(TwoLayer),
    Knn(Knn),
    Logistic(Logistic),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    #[serde(rename = "type")]
    pub variant: Variant,
    pub dims: Vec<usize>,
    pub weights: Weights,
    pub training: TrainConfig,
    pub seed: u64,
}

/// One region's classifier output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPrediction {
    pub score: f64,
    pub vote: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipPrediction {
    pub verdict: Verdict,
    pub score: f64,
    pub regions: Vec<RegionPrediction>,
}

impl Classifier {
    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    /// Structural consistency of a (possibly deserialized) model.
    pub fn check(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::invalid("model", reason.to_string()));
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match (&self.variant, &self.weights) {
            (Variant::Nn2, Weights::Nn2(n)) => {
                if self.dims != [n.input, n.hidden, 1] {
                    return bad(&format!("dims {:?} do not match a {}→{}→1 network", self.dims, n.input, n.hidden));
                }
                if n.w1.len() != n.input * n.hidden || n.b1.len() != n.hidden || n.w2.len() != n.hidden {
                    return bad("weight array sizes do not match dims");
                }
                if !(finite(&n.w1) && finite(&n.b1) && finite(&n.w2) && n.b2.is_finite()) {
                    return bad("non-finite weight");
                }
            }
            (Variant::Logistic, Weights::Logistic(l)) => {
                if self.dims != [l.w.len(), 1] {
                    return bad(&format!("dims {:?} do not match {} weights", self.dims, l.w.len()));
                }
                if !(finite(&l.w) && l.b.is_finite()) {
                    return bad("non-finite weight");
                }
            }
            (Variant::Knn, Weights::Knn(k)) => {
                if self.dims != [k.dim] || k.dim == 0 {
                    return bad(&format!("dims {:?} do not match stored dimension {}", self.dims, k.dim));
                }
                if k.points.len() != k.dim * k.labels.len() || k.labels.is_empty() || k.k == 0 {
                    return bad("stored training set is inconsistent");
                }
            }
            (v, _) => return bad(&format!("weights do not belong to a {v} model")),
        }
        Ok(())
    }

    pub fn predict_region(&self, x: &[f64]) -> Result<RegionPrediction> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let score = match &self.weights {
            Weights::Nn2(n) => n.predict(x),
            Weights::Logistic(l) => l.predict(x),
            Weights::Knn(k) => k.predict(x),
        };
        Ok(RegionPrediction {
            score,
            vote: Verdict::from_score(score),
        })
    }

    /// Majority vote over an odd number of regions; the score is the mean
    /// region score.
    pub fn predict_clip<V: AsRef<[f64]>>(&self, regions: &[V]) -> Result<ClipPrediction> {
        if regions.len() % 2 == 0 {
            return Err(Error::EvenRegionCount(regions.len()));
        }
        let preds = regions
            .iter()
            .map(|r| self.predict_region(r.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(vote(preds))
    }

    /// Region-level ACC/AUC.
    pub fn evaluate(&self, dataset: &LabeledDataset) -> Result<Evaluation> {
        dataset.validate()?;
        let scores = dataset
            .vectors
            .iter()
            .map(|v| self.predict_region(v).map(|p| p.score))
            .collect::<Result<Vec<_>>>()?;
        evaluate_scores(&scores, &dataset.labels)
    }
}

pub fn vote(regions: Vec<RegionPrediction>) -> ClipPrediction {
    let fakes = regions.iter().filter(|p| p.vote == Verdict::Fake).count();
    let verdict = if 2 * fakes > regions.len() { Verdict::Fake } else { Verdict::Real };
    let score = regions.iter().map(|p| p.score).sum::<f64>() / regions.len().max(1) as f64;
    ClipPrediction { verdict, score, regions }
}

pub fn train(dataset: &LabeledDataset, variant: Variant, config: &TrainConfig) -> Result<Classifier> {
    train_with_history(dataset, variant, config).map(|(model, _)| model)
}

/// Like [`train`], also returning the full-batch loss before each epoch.
pub fn train_with_history(dataset: &LabeledDataset, variant: Variant, config: &TrainConfig) -> Result<(Classifier, Vec<f64>)> {
    let dim = dataset.validate()?;
    let (n_real, n_fake) = dataset.class_counts();
    if n_real == 0 || n_fake == 0 {
        return Err(Error::SingleClass { n_real, n_fake });
    }
    if config.epochs == 0 && variant != Variant::Knn {
        return Err(Error::invalid("epochs", "must be at least 1"));
    }
    if !(config.lr > 0.0 && config.lr.is_finite()) {
        return Err(Error::invalid("learning rate", format!("{} is not positive", config.lr)));
    }
    let order = dataset.canonical_order();
    let xs: Vec<&[f64]> = order.iter().map(|&i| dataset.vectors[i].as_slice()).collect();
    let labels: Vec<Verdict> = order.iter().map(|&i| dataset.labels[i]).collect();
    let ys: Vec<f64> = labels.iter().map(|l| l.target()).collect();

    let (dims, weights, history) = match variant {
        Variant::Nn2 => {
            if config.hidden == 0 {
                return Err(Error::invalid("hidden", "must be at least 1"));
            }
            let mut net = TwoLayer::init(dim, config.hidden, config.seed);
            let h = fit(&mut net, &xs, &ys, config.lr, config.epochs, config.optimizer);
            (vec![dim, config.hidden, 1], Weights::Nn2(net), h)
        }
        Variant::Logistic => {
            let mut m = Logistic::init(dim, config.seed);
            let h = fit(&mut m, &xs, &ys, config.lr, config.epochs, config.optimizer);
            (vec![dim, 1], Weights::Logistic(m), h)
        }
        Variant::Knn => (vec![dim], Weights::Knn(Knn::fit(&xs, &labels, config.k)), Vec::new()),
    };
    let model = Classifier {
        variant,
        dims,
        weights,
        training: *config,
        seed: config.seed,
    };
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Verdict::{Fake, Real};

    fn toy(n: usize) -> LabeledDataset {
        let mut ds = LabeledDataset::new();
        for i in 0..n {
            let t = i as f64 / n as f64;
            for (label, off) in [(Real, -1.0), (Fake, 1.0)] {
                let mut v = vec![0.0; 120];
                v[0] = off + 0.3 * (t - 0.5);
                v[1] = 2.0 * t - 1.0;
                ds.push(v, label, Provenance { clip: format!("{i}"), region: 0 });
            }
        }
        ds
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let ds = toy(50);
        for opt in [Optimizer::Gd, Optimizer::Adam] {
            let cfg = TrainConfig {
                epochs: 200,
                optimizer: opt,
                lr: if opt == Optimizer::Gd { 0.5 } else { 0.01 },
                ..Default::default()
            };
            for variant in [Variant::Nn2, Variant::Logistic] {
                let m = train(&ds, variant, &cfg).unwrap();
                assert_eq!(m.evaluate(&ds).unwrap().acc, 1.0, "{variant} {opt:?}");
            }
        }
    }

    #[test]
    fn single_class_rejected() {
        let mut ds = LabeledDataset::new();
        ds.push(vec![1.0; 4], Real, Provenance { clip: "a".into(), region: 0 });
        assert!(matches!(train(&ds, Variant::Nn2, &TrainConfig::default()), Err(Error::SingleClass { .. })));
    }

    #[test]
    fn mixed_lengths_rejected() {
        let mut ds = toy(2);
        ds.vectors[1].pop();
        assert!(matches!(train(&ds, Variant::Logistic, &TrainConfig::default()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn knn_k1_recalls_training_label() {
        let ds = toy(10);
        let m = train(&ds, Variant::Knn, &TrainConfig { k: 1, ..Default::default() }).unwrap();
        for (v, l) in ds.vectors.iter().zip(&ds.labels) {
            assert_eq!(m.predict_region(v).unwrap().vote, *l);
        }
    }

    #[test]
    fn majority_vote() {
        let p = |s: f64| RegionPrediction { score: s, vote: Verdict::from_score(s) };
        assert_eq!(vote(vec![p(0.9), p(0.8), p(0.1)]).verdict, Fake);
        assert_eq!(vote(vec![p(0.1), p(0.2), p(0.3)]).verdict, Real);
    }

    #[test]
    fn even_region_count_rejected() {
        let m = train(&toy(5), Variant::Logistic, &TrainConfig::default()).unwrap();
        let v = vec![vec![0.0; 120]; 2];
        assert!(matches!(m.predict_clip(&v), Err(Error::EvenRegionCount(2))));
    }

    #[test]
    fn mismatched_weights_fail_check() {
        let mut m = train(&toy(5), Variant::Logistic, &TrainConfig::default()).unwrap();
        m.variant = Variant::Nn2;
        assert!(m.check().is_err());
    }
}
