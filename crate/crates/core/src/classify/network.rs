//! Logistic regression and the one-hidden-layer ReLU network, both trained
//! on binary cross-entropy with full-batch updates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `−[y·ln σ(z) + (1−y)·ln(1−σ(z))]` written without overflow.
#[inline]
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
}

/// Anything trainable by the shared optimizer loop: parameters flatten to a
/// single vector and the model reports mean loss plus its gradient.
pub trait Differentiable {
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]);
    fn loss_and_gradient(&self, xs: &[&[f64]], ys: &[f64]) -> (f64, Vec<f64>);
}

fn uniform_init(rng: &mut ChaCha8Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Logistic {
    pub fn init(input: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = uniform_init(&mut rng, input, input);
        let b = uniform_init(&mut rng, 1, input)[0];
        Self { w, b }
    }

    pub fn input_dim(&self) -> usize {
        self.w.len()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }
}

impl Differentiable for Logistic {
    fn params(&self) -> Vec<f64> {
        let mut p = self.w.clone();
        p.push(self.b);
        p
    }

    fn set_params(&mut self, params: &[f64]) {
        let n = self.w.len();
        self.w.copy_from_slice(&params[..n]);
        self.b = params[n];
    }

    fn loss_and_gradient(&self, xs: &[&[f64]], ys: &[f64]) -> (f64, Vec<f64>) {
        let n = self.w.len();
        let mut grad = vec![0.0; n + 1];
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let z = self.logit(x);
            loss += bce_with_logit(z, y);
            let dz = sigmoid(z) - y;
            for (g, xi) in grad[..n].iter_mut().zip(x.iter()) {
                *g += dz * xi;
            }
            grad[n] += dz;
        }
        let m = xs.len() as f64;
        grad.iter_mut().for_each(|g| *g /= m);
        (loss / m, grad)
    }
}

/// `input → hidden (ReLU) → 1 (sigmoid)`. `w1` is `hidden × input`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLayer {
    pub input: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl TwoLayer {
    /// Uniform `±1/√fan_in` initialization, drawn in the order w1, b1, w2, b2.
    pub fn init(input: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w1 = uniform_init(&mut rng, hidden * input, input);
        let b1 = uniform_init(&mut rng, hidden, input);
        let w2 = uniform_init(&mut rng, hidden, hidden);
        let b2 = uniform_init(&mut rng, 1, hidden)[0];
        Self {
            input,
            hidden,
            w1,
            b1,
            w2,
            b2,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        self.w1
            .chunks_exact(self.input)
            .zip(&self.b1)
            .map(|(row, b)| row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.hidden_pre(x)
            .iter()
            .zip(&self.w2)
            .map(|(a, w)| a.max(0.0) * w)
            .sum::<f64>()
            + self.b2
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn param_count(&self) -> usize {
        self.hidden * self.input + 2 * self.hidden + 1
    }
}

impl Differentiable for TwoLayer {
    fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    fn set_params(&mut self, params: &[f64]) {
        let (n1, h) = (self.w1.len(), self.hidden);
        self.w1.copy_from_slice(&params[..n1]);
        self.b1.copy_from_slice(&params[n1..n1 + h]);
        self.w2.copy_from_slice(&params[n1 + h..n1 + 2 * h]);
        self.b2 = params[n1 + 2 * h];
    }

    fn loss_and_gradient(&self, xs: &[&[f64]], ys: &[f64]) -> (f64, Vec<f64>) {
        let (n_in, h) = (self.input, self.hidden);
        let n1 = n_in * h;
        let mut grad = vec![0.0; self.param_count()];
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let pre = self.hidden_pre(x);
            let z = pre.iter().zip(&self.w2).map(|(a, w)| a.max(0.0) * w).sum::<f64>() + self.b2;
            loss += bce_with_logit(z, y);
            let dz = sigmoid(z) - y;
            let (g_w1, rest) = grad.split_at_mut(n1);
            let (g_b1, rest) = rest.split_at_mut(h);
            let (g_w2, g_b2) = rest.split_at_mut(h);
            g_b2[0] += dz;
            for j in 0..h {
                if pre[j] > 0.0 {
                    g_w2[j] += dz * pre[j];
                    let dpre = dz * self.w2[j];
                    g_b1[j] += dpre;
                    for (g, xi) in g_w1[j * n_in..(j + 1) * n_in].iter_mut().zip(x.iter()) {
                        *g += dpre * xi;
                    }
                }
            }
        }
        let m = xs.len() as f64;
        grad.iter_mut().for_each(|g| *g /= m);
        (loss / m, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain gradient descent.
    Gd,
    /// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    #[default]
    Adam,
}

/// Runs `epochs` full-batch updates; returns the loss before each update.
pub fn fit<M: Differentiable>(model: &mut M, xs: &[&[f64]], ys: &[f64], lr: f64, epochs: usize, optimizer: Optimizer) -> Vec<f64> {
    let mut params = model.params();
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut history = Vec::with_capacity(epochs);
    for t in 1..=epochs {
        model.set_params(&params);
        let (loss, grad) = model.loss_and_gradient(xs, ys);
        history.push(loss);
        match optimizer {
            Optimizer::Gd => {
                for (p, g) in params.iter_mut().zip(&grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam => {
                let c1 = 1.0 - b1.powi(t as i32);
                let c2 = 1.0 - b2.powi(t as i32);
                for i in 0..params.len() {
                    m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                    v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                    params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            }
        }
    }
    model.set_params(&params);
    history
}
