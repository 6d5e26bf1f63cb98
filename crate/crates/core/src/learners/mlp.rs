//! One-hidden-layer perceptron: tanh hidden units, logistic output,
//! mean binary cross-entropy, minibatch gradient descent.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Prediction, Standardizer};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    /// `None` means `2d`.
    pub hidden_units: Option<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden_units: None,
            learning_rate: 0.01,
            epochs: 500,
            batch_size: 16,
            seed: 0,
        }
    }
}

/// Gradient of the mean loss, laid out like the network weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpGradient {
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.w1.len() + self.b1.len() + self.w2.len() + 1);
        v.extend(&self.w1);
        v.extend(&self.b1);
        v.extend(&self.w2);
        v.push(self.b2);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub scaler: Standardizer,
    pub inputs: usize,
    pub hidden: usize,
    /// Row-major `hidden x inputs`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `-y ln s(z) - (1-y) ln(1 - s(z))` without overflow.
fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

impl Mlp {
    /// Network with Xavier-uniform weights and zero biases.
    pub fn init<R: Rng>(scaler: Standardizer, inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let a1 = (6.0 / (inputs + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        Mlp {
            scaler,
            inputs,
            hidden,
            w1: (0..hidden * inputs).map(|_| rng.random_range(-a1..a1)).collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| rng.random_range(-a2..a2)).collect(),
            b2: 0.0,
        }
    }

    pub fn fit(data: &Dataset, params: &MlpParams) -> Result<Self> {
        if params.epochs == 0 || params.batch_size == 0 || !(params.learning_rate > 0.0) || params.hidden_units == Some(0) {
            return Err(Error::Validation(
                "MLP needs epochs, batch_size, hidden_units >= 1 and learning_rate > 0".into(),
            ));
        }
        let d = data.n_features();
        let hidden = params.hidden_units.unwrap_or(2 * d);
        let mut rng = seed::rng(params.seed);
        let scaler = Standardizer::fit(data);
        let x = scaler.transform_all(data);
        let y: Vec<f64> = data.labels().iter().map(|&l| f64::from(l)).collect();
        let mut net = Mlp::init(scaler, d, hidden, &mut rng);
        let mut order: Vec<usize> = (0..x.len()).collect();
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(params.batch_size) {
                let bx: Vec<&[f64]> = batch.iter().map(|&i| x[i].as_slice()).collect();
                let by: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
                let (_, g) = net.loss_and_gradient(&bx, &by);
                net.step(&g, params.learning_rate);
            }
        }
        Ok(net)
    }

    fn step(&mut self, g: &MlpGradient, lr: f64) {
        for (w, d) in self.w1.iter_mut().zip(&g.w1) {
            *w -= lr * d;
        }
        for (w, d) in self.b1.iter_mut().zip(&g.b1) {
            *w -= lr * d;
        }
        for (w, d) in self.w2.iter_mut().zip(&g.w2) {
            *w -= lr * d;
        }
        self.b2 -= lr * g.b2;
    }

    fn hidden_activations(&self, z: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|h| {
                let w = &self.w1[h * self.inputs..(h + 1) * self.inputs];
                (self.b1[h] + w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()).tanh()
            })
            .collect()
    }

    /// Output logit for an already standardized input.
    pub fn logit(&self, z: &[f64]) -> f64 {
        let a = self.hidden_activations(z);
        self.b2 + self.w2.iter().zip(&a).map(|(w, a)| w * a).sum::<f64>()
    }

    /// Mean cross-entropy and its gradient over standardized inputs.
    pub fn loss_and_gradient(&self, x: &[&[f64]], y: &[f64]) -> (f64, MlpGradient) {
        let mut g = MlpGradient {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.hidden],
            w2: vec![0.0; self.hidden],
            b2: 0.0,
        };
        let mut loss = 0.0;
        for (z, &t) in x.iter().zip(y) {
            let a = self.hidden_activations(z);
            let out = self.b2 + self.w2.iter().zip(&a).map(|(w, a)| w * a).sum::<f64>();
            loss += bce_from_logit(out, t);
            let delta = sigmoid(out) - t;
            g.b2 += delta;
            for h in 0..self.hidden {
                g.w2[h] += delta * a[h];
                let back = delta * self.w2[h] * (1.0 - a[h] * a[h]);
                g.b1[h] += back;
                let row = &mut g.w1[h * self.inputs..(h + 1) * self.inputs];
                for (gw, zi) in row.iter_mut().zip(z.iter()) {
                    *gw += back * zi;
                }
            }
        }
        let m = x.len() as f64;
        g.w1.iter_mut().chain(&mut g.b1).chain(&mut g.w2).for_each(|v| *v /= m);
        g.b2 /= m;
        (loss / m, g)
    }

    pub fn flat_weights(&self) -> Vec<f64> {
        MlpGradient {
            w1: self.w1.clone(),
            b1: self.b1.clone(),
            w2: self.w2.clone(),
            b2: self.b2,
        }
        .flatten()
    }

    pub fn set_flat_weights(&mut self, v: &[f64]) {
        let (a, b) = (self.w1.len(), self.hidden);
        self.w1.copy_from_slice(&v[..a]);
        self.b1.copy_from_slice(&v[a..a + b]);
        self.w2.copy_from_slice(&v[a + b..a + 2 * b]);
        self.b2 = v[a + 2 * b];
    }

    pub fn predict(&self, row: &[f64]) -> Prediction {
        let p = sigmoid(self.logit(&self.scaler.transform(row)));
        Prediction {
            label: u8::from(p > 0.5),
            score: p,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_net(seed_value: u64, inputs: usize, hidden: usize) -> (Mlp, Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = seed::rng(seed_value);
        let data = dataset(&[&vec![0.0; inputs], &vec![1.0; inputs]], &[0, 1]);
        let mut net = Mlp::init(Standardizer::fit(&data), inputs, hidden, &mut rng);
        net.b1.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        net.b2 = rng.random_range(-0.5..0.5);
        let x: Vec<Vec<f64>> = (0..7).map(|_| (0..inputs).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<f64> = (0..7).map(|_| f64::from(rng.random_range(0..2u8))).collect();
        (net, x, y)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gradient_matches_central_differences(s in any::<u64>(), inputs in 1usize..5, hidden in 1usize..6) {
            let (mut net, x, y) = random_net(s, inputs, hidden);
            let xr: Vec<&[f64]> = x.iter().map(|r| r.as_slice()).collect();
            let analytic = net.loss_and_gradient(&xr, &y).1.flatten();
            let w0 = net.flat_weights();
            let h = 1e-5;
            for k in 0..w0.len() {
                let mut w = w0.clone();
                w[k] = w0[k] + h;
                net.set_flat_weights(&w);
                let up = net.loss_and_gradient(&xr, &y).0;
                w[k] = w0[k] - h;
                net.set_flat_weights(&w);
                let down = net.loss_and_gradient(&xr, &y).0;
                let numeric = (up - down) / (2.0 * h);
                // gradients below 1e-4 are compared on an absolute scale
                let rel = (analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(1e-4);
                prop_assert!(rel < 1e-4, "param {k}: analytic {} numeric {numeric}", analytic[k]);
            }
            net.set_flat_weights(&w0);
        }
    }

    #[test]
    fn zero_weights_score_one_half() {
        let (mut net, x, _) = random_net(1, 3, 4);
        let n = net.flat_weights().len();
        net.set_flat_weights(&vec![0.0; n]);
        for row in &x {
            let p = net.predict(row);
            assert_eq!(p.score, 0.5);
            assert_eq!(p.label, 0);
        }
    }

    #[test]
    fn learns_a_linear_boundary() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 4.0, ((i * 7) % 5) as f64]).collect();
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let data = dataset(&refs, &labels);
        let params = MlpParams {
            learning_rate: 0.1,
            epochs: 300,
            ..MlpParams::default()
        };
        let net = Mlp::fit(&data, &params).unwrap();
        let hits = (0..40).filter(|&i| net.predict(data.row(i)).label == data.label(i)).count();
        assert!(hits >= 38, "{hits}/40");
        assert_eq!(net, Mlp::fit(&data, &params).unwrap());
    }
}
