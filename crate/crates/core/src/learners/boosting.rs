//! Logistic-loss gradient boosting over depth-limited regression trees.
//!
//! Each round fits a second-order tree to the current gradients and
//! hessians (leaf value `-G / (H + lambda)`) and adds it with the shrinkage
//! factor. If a round would raise the training loss the step is halved until
//! it does not; a tree that cannot be made non-increasing ends training.

use serde::{Deserialize, Serialize};

use super::tree::{grow_boost_tree, presort, BoostTreeConfig, Tree};
use super::{Dataset, Prediction};
use crate::error::{Error, Result};

const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub depth: usize,
    pub shrinkage: f64,
    pub lambda: f64,
    pub min_child_weight: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_rounds: 200,
            depth: 3,
            shrinkage: 0.1,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub base: f64,
    /// Trees with their effective step (shrinkage after any halving).
    pub trees: Vec<(Tree, f64)>,
    pub importance: Vec<f64>,
    /// Mean log-loss before the first round and after each kept round.
    pub train_loss: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn mean_log_loss(f: &[f64], y: &[f64]) -> f64 {
    let total: f64 = f
        .iter()
        .zip(y)
        .map(|(&z, &t)| z.max(0.0) - t * z + (-z.abs()).exp().ln_1p())
        .sum();
    total / y.len() as f64
}

impl GradientBoosting {
    pub fn fit(data: &Dataset, params: &GbtParams) -> Result<Self> {
        if params.n_rounds == 0 || params.depth == 0 || !(params.shrinkage > 0.0) || params.lambda < 0.0 {
            return Err(Error::Validation(
                "GBT needs n_rounds, depth >= 1, shrinkage > 0 and lambda >= 0".into(),
            ));
        }
        let n = data.n_samples();
        let y: Vec<f64> = data.labels().iter().map(|&l| f64::from(l)).collect();
        let mean = y.iter().sum::<f64>() / n as f64;
        let base = (mean / (1.0 - mean)).ln();
        let mut f = vec![base; n];
        let columns = presort(data, &(0..n).collect::<Vec<_>>());
        let cfg = BoostTreeConfig {
            max_depth: params.depth,
            lambda: params.lambda,
            min_child_weight: params.min_child_weight,
        };
        let mut importance = vec![0.0; data.n_features()];
        let mut trees = Vec::new();
        let mut train_loss = vec![mean_log_loss(&f, &y)];

        for _ in 0..params.n_rounds {
            let p: Vec<f64> = f.iter().map(|&z| sigmoid(z)).collect();
            let grad: Vec<f64> = p.iter().zip(&y).map(|(p, t)| p - t).collect();
            let hess: Vec<f64> = p.iter().map(|p| (p * (1.0 - p)).max(1e-16)).collect();
            let mut gain = vec![0.0; importance.len()];
            let tree = grow_boost_tree(data, &columns, &grad, &hess, cfg, &mut gain);
            let out: Vec<f64> = (0..n).map(|i| tree.leaf_value(data.row(i))).collect();
            let before = *train_loss.last().unwrap();

            let mut step = params.shrinkage;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let trial: Vec<f64> = f.iter().zip(&out).map(|(z, o)| z + step * o).collect();
                let loss = mean_log_loss(&trial, &y);
                if loss <= before {
                    accepted = Some((trial, loss));
                    break;
                }
                step *= 0.5;
            }
            let Some((next, loss)) = accepted else {
                log::debug!("boosting stopped after {} rounds: no descent", trees.len());
                break;
            };
            f = next;
            train_loss.push(loss);
            for (acc, g) in importance.iter_mut().zip(&gain) {
                *acc += g;
            }
            trees.push((tree, step));
        }
        Ok(GradientBoosting {
            base,
            trees,
            importance,
            train_loss,
        })
    }

    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base + self.trees.iter().map(|(t, s)| s * t.leaf_value(row)).sum::<f64>()
    }

    pub fn predict(&self, row: &[f64]) -> Prediction {
        let p = sigmoid(self.margin(row));
        Prediction {
            label: u8::from(p > 0.5),
            score: p,
        }
    }
}
