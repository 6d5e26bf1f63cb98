//! Soft-margin SVM trained by sequential minimal optimization.
//!
//! The dual `min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0` with `Q_ij = y_i y_j K_ij`
//! is solved two multipliers at a time. The working pair is the maximal
//! violating `i` and the `j` with the largest second-order decrease, as in
//! LIBSVM; iteration stops once the violation gap drops below `tolerance`.

use serde::{Deserialize, Serialize};

use super::{Dataset, Prediction, Standardizer};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub gamma: f64,
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-self.gamma * d2).exp()
            }
        }
    }

    pub fn matrix(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = rows.len();
        let mut k = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v = self.eval(&rows[i], &rows[j]);
                k[i][j] = v;
                k[j][i] = v;
            }
        }
        k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub kernel: KernelKind,
    pub c: f64,
    /// RBF width; `None` means `1/d`.
    pub gamma: Option<f64>,
    pub tolerance: f64,
    /// Iteration cap as a multiple of the training-set size.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            kernel: KernelKind::Rbf,
            c: 1.0,
            gamma: None,
            tolerance: 1e-3,
            max_passes: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn in_up(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Solves the dual for a precomputed kernel matrix and labels in {-1, +1}.
pub fn smo(k: &[Vec<f64>], y: &[f64], c: f64, tolerance: f64, max_iter: usize) -> SmoSolution {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i][j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(y[t], alpha[t], c) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                if !in_low(y[t], alpha[t], c) {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let a = (k[i][i] + k[t][t] - 2.0 * k[i][t]).max(TAU);
                    let obj = -b * b / a;
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            converged = true;
            break;
        };
        if gmax - gmin < tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    SmoSolution {
        rho: rho(y, &alpha, &grad, c),
        alpha,
        iterations,
        converged,
    }
}

fn rho(y: &[f64], alpha: &[f64], grad: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            sum += yg;
            free += 1;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        0.5 * (ub + lb)
    }
}

/// Largest violation of the KKT conditions on `y_i f(x_i)`, where
/// `f = sum_j a_j y_j K_.j - rho`: at least 1 for `a = 0`, exactly 1 for free
/// multipliers, at most 1 for `a = C`.
pub fn kkt_max_violation(k: &[Vec<f64>], y: &[f64], alpha: &[f64], rho: f64, c: f64) -> f64 {
    (0..y.len())
        .map(|i| {
            let f: f64 = (0..y.len()).map(|j| alpha[j] * y[j] * k[i][j]).sum::<f64>() - rho;
            let m = y[i] * f - 1.0;
            if alpha[i] <= 0.0 {
                (-m).max(0.0)
            } else if alpha[i] >= c {
                m.max(0.0)
            } else {
                m.abs()
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    pub kernel: Kernel,
    pub scaler: Standardizer,
    pub support: Vec<Vec<f64>>,
    /// `a_i y_i` per support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
    pub converged: bool,
}

impl Svm {
    pub fn fit(data: &Dataset, params: &SvmParams) -> Result<Self> {
        if !(params.c > 0.0) || !(params.tolerance > 0.0) || params.max_passes == 0 {
            return Err(Error::Validation("SVM needs C > 0, tolerance > 0, max_passes >= 1".into()));
        }
        let gamma = params.gamma.unwrap_or(1.0 / data.n_features() as f64);
        if !(gamma > 0.0) {
            return Err(Error::Validation("SVM gamma must be positive".into()));
        }
        let kernel = Kernel {
            kind: params.kernel,
            gamma,
        };
        let scaler = Standardizer::fit(data);
        let rows = scaler.transform_all(data);
        let y: Vec<f64> = data.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let k = kernel.matrix(&rows);
        let sol = smo(&k, &y, params.c, params.tolerance, params.max_passes.saturating_mul(data.n_samples()));
        if !sol.converged {
            log::warn!("SMO stopped at the iteration cap ({} iterations)", sol.iterations);
        }
        let (mut support, mut coef) = (Vec::new(), Vec::new());
        for (i, row) in rows.into_iter().enumerate() {
            if sol.alpha[i] > 0.0 {
                support.push(row);
                coef.push(sol.alpha[i] * y[i]);
            }
        }
        Ok(Svm {
            kernel,
            scaler,
            support,
            coef,
            rho: sol.rho,
            converged: sol.converged,
        })
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        let z = self.scaler.transform(row);
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * self.kernel.eval(s, &z))
            .sum::<f64>()
            - self.rho
    }

    pub fn predict(&self, row: &[f64]) -> Prediction {
        let f = self.decision(row);
        Prediction {
            label: u8::from(f > 0.0),
            score: 1.0 / (1.0 + (-f).exp()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;
    use crate::seed;
    use rand::Rng;

    #[test]
    fn symmetric_one_dimensional_case() {
        let data = dataset(&[&[-1.0], &[1.0]], &[0, 1]);
        let p = SvmParams {
            kernel: KernelKind::Linear,
            ..SvmParams::default()
        };
        let m = Svm::fit(&data, &p).unwrap();
        assert_eq!(m.predict(&[-1.0]).label, 0);
        assert_eq!(m.predict(&[1.0]).label, 1);
        assert!(m.decision(&[0.0]).abs() < 1e-9);
        assert!((m.decision(&[1.0]) - 1.0).abs() < 1e-9);
    }

    fn blobs(seed_value: u64, n: usize, overlap: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = seed::rng(seed_value);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            rows.push(vec![
                s * overlap + rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                s * 0.5 * overlap + rng.random_range(-1.0..1.0),
            ]);
            y.push(s);
        }
        (rows, y)
    }

    #[test]
    fn kkt_residuals_within_tolerance() {
        for (s, kind) in [(1, KernelKind::Linear), (2, KernelKind::Rbf), (3, KernelKind::Rbf)] {
            let (rows, y) = blobs(s, 60, 0.6);
            let kernel = Kernel { kind, gamma: 0.5 };
            let k = kernel.matrix(&rows);
            for c in [0.1, 1.0, 10.0] {
                let tol = 1e-3;
                let sol = smo(&k, &y, c, tol, 1_000_000);
                assert!(sol.converged);
                let v = kkt_max_violation(&k, &y, &sol.alpha, sol.rho, c);
                assert!(v <= tol, "violation {v} for {kind:?}, C={c}");
                let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
                assert!(balance.abs() < 1e-9);
                assert!(sol.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
            }
        }
    }

    #[test]
    fn separable_blobs_are_classified() {
        let (rows, y) = blobs(9, 80, 3.0);
        let labels: Vec<u8> = y.iter().map(|&v| u8::from(v > 0.0)).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let data = dataset(&refs, &labels);
        let m = Svm::fit(&data, &SvmParams::default()).unwrap();
        for i in 0..data.n_samples() {
            assert_eq!(m.predict(data.row(i)).label, data.label(i));
        }
    }

    #[test]
    fn score_is_monotone_in_margin() {
        let data = dataset(&[&[-2.0], &[-1.0], &[1.0], &[2.0]], &[0, 0, 1, 1]);
        let p = SvmParams {
            kernel: KernelKind::Linear,
            ..SvmParams::default()
        };
        let m = Svm::fit(&data, &p).unwrap();
        let scores: Vec<f64> = [-3.0, -1.0, 0.5, 3.0].iter().map(|&x| m.predict(&[x]).score).collect();
        assert!(scores.windows(2).all(|w| w[0] < w[1]));
    }
}
