//! Linear logistic-regression fusion of several scoring systems.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// L2 penalty on the system weights. Keeps the optimum finite when the dev
/// classes are separable and unique when systems are duplicated.
pub const FUSION_RIDGE: f64 = 1e-4;
pub const FUSION_TOL: f64 = 1e-8;
pub const FUSION_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl FusionModel {
    /// Fused log-odds `w^T s + b`.
    pub fn apply(&self, scores: &[f64]) -> Result<f64> {
        if scores.len() != self.weights.len() {
            return Err(Error::Dimension(format!("{} scores for {} systems", scores.len(), self.weights.len())));
        }
        Ok(self.weights.iter().zip(scores).map(|(w, s)| w * s).sum::<f64>() + self.bias)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Problem<'a> {
    systems: &'a [Vec<f64>],
    targets: &'a [bool],
    weight: [f64; 2],
}

impl Problem<'_> {
    fn feature(&self, i: usize, j: usize) -> f64 {
        self.systems.get(j).map_or(1.0, |s| s[i])
    }

    fn logit(&self, theta: &DVector<f64>, i: usize) -> f64 {
        (0..theta.len()).map(|j| theta[j] * self.feature(i, j)).sum()
    }

    fn c(&self, i: usize) -> f64 {
        self.weight[self.targets[i] as usize]
    }

    fn objective(&self, theta: &DVector<f64>) -> f64 {
        let m = self.systems.len();
        let data: f64 = (0..self.targets.len())
            .map(|i| {
                let z = self.logit(theta, i);
                let margin = if self.targets[i] { z } else { -z };
                self.c(i) * softplus(-margin)
            })
            .sum();
        data + 0.5 * FUSION_RIDGE * theta.rows(0, m).norm_squared()
    }

    fn gradient_hessian(&self, theta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.systems.len();
        let p = m + 1;
        let mut g = DVector::zeros(p);
        let mut h = DMatrix::zeros(p, p);
        for i in 0..self.targets.len() {
            let sig = sigmoid(self.logit(theta, i));
            let t = if self.targets[i] { 1.0 } else { 0.0 };
            let c = self.c(i);
            for a in 0..p {
                let xa = self.feature(i, a);
                g[a] += c * (sig - t) * xa;
                for b in 0..p {
                    h[(a, b)] += c * sig * (1.0 - sig) * xa * self.feature(i, b);
                }
            }
        }
        for a in 0..m {
            g[a] += FUSION_RIDGE * theta[a];
            h[(a, a)] += FUSION_RIDGE;
        }
        h[(m, m)] += 1e-12;
        (g, h)
    }
}

/// Fit on dev scores. `systems[k][i]` is system `k`'s score for trial `i`;
/// both classes are weighted to equal total mass.
pub fn fit_fusion(systems: &[Vec<f64>], targets: &[bool]) -> Result<FusionModel> {
    if systems.is_empty() {
        return Err(Error::InvalidArgument("fusion needs at least one system".into()));
    }
    let n = targets.len();
    if let Some(s) = systems.iter().find(|s| s.len() != n) {
        return Err(Error::Dimension(format!("system has {} scores for {n} trials", s.len())));
    }
    if systems.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite dev score".into()));
    }
    let n_tar = targets.iter().filter(|&&t| t).count();
    let n_non = n - n_tar;
    if n_tar == 0 || n_non == 0 {
        return Err(Error::Degenerate(format!("fusion needs both classes, got {n_tar} targets and {n_non} nontargets")));
    }
    let problem = Problem { systems, targets, weight: [0.5 / n_non as f64, 0.5 / n_tar as f64] };
    let p = systems.len() + 1;
    let mut theta = DVector::zeros(p);
    let mut f = problem.objective(&theta);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..FUSION_MAX_ITER {
        let (g, h) = problem.gradient_hessian(&theta);
        grad_norm = g.amax();
        if grad_norm < FUSION_TOL {
            let model = FusionModel { weights: theta.rows(0, p - 1).iter().copied().collect(), bias: theta[p - 1] };
            if model.weights.iter().all(|&w| w == 0.0) || !model.bias.is_finite() {
                return Err(Error::Degenerate("fusion weights are all zero".into()));
            }
            return Ok(model);
        }
        let step = h
            .cholesky()
            .map(|c| c.solve(&g))
            .ok_or_else(|| Error::Degenerate("fusion Hessian is not positive definite".into()))?;
        let slope = g.dot(&step);
        let mut alpha = 1.0;
        loop {
            let cand = &theta - &step * alpha;
            let fc = problem.objective(&cand);
            if fc <= f - 1e-4 * alpha * slope || alpha < 1e-10 {
                theta = cand;
                f = fc;
                break;
            }
            alpha *= 0.5;
        }
    }
    Err(Error::IterationLimit(format!(
        "fusion did not converge in {FUSION_MAX_ITER} Newton steps (gradient {grad_norm:.3e}, objective {f:.6})"
    )))
}

/// Fused scores for trials laid out as in `fit_fusion`.
pub fn apply_fusion(model: &FusionModel, systems: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = systems.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| {
            let s: Vec<f64> = systems.iter().map(|sys| sys[i]).collect();
            model.apply(&s)
        })
        .collect()
}
