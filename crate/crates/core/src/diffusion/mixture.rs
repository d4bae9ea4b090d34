//! Isotropic Gaussian mixtures with closed-form densities, scores and
//! Hessians, used as the analytic stand-in for the data distribution.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Isotropic variance of each component.
    pub variances: Vec<f64>,
}

impl MixtureParams {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<f64>) -> Result<Self> {
        let m = Self { weights, means, variances };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 {
            return Err(invalid("mixture needs at least one component"));
        }
        if self.means.len() != k || self.variances.len() != k {
            return Err(invalid("weights, means and variances must have equal length"));
        }
        let d = self.means[0].len();
        if d == 0 {
            return Err(invalid("mixture dimension must be at least 1"));
        }
        if self.means.iter().any(|m| m.len() != d) {
            return Err(invalid("all component means must share one dimension"));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(invalid("mixture weights must be nonnegative"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("mixture weights sum to {total}, not 1")));
        }
        if self.variances.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(invalid("component variances must be positive"));
        }
        if self.means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("component means must be finite"));
        }
        Ok(())
    }

    /// `N(0, I_d)`: its forward marginals never change and its score is `-x`.
    pub fn standard_normal(d: usize) -> Self {
        Self { weights: vec![1.0], means: vec![vec![0.0; d]], variances: vec![1.0] }
    }

    pub fn single(mean: Vec<f64>, variance: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![variance])
    }

    /// Equal-weight pair at `center + offset` and `center - offset`.
    pub fn symmetric_pair(center: &[f64], offset: &[f64], variance: f64) -> Result<Self> {
        let plus = center.iter().zip(offset).map(|(c, o)| c + o).collect();
        let minus = center.iter().zip(offset).map(|(c, o)| c - o).collect();
        Self::new(vec![0.5, 0.5], vec![plus, minus], vec![variance, variance])
    }

    /// A random "toy image" mixture: `components` means with coordinates
    /// drawn `N(0, mean_scale^2)`, Dirichlet(1) weights and variances drawn
    /// uniformly from `variance_range`.
    pub fn random(
        stream: RngStream,
        d: usize,
        components: usize,
        mean_scale: f64,
        variance_range: (f64, f64),
    ) -> Result<Self> {
        if components == 0 || d == 0 {
            return Err(invalid("random mixture needs d >= 1 and at least one component"));
        }
        let mut g = stream.generator();
        let means = (0..components)
            .map(|_| (0..d).map(|_| mean_scale * g.standard_normal()).collect())
            .collect();
        let raw: Vec<f64> = (0..components).map(|_| -g.uniform().ln()).collect();
        let total: f64 = raw.iter().sum();
        let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let drift: f64 = 1.0 - weights.iter().sum::<f64>();
        weights[0] += drift;
        let (lo, hi) = variance_range;
        let variances = (0..components).map(|_| lo + (hi - lo) * g.uniform()).collect();
        Self::new(weights, means, variances)
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    /// Law of `sqrt(ab) X_0 + sqrt(1 - ab) Z`.
    pub fn marginal(&self, alpha_bar: f64) -> Self {
        let s = alpha_bar.sqrt();
        Self {
            weights: self.weights.clone(),
            means: self.means.iter().map(|m| m.iter().map(|v| s * v).collect()).collect(),
            variances: self.variances.iter().map(|v| alpha_bar * v + (1.0 - alpha_bar)).collect(),
        }
    }

    /// Marginal at continuous OU time `t` (`alpha_bar = exp(-2t)`).
    pub fn ou_marginal(&self, t: f64) -> Self {
        self.marginal((-2.0 * t).exp())
    }

    /// Per-component log joint terms `log w_k + log N(x; m_k, v_k I)`.
    fn component_logs(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim() as f64;
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((&w, m), &v)| {
                let sq: f64 = x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
                w.ln() - 0.5 * sq / v - 0.5 * d * (2.0 * std::f64::consts::PI * v).ln()
            })
            .collect()
    }

    fn responsibilities(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let logs = self.component_logs(x);
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut r: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = r.iter().sum();
        for v in r.iter_mut() {
            *v /= total;
        }
        (r, max + total.ln())
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.responsibilities(x).1
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    /// `grad log p(x)` via log-sum-exp responsibilities.
    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        let (r, _) = self.responsibilities(x);
        let mut s = vec![0.0; x.len()];
        for ((rk, m), &v) in r.iter().zip(&self.means).zip(&self.variances) {
            if *rk == 0.0 {
                continue;
            }
            for (si, (xi, mi)) in s.iter_mut().zip(x.iter().zip(m)) {
                *si -= rk * (xi - mi) / v;
            }
        }
        s
    }

    /// Hessian of `log p` (row-major `d x d`):
    /// `sum_k r_k (g_k g_k^T - I / v_k) - g g^T` with `g_k = -(x - m_k)/v_k`.
    pub fn log_density_hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let (r, _) = self.responsibilities(x);
        let mut h = vec![0.0; d * d];
        let mut g = vec![0.0; d];
        for ((rk, m), &v) in r.iter().zip(&self.means).zip(&self.variances) {
            if *rk == 0.0 {
                continue;
            }
            let gk: Vec<f64> = x.iter().zip(m).map(|(xi, mi)| -(xi - mi) / v).collect();
            for i in 0..d {
                g[i] += rk * gk[i];
                h[i * d + i] -= rk / v;
                for j in 0..d {
                    h[i * d + j] += rk * gk[i] * gk[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                h[i * d + j] -= g[i] * g[j];
            }
        }
        h
    }

    /// Exact draws, row-major `n x d`.
    pub fn sample(&self, stream: RngStream, n: usize) -> Vec<f64> {
        let d = self.dim();
        let mut g = stream.generator();
        let mut out = Vec::with_capacity(n * d);
        for _ in 0..n {
            let u = g.uniform();
            let mut acc = 0.0;
            let mut k = self.components() - 1;
            for (i, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    k = i;
                    break;
                }
            }
            let sd = self.variances[k].sqrt();
            for j in 0..d {
                out.push(self.means[k][j] + sd * g.standard_normal());
            }
        }
        out
    }

    /// CDF of coordinate `l` (a one-dimensional Gaussian mixture).
    pub fn coordinate_cdf(&self, l: usize, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((w, m), v)| w * crate::special::normal_cdf((x - m[l]) / v.sqrt()))
            .sum()
    }

    /// Mixture mean `sum_k w_k m_k`.
    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (w, m) in self.weights.iter().zip(&self.means) {
            for (o, v) in out.iter_mut().zip(m) {
                *o += w * v;
            }
        }
        out
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }
}
