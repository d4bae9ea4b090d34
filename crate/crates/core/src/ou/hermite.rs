//! Probabilists' Hermite polynomials and Gauss–Hermite quadrature for the
//! standard Gaussian measure.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// `He_n(x)` by `He_{n+1} = x He_n - n He_{n-1}`.
pub fn hermite_eval(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `[He_0(x), ..., He_n(x)]`.
pub fn hermite_all(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(x);
    }
    for k in 1..n {
        out.push(x * out[k] - k as f64 * out[k - 1]);
    }
    out
}

/// `(p_n(z), p_{n-1}(z))` of the orthonormal physicists' Hermite family.
fn orthonormal_pair(n: usize, z: f64, p0: f64) -> (f64, f64) {
    let (mut p1, mut p2) = (p0, 0.0);
    for j in 0..n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}

/// Nodes and weights with `sum w_i f(x_i) ~ E f(Z)`, `Z ~ N(0, 1)`; exact
/// for polynomials of degree below `2 * order`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Newton iteration on the orthonormal physicists' recurrence, then
    /// rescaled to the standard normal weight.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > 400 {
            return Err(invalid(format!("Gauss-Hermite order must be in 1..=400, got {order}")));
        }
        let n = order;
        let nf = n as f64;
        let pim4 = PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut converged = false;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                let pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(invalid(format!("Gauss-Hermite root {i} of order {order} did not converge")));
            }
            // derivative at the converged root, not at the last iterate
            let (_, p2) = orthonormal_pair(n, z, pim4);
            let pp = (2.0 * nf).sqrt() * p2;
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[n / 2] = 0.0;
        }
        let sqrt2 = 2f64.sqrt();
        let sqrtpi = PI.sqrt();
        let mut nodes: Vec<f64> = x.iter().map(|v| v * sqrt2).collect();
        let mut weights: Vec<f64> = w.iter().map(|v| v / sqrtpi).collect();
        nodes.reverse();
        weights.reverse();
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `E f(Z)`, with Neumaier-compensated summation.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let term = w * f(*x);
            let t = sum + term;
            comp += if sum.abs() >= term.abs() { (sum - t) + term } else { (term - t) + sum };
            sum = t;
        }
        sum + comp
    }
}

/// `<f, g>` in `L^2` of the standard Gaussian.
pub fn gauss_hermite_inner(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, order: usize) -> Result<f64> {
    let rule = GaussHermite::new(order)?;
    Ok(rule.expect(|x| f(x) * g(x)))
}

/// Tensor-product rule in `d` dimensions, row-major nodes.
pub(crate) fn tensor_rule(rule: &GaussHermite, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let q = rule.order();
    let total = q.pow(d as u32);
    let mut nodes = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut x = vec![0.0; d];
        let mut w = 1.0;
        for k in (0..d).rev() {
            let i = rem % q;
            rem /= q;
            x[k] = rule.nodes[i];
            w *= rule.weights[i];
        }
        nodes.push(x);
        weights.push(w);
    }
    (nodes, weights)
}
