//! Hermite expansions of density ratios `f = p / gamma` and their evolution
//! under the OU semigroup.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::hermite::{hermite_all, tensor_rule, GaussHermite};
use crate::diffusion::MixtureParams;
use crate::error::{invalid, Error, Result};

pub const MAX_SPECTRAL_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(d: usize) -> Self {
        Self(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `alpha! = prod alpha_i!`, the squared norm of `H_alpha`.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| (1..=a).map(f64::from).product::<f64>()).product()
    }

    /// All indices in `d` variables with total degree at most `max_degree`,
    /// by degree and then lexicographically.
    pub fn all_up_to(d: usize, max_degree: u32) -> Vec<Self> {
        let mut out = Vec::new();
        for deg in 0..=max_degree {
            let mut cur = vec![0u32; d];
            fill(&mut out, &mut cur, 0, deg);
        }
        out
    }

    /// `H_alpha(x)` from per-coordinate tables `table[i][k] = He_k(x_i)`.
    fn eval_table(&self, table: &[Vec<f64>]) -> f64 {
        self.0.iter().zip(table).map(|(&a, h)| h[a as usize]).product()
    }
}

fn fill(out: &mut Vec<MultiIndex>, cur: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for a in (0..=remaining).rev() {
        cur[pos] = a;
        fill(out, cur, pos + 1, remaining - a);
    }
    cur[pos] = 0;
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(|p| p.trim().parse::<u32>().map_err(|_| Error::Format(format!("bad multi-index {s:?}"))))
            .collect::<Result<Vec<_>>>()
            .map(MultiIndex)
    }
}

impl Serialize for MultiIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MultiIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `f(x) = sum_alpha a_alpha H_alpha(x)`. For a density ratio
/// `a_alpha = <f, H_alpha> / alpha!`, so `a_0 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HermiteExpansion {
    pub dim: usize,
    pub max_degree: u32,
    pub coeffs: BTreeMap<MultiIndex, f64>,
}

impl HermiteExpansion {
    pub fn new(dim: usize, max_degree: u32, coeffs: BTreeMap<MultiIndex, f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("expansion dimension must be at least 1"));
        }
        for (alpha, a) in &coeffs {
            if alpha.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: alpha.dim() });
            }
            if alpha.degree() > max_degree {
                return Err(invalid(format!("index {alpha} exceeds degree {max_degree}")));
            }
            if !a.is_finite() {
                return Err(invalid(format!("coefficient of {alpha} is not finite")));
            }
        }
        Ok(Self { dim, max_degree, coeffs })
    }

    /// One-dimensional expansion from `[a_0, a_1, ...]`.
    pub fn from_1d(coeffs: &[f64]) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("need at least the constant coefficient"));
        }
        let map = coeffs.iter().enumerate().map(|(n, &a)| (MultiIndex(vec![n as u32]), a)).collect();
        Self::new(1, (coeffs.len() - 1) as u32, map)
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        self.coeffs.get(alpha).copied().unwrap_or(0.0)
    }

    /// Coefficients of a one-dimensional expansion as a dense vector.
    pub fn dense_1d(&self) -> Vec<f64> {
        (0..=self.max_degree).map(|n| self.coeff(&MultiIndex(vec![n]))).collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let table: Vec<Vec<f64>> = x.iter().map(|&v| hermite_all(self.max_degree as usize, v)).collect();
        self.coeffs.iter().map(|(alpha, a)| a * alpha.eval_table(&table)).sum()
    }

    /// `P_t`: `a_alpha -> a_alpha e^{-t |alpha|}`.
    pub fn semigroup_apply(&self, t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(invalid(format!("OU time must be finite and nonnegative, got {t}")));
        }
        let coeffs = self.coeffs.iter().map(|(alpha, a)| (alpha.clone(), a * (-t * f64::from(alpha.degree())).exp())).collect();
        Ok(Self { dim: self.dim, max_degree: self.max_degree, coeffs })
    }

    /// `||f_t - 1||` in `L^2(gamma)`:
    /// `sqrt(sum_{|alpha| > 0} a_alpha^2 alpha! e^{-2 t |alpha|})`.
    pub fn density_ratio_norm(&self, t: f64) -> Result<f64> {
        let a0 = self.coeff(&MultiIndex::zero(self.dim));
        if (a0 - 1.0).abs() > 1e-8 {
            return Err(invalid(format!("density-ratio expansion needs a_0 = 1, got {a0}")));
        }
        if !(t >= 0.0) {
            return Err(invalid(format!("OU time must be nonnegative, got {t}")));
        }
        let s: f64 = self
            .coeffs
            .iter()
            .filter(|(alpha, _)| alpha.degree() > 0)
            .map(|(alpha, a)| {
                let deg = f64::from(alpha.degree());
                a * a * alpha.factorial() * (-2.0 * t * deg).exp()
            })
            .sum();
        Ok(s.sqrt())
    }

    /// Largest absolute coefficient among odd total degrees.
    pub fn max_odd_coeff(&self) -> f64 {
        self.coeffs.iter().filter(|(a, _)| a.degree() % 2 == 1).map(|(_, v)| v.abs()).fold(0.0, f64::max)
    }

    /// Expansion coefficients as JSON keyed by `"a1,a2,..."`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_order(max_degree: u32, order: usize) -> Result<()> {
    let needed = (2 * max_degree as usize).max(1);
    if order < needed {
        return Err(invalid(format!(
            "quadrature order {order} too low for degree {max_degree}; need at least {needed}"
        )));
    }
    Ok(())
}

/// Projects `g` onto all `H_alpha` with `|alpha| <= max_degree` using a
/// tensor Gauss–Hermite rule: `a_alpha = E[g(Z) H_alpha(Z)] / alpha!`.
pub fn project_function(
    g: impl Fn(&[f64]) -> f64,
    dim: usize,
    max_degree: u32,
    order: usize,
) -> Result<HermiteExpansion> {
    if dim == 0 || dim > MAX_SPECTRAL_DIM {
        return Err(invalid(format!("spectral work supports 1..={MAX_SPECTRAL_DIM} dimensions, got {dim}")));
    }
    check_order(max_degree, order)?;
    let rule = GaussHermite::new(order)?;
    let (nodes, weights) = tensor_rule(&rule, dim);
    let indices = MultiIndex::all_up_to(dim, max_degree);
    let mut acc = vec![0.0; indices.len()];
    for (x, w) in nodes.iter().zip(&weights) {
        let gx = g(x);
        if gx == 0.0 {
            continue;
        }
        let table: Vec<Vec<f64>> = x.iter().map(|&v| hermite_all(max_degree as usize, v)).collect();
        for (k, alpha) in indices.iter().enumerate() {
            acc[k] += w * gx * alpha.eval_table(&table);
        }
    }
    let coeffs = indices.into_iter().zip(acc).map(|(alpha, s)| {
        let f = alpha.factorial();
        (alpha, s / f)
    });
    HermiteExpansion::new(dim, max_degree, coeffs.collect())
}

fn log_gamma_density(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    -0.5 * x.iter().map(|v| v * v).sum::<f64>() - 0.5 * d * (2.0 * std::f64::consts::PI).ln()
}

/// Expansion of `p0 / gamma` for a one-dimensional density `p0`.
pub fn project_density_ratio(p0: impl Fn(f64) -> f64, max_degree: u32, order: usize) -> Result<HermiteExpansion> {
    project_function(
        |x| {
            let p = p0(x[0]);
            if p == 0.0 {
                0.0
            } else {
                (p.ln() - log_gamma_density(x)).exp()
            }
        },
        1,
        max_degree,
        order,
    )
}

/// Expansion of `p / gamma` for a Gaussian mixture in at most three
/// dimensions. The ratio is square-integrable against `gamma` only when
/// every component variance is below 2, which is enforced.
pub fn project_mixture(mixture: &MixtureParams, max_degree: u32, order: usize) -> Result<HermiteExpansion> {
    if let Some(v) = mixture.variances.iter().find(|&&v| v >= 2.0) {
        return Err(invalid(format!(
            "component variance {v} >= 2: the density ratio is not square-integrable against the standard Gaussian"
        )));
    }
    let d = mixture.dim();
    project_function(|x| (mixture.log_density(x) - log_gamma_density(x)).exp(), d, max_degree, order)
}

/// `P_t f` computed directly from Mehler's formula
/// `P_t f(x) = E f(e^{-t} x + sqrt(1 - e^{-2t}) Z)` with quadrature over `Z`,
/// then projected back onto Hermite polynomials. Used to cross-check the
/// eigenrelation behind [`HermiteExpansion::semigroup_apply`].
pub fn semigroup_by_quadrature(e: &HermiteExpansion, t: f64, order: usize) -> Result<HermiteExpansion> {
    if !(t >= 0.0) {
        return Err(invalid(format!("OU time must be nonnegative, got {t}")));
    }
    let rule = GaussHermite::new(order)?;
    let (inner_nodes, inner_weights) = tensor_rule(&rule, e.dim);
    let decay = (-t).exp();
    let spread = (1.0 - decay * decay).sqrt();
    let ptf = |x: &[f64]| -> f64 {
        let mut y = vec![0.0; x.len()];
        inner_nodes
            .iter()
            .zip(&inner_weights)
            .map(|(z, w)| {
                for k in 0..x.len() {
                    y[k] = decay * x[k] + spread * z[k];
                }
                w * e.eval(&y)
            })
            .sum()
    };
    project_function(ptf, e.dim, e.max_degree, order)
}
