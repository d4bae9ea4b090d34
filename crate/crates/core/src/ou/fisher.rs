//! Relative Fisher information against the standard Gaussian, its decay
//! along the OU flow, and the one-step DDIM correlation bound built on it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::expansion::HermiteExpansion;
use crate::diffusion::MixtureParams;
use crate::error::{invalid, Error, Result};

/// Truncated integration domain `[-L, L]` per coordinate.
pub const DOMAIN: f64 = 12.0;
const ABS_TOL: f64 = 1e-13;
const MAX_DEPTH: u32 = 40;

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod 7/15 panel: (Kronrod estimate, |Kronrod - Gauss|).
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = K15_WEIGHTS[7] * fc;
    let mut g = G7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        k += K15_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G7_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: u32) -> f64 {
    if whole.1 <= tol || depth == 0 {
        return whole.0;
    }
    let m = 0.5 * (a + b);
    let left = gk15(f, a, m);
    let right = gk15(f, m, b);
    adapt(f, a, m, left, 0.5 * tol, depth - 1) + adapt(f, m, b, right, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss–Kronrod quadrature on `[a, b]`, starting from 16 panels so
/// that narrow peaks are not missed.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let panels = 16;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            let hi = if k + 1 == panels { b } else { lo + h };
            let whole = gk15(&f, lo, hi);
            adapt(&f, lo, hi, whole, ABS_TOL / panels as f64, MAX_DEPTH)
        })
        .sum()
}

fn check_mass(mass: f64) -> Result<()> {
    if (mass - 1.0).abs() > 1e-6 {
        return Err(invalid(format!(
            "density integrates to {mass} on the truncated domain; need 1 within 1e-6"
        )));
    }
    Ok(())
}

/// `integral (s(x) + x)^2 p(x) dx` on `[-12, 12]` for a one-dimensional
/// density with score `s`. Rejects densities whose truncated mass is not 1.
pub fn relative_fisher_information(density: impl Fn(f64) -> f64, score: impl Fn(f64) -> f64) -> Result<f64> {
    check_mass(integrate(&density, -DOMAIN, DOMAIN))?;
    let fi = integrate(
        |x| {
            let p = density(x);
            if p == 0.0 {
                0.0
            } else {
                (score(x) + x).powi(2) * p
            }
        },
        -DOMAIN,
        DOMAIN,
    );
    Ok(fi.max(0.0))
}

/// Two-dimensional version by nested adaptive quadrature on `[-12, 12]^2`.
pub fn relative_fisher_information_2d(
    density: impl Fn(&[f64]) -> f64,
    score: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<f64> {
    let mass = integrate(|x| integrate(|y| density(&[x, y]), -DOMAIN, DOMAIN), -DOMAIN, DOMAIN);
    check_mass(mass)?;
    let fi = integrate(
        |x| {
            integrate(
                |y| {
                    let p = density(&[x, y]);
                    if p == 0.0 {
                        return 0.0;
                    }
                    let s = score(&[x, y]);
                    ((s[0] + x).powi(2) + (s[1] + y).powi(2)) * p
                },
                -DOMAIN,
                DOMAIN,
            )
        },
        -DOMAIN,
        DOMAIN,
    );
    Ok(fi.max(0.0))
}

/// Fisher information of a 1-D or 2-D mixture after OU time `t`.
pub fn mixture_fisher_information(mixture: &MixtureParams, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid(format!("OU time must be nonnegative, got {t}")));
    }
    let m = mixture.ou_marginal(t);
    match m.dim() {
        1 => relative_fisher_information(|x| m.density(&[x]), |x| m.score(&[x])[0]),
        2 => relative_fisher_information_2d(|x| m.density(x), |x| m.score(x)),
        d => Err(invalid(format!("Fisher information quadrature supports d <= 2, got {d}"))),
    }
}

/// One row of a decay table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub t: f64,
    /// `||f_t - 1||` from the Hermite expansion, when one was supplied.
    pub norm: Option<f64>,
    pub fisher: f64,
    /// `e^{-2t} FI(mu_0)`.
    pub fisher_bound: f64,
}

pub fn decay_curve(mixture: &MixtureParams, expansion: Option<&HermiteExpansion>, times: &[f64]) -> Result<Vec<DecayRow>> {
    let fi0 = mixture_fisher_information(mixture, 0.0)?;
    times
        .iter()
        .map(|&t| {
            Ok(DecayRow {
                t,
                norm: expansion.map(|e| e.density_ratio_norm(t)).transpose()?,
                fisher: mixture_fisher_information(mixture, t)?,
                fisher_bound: (-2.0 * t).exp() * fi0,
            })
        })
        .collect()
}

pub fn write_decay_csv<W: Write>(rows: &[DecayRow], mut out: W) -> Result<()> {
    writeln!(out, "t,norm,fisher,fisher_bound")?;
    for r in rows {
        let norm = r.norm.map(|v| format!("{v:?}")).unwrap_or_default();
        writeln!(out, "{:?},{},{:?},{:?}", r.t, norm, r.fisher, r.fisher_bound)?;
    }
    Ok(())
}

/// Measured and bounded deviation from perfect anticorrelation of one exact
/// DDIM step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepBound {
    pub t: f64,
    pub a: f64,
    /// Coefficient multiplying the exact score in the step map.
    pub c: f64,
    pub corr: f64,
    pub deviation: f64,
    pub bound: f64,
    pub variance_min: f64,
}

impl OneStepBound {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.deviation <= self.bound * (1.0 + rel_tol) + 1e-14
    }
}

/// For a 1-D mixture `mu_0` at OU time `t`, the exact step map is
/// `F(x) = a x + c s_t(x)` with `a = sqrt(ab_prev / ab)`,
/// `c = -b sqrt(1 - ab)` (the DDIM update written against the score),
/// `ab = e^{-2t}` and `ab_prev = e^{-2(t - dt)}`. Returns
/// `|Corr(F(X), F(-X)) + 1|` under `X ~ p_t`, computed by quadrature, next to
/// `2|c| / sqrt(v) e^{-t} sqrt(FI(mu_0))`.
pub fn one_step_correlation_bound(mixture: &MixtureParams, t: f64, dt: f64) -> Result<OneStepBound> {
    if mixture.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: mixture.dim() });
    }
    if !(t > 0.0 && dt > 0.0 && dt <= t) {
        return Err(invalid(format!("need 0 < dt <= t, got t = {t}, dt = {dt}")));
    }
    let ab = (-2.0 * t).exp();
    let ab_prev = (-2.0 * (t - dt)).exp();
    let (a, b) = crate::diffusion::ddim_coeffs(ab_prev, ab);
    let c = -b * (1.0 - ab).sqrt();
    let pt = mixture.ou_marginal(t);
    let f = |x: f64| a * x + c * pt.score(&[x])[0];
    let p = |x: f64| pt.density(&[x]);
    let e = |g: &dyn Fn(f64) -> f64| integrate(|x| g(x) * p(x), -DOMAIN, DOMAIN);
    let m_plus = e(&|x| f(x));
    let m_minus = e(&|x| f(-x));
    let v_plus = e(&|x| (f(x) - m_plus).powi(2));
    let v_minus = e(&|x| (f(-x) - m_minus).powi(2));
    let cov = e(&|x| (f(x) - m_plus) * (f(-x) - m_minus));
    if v_plus <= 0.0 || v_minus <= 0.0 {
        return Err(Error::Undefined("step map is constant under p_t".into()));
    }
    let corr = cov / (v_plus * v_minus).sqrt();
    let fi0 = mixture_fisher_information(mixture, 0.0)?;
    let v = v_plus.min(v_minus);
    Ok(OneStepBound {
        t,
        a,
        c,
        corr,
        deviation: (corr + 1.0).abs(),
        bound: 2.0 * c.abs() / v.sqrt() * (-t).exp() * fi0.sqrt(),
        variance_min: v,
    })
}
