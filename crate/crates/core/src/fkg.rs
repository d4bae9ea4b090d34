//! Monotone maps and antithetic correlation: random scalar ReLU chains,
//! partially monotone vector maps, and checks of when one exact DDIM step
//! (or a chain of them) is coordinatewise nondecreasing.

use serde::{Deserialize, Serialize};

use crate::diffusion::{ddim_output, MixtureParams, MixtureScore, Schedule};
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

pub const MIN_CORR_SAMPLES: usize = 1000;

/// `h <- relu(w_l h + b_l)` for `l = 1..L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneChain {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl MonotoneChain {
    pub fn new(weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(invalid("chain needs at least one layer and one bias per weight"));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(invalid("chain parameters must be finite"));
        }
        Ok(Self { weights, biases })
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.weights.iter().zip(&self.biases).fold(z, |h, (w, b)| (w * h + b).max(0.0))
    }

    /// `+1` if the chain is nondecreasing, `-1` if nonincreasing.
    pub fn direction(&self) -> f64 {
        if self.weights.iter().filter(|w| **w < 0.0).count() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Draws `w_l ~ N(0, weight_scale^2)` and `b_l ~ N(0, 1/4)`. Chains that are
/// constant on `[-2, 2]` (every unit switched off somewhere in the stack) are
/// redrawn from the same generator, so the result is deterministic in the
/// stream and never degenerate.
pub fn build_random_chain(stream: RngStream, depth: usize, weight_scale: f64) -> Result<MonotoneChain> {
    if depth == 0 {
        return Err(invalid("chain depth must be at least 1"));
    }
    if !(weight_scale > 0.0) {
        return Err(invalid("weight scale must be positive"));
    }
    let mut g = stream.generator();
    for _ in 0..10_000 {
        let weights: Vec<f64> = (0..depth).map(|_| weight_scale * g.standard_normal()).collect();
        let biases: Vec<f64> = (0..depth).map(|_| 0.5 * g.standard_normal()).collect();
        let chain = MonotoneChain::new(weights, biases)?;
        let probe: Vec<f64> = (0..=40).map(|k| chain.eval(-2.0 + 0.1 * k as f64)).collect();
        if probe.iter().any(|v| (v - probe[0]).abs() > 1e-9) {
            return Ok(chain);
        }
    }
    Err(invalid("could not draw a nonconstant chain"))
}

/// Pearson correlation with its delete-one jackknife standard error.
pub fn jackknife_corr(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let xc: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let yc: Vec<f64> = y.iter().map(|v| v - my).collect();
    let (sx, sy) = (xc.iter().sum::<f64>(), yc.iter().sum::<f64>());
    let sxx: f64 = xc.iter().map(|v| v * v).sum();
    let syy: f64 = yc.iter().map(|v| v * v).sum();
    let sxy: f64 = xc.iter().zip(&yc).map(|(a, b)| a * b).sum();
    let corr = |sx: f64, sy: f64, sxx: f64, syy: f64, sxy: f64, m: f64| -> Option<f64> {
        let vx = sxx - sx * sx / m;
        let vy = syy - sy * sy / m;
        if vx <= 0.0 || vy <= 0.0 {
            return None;
        }
        Some(((sxy - sx * sy / m) / (vx * vy).sqrt()).clamp(-1.0, 1.0))
    };
    let nf = n as f64;
    let rho = corr(sx, sy, sxx, syy, sxy, nf)
        .filter(|_| sxx > 1e-300 && syy > 1e-300)
        .ok_or_else(|| Error::Undefined("correlation of a constant sample".into()))?;
    let mut loo = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (xc[i], yc[i]);
        loo.push(corr(sx - a, sy - b, sxx - a * a, syy - b * b, sxy - a * b, nf - 1.0).unwrap_or(rho));
    }
    let mean = loo.iter().sum::<f64>() / nf;
    let se = ((nf - 1.0) / nf * loo.iter().map(|r| (r - mean).powi(2)).sum::<f64>()).sqrt();
    Ok((rho, se))
}

/// `(Corr(f(Z), f(-Z)), jackknife SE)` over `n >= 1000` standard-normal draws.
pub fn antithetic_corr(f: impl Fn(f64) -> f64, n: usize, stream: RngStream) -> Result<(f64, f64)> {
    if n < MIN_CORR_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_CORR_SAMPLES, got: n });
    }
    let mut g = stream.generator();
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for _ in 0..n {
        let z = g.standard_normal();
        plus.push(f(z));
        minus.push(f(-z));
    }
    jackknife_corr(&plus, &minus)
}

type VectorMap = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A map `R^m -> R^k` declared monotone in each input coordinate, in the
/// direction `signs[j]`, for every output.
pub struct PartialMonotoneMap {
    signs: Vec<f64>,
    outputs: usize,
    map: Box<VectorMap>,
}

impl PartialMonotoneMap {
    pub fn new(signs: Vec<f64>, outputs: usize, map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Result<Self> {
        if signs.is_empty() || signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
            return Err(invalid("signs must be a nonempty vector of +1 / -1"));
        }
        Ok(Self { signs, outputs, map: Box::new(map) })
    }

    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.map)(x)
    }

    /// Largest violation of the declared monotonicity found by sweeping each
    /// coordinate over `[-3, 3]` at the given base points.
    pub fn monotonicity_violation(&self, bases: &[Vec<f64>]) -> f64 {
        let mut worst = 0.0f64;
        for base in bases {
            for j in 0..self.dim() {
                let mut prev: Option<Vec<f64>> = None;
                for k in 0..=60 {
                    let mut x = base.clone();
                    x[j] = -3.0 + 0.1 * k as f64;
                    let y = self.eval(&x);
                    if let Some(p) = &prev {
                        for (a, b) in p.iter().zip(&y) {
                            worst = worst.max(self.signs[j] * (a - b));
                        }
                    }
                    prev = Some(y);
                }
            }
        }
        worst
    }
}

/// Additive map `F_i(x) = sum_j s_j u_ij tanh(p_ij x_j + q_ij)` with
/// `u_ij, p_ij > 0`, so every output is monotone in `x_j` in direction `s_j`.
pub fn random_additive_map(stream: RngStream, dim: usize, outputs: usize) -> Result<PartialMonotoneMap> {
    if dim == 0 || outputs == 0 {
        return Err(invalid("additive map needs positive input and output dimensions"));
    }
    let mut g = stream.generator();
    let signs: Vec<f64> = (0..dim).map(|_| if g.uniform() < 0.5 { -1.0 } else { 1.0 }).collect();
    let mut params = Vec::with_capacity(dim * outputs);
    for _ in 0..dim * outputs {
        let u = 0.2 + g.uniform();
        let p = 0.2 + 2.0 * g.uniform();
        let q = g.standard_normal();
        params.push((u, p, q));
    }
    let s = signs.clone();
    PartialMonotoneMap::new(signs, outputs, move |x: &[f64]| {
        (0..outputs)
            .map(|i| {
                (0..x.len())
                    .map(|j| {
                        let (u, p, q) = params[i * x.len() + j];
                        s[j] * u * (p * x[j] + q).tanh()
                    })
                    .sum()
            })
            .collect()
    })
}

fn linear_stat(weights: &[f64], y: &[f64]) -> f64 {
    weights.iter().zip(y).map(|(w, v)| w * v).sum()
}

/// `(Corr(S(F(Z)), S(F(-Z))), jackknife SE)` for the linear statistic
/// `S(y) = weights . y`.
pub fn partial_monotone_corr(map: &PartialMonotoneMap, weights: &[f64], n: usize, stream: RngStream) -> Result<(f64, f64)> {
    if weights.len() != map.outputs() {
        return Err(Error::DimensionMismatch { expected: map.outputs(), got: weights.len() });
    }
    if n < MIN_CORR_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_CORR_SAMPLES, got: n });
    }
    let d = map.dim();
    let mut g = stream.generator();
    let mut z = vec![0.0; d];
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for _ in 0..n {
        g.fill_normal(&mut z);
        let nz: Vec<f64> = z.iter().map(|v| -v).collect();
        plus.push(linear_stat(weights, &map.eval(&z)));
        minus.push(linear_stat(weights, &map.eval(&nz)));
    }
    jackknife_corr(&plus, &minus)
}

/// The same correlation computed through the sign-normalized map
/// `G(u) = S(F(s * u))` at `u = s * Z`, which is coordinatewise
/// nondecreasing. Uses the same draws as [`partial_monotone_corr`].
pub fn partial_monotone_corr_normalized(
    map: &PartialMonotoneMap,
    weights: &[f64],
    n: usize,
    stream: RngStream,
) -> Result<(f64, f64)> {
    if weights.len() != map.outputs() {
        return Err(Error::DimensionMismatch { expected: map.outputs(), got: weights.len() });
    }
    if n < MIN_CORR_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_CORR_SAMPLES, got: n });
    }
    let s = map.signs();
    let normalized = |u: &[f64]| -> f64 {
        let x: Vec<f64> = u.iter().zip(s).map(|(a, b)| a * b).collect();
        linear_stat(weights, &map.eval(&x))
    };
    let mut g = stream.generator();
    let mut z = vec![0.0; map.dim()];
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for _ in 0..n {
        g.fill_normal(&mut z);
        let u: Vec<f64> = z.iter().zip(s).map(|(a, b)| a * b).collect();
        let nu: Vec<f64> = u.iter().map(|v| -v).collect();
        plus.push(normalized(&u));
        minus.push(normalized(&nu));
    }
    jackknife_corr(&plus, &minus)
}

/// Evidence gathered at probe points for one step `F(x) = a x + c s_t(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub step: Option<usize>,
    pub a: f64,
    pub c: f64,
    /// `max over probes and i of -d_ii log p_t`.
    pub kappa_hat: f64,
    /// `min over probes and i != j of d_ij log p_t` (`+inf` when `d = 1`).
    pub min_mixed_partial: f64,
    /// Probes where some mixed partial is below `-1e-10`.
    pub mtp2_violations: usize,
    pub condition_holds: bool,
    /// `a - c kappa_hat`.
    pub margin: f64,
    /// Minimum finite-difference Jacobian entry of `F` over probes.
    pub min_jacobian: f64,
    pub min_diag_jacobian: f64,
    pub probes: usize,
}

const MIXED_TOL: f64 = 1e-10;

fn fd_step(x: &[f64]) -> f64 {
    1e-5 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Central-difference Jacobian (row-major, `J[i*d + j] = dF_i/dx_j`).
pub fn fd_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let h = fd_step(x);
    let mut jac = vec![0.0; d * d];
    for j in 0..d {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        for i in 0..d {
            jac[i * d + j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Checks `F(x) = a x + c grad log p(x)` for a marginal `p` given directly,
/// at `probes` points drawn from `p`. Useful for hand-chosen coefficients
/// that no schedule produces.
pub fn monotonicity_check_with_coeffs(marginal: &MixtureParams, a: f64, c: f64, probes: usize, stream: RngStream) -> Result<MonotonicityReport> {
    if probes == 0 {
        return Err(invalid("need at least one probe"));
    }
    if c < 0.0 {
        return Err(invalid(format!("score coefficient must be nonnegative, got {c}")));
    }
    let d = marginal.dim();
    let points = marginal.sample(stream, probes);
    let step = |x: &[f64]| -> Vec<f64> { x.iter().zip(marginal.score(x)).map(|(xi, si)| a * xi + c * si).collect() };
    let mut kappa = f64::NEG_INFINITY;
    let mut min_mixed = f64::INFINITY;
    let mut violations = 0;
    let mut min_jac = f64::INFINITY;
    let mut min_diag = f64::INFINITY;
    for x in points.chunks_exact(d) {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("probe points must be finite"));
        }
        let h = marginal.log_density_hessian(x);
        let mut bad = false;
        for i in 0..d {
            kappa = kappa.max(-h[i * d + i]);
            for j in 0..d {
                if i != j {
                    min_mixed = min_mixed.min(h[i * d + j]);
                    bad |= h[i * d + j] < -MIXED_TOL;
                }
            }
        }
        violations += usize::from(bad);
        let jac = fd_jacobian(&step, x);
        for i in 0..d {
            min_diag = min_diag.min(jac[i * d + i]);
        }
        min_jac = min_jac.min(jac.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    let kappa = kappa.max(0.0);
    Ok(MonotonicityReport {
        step: None,
        a,
        c,
        kappa_hat: kappa,
        min_mixed_partial: min_mixed,
        mtp2_violations: violations,
        condition_holds: a >= c * kappa,
        margin: a - c * kappa,
        min_jacobian: min_jac,
        min_diag_jacobian: min_diag,
        probes,
    })
}

/// DDIM step coefficients against the score: `a_t` and
/// `c_t = -b_t sqrt(1 - alpha_bar_t) >= 0`.
pub fn score_step_coeffs(schedule: &Schedule, t: usize) -> Result<(f64, f64)> {
    let (a, b) = schedule.ddim_step_coeffs(t)?;
    Ok((a, -b * (1.0 - schedule.alpha_bar(t)).sqrt()))
}

/// [`monotonicity_check_with_coeffs`] for step `t` of an exact-score DDIM
/// sampler on `mixture`.
pub fn ddim_monotonicity_check(mixture: &MixtureParams, schedule: &Schedule, t: usize, probes: usize, stream: RngStream) -> Result<MonotonicityReport> {
    let (a, c) = score_step_coeffs(schedule, t)?;
    let marginal = mixture.marginal(schedule.alpha_bar(t));
    let mut report = monotonicity_check_with_coeffs(&marginal, a, c, probes, stream)?;
    report.step = Some(t);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub steps: Vec<MonotonicityReport>,
    pub condition_holds_everywhere: bool,
    /// Minimum finite-difference Jacobian entry of the full sampler map.
    pub min_chain_jacobian: f64,
    pub probes: usize,
}

/// Per-step checks plus the finite-difference Jacobian of the composed
/// sampler `F_1 o ... o F_T` at `probes` standard-normal starting points.
pub fn ddim_chain_monotonicity(mixture: &MixtureParams, schedule: &Schedule, probes: usize, stream: RngStream) -> Result<ChainReport> {
    let steps = (1..=schedule.steps())
        .map(|t| ddim_monotonicity_check(mixture, schedule, t, probes, stream.child(t as u64)))
        .collect::<Result<Vec<_>>>()?;
    let field = MixtureScore::new(mixture.clone(), schedule);
    let d = mixture.dim();
    let sampler = |x: &[f64]| -> Vec<f64> { ddim_output(&field, schedule, x).unwrap_or_else(|_| vec![f64::NAN; x.len()]) };
    let mut g = stream.child(0).generator();
    let mut min_jac = f64::INFINITY;
    let mut z = vec![0.0; d];
    for _ in 0..probes {
        g.fill_normal(&mut z);
        let jac = fd_jacobian(&sampler, &z);
        if jac.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: 0 });
        }
        min_jac = min_jac.min(jac.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    Ok(ChainReport {
        condition_holds_everywhere: steps.iter().all(|r| r.condition_holds),
        steps,
        min_chain_jacobian: min_jac,
        probes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub steps: usize,
    pub condition_holds: bool,
    /// Smallest `a_t - c_t kappa_hat` over all steps.
    pub min_margin: f64,
    pub max_kappa_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSweep {
    pub rows: Vec<SweepRow>,
    /// Smallest step count from which the condition holds at every larger
    /// count in the sweep, if any.
    pub threshold: Option<usize>,
}

/// Respaces `base` to each step count and checks the per-step condition at
/// every step. There is no closed-form step-size constant, so the empirical
/// threshold over the sweep is what gets reported.
pub fn step_count_sweep(
    mixture: &MixtureParams,
    base: &Schedule,
    step_counts: &[usize],
    probes: usize,
    stream: RngStream,
) -> Result<StepSweep> {
    let mut counts = step_counts.to_vec();
    counts.sort_unstable();
    counts.dedup();
    if counts.is_empty() {
        return Err(invalid("step sweep needs at least one step count"));
    }
    let mut rows = Vec::with_capacity(counts.len());
    for &n in &counts {
        let schedule = base.respaced(n)?;
        let child = stream.child(n as u64);
        let reports = (1..=n)
            .map(|t| ddim_monotonicity_check(mixture, &schedule, t, probes, child.child(t as u64)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(SweepRow {
            steps: n,
            condition_holds: reports.iter().all(|r| r.condition_holds),
            min_margin: reports.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min),
            max_kappa_hat: reports.iter().map(|r| r.kappa_hat).fold(0.0, f64::max),
        });
    }
    let mut threshold = None;
    for row in rows.iter().rev() {
        if !row.condition_holds {
            break;
        }
        threshold = Some(row.steps);
    }
    Ok(StepSweep { rows, threshold })
}
