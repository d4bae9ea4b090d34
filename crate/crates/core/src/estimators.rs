//! Plain, antithetic and randomized quasi-Monte Carlo estimators of a mean,
//! each with a confidence interval, plus relative efficiency between them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::{normal_quantile, student_t_quantile};
use crate::stats::{mean, pearson, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mc,
    Amc,
    KAntithetic,
    Rqmc,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Mc => "MC",
            Method::Amc => "AMC",
            Method::KAntithetic => "AMC-K",
            Method::Rqmc => "RQMC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub method: Method,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub half_width: f64,
    /// Variance of a single averaged unit (a sample, pair mean, block mean
    /// or replicate mean, depending on the method).
    pub variance_estimate: f64,
    /// Pair correlation of `(S+, S-)`; antithetic methods only.
    pub rho_hat: Option<f64>,
    /// Total number of sampler evaluations behind the estimate.
    pub budget: usize,
    /// Confidence level `1 - alpha`.
    pub level: f64,
}

impl EstimatorReport {
    pub fn width(&self) -> f64 {
        self.ci_hi - self.ci_lo
    }

    fn build(method: Method, estimate: f64, half_width: f64, variance: f64, budget: usize, alpha: f64) -> Self {
        Self {
            method,
            estimate,
            ci_lo: estimate - half_width,
            ci_hi: estimate + half_width,
            half_width,
            variance_estimate: variance,
            rho_hat: None,
            budget,
            level: 1.0 - alpha,
        }
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_lo <= value && value <= self.ci_hi
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid("statistic values must be finite"))
    }
}

/// Sample variance of the averaged units, floored to exactly zero when the
/// units agree to within roundoff of their magnitude (spread at most 64 ulp).
/// Exact cancellation then yields a zero-width interval instead of one set
/// by the last bits of the arithmetic.
fn unit_variance(units: &[f64]) -> f64 {
    let (lo, hi) = units.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &u| (l.min(u), h.max(u)));
    let scale = lo.abs().max(hi.abs());
    if hi - lo <= 64.0 * f64::EPSILON * scale {
        0.0
    } else {
        sample_variance(units)
    }
}

/// `mu +- z sqrt(s^2 / N)`.
pub fn mc_estimate(values: &[f64], alpha: f64) -> Result<EstimatorReport> {
    check_alpha(alpha)?;
    if values.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: values.len() });
    }
    check_finite(values)?;
    let n = values.len() as f64;
    let var = unit_variance(values);
    let z = normal_quantile(1.0 - alpha / 2.0);
    Ok(EstimatorReport::build(Method::Mc, mean(values), z * (var / n).sqrt(), var, values.len(), alpha))
}

/// Antithetic estimator over `K` pairs: `mu +- z sqrt(2 s^2 / N)`, with
/// `s^2` the sample variance of pair means and `N = 2K`. The pair
/// correlation is reported but does not enter the interval.
pub fn amc_estimate(pairs: &[(f64, f64)], alpha: f64) -> Result<EstimatorReport> {
    check_alpha(alpha)?;
    if pairs.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: pairs.len() });
    }
    let means: Vec<f64> = pairs.iter().map(|(p, m)| 0.5 * (p + m)).collect();
    check_finite(&means)?;
    let budget = 2 * pairs.len();
    let var = unit_variance(&means);
    let z = normal_quantile(1.0 - alpha / 2.0);
    let half = z * (2.0 * var / budget as f64).sqrt();
    let mut report = EstimatorReport::build(Method::Amc, mean(&means), half, var, budget, alpha);
    let plus: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let minus: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    report.rho_hat = pearson(&plus, &minus).ok();
    Ok(report)
}

/// Normal-quantile interval over `K`-antithetic block means. For `K = 2` it
/// coincides with [`amc_estimate`]. `rho_hat` is the average within-block
/// pairwise correlation, estimated from the between-block variance.
pub fn k_antithetic_estimate(blocks: &[Vec<f64>], alpha: f64) -> Result<EstimatorReport> {
    check_alpha(alpha)?;
    if blocks.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: blocks.len() });
    }
    let k = blocks[0].len();
    if k < 2 {
        return Err(invalid("blocks need at least two members"));
    }
    if let Some(b) = blocks.iter().find(|b| b.len() != k) {
        return Err(Error::DimensionMismatch { expected: k, got: b.len() });
    }
    let means: Vec<f64> = blocks.iter().map(|b| mean(b)).collect();
    check_finite(&means)?;
    let var = unit_variance(&means);
    let z = normal_quantile(1.0 - alpha / 2.0);
    let half = z * (var / blocks.len() as f64).sqrt();
    let mut report = EstimatorReport::build(Method::KAntithetic, mean(&means), half, var, k * blocks.len(), alpha);
    if k == 2 {
        report.rho_hat = amc_estimate(&blocks.iter().map(|b| (b[0], b[1])).collect::<Vec<_>>(), alpha)?.rho_hat;
    } else {
        // Var(block mean) = sigma^2 (1 + (K-1) rho) / K
        let all: Vec<f64> = blocks.iter().flatten().copied().collect();
        let sigma2 = sample_variance(&all);
        if sigma2 > 0.0 {
            let kf = k as f64;
            report.rho_hat = Some(((kf * var / sigma2 - 1.0) / (kf - 1.0)).clamp(-1.0, 1.0));
        }
    }
    Ok(report)
}

/// Student-t interval over `R` replicate means:
/// `mu +- t_{R-1, 1-alpha/2} s_R / sqrt(R)`. `points_per_replicate` is
/// only used for budget accounting.
pub fn rqmc_estimate(replicate_means: &[f64], points_per_replicate: usize, alpha: f64) -> Result<EstimatorReport> {
    check_alpha(alpha)?;
    let r = replicate_means.len();
    if r < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: r });
    }
    check_finite(replicate_means)?;
    let var = unit_variance(replicate_means);
    let t = student_t_quantile(1.0 - alpha / 2.0, (r - 1) as f64);
    let half = t * (var / r as f64).sqrt();
    Ok(EstimatorReport::build(Method::Rqmc, mean(replicate_means), half, var, r * points_per_replicate, alpha))
}

/// `(baseline width / candidate width)^2`; `+inf` when the candidate has
/// zero width, `NaN` when both do.
pub fn relative_efficiency(baseline: &EstimatorReport, candidate: &EstimatorReport) -> Result<f64> {
    if (baseline.level - candidate.level).abs() > 1e-12 {
        return Err(invalid(format!(
            "reports use different confidence levels ({} vs {})",
            baseline.level, candidate.level
        )));
    }
    Ok(width_efficiency(baseline.width(), candidate.width()))
}

pub fn width_efficiency(baseline_width: f64, candidate_width: f64) -> f64 {
    if candidate_width == 0.0 {
        if baseline_width == 0.0 {
            f64::NAN
        } else {
            f64::INFINITY
        }
    } else {
        (baseline_width / candidate_width).powi(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mc_three_values() {
        let r = mc_estimate(&[1.0, 2.0, 3.0], 0.05).unwrap();
        assert_eq!(r.estimate, 2.0);
        assert_eq!(r.variance_estimate, 1.0);
        let expected = 1.959963984540054 / 3f64.sqrt();
        assert!((r.half_width - expected).abs() < 1e-12);
        assert!((r.half_width - 1.1316).abs() < 1e-4);
        assert_eq!(r.budget, 3);
    }

    #[test]
    fn constant_inputs_give_zero_width() {
        assert_eq!(mc_estimate(&[4.0; 5], 0.05).unwrap().half_width, 0.0);
        assert_eq!(rqmc_estimate(&[4.0; 5], 16, 0.05).unwrap().half_width, 0.0);
        let blocks = vec![vec![1.0, 1.0, 1.0]; 4];
        assert_eq!(k_antithetic_estimate(&blocks, 0.05).unwrap().half_width, 0.0);
    }

    #[test]
    fn perfect_antithetic_pairs() {
        let pairs: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - i as f64)).collect();
        let r = amc_estimate(&pairs, 0.05).unwrap();
        assert_eq!(r.estimate, 1.5);
        assert_eq!(r.half_width, 0.0);
        assert!((r.rho_hat.unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(r.budget, 20);
    }

    #[test]
    fn rho_absent_for_constant_margin() {
        let pairs = vec![(1.0, 0.0), (1.0, 2.0), (1.0, 5.0)];
        assert!(amc_estimate(&pairs, 0.05).unwrap().rho_hat.is_none());
    }

    #[test]
    fn too_few_inputs() {
        assert!(matches!(mc_estimate(&[1.0], 0.05), Err(Error::TooFewSamples { .. })));
        assert!(amc_estimate(&[(1.0, 2.0)], 0.05).is_err());
        assert!(rqmc_estimate(&[1.0], 4, 0.05).is_err());
        assert!(k_antithetic_estimate(&[vec![1.0, 2.0]], 0.05).is_err());
        assert!(mc_estimate(&[1.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn rqmc_uses_student_t() {
        let means: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let r = rqmc_estimate(&means, 64, 0.05).unwrap();
        let s = sample_variance(&means).sqrt();
        let t = r.half_width / (s / 10f64.sqrt());
        assert!((t - 2.2621571628540993).abs() < 1e-4);
        assert_eq!(r.budget, 640);
    }

    #[test]
    fn k2_matches_amc() {
        let pairs = vec![(0.3, -0.1), (1.2, 0.4), (-0.5, 0.9), (2.0, -1.0)];
        let blocks: Vec<Vec<f64>> = pairs.iter().map(|&(a, b)| vec![a, b]).collect();
        let a = amc_estimate(&pairs, 0.1).unwrap();
        let k = k_antithetic_estimate(&blocks, 0.1).unwrap();
        assert_eq!(a.estimate, k.estimate);
        assert!((a.half_width - k.half_width).abs() < 1e-15);
        assert_eq!(a.variance_estimate, k.variance_estimate);
        assert_eq!(a.rho_hat, k.rho_hat);
        assert_eq!(a.budget, k.budget);
    }

    #[test]
    fn block_permutation_invariance() {
        let blocks = vec![vec![0.1, 0.5, -0.3, 0.9], vec![1.0, -2.0, 0.25, 0.0], vec![0.7, 0.7, -0.1, 0.4]];
        let permuted: Vec<Vec<f64>> = blocks.iter().map(|b| vec![b[2], b[0], b[3], b[1]]).collect();
        let a = k_antithetic_estimate(&blocks, 0.05).unwrap();
        let b = k_antithetic_estimate(&permuted, 0.05).unwrap();
        assert!((a.estimate - b.estimate).abs() < 1e-15);
        assert!((a.half_width - b.half_width).abs() < 1e-15);
    }

    #[test]
    fn efficiency_arithmetic() {
        let e = width_efficiency(2.0, 0.35);
        assert!((e - 32.653_061_224_489_8).abs() < 1e-12);
        assert_eq!(width_efficiency(1.3, 1.3), 1.0);
        assert_eq!(width_efficiency(1.0, 0.0), f64::INFINITY);
        let a = mc_estimate(&[1.0, 2.0, 3.0], 0.05).unwrap();
        let b = mc_estimate(&[1.0, 2.0, 3.0], 0.1).unwrap();
        assert!(relative_efficiency(&a, &b).is_err());
        assert_eq!(relative_efficiency(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn report_serializes() {
        let r = amc_estimate(&[(1.0, 0.0), (0.5, 0.2), (0.1, 0.9)], 0.05).unwrap();
        let back: EstimatorReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn roundoff_spread_counts_as_zero_width() {
        let pairs: Vec<(f64, f64)> = (0..10).map(|i| (0.3 + 0.1 * i as f64, 0.7 - 0.1 * i as f64)).collect();
        let r = amc_estimate(&pairs, 0.05).unwrap();
        assert_eq!(r.width(), 0.0);
        let mc = mc_estimate(&[0.1, 0.5, 0.9], 0.05).unwrap();
        assert_eq!(relative_efficiency(&mc, &r).unwrap(), f64::INFINITY);
        let real = mc_estimate(&[0.5, 0.5 + 1e-12], 0.05).unwrap();
        assert!(real.width() > 0.0);
    }
}
