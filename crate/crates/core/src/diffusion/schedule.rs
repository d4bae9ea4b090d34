use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Cumulative signal coefficients `alpha_bar[0..=T]`.
///
/// `alpha_bar[0]` is the clean end of the chain (1 for schedules built from
/// betas, the empty product) and the sequence is strictly decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    alpha_bar: Vec<f64>,
}

impl Schedule {
    pub fn from_alpha_bar(alpha_bar: Vec<f64>) -> Result<Self> {
        if alpha_bar.len() < 2 {
            return Err(invalid("schedule needs at least one step"));
        }
        if !(alpha_bar[0] > 0.0 && alpha_bar[0] <= 1.0) {
            return Err(invalid(format!("alpha_bar[0] = {} is outside (0, 1]", alpha_bar[0])));
        }
        for t in 1..alpha_bar.len() {
            let v = alpha_bar[t];
            if !(v > 0.0 && v < 1.0) {
                return Err(invalid(format!("alpha_bar[{t}] = {v} is outside (0, 1)")));
            }
            if v >= alpha_bar[t - 1] {
                return Err(invalid(format!("alpha_bar must strictly decrease (step {t})")));
            }
        }
        Ok(Self { alpha_bar })
    }

    /// `alpha_bar[t] = prod_{s <= t} (1 - beta_s)` with `beta` linearly spaced
    /// from `beta_min` (s = 1) to `beta_max` (s = T).
    pub fn linear_beta(steps: usize, beta_min: f64, beta_max: f64) -> Result<Self> {
        if steps == 0 {
            return Err(invalid("schedule needs at least one step"));
        }
        if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
            return Err(invalid(format!(
                "need 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]"
            )));
        }
        let mut alpha_bar = Vec::with_capacity(steps + 1);
        alpha_bar.push(1.0);
        let mut acc = 1.0;
        for s in 0..steps {
            let frac = if steps == 1 { 0.0 } else { s as f64 / (steps - 1) as f64 };
            let beta = beta_min + (beta_max - beta_min) * frac;
            acc *= 1.0 - beta;
            alpha_bar.push(acc);
        }
        Self::from_alpha_bar(alpha_bar)
    }

    /// Keeps `steps` evenly spaced training timesteps (plus the clean end),
    /// the usual DDIM respacing. Step `t` of the result is the `t`-th sampler
    /// step, so step `steps` is the initial noise level.
    pub fn respaced(&self, steps: usize) -> Result<Self> {
        let total = self.steps();
        if steps == 0 || steps > total {
            return Err(invalid(format!("cannot respace {total} steps into {steps}")));
        }
        let alpha_bar = (0..=steps)
            .map(|j| {
                let k = ((j * total) as f64 / steps as f64).round() as usize;
                self.alpha_bar[k]
            })
            .collect();
        Self::from_alpha_bar(alpha_bar)
    }

    /// Number of sampler steps `T`.
    pub fn steps(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    /// Continuous OU time matching `alpha_bar[t] = exp(-2 t_ou)`.
    pub fn ou_time(&self, t: usize) -> f64 {
        -0.5 * self.alpha_bar[t].ln()
    }

    /// DDIM coefficients `(a_t, b_t)` with `y_{t-1} = a_t y_t + b_t eps(y_t)`.
    pub fn ddim_step_coeffs(&self, t: usize) -> Result<(f64, f64)> {
        if t == 0 || t > self.steps() {
            return Err(invalid(format!("step {t} outside [1, {}]", self.steps())));
        }
        Ok(ddim_coeffs(self.alpha_bar[t - 1], self.alpha_bar[t]))
    }
}

/// `a = sqrt(ab_prev / ab)`, `b = sqrt(1 - ab_prev) - a sqrt(1 - ab)`.
pub fn ddim_coeffs(alpha_bar_prev: f64, alpha_bar: f64) -> (f64, f64) {
    let a = (alpha_bar_prev / alpha_bar).sqrt();
    let b = (1.0 - alpha_bar_prev).sqrt() - a * (1.0 - alpha_bar).sqrt();
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_product() {
        let s = Schedule::linear_beta(1, 0.1, 0.1).unwrap();
        assert!((s.alpha_bar(1) - 0.9).abs() < 1e-15);
        assert_eq!(s.alpha_bar(0), 1.0);
    }

    #[test]
    fn standard_thousand_step_schedule_ends_small() {
        let s = Schedule::linear_beta(1000, 1e-4, 0.02).unwrap();
        // direct product: prod (1 - beta_s) ~ 4.04e-5
        let direct: f64 = (0..1000).map(|i| 1.0 - (1e-4 + (0.02 - 1e-4) * i as f64 / 999.0)).product();
        assert!((s.alpha_bar(1000) - direct).abs() < 1e-15);
        assert!(s.alpha_bar(1000) < 1e-4);
        assert!(s.alpha_bar(1) >= 0.99);
        assert!(s.alpha_bars().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejects_bad_beta_ranges() {
        assert!(Schedule::linear_beta(10, 0.0, 0.1).is_err());
        assert!(Schedule::linear_beta(10, 0.2, 0.1).is_err());
        assert!(Schedule::linear_beta(10, 0.1, 1.0).is_err());
        assert!(Schedule::from_alpha_bar(vec![1.0, 0.5, 0.6]).is_err());
    }

    #[test]
    fn coefficient_examples() {
        assert_eq!(ddim_coeffs(0.7, 0.7), (1.0, 0.0));
        let (a, b) = ddim_coeffs(0.9, 0.8);
        assert!((a - 1.125f64.sqrt()).abs() < 1e-15);
        assert!((a - 1.060_660_171_779_821_2).abs() < 1e-12);
        assert!((b - (0.1f64.sqrt() - 1.125f64.sqrt() * 0.2f64.sqrt())).abs() < 1e-15);
        assert!((b + 0.158_113_883_008_418_9).abs() < 1e-12);
    }

    #[test]
    fn coefficients_positive_on_schedule() {
        let s = Schedule::linear_beta(1000, 1e-4, 0.02).unwrap().respaced(50).unwrap();
        for t in 1..=50 {
            assert!(s.ddim_step_coeffs(t).unwrap().0 > 0.0);
        }
        assert!(s.ddim_step_coeffs(0).is_err());
        assert!(s.ddim_step_coeffs(51).is_err());
    }

    #[test]
    fn respacing_keeps_endpoints() {
        let base = Schedule::linear_beta(1000, 1e-4, 0.02).unwrap();
        let s = base.respaced(50).unwrap();
        assert_eq!(s.steps(), 50);
        assert_eq!(s.alpha_bar(0), 1.0);
        assert_eq!(s.alpha_bar(50), base.alpha_bar(1000));
        assert_eq!(s.alpha_bar(1), base.alpha_bar(20));
    }

    #[test]
    fn ou_time_bridge() {
        let s = Schedule::from_alpha_bar(vec![1.0, (-2.0f64).exp()]).unwrap();
        assert!((s.ou_time(1) - 1.0).abs() < 1e-15);
        assert_eq!(s.ou_time(0), 0.0);
    }
}
