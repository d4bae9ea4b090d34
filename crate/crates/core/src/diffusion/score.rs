use super::mixture::MixtureParams;
use super::schedule::Schedule;

/// A noise-prediction field `eps(t, x)` evaluated at sampler step `t`.
///
/// The score of the step-`t` marginal is `s_t(x) = -eps(t, x) / sqrt(1 - alpha_bar_t)`.
pub trait ScoreField: Send + Sync {
    fn dim(&self) -> usize;

    fn eps(&self, t: usize, x: &[f64]) -> Vec<f64>;

    /// Number of steps the field is defined on, if it is tied to a schedule.
    fn steps(&self) -> Option<usize> {
        None
    }
}

/// Exact noise prediction for a Gaussian-mixture data distribution under a
/// variance-preserving schedule.
#[derive(Debug, Clone)]
pub struct MixtureScore {
    mixture: MixtureParams,
    schedule: Schedule,
    marginals: Vec<MixtureParams>,
}

impl MixtureScore {
    pub fn new(mixture: MixtureParams, schedule: &Schedule) -> Self {
        let marginals = schedule.alpha_bars().iter().map(|&ab| mixture.marginal(ab)).collect();
        Self { mixture, schedule: schedule.clone(), marginals }
    }

    pub fn mixture(&self) -> &MixtureParams {
        &self.mixture
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// Marginal law of `x_t`.
    pub fn marginal(&self, t: usize) -> &MixtureParams {
        &self.marginals[t]
    }

    /// `grad log p_t(x)`.
    pub fn score(&self, t: usize, x: &[f64]) -> Vec<f64> {
        self.marginals[t].score(x)
    }
}

impl ScoreField for MixtureScore {
    fn dim(&self) -> usize {
        self.mixture.dim()
    }

    fn eps(&self, t: usize, x: &[f64]) -> Vec<f64> {
        let scale = -(1.0 - self.schedule.alpha_bar(t)).sqrt();
        let mut s = self.marginals[t].score(x);
        for v in s.iter_mut() {
            *v *= scale;
        }
        s
    }

    fn steps(&self) -> Option<usize> {
        Some(self.schedule.steps())
    }
}

/// Exact noise prediction of the exact mixture score along a schedule,
/// evaluated at an arbitrary `alpha_bar` instead of a step index.
pub fn exact_mixture_eps(mixture: &MixtureParams, schedule: &Schedule, t: usize, x: &[f64]) -> crate::Result<Vec<f64>> {
    if t == 0 || t > schedule.steps() {
        return Err(crate::error::invalid(format!("step {t} outside [1, {}]", schedule.steps())));
    }
    mixture.check_dim(x)?;
    let ab = schedule.alpha_bar(t);
    let scale = -(1.0 - ab).sqrt();
    Ok(mixture.marginal(ab).score(x).into_iter().map(|v| scale * v).collect())
}

/// Presents the score `s_t = -eps / sqrt(1 - alpha_bar_t)` implied by a
/// noise-prediction field as a field of its own, so tools written against
/// [`ScoreField`] can probe either quantity.
pub struct ImpliedScore<'a> {
    field: &'a dyn ScoreField,
    schedule: &'a Schedule,
}

impl<'a> ImpliedScore<'a> {
    pub fn new(field: &'a dyn ScoreField, schedule: &'a Schedule) -> Self {
        Self { field, schedule }
    }
}

impl ScoreField for ImpliedScore<'_> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn eps(&self, t: usize, x: &[f64]) -> Vec<f64> {
        let scale = -1.0 / (1.0 - self.schedule.alpha_bar(t)).sqrt();
        self.field.eps(t, x).into_iter().map(|v| scale * v).collect()
    }

    fn steps(&self) -> Option<usize> {
        Some(self.schedule.steps())
    }
}

/// A field backed by a closure, for hand-built or tabulated fields.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(usize, &[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> ScoreField for FnField<F>
where
    F: Fn(usize, &[f64]) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eps(&self, t: usize, x: &[f64]) -> Vec<f64> {
        (self.f)(t, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule() -> Schedule {
        Schedule::linear_beta(1000, 1e-4, 0.02).unwrap().respaced(20).unwrap()
    }

    #[test]
    fn standard_normal_eps_is_scaled_identity() {
        let s = schedule();
        let f = MixtureScore::new(MixtureParams::standard_normal(3), &s);
        let x = [0.3, -1.2, 2.0];
        for t in 1..=20 {
            let e = f.eps(t, &x);
            let c = (1.0 - s.alpha_bar(t)).sqrt();
            for (ei, xi) in e.iter().zip(&x) {
                assert!((ei - c * xi).abs() < 1e-14);
            }
            // implied score is -x
            for (si, xi) in f.score(t, &x).iter().zip(&x) {
                assert!((si + xi).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn standard_normal_eps_matches_finite_difference_density() {
        // closed-form log p_t for N(0, I) is -|x|^2/2 + const
        let s = schedule();
        let m = MixtureParams::standard_normal(2);
        let x = [0.7, -0.4];
        let h = 1e-5;
        for t in [1, 10, 20] {
            let e = exact_mixture_eps(&m, &s, t, &x).unwrap();
            for i in 0..2 {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                let logp = |v: &[f64]| -0.5 * v.iter().map(|a| a * a).sum::<f64>();
                let fd = (logp(&xp) - logp(&xm)) / (2.0 * h);
                let expected = -(1.0 - s.alpha_bar(t)).sqrt() * fd;
                assert!((e[i] - expected).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn symmetric_pair_is_odd() {
        let s = schedule();
        let m = MixtureParams::symmetric_pair(&[0.0, 0.0], &[1.0, -0.5], 0.2).unwrap();
        let x = [0.37, -0.81];
        let nx = [-0.37, 0.81];
        for t in 1..=20 {
            let a = exact_mixture_eps(&m, &s, t, &x).unwrap();
            let b = exact_mixture_eps(&m, &s, t, &nx).unwrap();
            assert_eq!(a[0], -b[0]);
            assert_eq!(a[1], -b[1]);
            assert_eq!(exact_mixture_eps(&m, &s, t, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn implied_score_round_trip() {
        let s = schedule();
        let m = MixtureParams::symmetric_pair(&[0.5], &[1.0], 0.3).unwrap();
        let field = MixtureScore::new(m, &s);
        let implied = ImpliedScore::new(&field, &s);
        for t in [1, 7, 20] {
            let a = implied.eps(t, &[0.2])[0];
            assert!((a - field.score(t, &[0.2])[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn step_bounds_checked() {
        let s = schedule();
        let m = MixtureParams::standard_normal(1);
        assert!(exact_mixture_eps(&m, &s, 0, &[0.0]).is_err());
        assert!(exact_mixture_eps(&m, &s, 21, &[0.0]).is_err());
        assert!(exact_mixture_eps(&m, &s, 1, &[0.0, 1.0]).is_err());
    }
}
