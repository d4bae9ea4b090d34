//! DDIM and DDPM samplers that run an initial noise down to `t = 0`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schedule::Schedule;
use super::score::ScoreField;
use crate::error::{invalid, Error, Result};
use crate::io;
use crate::rng::RngStream;

/// States `y_T, ..., y_0` of one sampler run, plus the noise predictions
/// made at each step when recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `states[k]` is `y_{T-k}`; `states[0]` is the initial noise.
    pub states: Vec<Vec<f64>>,
    /// `eps[k]` is the prediction made at step `T-k`, if recorded.
    pub eps: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySidecar {
    pub kind: String,
    pub steps: usize,
    pub d: usize,
    pub rows: usize,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    /// `y_t`.
    pub fn state_at(&self, t: usize) -> &[f64] {
        &self.states[self.steps() - t]
    }

    /// `eps(t, y_t)` for `t` in `1..=T`.
    pub fn eps_at(&self, t: usize) -> Option<&[f64]> {
        let steps = self.steps();
        self.eps.as_ref().map(|e| e[steps - t].as_slice())
    }

    pub fn initial_noise(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn output(&self) -> &[f64] {
        self.states.last().expect("non-empty trajectory")
    }

    /// Writes states (and eps records, if present) as `stem_states` and
    /// `stem_eps` raw matrices, ordered from step `T` down.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let name = stem.file_name().and_then(|s| s.to_str()).unwrap_or("trajectory");
        let flat: Vec<f64> = self.states.iter().flatten().copied().collect();
        let meta = TrajectorySidecar {
            kind: "states".into(),
            steps: self.steps(),
            d: self.dim(),
            rows: self.states.len(),
        };
        io::write_matrix(&stem.with_file_name(format!("{name}_states")), &flat, &meta)?;
        if let Some(eps) = &self.eps {
            let flat: Vec<f64> = eps.iter().flatten().copied().collect();
            let meta = TrajectorySidecar { kind: "eps".into(), steps: self.steps(), d: self.dim(), rows: eps.len() };
            io::write_matrix(&stem.with_file_name(format!("{name}_eps")), &flat, &meta)?;
        }
        Ok(())
    }
}

fn check_inputs(score: &dyn ScoreField, schedule: &Schedule, z: &[f64]) -> Result<()> {
    if z.len() != score.dim() {
        return Err(Error::DimensionMismatch { expected: score.dim(), got: z.len() });
    }
    if let Some(steps) = score.steps() {
        if steps != schedule.steps() {
            return Err(invalid(format!(
                "score field is defined on {steps} steps but the schedule has {}",
                schedule.steps()
            )));
        }
    }
    Ok(())
}

fn check_finite(x: &[f64], step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}

/// Deterministic DDIM: `y_{t-1} = a_t y_t + b_t eps(t, y_t)` for `t = T..1`.
pub fn ddim_sample(score: &dyn ScoreField, schedule: &Schedule, z_init: &[f64], record_eps: bool) -> Result<Trajectory> {
    check_inputs(score, schedule, z_init)?;
    let steps = schedule.steps();
    let mut states = Vec::with_capacity(steps + 1);
    let mut eps_log = record_eps.then(|| Vec::with_capacity(steps));
    let mut y = z_init.to_vec();
    states.push(y.clone());
    for t in (1..=steps).rev() {
        let (a, b) = schedule.ddim_step_coeffs(t)?;
        let e = score.eps(t, &y);
        for (yi, ei) in y.iter_mut().zip(&e) {
            *yi = a * *yi + b * ei;
        }
        check_finite(&y, t)?;
        states.push(y.clone());
        if let Some(log) = eps_log.as_mut() {
            log.push(e);
        }
    }
    Ok(Trajectory { states, eps: eps_log })
}

/// DDIM output `y_0` only, without keeping intermediate states.
pub fn ddim_output(score: &dyn ScoreField, schedule: &Schedule, z_init: &[f64]) -> Result<Vec<f64>> {
    check_inputs(score, schedule, z_init)?;
    let mut y = z_init.to_vec();
    for t in (1..=schedule.steps()).rev() {
        let (a, b) = schedule.ddim_step_coeffs(t)?;
        let e = score.eps(t, &y);
        for (yi, ei) in y.iter_mut().zip(&e) {
            *yi = a * *yi + b * ei;
        }
        check_finite(&y, t)?;
    }
    Ok(y)
}

/// Per-step noise level of the ancestral sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DdpmVariance {
    /// `sigma_t^2 = (1 - ab_{t-1}) / (1 - ab_t) * beta_t`.
    Posterior,
    /// `sigma_t^2 = beta_t`.
    Beta,
    /// `sigma_t = 0`.
    Zero,
}

/// Ancestral (DDPM) sampling:
/// `x_{t-1} = (x_t - beta_t / sqrt(1 - ab_t) eps) / sqrt(alpha_t) + sigma_t z_t`,
/// with `alpha_t = ab_t / ab_{t-1}`, `beta_t = 1 - alpha_t`, and no noise at
/// `t = 1`.
///
/// Step noises `z_T, ..., z_2` are drawn in order from `step_noise`. With
/// `negate_all`, the initial noise and every step noise are negated, so two
/// runs sharing a stream form an antithetic pair over the whole noise path.
pub fn ddpm_sample(
    score: &dyn ScoreField,
    schedule: &Schedule,
    z_init: &[f64],
    step_noise: RngStream,
    negate_all: bool,
    variance: DdpmVariance,
    record_eps: bool,
) -> Result<Trajectory> {
    check_inputs(score, schedule, z_init)?;
    let steps = schedule.steps();
    let sign = if negate_all { -1.0 } else { 1.0 };
    let mut gen = step_noise.generator();
    let mut y: Vec<f64> = z_init.iter().map(|v| sign * v).collect();
    let mut states = Vec::with_capacity(steps + 1);
    let mut eps_log = record_eps.then(|| Vec::with_capacity(steps));
    states.push(y.clone());
    let mut z = vec![0.0; y.len()];
    for t in (1..=steps).rev() {
        let ab = schedule.alpha_bar(t);
        let ab_prev = schedule.alpha_bar(t - 1);
        let alpha = ab / ab_prev;
        let beta = 1.0 - alpha;
        let sigma = match variance {
            DdpmVariance::Posterior => ((1.0 - ab_prev) / (1.0 - ab) * beta).sqrt(),
            DdpmVariance::Beta => beta.sqrt(),
            DdpmVariance::Zero => 0.0,
        };
        let e = score.eps(t, &y);
        let c = beta / (1.0 - ab).sqrt();
        let inv = 1.0 / alpha.sqrt();
        if t > 1 {
            gen.fill_normal(&mut z);
        }
        for i in 0..y.len() {
            let noise = if t > 1 { sign * z[i] } else { 0.0 };
            y[i] = inv * (y[i] - c * e[i]) + sigma * noise;
        }
        check_finite(&y, t)?;
        states.push(y.clone());
        if let Some(log) = eps_log.as_mut() {
            log.push(e);
        }
    }
    Ok(Trajectory { states, eps: eps_log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::mixture::MixtureParams;
    use crate::diffusion::score::{FnField, MixtureScore};

    fn schedule(steps: usize) -> Schedule {
        Schedule::linear_beta(1000, 1e-4, 0.02).unwrap().respaced(steps).unwrap()
    }

    #[test]
    fn single_step_is_one_update() {
        let s = Schedule::linear_beta(1, 0.1, 0.1).unwrap();
        let field = MixtureScore::new(MixtureParams::symmetric_pair(&[0.0], &[1.0], 0.3).unwrap(), &s);
        let z = [0.8];
        let traj = ddim_sample(&field, &s, &z, true).unwrap();
        let (a, b) = s.ddim_step_coeffs(1).unwrap();
        let e = field.eps(1, &z);
        assert_eq!(traj.output(), &[a * z[0] + b * e[0]]);
        assert_eq!(traj.eps_at(1).unwrap(), e.as_slice());
        assert_eq!(traj.states.len(), 2);
    }

    #[test]
    fn trajectory_shape_and_initial_state() {
        let s = schedule(10);
        let field = MixtureScore::new(MixtureParams::standard_normal(4), &s);
        let z = [0.1, 0.2, -0.3, 1.0];
        let traj = ddim_sample(&field, &s, &z, true).unwrap();
        assert_eq!(traj.states.len(), 11);
        assert_eq!(traj.eps.as_ref().unwrap().len(), 10);
        assert_eq!(traj.state_at(10), &z);
        assert_eq!(traj.output(), ddim_output(&field, &s, &z).unwrap().as_slice());
        assert!(ddim_sample(&field, &s, &z, false).unwrap().eps.is_none());
    }

    #[test]
    fn ddim_is_bit_deterministic() {
        let s = schedule(25);
        let m = MixtureParams::random(RngStream::new(3, 0), 6, 3, 1.0, (0.1, 0.4)).unwrap();
        let field = MixtureScore::new(m, &s);
        let z = [0.3, -0.2, 1.1, 0.0, -1.4, 0.6];
        assert_eq!(ddim_sample(&field, &s, &z, true).unwrap(), ddim_sample(&field, &s, &z, true).unwrap());
    }

    #[test]
    fn linear_score_gives_affine_antisymmetric_outputs() {
        let s = schedule(50);
        let m = MixtureParams::single(vec![0.5, -1.0, 2.0], 0.3).unwrap();
        let field = MixtureScore::new(m, &s);
        let origin = ddim_output(&field, &s, &[0.0; 3]).unwrap();
        let z = [0.9, -0.4, 1.3];
        let nz = [-0.9, 0.4, -1.3];
        let plus = ddim_output(&field, &s, &z).unwrap();
        let minus = ddim_output(&field, &s, &nz).unwrap();
        for i in 0..3 {
            assert!(((plus[i] - origin[i]) + (minus[i] - origin[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn nan_reports_step() {
        let s = schedule(5);
        let field = FnField::new(1, |t, x: &[f64]| if t == 3 { vec![f64::NAN] } else { x.to_vec() });
        match ddim_sample(&field, &s, &[1.0], false) {
            Err(Error::NonFinite { step }) => assert_eq!(step, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_and_schedule_mismatch_rejected() {
        let s = schedule(5);
        let field = MixtureScore::new(MixtureParams::standard_normal(2), &s);
        assert!(ddim_sample(&field, &s, &[1.0], false).is_err());
        assert!(ddim_sample(&field, &schedule(6), &[1.0, 0.0], false).is_err());
    }

    #[test]
    fn ddpm_zero_variance_is_deterministic() {
        let s = schedule(20);
        let m = MixtureParams::random(RngStream::new(4, 0), 3, 2, 1.0, (0.2, 0.5)).unwrap();
        let field = MixtureScore::new(m, &s);
        let z = [0.5, -0.5, 0.1];
        let a = ddpm_sample(&field, &s, &z, RngStream::new(1, 0), false, DdpmVariance::Zero, false).unwrap();
        let b = ddpm_sample(&field, &s, &z, RngStream::new(2, 9), false, DdpmVariance::Zero, false).unwrap();
        assert_eq!(a, b);
        // matches the noiseless posterior-mean recursion written out by hand
        let mut y = z.to_vec();
        for t in (1..=20).rev() {
            let alpha = s.alpha_bar(t) / s.alpha_bar(t - 1);
            let e = field.eps(t, &y);
            for i in 0..3 {
                y[i] = (y[i] - (1.0 - alpha) / (1.0 - s.alpha_bar(t)).sqrt() * e[i]) / alpha.sqrt();
            }
        }
        for (u, v) in a.output().iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn ddpm_pair_negates_every_noise() {
        let s = schedule(10);
        // eps = 0 exposes the injected noise directly
        let field = FnField::new(2, |_, _: &[f64]| vec![0.0, 0.0]);
        let z = [0.3, -0.7];
        let stream = RngStream::new(8, 1);
        let p = ddpm_sample(&field, &s, &z, stream, false, DdpmVariance::Beta, false).unwrap();
        let n = ddpm_sample(&field, &s, &z, stream, true, DdpmVariance::Beta, false).unwrap();
        for (a, b) in p.states.iter().zip(&n.states) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(*x, -*y);
            }
        }
    }

    #[test]
    fn ddpm_linear_score_pairs_are_affine_antisymmetric() {
        let s = schedule(30);
        let m = MixtureParams::single(vec![1.0, -0.5], 0.5).unwrap();
        let field = MixtureScore::new(m, &s);
        let stream = RngStream::new(5, 5);
        let zero_noise = ddpm_sample(&field, &s, &[0.0, 0.0], stream, false, DdpmVariance::Posterior, false).unwrap();
        let zero_noise_neg = ddpm_sample(&field, &s, &[0.0, 0.0], stream, true, DdpmVariance::Posterior, false).unwrap();
        // center: the output with all noise switched off is the midpoint
        let center: Vec<f64> = zero_noise.output().iter().zip(zero_noise_neg.output()).map(|(a, b)| 0.5 * (a + b)).collect();
        let z = [1.2, 0.4];
        let p = ddpm_sample(&field, &s, &z, stream, false, DdpmVariance::Posterior, false).unwrap();
        let n = ddpm_sample(&field, &s, &z, stream, true, DdpmVariance::Posterior, false).unwrap();
        for ((a, b), c) in p.output().iter().zip(n.output()).zip(&center) {
            assert!(((a - c) + (b - c)).abs() < 1e-9);
        }
    }

    #[test]
    fn trajectory_export() {
        let dir = tempfile::tempdir().unwrap();
        let s = schedule(4);
        let field = MixtureScore::new(MixtureParams::standard_normal(2), &s);
        let traj = ddim_sample(&field, &s, &[1.0, 2.0], true).unwrap();
        traj.save(&dir.path().join("run")).unwrap();
        let (states, meta): (Vec<f64>, TrajectorySidecar) = io::read_matrix(&dir.path().join("run_states")).unwrap();
        assert_eq!(meta.rows, 5);
        assert_eq!(&states[..2], &[1.0, 2.0]);
        assert!(dir.path().join("run_eps.bin").exists());
    }
}
