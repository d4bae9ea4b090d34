use std::sync::atomic::{AtomicUsize, Ordering};

use antithetic_core::diffusion::{ddim_output, ddim_sample, ddpm_sample, MixtureParams, MixtureScore, Schedule, Trajectory};
use antithetic_core::image_stats::{brightness, centroid_row, contrast, mean_pixel, ImageTensor};
use antithetic_core::RngStream;

use crate::config::{ImageShape, ModelSpec, SamplerSpec, Statistic};
use crate::LabError;

/// A built model spec plus a counter of sampler invocations.
pub struct Model {
    pub shape: ImageShape,
    pub schedule: Schedule,
    pub field: MixtureScore,
    sampler: SamplerSpec,
    clamp: bool,
    calls: AtomicUsize,
}

impl Model {
    pub fn build(spec: &ModelSpec, field: &str) -> Result<Self, LabError> {
        let shape = spec.image;
        if shape.dim() == 0 {
            return Err(LabError::config(format!("{field}.image"), "channels, height and width must be positive"));
        }
        let mixture: MixtureParams = spec.mixture.build(&format!("{field}.mixture"))?;
        if mixture.dim() != shape.dim() {
            return Err(LabError::config(
                format!("{field}.mixture"),
                format!("mixture dimension {} does not match image size {}", mixture.dim(), shape.dim()),
            ));
        }
        let schedule = spec.schedule.build(&format!("{field}.schedule"))?;
        let score = MixtureScore::new(mixture, &schedule);
        Ok(Self { shape, schedule, field: score, sampler: spec.sampler, clamp: spec.clamp, calls: AtomicUsize::new(0) })
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    /// One sampler call from initial noise `z`. `negate` flips `z` (and, for
    /// the ancestral sampler, every step noise drawn from `step_noise`).
    pub fn sample(&self, z: &[f64], step_noise: RngStream, negate: bool) -> Result<Vec<f64>, LabError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let out = match self.sampler {
            SamplerSpec::Ddim => {
                if negate {
                    let nz: Vec<f64> = z.iter().map(|v| -v).collect();
                    ddim_output(&self.field, &self.schedule, &nz)?
                } else {
                    ddim_output(&self.field, &self.schedule, z)?
                }
            }
            SamplerSpec::Ddpm { variance } => {
                ddpm_sample(&self.field, &self.schedule, z, step_noise, negate, variance, false)?.output().to_vec()
            }
        };
        Ok(out)
    }

    /// Full trajectory with recorded predictions; same conventions as
    /// [`Model::sample`].
    pub fn trajectory(&self, z: &[f64], step_noise: RngStream, negate: bool) -> Result<Trajectory, LabError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let traj = match self.sampler {
            SamplerSpec::Ddim => {
                let sign = if negate { -1.0 } else { 1.0 };
                let z: Vec<f64> = z.iter().map(|v| sign * v).collect();
                ddim_sample(&self.field, &self.schedule, &z, true)?
            }
            SamplerSpec::Ddpm { variance } => ddpm_sample(&self.field, &self.schedule, z, step_noise, negate, variance, true)?,
        };
        Ok(traj)
    }

    pub fn image(&self, raw: &[f64]) -> Result<ImageTensor, LabError> {
        let s = self.shape;
        Ok(ImageTensor::from_model_output(s.channels, s.height, s.width, raw, self.clamp)?)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset_calls(&self) -> usize {
        self.calls.swap(0, Ordering::Relaxed)
    }

    pub fn check_statistics(&self, stats: &[Statistic], field: &str) -> Result<(), LabError> {
        if stats.is_empty() {
            return Err(LabError::config(field, "at least one statistic is required"));
        }
        for (i, s) in stats.iter().enumerate() {
            if *s == Statistic::Brightness && self.shape.channels != 3 {
                return Err(LabError::config(format!("{field}[{i}]"), "brightness needs a 3-channel image"));
            }
            if *s == Statistic::Contrast && self.shape.height < 2 {
                return Err(LabError::config(format!("{field}[{i}]"), "contrast needs at least two rows"));
            }
        }
        Ok(())
    }
}

pub fn statistic(stat: Statistic, img: &ImageTensor) -> Result<f64, LabError> {
    Ok(match stat {
        Statistic::MeanPixel => mean_pixel(img),
        Statistic::Brightness => brightness(img)?,
        Statistic::Contrast => contrast(img)?,
        Statistic::CentroidRow => centroid_row(img)?,
    })
}

pub fn statistics(stats: &[Statistic], img: &ImageTensor) -> Result<Vec<f64>, LabError> {
    stats.iter().map(|s| statistic(*s, img)).collect()
}
