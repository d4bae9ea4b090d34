//! Analytic-score diffusion engine: schedules, exact Gaussian-mixture noise
//! predictions, and DDIM / DDPM samplers.
//!
//! Convention: a field returns the noise prediction `eps`, related to the
//! score of the step-`t` marginal by `eps = -sqrt(1 - alpha_bar_t) * s_t`.

mod mixture;
mod sampler;
mod schedule;
mod score;

pub use mixture::MixtureParams;
pub use sampler::{ddim_output, ddim_sample, ddpm_sample, DdpmVariance, Trajectory, TrajectorySidecar};
pub use schedule::{ddim_coeffs, Schedule};
pub use score::{exact_mixture_eps, FnField, ImpliedScore, MixtureScore, ScoreField};
