//! Spectral and information-theoretic checks of the forward (OU) noising
//! process: Hermite eigenfunctions, density-ratio decay, relative Fisher
//! information decay and preservation of orthogonal symmetries.
//!
//! Continuous time `t` relates to a discrete schedule by
//! `alpha_bar = e^{-2t}`.

mod expansion;
mod fisher;
mod hermite;
mod preservation;

pub use expansion::{
    project_density_ratio, project_function, project_mixture, semigroup_by_quadrature, HermiteExpansion, MultiIndex,
    MAX_SPECTRAL_DIM,
};
pub use fisher::{
    decay_curve, integrate, mixture_fisher_information, one_step_correlation_bound, relative_fisher_information,
    relative_fisher_information_2d, write_decay_csv, DecayRow, OneStepBound, DOMAIN,
};
pub use hermite::{gauss_hermite_inner, hermite_all, hermite_eval, GaussHermite};
pub use preservation::{
    is_symmetric, symmetry_preservation_check, symmetry_residuals, Orthogonal, PreservationReport, PreservationRow,
};
