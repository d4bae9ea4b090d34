mod correlation;
mod fkg;
mod ou;
mod qmc_tradeoff;
mod symmetry;
mod uq;

use std::path::Path;

use crate::config::{Experiment, ExperimentConfig};
use crate::{LabError, Manifest};

pub use qmc_tradeoff::validate_splits;
pub use uq::validate_budget;

pub(crate) fn dispatch(config: &ExperimentConfig, out: &Path) -> Result<Manifest, LabError> {
    match &config.experiment {
        Experiment::Correlation(spec) => correlation::run(config, spec, out),
        Experiment::Uq(spec) => uq::run(config, spec, out),
        Experiment::QmcTradeoff(spec) => qmc_tradeoff::run(config, spec, out),
        Experiment::Symmetry(spec) => symmetry::run(config, spec, out),
        Experiment::Ou(spec) => ou::run(config, spec, out),
        Experiment::Fkg(spec) => fkg::run(config, spec, out),
    }
}

/// Mean, sample standard deviation and standard error.
pub(crate) fn summarize(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 { (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (m, sd, sd / n.sqrt())
}

/// Counts of `xs` in `bins` equal-width bins over `[lo, hi]`; the top edge
/// is included in the last bin and out-of-range values are dropped.
pub(crate) fn histogram(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(f64, f64, usize)> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in xs {
        if x >= lo && x <= hi {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
    }
    counts.into_iter().enumerate().map(|(k, c)| (lo + k as f64 * width, lo + (k + 1) as f64 * width, c)).collect()
}

pub(crate) fn require(cond: bool, field: &str, message: &str) -> Result<(), LabError> {
    if cond {
        Ok(())
    } else {
        Err(LabError::config(field, message))
    }
}
