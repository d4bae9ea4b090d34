use std::path::Path;

use antithetic_core::ou::{decay_curve, one_step_correlation_bound, project_mixture, symmetry_residuals, write_decay_csv, MAX_SPECTRAL_DIM};
use antithetic_core::RngStream;
use serde::Serialize;
use serde_json::json;

use super::require;
use crate::config::{ExperimentConfig, OuSpec};
use crate::output::RunDir;
use crate::{streams, LabError, Manifest};

#[derive(Serialize)]
struct CoeffRow {
    index: String,
    degree: u32,
    coeff: f64,
}

#[derive(Serialize)]
struct OneStepRow {
    t: f64,
    a: f64,
    c: f64,
    corr: f64,
    deviation: f64,
    bound: f64,
    holds: bool,
}

pub(super) fn run(config: &ExperimentConfig, spec: &OuSpec, out: &Path) -> Result<Manifest, LabError> {
    let mixture = spec.mixture.build("experiment.mixture")?;
    let d = mixture.dim();
    require(d <= 2, "experiment.mixture", "Fisher-information quadrature supports dimension 1 or 2")?;
    require(!spec.times.is_empty() && spec.times.iter().all(|t| t.is_finite() && *t >= 0.0), "experiment.times", "times must be finite and nonnegative")?;
    let mut dir = RunDir::create(out)?;
    let mut summary = serde_json::Map::new();

    let expansion = match spec.expansion {
        Some(e) => {
            require(d <= MAX_SPECTRAL_DIM, "experiment.expansion", "spectral expansion supports dimension at most 3")?;
            let exp = project_mixture(&mixture, e.max_degree, e.order).map_err(|err| LabError::config("experiment.expansion", err.to_string()))?;
            let rows: Vec<CoeffRow> = exp.coeffs.iter().map(|(alpha, a)| CoeffRow { index: alpha.to_string(), degree: alpha.degree(), coeff: *a }).collect();
            dir.plotdata("hermite_coefficients", &rows)?;
            summary.insert("max_odd_coeff".into(), json!(exp.max_odd_coeff()));
            Some(exp)
        }
        None => None,
    };

    let decay = decay_curve(&mixture, expansion.as_ref(), &spec.times)?;
    let mut buf = Vec::new();
    write_decay_csv(&decay, &mut buf)?;
    dir.raw("tables", "decay.csv", &buf)?;
    let worst = decay.iter().map(|r| if r.fisher_bound > 0.0 { r.fisher / r.fisher_bound } else { 0.0 }).fold(0.0, f64::max);
    summary.insert("max_fisher_over_bound".into(), json!(worst));
    summary.insert("fisher_nonincreasing".into(), json!(decay.windows(2).all(|w| w[1].fisher <= w[0].fisher || w[1].t < w[0].t)));

    if let Some(one) = spec.one_step {
        require(d == 1, "experiment.one_step", "one-step bound is defined for 1-D mixtures")?;
        require(one.dt > 0.0, "experiment.one_step.dt", "dt must be positive")?;
        let rows = spec
            .times
            .iter()
            .filter(|&&t| t >= one.dt && t > 0.0)
            .map(|&t| {
                let b = one_step_correlation_bound(&mixture, t, one.dt)?;
                Ok(OneStepRow { t, a: b.a, c: b.c, corr: b.corr, deviation: b.deviation, bound: b.bound, holds: b.holds(1e-9) })
            })
            .collect::<Result<Vec<_>, LabError>>()?;
        summary.insert("one_step_violations".into(), json!(rows.iter().filter(|r| !r.holds).count()));
        dir.table("one_step", &rows)?;
    }

    if let Some(p) = &spec.preservation {
        require(p.probes >= 1, "experiment.preservation.probes", "need at least one probe")?;
        p.map.validate(d).map_err(|e| LabError::config("experiment.preservation.map", e.to_string()))?;
        require(p.center.len() == d, "experiment.preservation.center", "center must match the mixture dimension")?;
        let stream = RngStream::new(config.seed, dir.stream("probes", streams::PROBES));
        let report = symmetry_residuals(&mixture, &p.map, &p.center, &spec.times, p.probes, stream)?;
        summary.insert("symmetric_input".into(), json!(report.symmetric_input));
        summary.insert("max_density_residual".into(), json!(report.max_density_residual));
        summary.insert("max_score_residual".into(), json!(report.max_score_residual));
        dir.table("preservation", &report.rows)?;
    }
    dir.finish(config, serde_json::Value::Object(summary))
}
