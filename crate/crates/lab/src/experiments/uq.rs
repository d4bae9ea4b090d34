use std::path::Path;

use antithetic_core::estimators::{amc_estimate, k_antithetic_estimate, mc_estimate, relative_efficiency, rqmc_estimate, EstimatorReport};
use antithetic_core::noise::{gaussian_batch, k_antithetic_batch};
use antithetic_core::qmc::{replicates, sobol_points, to_gaussian, MAX_DIM};
use antithetic_core::RngStream;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::require;
use crate::config::{ExperimentConfig, MethodSpec, Statistic, UqSpec};
use crate::model::{statistics, Model};
use crate::output::RunDir;
use crate::{streams, LabError, Manifest};

#[derive(Serialize)]
struct UqRow {
    statistic: &'static str,
    method: String,
    estimate: f64,
    ci_lo: f64,
    ci_hi: f64,
    width: f64,
    rho_hat: Option<f64>,
    budget: usize,
    efficiency_vs_mc: Option<f64>,
}

/// Every method must spend exactly `budget` sampler calls.
pub fn validate_budget(budget: usize, methods: &[MethodSpec]) -> Result<(), LabError> {
    require(!methods.is_empty(), "experiment.methods", "at least one method is required")?;
    for (i, m) in methods.iter().enumerate() {
        let field = format!("experiment.methods[{i}]");
        if methods[..i].contains(m) {
            return Err(LabError::config(field, "duplicate method"));
        }
        match *m {
            MethodSpec::Mc => require(budget >= 2, &field, "MC needs a budget of at least 2")?,
            MethodSpec::Amc => require(budget >= 4 && budget.is_multiple_of(2), &field, "AMC needs an even budget of at least 4")?,
            MethodSpec::KAntithetic { k } => {
                require(k >= 2, &format!("{field}.k"), "K must be at least 2")?;
                require(budget.is_multiple_of(k) && budget / k >= 2, &field, "budget must be a multiple of K with at least two blocks")?;
            }
            MethodSpec::Rqmc { replicates } => {
                require(replicates >= 2, &format!("{field}.replicates"), "RQMC needs at least two replicates")?;
                require(budget.is_multiple_of(replicates), &field, "budget must equal replicates x points")?;
                let n = budget / replicates;
                require(n.is_power_of_two(), &field, "points per replicate (budget / replicates) must be a power of two")?;
            }
        }
    }
    Ok(())
}

/// Statistic values (one vector per sample, in `stats` order) for the rows
/// of `noise`, each with its own step-noise child stream.
pub(crate) fn evaluate(model: &Model, noise: &[f64], steps: RngStream, stats: &[Statistic], negate: bool) -> Result<Vec<Vec<f64>>, LabError> {
    let d = model.dim();
    (0..noise.len() / d)
        .into_par_iter()
        .map(|i| {
            let out = model.sample(&noise[i * d..(i + 1) * d], steps.child(i as u64), negate)?;
            statistics(stats, &model.image(&out)?)
        })
        .collect()
}

/// RQMC replicate means of each statistic for an `replicates x points` split.
pub(crate) fn rqmc_means(
    model: &Model,
    stream: RngStream,
    replicates_count: usize,
    points: usize,
    owen: bool,
    stats: &[Statistic],
) -> Result<Vec<Vec<f64>>, LabError> {
    let base = sobol_points(model.dim(), points)?;
    let sets = replicates(&base, owen, stream, replicates_count)?;
    sets.iter()
        .enumerate()
        .map(|(r, set)| {
            let z = to_gaussian(set)?;
            let values = evaluate(model, z.as_slice(), stream.child(1 << 32).child(r as u64), stats, false)?;
            Ok((0..stats.len()).map(|s| values.iter().map(|v| v[s]).sum::<f64>() / points as f64).collect())
        })
        .collect()
}

fn column(rows: &[Vec<f64>], s: usize) -> Vec<f64> {
    rows.iter().map(|r| r[s]).collect()
}

pub(super) fn run(config: &ExperimentConfig, spec: &UqSpec, out: &Path) -> Result<Manifest, LabError> {
    let model = Model::build(&spec.model, "experiment.model")?;
    model.check_statistics(&spec.statistics, "experiment.statistics")?;
    validate_budget(spec.budget, &spec.methods)?;
    require(spec.alpha > 0.0 && spec.alpha < 1.0, "experiment.alpha", "alpha must lie in (0, 1)")?;
    if spec.methods.iter().any(|m| matches!(m, MethodSpec::Rqmc { .. })) {
        require(model.dim() <= MAX_DIM, "experiment.model.image", "image too large for the bundled Sobol' table")?;
    }
    let (n, d, seed, alpha) = (spec.budget, model.dim(), config.seed, spec.alpha);
    let stats = &spec.statistics;
    let mut dir = RunDir::create(out)?;

    let mut reports: Vec<(MethodSpec, Vec<EstimatorReport>)> = Vec::new();
    for method in &spec.methods {
        let per_stat = match *method {
            MethodSpec::Mc => {
                let stream = RngStream::new(seed, dir.stream("mc", streams::MC));
                let v = evaluate(&model, gaussian_batch(stream, n, d)?.as_slice(), stream.child(0), stats, false)?;
                (0..stats.len()).map(|s| mc_estimate(&column(&v, s), alpha)).collect::<Result<Vec<_>, _>>()?
            }
            MethodSpec::Amc => {
                let stream = RngStream::new(seed, dir.stream("amc", streams::AMC));
                let z = gaussian_batch(stream, n / 2, d)?;
                let plus = evaluate(&model, z.as_slice(), stream.child(0), stats, false)?;
                let minus = evaluate(&model, z.as_slice(), stream.child(0), stats, true)?;
                (0..stats.len())
                    .map(|s| amc_estimate(&plus.iter().zip(&minus).map(|(a, b)| (a[s], b[s])).collect::<Vec<_>>(), alpha))
                    .collect::<Result<Vec<_>, _>>()?
            }
            MethodSpec::KAntithetic { k } => {
                let stream = RngStream::new(seed, dir.stream("k_antithetic", streams::K_ANTITHETIC)).child(k as u64);
                let z = k_antithetic_batch(stream, k, d, n / k)?;
                let v = evaluate(&model, z.as_slice(), stream.child(0), stats, false)?;
                (0..stats.len())
                    .map(|s| k_antithetic_estimate(&v.chunks(k).map(|b| column(b, s)).collect::<Vec<_>>(), alpha))
                    .collect::<Result<Vec<_>, _>>()?
            }
            MethodSpec::Rqmc { replicates } => {
                let stream = RngStream::new(seed, dir.stream("rqmc", streams::RQMC)).child(replicates as u64);
                let points = n / replicates;
                let means = rqmc_means(&model, stream, replicates, points, true, stats)?;
                (0..stats.len()).map(|s| rqmc_estimate(&column(&means, s), points, alpha)).collect::<Result<Vec<_>, _>>()?
            }
        };
        dir.sampler_calls.insert(method.label(), model.reset_calls());
        reports.push((*method, per_stat));
    }

    let mc = reports.iter().find(|(m, _)| *m == MethodSpec::Mc).map(|(_, r)| r.clone());
    let mut rows = Vec::new();
    let mut summary = serde_json::Map::new();
    for (method, per_stat) in &reports {
        for (s, r) in per_stat.iter().enumerate() {
            let efficiency = mc.as_ref().map(|mc| relative_efficiency(&mc[s], r)).transpose()?;
            rows.push(UqRow {
                statistic: stats[s].label(),
                method: method.label(),
                estimate: r.estimate,
                ci_lo: r.ci_lo,
                ci_hi: r.ci_hi,
                width: r.width(),
                rho_hat: r.rho_hat,
                budget: r.budget,
                efficiency_vs_mc: efficiency,
            });
            if let Some(e) = efficiency {
                summary.insert(format!("efficiency/{}/{}", stats[s].label(), method.label()), json!(if e.is_finite() { json!(e) } else { json!(e.to_string()) }));
            }
        }
    }
    let calls: Vec<usize> = dir.sampler_calls.values().copied().collect();
    summary.insert("equal_budget".into(), json!(calls.iter().all(|c| *c == n)));
    dir.table("uq", &rows)?;
    dir.report("estimators", &reports.iter().map(|(m, r)| (m.label(), r)).collect::<Vec<_>>())?;
    dir.finish(config, serde_json::Value::Object(summary))
}
