use std::path::Path;

use antithetic_core::fkg::{
    antithetic_corr, build_random_chain, ddim_chain_monotonicity, ddim_monotonicity_check, partial_monotone_corr,
    partial_monotone_corr_normalized, random_additive_map, step_count_sweep, MIN_CORR_SAMPLES,
};
use antithetic_core::RngStream;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::require;
use crate::config::{ExperimentConfig, FkgSpec};
use crate::output::RunDir;
use crate::{streams, LabError, Manifest};

#[derive(Serialize)]
struct ChainRow {
    index: usize,
    depth: usize,
    direction: f64,
    rho: f64,
    se: f64,
    within_bound: bool,
}

#[derive(Serialize)]
struct AdditiveRow {
    index: usize,
    rho: f64,
    se: f64,
    rho_normalized: f64,
    within_bound: bool,
}

pub(super) fn run(config: &ExperimentConfig, spec: &FkgSpec, out: &Path) -> Result<Manifest, LabError> {
    let c = spec.chains;
    require(c.count >= 1, "experiment.chains.count", "need at least one chain")?;
    require(c.max_depth >= 1, "experiment.chains.max_depth", "depth must be at least 1")?;
    require(c.weight_scale > 0.0, "experiment.chains.weight_scale", "weight scale must be positive")?;
    require(c.samples >= MIN_CORR_SAMPLES, "experiment.chains.samples", "need at least 1000 samples")?;
    let seed = config.seed;
    let mut dir = RunDir::create(out)?;
    let chain_stream = RngStream::new(seed, dir.stream("chains", streams::CHAINS));
    let sample_stream = RngStream::new(seed, dir.stream("chain_samples", streams::CHAIN_SAMPLES));

    let chains = (0..c.count)
        .into_par_iter()
        .map(|k| {
            let depth = 1 + k % c.max_depth;
            let chain = build_random_chain(chain_stream.child(k as u64), depth, c.weight_scale)?;
            let (rho, se) = antithetic_corr(|z| chain.eval(z), c.samples, sample_stream.child(k as u64))?;
            Ok(ChainRow { index: k, depth, direction: chain.direction(), rho, se, within_bound: rho <= 3.0 * se })
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    let violations = chains.iter().filter(|r| !r.within_bound).count();
    dir.table("chains", &chains)?;
    let mut summary = json!({ "chain_violations": violations, "chains": chains.len() });
    let mut report = serde_json::Map::new();
    report.insert("chain_violations".into(), json!(violations));

    if let Some(a) = spec.additive {
        require(a.count >= 1 && a.dim >= 1 && a.outputs >= 1, "experiment.additive", "count, dim and outputs must be positive")?;
        require(a.samples >= MIN_CORR_SAMPLES, "experiment.additive.samples", "need at least 1000 samples")?;
        let map_stream = RngStream::new(seed, dir.stream("additive", streams::ADDITIVE));
        let draw_stream = RngStream::new(seed, dir.stream("additive_samples", streams::ADDITIVE_SAMPLES));
        let weights = vec![1.0 / a.outputs as f64; a.outputs];
        let rows = (0..a.count)
            .into_par_iter()
            .map(|k| {
                let map = random_additive_map(map_stream.child(k as u64), a.dim, a.outputs)?;
                let (rho, se) = partial_monotone_corr(&map, &weights, a.samples, draw_stream.child(k as u64))?;
                let (rho_normalized, _) = partial_monotone_corr_normalized(&map, &weights, a.samples, draw_stream.child(k as u64))?;
                Ok(AdditiveRow { index: k, rho, se, rho_normalized, within_bound: rho <= 3.0 * se })
            })
            .collect::<Result<Vec<_>, LabError>>()?;
        let max_gap = rows.iter().map(|r| (r.rho - r.rho_normalized).abs()).fold(0.0, f64::max);
        summary["additive_violations"] = json!(rows.iter().filter(|r| !r.within_bound).count());
        summary["sign_normalization_gap"] = json!(max_gap);
        dir.table("additive", &rows)?;
    }

    if let Some(m) = &spec.monotonicity {
        let mixture = m.mixture.build("experiment.monotonicity.mixture")?;
        let schedule = m.schedule.build("experiment.monotonicity.schedule")?;
        require(m.probes >= 1, "experiment.monotonicity.probes", "need at least one probe")?;
        let stream = RngStream::new(seed, dir.stream("monotonicity", streams::MONOTONICITY));
        let steps = (1..=schedule.steps())
            .into_par_iter()
            .map(|t| Ok(ddim_monotonicity_check(&mixture, &schedule, t, m.probes, stream.child(t as u64))?))
            .collect::<Result<Vec<_>, LabError>>()?;
        summary["condition_holds_everywhere"] = json!(steps.iter().all(|r| r.condition_holds));
        summary["min_step_jacobian"] = json!(steps.iter().map(|r| r.min_jacobian).fold(f64::INFINITY, f64::min));
        dir.table("monotonicity", &steps)?;
        report.insert("steps".into(), serde_json::to_value(&steps).map_err(antithetic_core::Error::from)?);
        if m.chain_probes > 0 {
            let chain = ddim_chain_monotonicity(&mixture, &schedule, m.chain_probes, stream.child(1 << 32))?;
            summary["min_chain_jacobian"] = json!(chain.min_chain_jacobian);
            report.insert("min_chain_jacobian".into(), json!(chain.min_chain_jacobian));
        }
        if !m.sweep.is_empty() {
            let base = m.schedule.base("experiment.monotonicity.schedule")?;
            for (i, n) in m.sweep.iter().enumerate() {
                require(*n >= 1 && *n <= base.steps(), &format!("experiment.monotonicity.sweep[{i}]"), "step count outside [1, train_steps]")?;
            }
            let sweep = step_count_sweep(&mixture, &base, &m.sweep, m.probes, stream.child((1 << 32) + 1))?;
            summary["sweep_threshold"] = json!(sweep.threshold);
            dir.table("sweep", &sweep.rows)?;
            report.insert("sweep".into(), serde_json::to_value(&sweep).map_err(antithetic_core::Error::from)?);
        }
    }
    dir.report("fkg", &report)?;
    dir.finish(config, summary)
}
