use std::path::Path;

use antithetic_core::estimators::rqmc_estimate;
use antithetic_core::qmc::MAX_DIM;
use antithetic_core::RngStream;
use serde::Serialize;
use serde_json::json;

use super::require;
use super::uq::rqmc_means;
use crate::config::{ExperimentConfig, QmcTradeoffSpec, Split};
use crate::model::Model;
use crate::output::RunDir;
use crate::{streams, LabError, Manifest};

#[derive(Serialize)]
struct SplitRow {
    split: String,
    replicates: usize,
    points: usize,
    statistic: &'static str,
    estimate: f64,
    ci_lo: f64,
    ci_hi: f64,
    width: f64,
}

/// Each split needs `R >= 2`, a power-of-two `n` and `R n = budget`.
pub fn validate_splits(budget: usize, splits: &[Split]) -> Result<(), LabError> {
    require(!splits.is_empty(), "experiment.splits", "at least one split is required")?;
    for (i, s) in splits.iter().enumerate() {
        let field = format!("experiment.splits[{i}]");
        require(s.replicates >= 2, &format!("{field}.replicates"), "need at least two replicates for a variance estimate")?;
        require(s.points.is_power_of_two(), &format!("{field}.points"), "points per replicate must be a power of two")?;
        require(s.replicates * s.points == budget, &field, "replicates x points must equal the budget")?;
    }
    Ok(())
}

pub(super) fn run(config: &ExperimentConfig, spec: &QmcTradeoffSpec, out: &Path) -> Result<Manifest, LabError> {
    let model = Model::build(&spec.model, "experiment.model")?;
    model.check_statistics(&spec.statistics, "experiment.statistics")?;
    validate_splits(spec.budget, &spec.splits)?;
    require(spec.alpha > 0.0 && spec.alpha < 1.0, "experiment.alpha", "alpha must lie in (0, 1)")?;
    require(model.dim() <= MAX_DIM, "experiment.model.image", "image too large for the bundled Sobol' table")?;
    let mut dir = RunDir::create(out)?;
    let root = RngStream::new(config.seed, dir.stream("rqmc", streams::RQMC));
    let mut rows = Vec::new();
    for (i, split) in spec.splits.iter().enumerate() {
        let label = format!("{}x{}", split.replicates, split.points);
        let means = rqmc_means(&model, root.child(i as u64), split.replicates, split.points, spec.owen, &spec.statistics)?;
        dir.sampler_calls.insert(label.clone(), model.reset_calls());
        for (s, stat) in spec.statistics.iter().enumerate() {
            let col: Vec<f64> = means.iter().map(|m| m[s]).collect();
            let r = rqmc_estimate(&col, split.points, spec.alpha)?;
            rows.push(SplitRow {
                split: label.clone(),
                replicates: split.replicates,
                points: split.points,
                statistic: stat.label(),
                estimate: r.estimate,
                ci_lo: r.ci_lo,
                ci_hi: r.ci_hi,
                width: r.width(),
            });
        }
    }
    let all_finite = rows.iter().all(|r| r.width.is_finite());
    dir.table("qmc_tradeoff", &rows)?;
    dir.finish(config, json!({ "all_widths_finite": all_finite, "splits": spec.splits.len() }))
}
