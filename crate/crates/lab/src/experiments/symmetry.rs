use std::path::Path;

use antithetic_core::diffusion::ImpliedScore;
use antithetic_core::noise::gaussian_batch;
use antithetic_core::symmetry::{antisymmetry_score, slice_curve, symmetry_center, temporal_correlation};
use antithetic_core::RngStream;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::require;
use crate::config::{ExperimentConfig, SymmetrySpec};
use crate::model::Model;
use crate::output::RunDir;
use crate::{streams, LabError, Manifest};

#[derive(Serialize)]
struct AsRow {
    step: usize,
    anchor: usize,
    coord: usize,
    antisymmetry: Option<f64>,
}

#[derive(Serialize)]
struct SliceRow {
    step: usize,
    c: f64,
    value: f64,
}

#[derive(Serialize)]
struct CenterRow {
    step: usize,
    coord: usize,
    center_eps: f64,
    center_score: f64,
}

pub(super) fn run(config: &ExperimentConfig, spec: &SymmetrySpec, out: &Path) -> Result<Manifest, LabError> {
    let model = Model::build(&spec.model, "experiment.model")?;
    let (d, total) = (model.dim(), model.schedule.steps());
    let steps: Vec<usize> = spec.steps.clone().unwrap_or_else(|| (1..=total).rev().collect());
    require(!steps.is_empty() && steps.iter().all(|t| (1..=total).contains(t)), "experiment.steps", "steps must lie in [1, T]")?;
    require(spec.anchors >= 1, "experiment.anchors", "need at least one anchor")?;
    require(!spec.coords.is_empty() && spec.coords.iter().all(|c| *c < d), "experiment.coords", "coordinates must index the image")?;
    require(spec.grid_size >= 3 && spec.grid_size % 2 == 1, "experiment.grid_size", "grid size must be odd and at least 3")?;
    require(spec.pairs >= 2, "experiment.pairs", "need at least two trajectory pairs")?;
    require(spec.center_probes >= 1, "experiment.center_probes", "need at least one probe")?;
    let seed = config.seed;
    let mut dir = RunDir::create(out)?;

    let anchor_stream = RngStream::new(seed, dir.stream("anchors", streams::ANCHORS));
    let anchors = gaussian_batch(anchor_stream, spec.anchors, d)?;
    let items: Vec<(usize, usize, usize)> = steps
        .iter()
        .flat_map(|&t| (0..spec.anchors).flat_map(move |a| spec.coords.iter().map(move |&c| (t, a, c))))
        .collect();
    let as_rows = items
        .par_iter()
        .map(|&(step, anchor, coord)| {
            let curve = slice_curve(&model.field, step, anchors.row(anchor), coord, spec.grid_size)?;
            Ok(AsRow { step, anchor, coord, antisymmetry: antisymmetry_score(&curve).ok() })
        })
        .collect::<Result<Vec<_>, LabError>>()?;

    let mut slices = Vec::new();
    for &step in &steps {
        let curve = slice_curve(&model.field, step, anchors.row(0), spec.coords[0], spec.grid_size)?;
        slices.extend(curve.grid.iter().zip(&curve.values).map(|(&c, &value)| SliceRow { step, c, value }));
    }

    let pair_noise = gaussian_batch(RngStream::new(seed, dir.stream("pn_noise", streams::PN_NOISE)), spec.pairs, d)?;
    let step_noise = RngStream::new(seed, dir.stream("step_noise", streams::STEP_NOISE));
    let pairs = (0..spec.pairs)
        .into_par_iter()
        .map(|i| {
            let z = pair_noise.row(i);
            Ok((model.trajectory(z, step_noise.child(i as u64), false)?, model.trajectory(z, step_noise.child(i as u64), true)?))
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    dir.sampler_calls.insert("PN".into(), model.reset_calls());
    let mut temporal_summary = serde_json::Map::new();
    for centralized in [false, true] {
        let tc = temporal_correlation(&pairs, centralized)?;
        let name = if centralized { "temporal_centralized.csv" } else { "temporal_standard.csv" };
        let mut buf = Vec::new();
        tc.write_csv(&mut buf)?;
        dir.raw("tables", name, &buf)?;
        if let Some(eps) = &tc.eps_mean {
            temporal_summary.insert(format!("first_step_eps_{}", if centralized { "centralized" } else { "standard" }), json!(eps[0]));
        }
    }

    let center_stream = RngStream::new(seed, dir.stream("centers", streams::CENTERS));
    let implied = ImpliedScore::new(&model.field, &model.schedule);
    let centers = steps
        .iter()
        .flat_map(|&t| spec.coords.iter().map(move |&c| (t, c)))
        .map(|(step, coord)| {
            let probe = center_stream.child(step as u64);
            Ok(CenterRow {
                step,
                coord,
                center_eps: symmetry_center(&model.field, step, coord, spec.center_probes, probe)?,
                center_score: symmetry_center(&implied, step, coord, spec.center_probes, probe)?,
            })
        })
        .collect::<Result<Vec<_>, LabError>>()?;

    let defined: Vec<f64> = as_rows.iter().filter_map(|r| r.antisymmetry).collect();
    let min_as = defined.iter().copied().fold(f64::INFINITY, f64::min);
    dir.table("antisymmetry", &as_rows)?;
    dir.table("symmetry_center", &centers)?;
    dir.plotdata("slices", &slices)?;
    let mut summary = json!({
        "min_antisymmetry": if min_as.is_finite() { json!(min_as) } else { json!(null) },
        "undefined_slices": as_rows.len() - defined.len(),
    });
    summary.as_object_mut().unwrap().extend(temporal_summary);
    dir.finish(config, summary)
}
