use std::path::Path;

use antithetic_core::fkg::jackknife_corr;
use antithetic_core::image_stats::{pearson_centralized, pearson_standard, ImageTensor};
use antithetic_core::noise::gaussian_batch;
use antithetic_core::RngStream;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{histogram, require, summarize};
use crate::config::{CorrelationSpec, ExperimentConfig, Statistic};
use crate::model::{statistic, Model};
use crate::output::RunDir;
use crate::{streams, LabError, Manifest};

#[derive(Serialize)]
struct CorrRow {
    design: &'static str,
    correlation: &'static str,
    mean: f64,
    sd: f64,
    se: f64,
    pairs: usize,
}

#[derive(Serialize)]
struct HistRow {
    design: &'static str,
    correlation: &'static str,
    bin_lo: f64,
    bin_hi: f64,
    count: usize,
}

#[derive(Serialize)]
struct PairRow {
    pair: usize,
    design: &'static str,
    standard: f64,
    centralized: f64,
}

#[derive(Serialize)]
struct StatCorrRow {
    design: &'static str,
    statistic: &'static str,
    rho: Option<f64>,
    se: Option<f64>,
}

type Images = Vec<(ImageTensor, ImageTensor)>;

fn generate(model: &Model, za: &[f64], zb: Option<&[f64]>, steps_a: RngStream, steps_b: RngStream, n: usize) -> Result<Images, LabError> {
    let d = model.dim();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let a = model.sample(&za[i * d..(i + 1) * d], steps_a.child(i as u64), false)?;
            let b = match zb {
                Some(zb) => model.sample(&zb[i * d..(i + 1) * d], steps_b.child(i as u64), false)?,
                None => model.sample(&za[i * d..(i + 1) * d], steps_a.child(i as u64), true)?,
            };
            Ok((model.image(&a)?, model.image(&b)?))
        })
        .collect()
}

pub(super) fn run(config: &ExperimentConfig, spec: &CorrelationSpec, out: &Path) -> Result<Manifest, LabError> {
    let model = Model::build(&spec.model, "experiment.model")?;
    require(spec.pairs >= 2, "experiment.pairs", "need at least two pairs")?;
    require(spec.histogram_bins >= 1, "experiment.histogram_bins", "need at least one bin")?;
    require(model.dim() >= 2, "experiment.model.image", "per-pair correlations need at least two pixels")?;
    let (n, d, seed) = (spec.pairs, model.dim(), config.seed);
    let mut dir = RunDir::create(out)?;

    let pn_noise = gaussian_batch(RngStream::new(seed, dir.stream("pn_noise", streams::PN_NOISE)), n, d)?;
    let rr_a = gaussian_batch(RngStream::new(seed, dir.stream("rr_noise_a", streams::RR_NOISE_A)), n, d)?;
    let rr_b = gaussian_batch(RngStream::new(seed, dir.stream("rr_noise_b", streams::RR_NOISE_B)), n, d)?;
    let steps = RngStream::new(seed, dir.stream("step_noise", streams::STEP_NOISE));

    let pn = generate(&model, pn_noise.as_slice(), None, steps, steps, n)?;
    dir.sampler_calls.insert("PN".into(), model.reset_calls());
    let rr = generate(&model, rr_a.as_slice(), Some(rr_b.as_slice()), steps.child(1 << 32), steps.child((1 << 32) + 1), n)?;
    dir.sampler_calls.insert("RR".into(), model.reset_calls());

    let mut table = Vec::new();
    let mut hist = Vec::new();
    let mut per_pair = Vec::new();
    let mut stat_rows = Vec::new();
    let mut summary = serde_json::Map::new();
    for (design, images) in [("PN", &pn), ("RR", &rr)] {
        let refs: Vec<(&[f64], &[f64])> = images.iter().map(|(a, b)| (a.values(), b.values())).collect();
        let standard = refs.iter().map(|(a, b)| pearson_standard(a, b)).collect::<Result<Vec<_>, _>>()?;
        let centralized = pearson_centralized(&refs)?;
        for (i, (s, c)) in standard.iter().zip(&centralized).enumerate() {
            per_pair.push(PairRow { pair: i, design, standard: *s, centralized: *c });
        }
        for (kind, values) in [("standard", &standard), ("centralized", &centralized)] {
            let (mean, sd, se) = summarize(values);
            table.push(CorrRow { design, correlation: kind, mean, sd, se, pairs: n });
            summary.insert(format!("{}_{kind}_mean", design.to_lowercase()), json!(mean));
            summary.insert(format!("{}_{kind}_se", design.to_lowercase()), json!(se));
            for (bin_lo, bin_hi, count) in histogram(values, -1.0, 1.0, spec.histogram_bins) {
                hist.push(HistRow { design, correlation: kind, bin_lo, bin_hi, count });
            }
        }
        for stat in [Statistic::MeanPixel, Statistic::Brightness, Statistic::Contrast, Statistic::CentroidRow] {
            if model.check_statistics(&[stat], "").is_err() {
                continue;
            }
            let mut plus = Vec::with_capacity(n);
            let mut minus = Vec::with_capacity(n);
            for (a, b) in images {
                plus.push(statistic(stat, a)?);
                minus.push(statistic(stat, b)?);
            }
            let (rho, se) = match jackknife_corr(&plus, &minus) {
                Ok((r, s)) => (Some(r), Some(s)),
                Err(_) => (None, None),
            };
            stat_rows.push(StatCorrRow { design, statistic: stat.label(), rho, se });
        }
    }
    dir.table("correlation", &table)?;
    dir.table("statistic_correlation", &stat_rows)?;
    dir.plotdata("histogram", &hist)?;
    dir.plotdata("pair_correlations", &per_pair)?;
    dir.finish(config, serde_json::Value::Object(summary))
}
