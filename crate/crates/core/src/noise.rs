//! Correlation-inducing Gaussian noise designs.
//!
//! Every design keeps each row marginally standard normal; the designs differ
//! only in how rows are coupled:
//!
//! * [`NoiseDesign::Iid`]: independent rows.
//! * [`NoiseDesign::AntitheticPair`]: row `2i + 1` is the exact negation of row `2i`.
//! * [`NoiseDesign::KAntithetic`]: blocks of `K` rows, pairwise correlation
//!   `-1/(K-1)` in every coordinate, each block summing to zero.
//! * [`NoiseDesign::Masked`]: pairs where only masked coordinates are negated.
//! * [`NoiseDesign::Rqmc`]: rows obtained from a randomized Sobol' set.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseDesign {
    Iid,
    AntitheticPair,
    KAntithetic { k: usize },
    Masked { mask: Vec<bool> },
    Rqmc { randomization: String, seed: u64 },
}

/// An `n x d` row-major matrix of noise rows together with its design tag.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBatch {
    rows: Vec<f64>,
    n: usize,
    d: usize,
    design: NoiseDesign,
    source: Option<RngStream>,
}

/// JSON sidecar written next to the raw payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSidecar {
    pub n: usize,
    pub d: usize,
    pub design: NoiseDesign,
    pub seed: Option<u64>,
    pub stream_id: Option<u64>,
}

impl NoiseBatch {
    pub fn from_rows(rows: Vec<f64>, n: usize, d: usize, design: NoiseDesign) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(invalid("noise batch needs n >= 1 and d >= 1"));
        }
        if rows.len() != n * d {
            return Err(Error::DimensionMismatch { expected: n * d, got: rows.len() });
        }
        Ok(Self { rows, n, d, design, source: None })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn design(&self) -> &NoiseDesign {
        &self.design
    }

    pub fn source(&self) -> Option<RngStream> {
        self.source
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rows
    }

    /// Values of coordinate `l` across all rows.
    pub fn column(&self, l: usize) -> Vec<f64> {
        self.rows().map(|r| r[l]).collect()
    }

    pub fn sidecar(&self) -> NoiseSidecar {
        NoiseSidecar {
            n: self.n,
            d: self.d,
            design: self.design.clone(),
            seed: self.source.map(|s| s.seed),
            stream_id: self.source.map(|s| s.stream_id),
        }
    }

    /// Writes `stem.bin` (little-endian f64, row-major) and `stem.json`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        io::write_matrix(stem, &self.rows, &self.sidecar())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let (rows, meta): (Vec<f64>, NoiseSidecar) = io::read_matrix(stem)?;
        let mut batch = Self::from_rows(rows, meta.n, meta.d, meta.design)?;
        if let (Some(seed), Some(stream_id)) = (meta.seed, meta.stream_id) {
            batch.source = Some(RngStream::new(seed, stream_id));
        }
        Ok(batch)
    }

    pub(crate) fn with_source(mut self, source: RngStream) -> Self {
        self.source = Some(source);
        self
    }
}

/// `n` independent standard-normal rows of dimension `d`.
pub fn gaussian_batch(stream: RngStream, n: usize, d: usize) -> Result<NoiseBatch> {
    if n == 0 || d == 0 {
        return Err(invalid("gaussian_batch needs n >= 1 and d >= 1"));
    }
    let mut rows = vec![0.0; n * d];
    stream.generator().fill_normal(&mut rows);
    Ok(NoiseBatch::from_rows(rows, n, d, NoiseDesign::Iid)?.with_source(stream))
}

/// Interleaves every row with its negation: `[z_0, -z_0, z_1, -z_1, ...]`.
pub fn antithetic_expand(batch: &NoiseBatch) -> Result<NoiseBatch> {
    if batch.design != NoiseDesign::Iid {
        return Err(invalid(format!("antithetic_expand requires an IID batch, got {:?}", batch.design)));
    }
    let mut rows = Vec::with_capacity(2 * batch.rows.len());
    for r in batch.rows() {
        rows.extend_from_slice(r);
        rows.extend(r.iter().map(|v| -v));
    }
    let mut out = NoiseBatch::from_rows(rows, 2 * batch.n, batch.d, NoiseDesign::AntitheticPair)?;
    out.source = batch.source;
    Ok(out)
}

/// `blocks` groups of `k` rows built as `sqrt(k/(k-1)) * (w_i - mean(w))`.
///
/// After scaling, the residual block mean is subtracted once more so each
/// block sums to zero up to a single rounding.
pub fn k_antithetic_batch(stream: RngStream, k: usize, d: usize, blocks: usize) -> Result<NoiseBatch> {
    if k < 2 {
        return Err(invalid(format!("K-antithetic design needs K >= 2, got {k}")));
    }
    if d == 0 || blocks == 0 {
        return Err(invalid("k_antithetic_batch needs d >= 1 and blocks >= 1"));
    }
    let scale = (k as f64 / (k as f64 - 1.0)).sqrt();
    let mut gen = stream.generator();
    let mut rows = vec![0.0; k * d * blocks];
    let mut w = vec![0.0; k * d];
    for block in rows.chunks_exact_mut(k * d) {
        gen.fill_normal(&mut w);
        for l in 0..d {
            let wbar = (0..k).map(|i| w[i * d + l]).sum::<f64>() / k as f64;
            for i in 0..k {
                block[i * d + l] = scale * (w[i * d + l] - wbar);
            }
            let residual = (0..k).map(|i| block[i * d + l]).sum::<f64>() / k as f64;
            for i in 0..k {
                block[i * d + l] -= residual;
            }
        }
    }
    Ok(NoiseBatch::from_rows(rows, k * blocks, d, NoiseDesign::KAntithetic { k })?.with_source(stream))
}

/// Negates the coordinates of `z` where `mask` is set.
pub fn partial_negate(z: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if z.len() != mask.len() {
        return Err(Error::DimensionMismatch { expected: z.len(), got: mask.len() });
    }
    Ok(z.iter().zip(mask).map(|(&v, &m)| if m { -v } else { v }).collect())
}

/// Pairs each IID row with its partially negated copy.
pub fn masked_expand(batch: &NoiseBatch, mask: &[bool]) -> Result<NoiseBatch> {
    if batch.design != NoiseDesign::Iid {
        return Err(invalid("masked_expand requires an IID batch"));
    }
    let mut rows = Vec::with_capacity(2 * batch.rows.len());
    for r in batch.rows() {
        rows.extend_from_slice(r);
        rows.extend(partial_negate(r, mask)?);
    }
    let mut out = NoiseBatch::from_rows(
        rows,
        2 * batch.n,
        batch.d,
        NoiseDesign::Masked { mask: mask.to_vec() },
    )?;
    out.source = batch.source;
    Ok(out)
}

/// Mask selecting the upper half of the coordinates (rows `0..H/2` of every
/// channel) of a `C x H x W` tensor.
pub fn upper_half_mask(channels: usize, height: usize, width: usize) -> Vec<bool> {
    let mut mask = vec![false; channels * height * width];
    for c in 0..channels {
        for i in 0..height / 2 {
            for j in 0..width {
                mask[(c * height + i) * width + j] = true;
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_p_value, ks_statistic_normal, ks_two_sample, mean, pearson, sample_variance};
    use crate::special::kolmogorov_quantile;

    #[test]
    fn gaussian_moments_at_seed_7() {
        let b = gaussian_batch(RngStream::new(7, 0), 100_000, 1).unwrap();
        let col = b.column(0);
        // 4 sigma bounds: |mean| < 4/sqrt(n) ~ 0.0126, var within 4*sqrt(2/n) ~ 0.018
        assert!(mean(&col).abs() < 0.013);
        let v = sample_variance(&col);
        assert!((0.98..=1.02).contains(&v), "{v}");
    }

    #[test]
    fn gaussian_is_deterministic() {
        let s = RngStream::new(3, 17);
        assert_eq!(gaussian_batch(s, 50, 4).unwrap(), gaussian_batch(s, 50, 4).unwrap());
    }

    #[test]
    fn gaussian_shape() {
        let b = gaussian_batch(RngStream::new(1, 1), 1, 3).unwrap();
        assert_eq!((b.n(), b.dim()), (1, 3));
        assert!(gaussian_batch(RngStream::new(1, 1), 0, 3).is_err());
    }

    #[test]
    fn antithetic_negates_rows() {
        let b = NoiseBatch::from_rows(vec![1.5, -0.2], 1, 2, NoiseDesign::Iid).unwrap();
        let a = antithetic_expand(&b).unwrap();
        assert_eq!(a.row(0), &[1.5, -0.2]);
        assert_eq!(a.row(1), &[-1.5, 0.2]);
        assert!(antithetic_expand(&a).is_err());
    }

    #[test]
    fn antithetic_correlation_and_mean() {
        let b = antithetic_expand(&gaussian_batch(RngStream::new(2, 0), 500, 3).unwrap()).unwrap();
        for l in 0..3 {
            let even: Vec<f64> = (0..500).map(|i| b.row(2 * i)[l]).collect();
            let odd: Vec<f64> = (0..500).map(|i| b.row(2 * i + 1)[l]).collect();
            assert_eq!(pearson(&even, &odd).unwrap(), -1.0);
            assert_eq!(b.column(l).iter().sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn k_equals_two_is_antithetic() {
        let b = k_antithetic_batch(RngStream::new(4, 0), 2, 5, 100).unwrap();
        for blk in 0..100 {
            for (x, y) in b.row(2 * blk).iter().zip(b.row(2 * blk + 1)) {
                assert!((x + y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn k_antithetic_blocks_sum_to_zero() {
        for k in [3, 4, 8] {
            let b = k_antithetic_batch(RngStream::new(5, k as u64), k, 6, 200).unwrap();
            for blk in 0..200 {
                for l in 0..6 {
                    let s: f64 = (0..k).map(|i| b.row(blk * k + i)[l]).sum();
                    assert!(s.abs() < 1e-12);
                }
            }
        }
        assert!(k_antithetic_batch(RngStream::new(5, 0), 1, 6, 2).is_err());
    }

    #[test]
    fn k4_pairwise_correlation() {
        let k = 4;
        let b = k_antithetic_batch(RngStream::new(6, 0), k, 1, 25_000).unwrap();
        let x: Vec<f64> = (0..25_000).map(|j| b.row(j * k)[0]).collect();
        let y: Vec<f64> = (0..25_000).map(|j| b.row(j * k + 2)[0]).collect();
        let r = pearson(&x, &y).unwrap();
        assert!((r + 1.0 / 3.0).abs() < 0.02, "{r}");
    }

    #[test]
    fn k_antithetic_exchangeable_under_block_permutation() {
        let k = 4;
        let b = k_antithetic_batch(RngStream::new(8, 0), k, 2, 5000).unwrap();
        // Block statistics that are symmetric in the rows must not change when
        // rows are permuted within each block.
        let stat = |perm: &[usize]| -> (f64, f64) {
            let mut s2 = 0.0;
            let mut s4 = 0.0;
            for blk in 0..5000 {
                for &src in perm {
                    let v = b.row(blk * k + src)[0];
                    s2 += v * v;
                    s4 += v.powi(4);
                }
            }
            (s2, s4)
        };
        let (a2, a4) = stat(&[0, 1, 2, 3]);
        let (b2, b4) = stat(&[2, 0, 3, 1]);
        assert!((a2 - b2).abs() < 1e-9 * a2 && (a4 - b4).abs() < 1e-9 * a4);
        // Marginals of each row position agree.
        let col = |pos: usize| -> Vec<f64> { (0..5000).map(|j| b.row(j * k + pos)[1]).collect() };
        let (_, p) = ks_two_sample(&col(0), &col(3));
        assert!(p > 0.001);
    }

    #[test]
    fn marginal_normality_every_design() {
        let crit = kolmogorov_quantile(0.999) / (100_000f64).sqrt();
        let iid = gaussian_batch(RngStream::new(9, 0), 100_000, 1).unwrap();
        let anti = antithetic_expand(&gaussian_batch(RngStream::new(9, 1), 50_000, 1).unwrap()).unwrap();
        let kant = k_antithetic_batch(RngStream::new(9, 2), 8, 1, 12_500).unwrap();
        for b in [&iid, &anti, &kant] {
            let d = ks_statistic_normal(&b.column(0));
            assert!(d < crit, "{:?}: D={d} crit={crit} p={}", b.design(), ks_p_value(d, 100_000));
        }
    }

    #[test]
    fn antithetic_rows_share_rowwise_statistics() {
        let b = antithetic_expand(&gaussian_batch(RngStream::new(10, 0), 10_000, 4).unwrap()).unwrap();
        let stat = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>() + r[0];
        let even: Vec<f64> = (0..10_000).map(|i| stat(b.row(2 * i))).collect();
        let odd: Vec<f64> = (0..10_000).map(|i| stat(b.row(2 * i + 1))).collect();
        assert!(ks_two_sample(&even, &odd).1 > 0.01);
    }

    #[test]
    fn partial_negation() {
        assert_eq!(partial_negate(&[1.0, 2.0], &[true, false]).unwrap(), vec![-1.0, 2.0]);
        assert_eq!(partial_negate(&[1.0, 2.0], &[true, true]).unwrap(), vec![-1.0, -2.0]);
        assert_eq!(partial_negate(&[1.0, 2.0], &[false, false]).unwrap(), vec![1.0, 2.0]);
        assert!(partial_negate(&[1.0, 2.0], &[true]).is_err());
    }

    #[test]
    fn upper_half_mask_layout() {
        let m = upper_half_mask(1, 2, 2);
        assert_eq!(m, vec![true, true, false, false]);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("noise");
        let b = antithetic_expand(&gaussian_batch(RngStream::new(12, 3), 4, 3).unwrap()).unwrap();
        b.save(&stem).unwrap();
        let bytes = std::fs::read(stem.with_extension("bin")).unwrap();
        assert_eq!(bytes.len(), 8 * 3 * 8);
        assert_eq!(&bytes[..8], &b.row(0)[0].to_le_bytes());
        let json: serde_json::Value =
            serde_json::from_slice(&std::fs::read(stem.with_extension("json")).unwrap()).unwrap();
        assert_eq!(json["n"], 8);
        assert_eq!(json["seed"], 12);
        assert_eq!(json["stream_id"], 3);
        assert_eq!(NoiseBatch::load(&stem).unwrap(), b);
    }
}
