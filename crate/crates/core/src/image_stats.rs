//! Pixel statistics and pairwise similarity measures on `C x H x W` images.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io;
use crate::stats::pearson;

/// Channel-major image: value `(c, i, j)` lives at `c*H*W + i*W + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSidecar {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

/// Rec. 601 luma weights for R, G, B.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

impl ImageTensor {
    /// Wraps values of the given shape. Values must be finite but are not
    /// required to lie in `[0, 1]`; see [`ImageTensor::from_unit`].
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(invalid("image dimensions must be positive"));
        }
        let expected = channels * height * width;
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("image values must be finite"));
        }
        Ok(Self { channels, height, width, values })
    }

    /// Like [`ImageTensor::new`] but also requires every value in `[0, 1]`.
    pub fn from_unit(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("image value {v} outside [0, 1]")));
        }
        Self::new(channels, height, width, values)
    }

    /// Maps a sampler output in model units to image units by `(x + 1) / 2`.
    /// With `clamp` the result is clipped to `[0, 1]`; clipping is nonlinear
    /// and breaks exact antithetic cancellation, so it is off by default in
    /// the harness.
    pub fn from_model_output(channels: usize, height: usize, width: usize, raw: &[f64], clamp: bool) -> Result<Self> {
        let values = raw
            .iter()
            .map(|x| {
                let v = 0.5 * (x + 1.0);
                if clamp {
                    v.clamp(0.0, 1.0)
                } else {
                    v
                }
            })
            .collect();
        Self::new(channels, height, width, values)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.values[(c * self.height + i) * self.width + j]
    }

    fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.values[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }

    /// Per-pixel channel mean `M_{ij}`.
    pub fn grayscale(&self) -> Vec<f64> {
        let n = self.height * self.width;
        let mut g = vec![0.0; n];
        for c in 0..self.channels {
            for (gi, v) in g.iter_mut().zip(self.plane(c)) {
                *gi += v;
            }
        }
        let k = self.channels as f64;
        g.iter_mut().for_each(|v| *v /= k);
        g
    }

    pub fn sidecar(&self) -> ImageSidecar {
        ImageSidecar { channels: self.channels, height: self.height, width: self.width }
    }

    pub fn save(&self, stem: &Path) -> Result<()> {
        io::write_matrix(stem, &self.values, &self.sidecar())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let (values, meta): (Vec<f64>, ImageSidecar) = io::read_matrix(stem)?;
        Self::new(meta.channels, meta.height, meta.width, values)
    }

    /// CSV with header `row,col,c0,...,c{C-1}`, one line per pixel in
    /// row-major order; rows and columns are 0-based.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["row".to_string(), "col".to_string()];
        header.extend((0..self.channels).map(|c| format!("c{c}")));
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.height {
            for j in 0..self.width {
                let mut rec = vec![i.to_string(), j.to_string()];
                rec.extend((0..self.channels).map(|c| format!("{:?}", self.get(c, i, j))));
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the layout written by [`ImageTensor::write_csv`]. The channel
    /// count comes from the header; height and width from the largest row
    /// and column indices. Every pixel must appear exactly once.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(csv_err)?.clone();
        if header.len() < 3 || &header[0] != "row" || &header[1] != "col" {
            return Err(Error::Format("image CSV header must start with row,col and list channels".into()));
        }
        for (c, name) in header.iter().skip(2).enumerate() {
            if name != format!("c{c}") {
                return Err(Error::Format(format!("unexpected channel column {name:?}")));
            }
        }
        let channels = header.len() - 2;
        let mut pixels = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let parse_idx = |k: usize| -> Result<usize> {
                rec[k].trim().parse().map_err(|_| Error::Format(format!("bad index {:?}", &rec[k])))
            };
            let (i, j) = (parse_idx(0)?, parse_idx(1)?);
            let vals = (2..rec.len())
                .map(|k| rec[k].trim().parse::<f64>().map_err(|_| Error::Format(format!("bad value {:?}", &rec[k]))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != channels {
                return Err(Error::Format(format!("pixel ({i}, {j}) has {} channels", vals.len())));
            }
            pixels.push((i, j, vals));
        }
        let height = pixels.iter().map(|p| p.0 + 1).max().unwrap_or(0);
        let width = pixels.iter().map(|p| p.1 + 1).max().unwrap_or(0);
        if pixels.len() != height * width {
            return Err(Error::Format(format!("expected {} pixels for {height}x{width}, got {}", height * width, pixels.len())));
        }
        let mut values = vec![f64::NAN; channels * height * width];
        let mut seen = vec![false; height * width];
        for (i, j, vals) in pixels {
            if std::mem::replace(&mut seen[i * width + j], true) {
                return Err(Error::Format(format!("pixel ({i}, {j}) listed twice")));
            }
            for (c, v) in vals.into_iter().enumerate() {
                values[(c * height + i) * width + j] = v;
            }
        }
        Self::new(channels, height, width, values)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// `(1 / CHW) sum I`.
pub fn mean_pixel(img: &ImageTensor) -> f64 {
    img.values.iter().sum::<f64>() / img.values.len() as f64
}

/// Mean over pixels of `0.299 R + 0.587 G + 0.114 B`.
pub fn brightness(img: &ImageTensor) -> Result<f64> {
    if img.channels != 3 {
        return Err(invalid(format!("brightness needs 3 channels, got {}", img.channels)));
    }
    let n = (img.height * img.width) as f64;
    let total: f64 = (0..3).map(|c| LUMA[c] * img.plane(c).iter().sum::<f64>()).sum();
    Ok(total / n)
}

/// `100 (mean of top floor(H/2) rows - mean of the remaining rows)`; for odd
/// `H` the middle row counts toward the bottom.
pub fn contrast(img: &ImageTensor) -> Result<f64> {
    if img.height < 2 {
        return Err(invalid("contrast needs at least two rows"));
    }
    let top_rows = img.height / 2;
    let (mut top, mut bottom) = (0.0, 0.0);
    for c in 0..img.channels {
        for i in 0..img.height {
            let row: f64 = (0..img.width).map(|j| img.get(c, i, j)).sum();
            if i < top_rows {
                top += row;
            } else {
                bottom += row;
            }
        }
    }
    let per_row = (img.channels * img.width) as f64;
    Ok(100.0 * (top / (top_rows as f64 * per_row) - bottom / ((img.height - top_rows) as f64 * per_row)))
}

/// Brightness-weighted mean row index (rows numbered from 1) of the
/// channel-mean grayscale.
pub fn centroid_row(img: &ImageTensor) -> Result<f64> {
    let g = img.grayscale();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..img.height {
        let row: f64 = g[i * img.width..(i + 1) * img.width].iter().sum();
        num += (i + 1) as f64 * row;
        den += row;
    }
    if den == 0.0 {
        return Err(Error::Undefined("centroid of an image with zero total mass".into()));
    }
    Ok(num / den)
}

/// Pearson correlation of two flattened images.
pub fn pearson_standard(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson(x, y)
}

/// Subtracts the group mean `mu_c = sum (x_i + y_i) / 2K` from every member,
/// then correlates each pair.
pub fn pearson_centralized(pairs: &[(&[f64], &[f64])]) -> Result<Vec<f64>> {
    let Some(first) = pairs.first() else {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    };
    let d = first.0.len();
    let mut mu = vec![0.0; d];
    for (x, y) in pairs {
        if x.len() != d || y.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len().max(y.len()) });
        }
        for k in 0..d {
            mu[k] += x[k] + y[k];
        }
    }
    let scale = 1.0 / (2 * pairs.len()) as f64;
    mu.iter_mut().for_each(|v| *v *= scale);
    pairs
        .iter()
        .map(|(x, y)| {
            let xc: Vec<f64> = x.iter().zip(&mu).map(|(a, m)| a - m).collect();
            let yc: Vec<f64> = y.iter().zip(&mu).map(|(a, m)| a - m).collect();
            pearson(&xc, &yc)
        })
        .collect()
}

/// One-dimensional empirical Wasserstein-1 distance,
/// `integral |F_a(x) - F_b(x)| dx`, which equals the quantile-function
/// integral and reduces to `mean |a_(i) - b_(i)|` for equal sizes.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("Wasserstein distance needs nonempty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(invalid("samples must be finite"));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    if sa.len() == sb.len() {
        return Ok(sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / sa.len() as f64);
    }
    let mut all: Vec<f64> = sa.iter().chain(&sb).copied().collect();
    all.sort_by(f64::total_cmp);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut total = 0.0;
    for w in all.windows(2) {
        while ia < sa.len() && sa[ia] <= w[0] {
            ia += 1;
        }
        while ib < sb.len() && sb[ib] <= w[0] {
            ib += 1;
        }
        total += (ia as f64 / na - ib as f64 / nb).abs() * (w[1] - w[0]);
    }
    Ok(total)
}

const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_WIN: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

fn gaussian_taps() -> [f64; SSIM_WIN] {
    let mut w = [0.0; SSIM_WIN];
    let half = (SSIM_WIN / 2) as f64;
    for (k, v) in w.iter_mut().enumerate() {
        let x = k as f64 - half;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn ssim_index(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64) -> f64 {
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

/// Separable valid-mode filter of one `h x w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, taps: &[f64; SSIM_WIN]) -> Vec<f64> {
    let ow = w - SSIM_WIN + 1;
    let oh = h - SSIM_WIN + 1;
    let mut horiz = vec![0.0; h * ow];
    for i in 0..h {
        for j in 0..ow {
            horiz[i * ow + j] = (0..SSIM_WIN).map(|k| taps[k] * plane[i * w + j + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = (0..SSIM_WIN).map(|k| taps[k] * horiz[(i + k) * ow + j]).sum();
        }
    }
    out
}

/// SSIM with an `11 x 11` Gaussian window (`sigma = 1.5`), `K1 = 0.01`,
/// `K2 = 0.03`, data range 1, averaged over valid window positions and then
/// over channels. Images smaller than the window fall back to one global
/// window per channel.
pub fn ssim(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(invalid(format!(
            "SSIM needs equal shapes, got {}x{}x{} and {}x{}x{}",
            a.channels, a.height, a.width, b.channels, b.height, b.width
        )));
    }
    let (h, w) = (a.height, a.width);
    let mut total = 0.0;
    if h.min(w) < SSIM_WIN {
        for c in 0..a.channels {
            let (x, y) = (a.plane(c), b.plane(c));
            let n = x.len() as f64;
            let mx = x.iter().sum::<f64>() / n;
            let my = y.iter().sum::<f64>() / n;
            let vx = x.iter().map(|v| (v - mx) * (v - mx)).sum::<f64>() / n;
            let vy = y.iter().map(|v| (v - my) * (v - my)).sum::<f64>() / n;
            let cxy = x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / n;
            total += ssim_index(mx, my, vx, vy, cxy);
        }
        return Ok(total / a.channels as f64);
    }
    let taps = gaussian_taps();
    for c in 0..a.channels {
        let (x, y) = (a.plane(c), b.plane(c));
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
        let ux = filter_valid(x, h, w, &taps);
        let uy = filter_valid(y, h, w, &taps);
        let uxx = filter_valid(&xx, h, w, &taps);
        let uyy = filter_valid(&yy, h, w, &taps);
        let uxy = filter_valid(&xy, h, w, &taps);
        let mut s = 0.0;
        for k in 0..ux.len() {
            s += ssim_index(ux[k], uy[k], uxx[k] - ux[k] * ux[k], uyy[k] - uy[k] * uy[k], uxy[k] - ux[k] * uy[k]);
        }
        total += s / ux.len() as f64;
    }
    Ok(total / a.channels as f64)
}

/// Per-image statistics row; `brightness` is absent for non-RGB images and
/// `centroid_row` for zero-mass images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageStatsRow {
    pub image_id: String,
    pub mean_pixel: f64,
    pub brightness: Option<f64>,
    pub contrast: Option<f64>,
    pub centroid_row: Option<f64>,
}

pub fn image_stats_row(id: impl Into<String>, img: &ImageTensor) -> ImageStatsRow {
    ImageStatsRow {
        image_id: id.into(),
        mean_pixel: mean_pixel(img),
        brightness: brightness(img).ok(),
        contrast: contrast(img).ok(),
        centroid_row: centroid_row(img).ok(),
    }
}

pub fn write_stats_csv<W: Write>(rows: &[ImageStatsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(c: usize, h: usize, w: usize, f: impl Fn(usize, usize, usize) -> f64) -> ImageTensor {
        let mut v = Vec::with_capacity(c * h * w);
        for ci in 0..c {
            for i in 0..h {
                for j in 0..w {
                    v.push(f(ci, i, j));
                }
            }
        }
        ImageTensor::new(c, h, w, v).unwrap()
    }

    #[test]
    fn mean_pixel_cases() {
        assert!((mean_pixel(&img(3, 4, 5, |_, _, _| 0.4)) - 0.4).abs() < 1e-15);
        assert_eq!(mean_pixel(&ImageTensor::new(1, 1, 2, vec![0.0, 1.0]).unwrap()), 0.5);
        let t = img(2, 3, 7, |c, i, j| ((c * 31 + i * 7 + j) as f64 * 0.37).sin().abs());
        let mut naive = 0.0;
        for c in 0..2 {
            for i in 0..3 {
                for j in 0..7 {
                    naive += t.get(c, i, j);
                }
            }
        }
        assert!((mean_pixel(&t) - naive / 42.0).abs() < 1e-12);
    }

    #[test]
    fn brightness_cases() {
        let red = img(3, 2, 2, |c, _, _| if c == 0 { 1.0 } else { 0.0 });
        assert!((brightness(&red).unwrap() - 0.299).abs() < 1e-15);
        assert!((brightness(&img(3, 2, 2, |_, _, _| 1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((brightness(&img(3, 2, 2, |_, _, _| 0.3)).unwrap() - 0.3).abs() < 1e-12);
        assert!(brightness(&img(1, 2, 2, |_, _, _| 0.3)).is_err());
    }

    #[test]
    fn contrast_cases() {
        let split = img(3, 4, 4, |_, i, _| if i < 2 { 1.0 } else { 0.0 });
        assert!((contrast(&split).unwrap() - 100.0).abs() < 1e-12);
        assert_eq!(contrast(&img(1, 5, 3, |_, _, _| 0.6)).unwrap(), 0.0);
        let t = img(2, 5, 3, |c, i, j| ((c + 2 * i + 3 * j) as f64 * 0.41).cos().abs());
        let flipped = img(2, 5, 3, |c, i, j| t.get(c, 4 - i, j));
        // odd H: flipping moves the middle row, so check an even-height case too
        let e = img(2, 6, 3, |c, i, j| ((c + 2 * i + 3 * j) as f64 * 0.41).cos().abs());
        let ef = img(2, 6, 3, |c, i, j| e.get(c, 5 - i, j));
        assert!((contrast(&e).unwrap() + contrast(&ef).unwrap()).abs() < 1e-12);
        assert!(contrast(&flipped).is_ok());
        // odd H: middle row counts toward the bottom
        let mid = img(1, 3, 1, |_, i, _| if i == 1 { 1.0 } else { 0.0 });
        assert!((contrast(&mid).unwrap() + 50.0).abs() < 1e-12);
        assert!(contrast(&img(1, 1, 4, |_, _, _| 0.5)).is_err());
    }

    #[test]
    fn centroid_cases() {
        let top = img(1, 2, 3, |_, i, _| if i == 0 { 1.0 } else { 0.0 });
        assert_eq!(centroid_row(&top).unwrap(), 1.0);
        assert_eq!(centroid_row(&img(3, 2, 2, |_, _, _| 0.5)).unwrap(), 1.5);
        for h in 1..9 {
            let c = centroid_row(&img(2, h, 3, |_, _, _| 0.2)).unwrap();
            assert!((c - (h as f64 + 1.0) / 2.0).abs() < 1e-12);
        }
        assert!(matches!(centroid_row(&img(1, 3, 3, |_, _, _| 0.0)), Err(Error::Undefined(_))));
    }

    #[test]
    fn pearson_cases() {
        let x = [0.3, -1.2, 2.5, 0.7, 1.1];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let aff: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!((pearson_standard(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson_standard(&x, &aff).unwrap() - 1.0).abs() < 1e-15);
        // Gram-Schmidt: centre y, remove its projection on centred x
        let y0 = [1.0, 0.5, -0.2, 0.9, -1.3];
        let mx = x.iter().sum::<f64>() / 5.0;
        let my = y0.iter().sum::<f64>() / 5.0;
        let xc: Vec<f64> = x.iter().map(|v| v - mx).collect();
        let yc: Vec<f64> = y0.iter().map(|v| v - my).collect();
        let proj = xc.iter().zip(&yc).map(|(a, b)| a * b).sum::<f64>() / xc.iter().map(|a| a * a).sum::<f64>();
        let y: Vec<f64> = yc.iter().zip(&xc).map(|(b, a)| b - proj * a).collect();
        assert!(pearson_standard(&x, &y).unwrap().abs() < 1e-12);
        assert!(pearson_standard(&x, &[1.0; 5]).is_err());
    }

    #[test]
    fn centralized_cases() {
        let x = [0.5, -0.2, 1.0, 0.3];
        let nx: Vec<f64> = x.iter().map(|v| -v).collect();
        let r = pearson_centralized(&[(&x[..], &nx[..])]).unwrap();
        assert!((r[0] + 1.0).abs() < 1e-15);

        let a = [0.1, 0.4, -0.3, 0.8];
        let b = [0.9, -0.5, 0.2, 0.0];
        let c = [0.3, 0.3, -0.7, 0.4];
        let base = pearson_centralized(&[(&a[..], &b[..]), (&c[..], &a[..])]).unwrap();
        let shift = |v: &[f64]| v.iter().enumerate().map(|(k, x)| x + 0.25 * k as f64 - 1.0).collect::<Vec<_>>();
        let (sa, sb, sc) = (shift(&a), shift(&b), shift(&c));
        let moved = pearson_centralized(&[(&sa[..], &sb[..]), (&sc[..], &sa[..])]).unwrap();
        for (p, q) in base.iter().zip(&moved) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn centralized_affine_antisymmetric_generator() {
        // DM(z) = A z + b
        let a = [[1.0, 0.3, -0.2], [0.0, 2.0, 0.5], [0.4, -1.0, 1.5]];
        let b = [0.7, -0.1, 0.25];
        let dm = |z: &[f64; 3]| -> Vec<f64> { (0..3).map(|i| (0..3).map(|j| a[i][j] * z[j]).sum::<f64>() + b[i]).collect() };
        let zs = [[0.3, -1.0, 0.8], [1.2, 0.1, -0.4], [-0.6, 0.9, 0.2]];
        let outs: Vec<(Vec<f64>, Vec<f64>)> = zs.iter().map(|z| (dm(z), dm(&[-z[0], -z[1], -z[2]]))).collect();
        let pairs: Vec<(&[f64], &[f64])> = outs.iter().map(|(p, m)| (p.as_slice(), m.as_slice())).collect();
        for r in pearson_centralized(&pairs).unwrap() {
            assert!((r + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn wasserstein_cases() {
        assert_eq!(wasserstein1(&[0.3, 1.0, -2.0], &[1.0, -2.0, 0.3]).unwrap(), 0.0);
        assert_eq!(wasserstein1(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(wasserstein1(&[0.0, 1.0], &[0.5, 0.5]).unwrap(), 0.5);
        // reference values from an independent CDF-difference implementation
        let w = wasserstein1(&[0.1, 2.0, -1.0], &[0.3, 0.7, 1.5, 4.0, -2.0]).unwrap();
        assert!((w - 1.0666666666666667).abs() < 1e-12);
        assert!((wasserstein1(&[3.0], &[1.0, 2.0, 7.0, 0.5]).unwrap() - 2.375).abs() < 1e-12);
        assert!(wasserstein1(&[], &[1.0]).is_err());
    }

    fn oracle_pair(c: usize, h: usize, w: usize) -> (ImageTensor, ImageTensor) {
        let a = img(c, h, w, |c, i, j| 0.5 + 0.4 * (0.3 * i as f64 + 0.7 * j as f64 + c as f64).sin());
        let b = img(c, h, w, |c, i, j| {
            let (i, j, c) = (i as f64, j as f64, c as f64);
            0.5 + 0.3 * (0.2 * i - 0.5 * j + 0.5 * c).cos() + 0.1 * (0.9 * i * j + c).sin()
        });
        (a, b)
    }

    #[test]
    fn ssim_matches_reference_implementation() {
        // frozen from a Gaussian-weighted (sigma 1.5) reference SSIM with
        // population covariances and data range 1
        let (a, b) = oracle_pair(3, 16, 16);
        assert!((ssim(&a, &b).unwrap() - 0.08403246558587378).abs() < 1e-10);
        let (a, b) = oracle_pair(1, 13, 17);
        assert!((ssim(&a, &b).unwrap() + 0.39338461135015973).abs() < 1e-10);
    }

    #[test]
    fn ssim_basic_properties() {
        let (a, b) = oracle_pair(3, 12, 14);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        let zero = img(1, 4, 4, |_, _, _| 0.0);
        let one = img(1, 4, 4, |_, _, _| 1.0);
        let c1 = 1e-4;
        assert!((ssim(&zero, &one).unwrap() - c1 / (1.0 + c1)).abs() < 1e-15);
        assert!(ssim(&zero, &img(1, 4, 5, |_, _, _| 0.0)).is_err());
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let (a, _) = oracle_pair(3, 4, 5);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("row,col,c0,c1,c2\n"));
        assert_eq!(ImageTensor::read_csv(buf.as_slice()).unwrap(), a);
        let dir = tempfile::tempdir().unwrap();
        a.save(&dir.path().join("img")).unwrap();
        assert_eq!(ImageTensor::load(&dir.path().join("img")).unwrap(), a);
        assert!(ImageTensor::read_csv("row,col,c0\n0,0,0.5\n1,1,0.5\n".as_bytes()).is_err());
    }

    #[test]
    fn stats_csv_rows() {
        let rows = vec![
            image_stats_row("a", &img(3, 2, 2, |_, _, _| 0.5)),
            image_stats_row("b", &img(1, 2, 2, |_, i, _| i as f64)),
        ];
        let mut buf = Vec::new();
        write_stats_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "image_id,mean_pixel,brightness,contrast,centroid_row");
        let a: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(a[0], "a");
        assert!((a[2].parse::<f64>().unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(&a[3..], &["0.0", "1.5"]);
        assert_eq!(lines.next().unwrap(), "b,0.5,,-100.0,2.0");
    }

    #[test]
    fn model_output_mapping() {
        let t = ImageTensor::from_model_output(1, 1, 3, &[-1.0, 0.0, 1.5], false).unwrap();
        assert_eq!(t.values(), &[0.0, 0.5, 1.25]);
        let c = ImageTensor::from_model_output(1, 1, 3, &[-1.0, 0.0, 1.5], true).unwrap();
        assert_eq!(c.values(), &[0.0, 0.5, 1.0]);
        assert!(ImageTensor::from_unit(1, 1, 1, vec![1.5]).is_err());
    }
}
