//! Probes of how close a noise-prediction field is to affine antisymmetry:
//! one-dimensional slices through the origin, the antisymmetry score of a
//! slice, per-step correlation of antithetic trajectories, and the
//! symmetry center of a field.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::diffusion::{ScoreField, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::image_stats::{pearson_centralized, pearson_standard};
use crate::rng::RngStream;

/// Values `f(c)` of one coordinate of `eps(t, c x)` for `c` on a uniform grid
/// over `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub anchor: Vec<f64>,
    pub coord: usize,
    pub step: usize,
}

/// Uniform grid on `[-1, 1]`, exactly symmetric: `grid[k] = -grid[n-1-k]`.
pub fn symmetric_grid(size: usize) -> Result<Vec<f64>> {
    if size < 3 || size.is_multiple_of(2) {
        return Err(invalid(format!("grid size must be odd and at least 3, got {size}")));
    }
    let half = (size / 2) as f64;
    let mut grid: Vec<f64> = (0..size).map(|k| (k as f64 - half) / half).collect();
    for k in 0..size / 2 {
        grid[k] = -grid[size - 1 - k];
    }
    Ok(grid)
}

pub fn slice_curve(score: &dyn ScoreField, t: usize, anchor: &[f64], coord: usize, grid_size: usize) -> Result<SliceCurve> {
    if anchor.len() != score.dim() {
        return Err(Error::DimensionMismatch { expected: score.dim(), got: anchor.len() });
    }
    if coord >= anchor.len() {
        return Err(invalid(format!("coordinate {coord} out of range for dimension {}", anchor.len())));
    }
    let grid = symmetric_grid(grid_size)?;
    let values = grid
        .iter()
        .map(|&c| {
            let x: Vec<f64> = anchor.iter().map(|v| c * v).collect();
            score.eps(t, &x)[coord]
        })
        .collect();
    Ok(SliceCurve { grid, values, anchor: anchor.to_vec(), coord, step: t })
}

impl SliceCurve {
    /// Builds a curve from a function of `c` directly.
    pub fn from_fn(grid_size: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = symmetric_grid(grid_size)?;
        let values = grid.iter().map(|&c| f(c)).collect();
        Ok(Self { grid, values, anchor: Vec::new(), coord: 0, step: 0 })
    }

    /// Two-column CSV `c,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "c,value")?;
        for (c, v) in self.grid.iter().zip(&self.values) {
            writeln!(out, "{c:?},{v:?}")?;
        }
        Ok(())
    }
}

fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2).zip(values.windows(2)).map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1])).sum()
}

/// Affine antisymmetry score
/// `AS(f) = 1 - int (f_sym - fbar)^2 / int (f - fbar)^2` with
/// `f_sym(c) = (f(c) + f(-c)) / 2` and `fbar` the mean of `f` over `[-1, 1]`,
/// both integrals by the trapezoid rule on the curve's grid. 1 means the
/// curve is odd up to a constant; 0 means it is even.
pub fn antisymmetry_score(curve: &SliceCurve) -> Result<f64> {
    let n = curve.grid.len();
    if n != curve.values.len() || n < 3 {
        return Err(invalid("curve needs at least three points and one value per grid point"));
    }
    let span = curve.grid[n - 1] - curve.grid[0];
    let fbar = trapezoid(&curve.grid, &curve.values) / span;
    let dev: Vec<f64> = curve.values.iter().map(|f| (f - fbar).powi(2)).collect();
    let sym: Vec<f64> = (0..n)
        .map(|k| (0.5 * (curve.values[k] + curve.values[n - 1 - k]) - fbar).powi(2))
        .collect();
    let den = trapezoid(&curve.grid, &dev);
    let scale = curve.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if den <= f64::EPSILON * f64::EPSILON * scale * scale * span || den == 0.0 {
        return Err(Error::Undefined("antisymmetry score of a constant curve".into()));
    }
    Ok(1.0 - trapezoid(&curve.grid, &sym) / den)
}

/// Per-step correlation between the two members of antithetic trajectory
/// pairs. Index `k` of each series is sampler step `T - k`, so index 0 is
/// the initial noise for states and the first prediction for eps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalCorrelation {
    pub centralized: bool,
    pub steps: Vec<usize>,
    pub state_mean: Vec<f64>,
    pub state_sd: Vec<f64>,
    /// Present when every trajectory recorded its predictions.
    pub eps_mean: Option<Vec<f64>>,
    pub eps_sd: Option<Vec<f64>>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, v.sqrt())
}

fn step_correlations(pairs: &[(&[f64], &[f64])], centralized: bool) -> Result<Vec<f64>> {
    if centralized {
        pearson_centralized(pairs)
    } else {
        pairs.iter().map(|(a, b)| pearson_standard(a, b)).collect()
    }
}

/// Mean and standard deviation over pairs of the Pearson correlation of the
/// pair's states (and predictions) at each step. With `centralized`, the
/// group mean over all pairs at that step is removed first.
pub fn temporal_correlation(pairs: &[(Trajectory, Trajectory)], centralized: bool) -> Result<TemporalCorrelation> {
    if pairs.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: pairs.len() });
    }
    let steps = pairs[0].0.steps();
    let d = pairs[0].0.dim();
    for (a, b) in pairs {
        for tr in [a, b] {
            if tr.steps() != steps || tr.dim() != d {
                return Err(invalid("trajectories must share the step count and dimension"));
            }
        }
    }
    let mut state_mean = Vec::with_capacity(steps + 1);
    let mut state_sd = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let slices: Vec<(&[f64], &[f64])> =
            pairs.iter().map(|(a, b)| (a.states[k].as_slice(), b.states[k].as_slice())).collect();
        let (m, s) = mean_sd(&step_correlations(&slices, centralized)?);
        state_mean.push(m);
        state_sd.push(s);
    }
    let have_eps = pairs.iter().all(|(a, b)| a.eps.is_some() && b.eps.is_some());
    let (eps_mean, eps_sd) = if have_eps {
        let mut em = Vec::with_capacity(steps);
        let mut es = Vec::with_capacity(steps);
        for k in 0..steps {
            let slices: Vec<(&[f64], &[f64])> = pairs
                .iter()
                .map(|(a, b)| (a.eps.as_ref().unwrap()[k].as_slice(), b.eps.as_ref().unwrap()[k].as_slice()))
                .collect();
            let (m, s) = mean_sd(&step_correlations(&slices, centralized)?);
            em.push(m);
            es.push(s);
        }
        (Some(em), Some(es))
    } else {
        (None, None)
    };
    Ok(TemporalCorrelation {
        centralized,
        steps: (0..=steps).rev().collect(),
        state_mean,
        state_sd,
        eps_mean,
        eps_sd,
    })
}

impl TemporalCorrelation {
    /// CSV `step,state_mean,state_sd,eps_mean,eps_sd`; eps columns are empty
    /// at step 0, where no prediction is made.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,state_mean,state_sd,eps_mean,eps_sd")?;
        for k in 0..self.steps.len() {
            write!(out, "{},{:?},{:?}", self.steps[k], self.state_mean[k], self.state_sd[k])?;
            match (&self.eps_mean, &self.eps_sd) {
                (Some(m), Some(s)) if k < m.len() => writeln!(out, ",{:?},{:?}", m[k], s[k])?,
                _ => writeln!(out, ",,")?,
            }
        }
        Ok(())
    }
}

/// `c_t = mean over probes x ~ N(0, I) of (f(x) + f(-x)) / 2` for one
/// coordinate of the field; zero for an odd field, `kappa` for an odd field
/// shifted by `kappa`.
pub fn symmetry_center(score: &dyn ScoreField, t: usize, coord: usize, probe_count: usize, stream: RngStream) -> Result<f64> {
    if probe_count == 0 {
        return Err(invalid("need at least one probe"));
    }
    let d = score.dim();
    if coord >= d {
        return Err(invalid(format!("coordinate {coord} out of range for dimension {d}")));
    }
    let mut g = stream.generator();
    let mut x = vec![0.0; d];
    let mut acc = 0.0;
    for _ in 0..probe_count {
        g.fill_normal(&mut x);
        let plus = score.eps(t, &x)[coord];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let minus = score.eps(t, &neg)[coord];
        acc += 0.5 * (plus + minus);
    }
    Ok(acc / probe_count as f64)
}
