use serde::{Deserialize, Serialize};

use crate::diffusion::MixtureParams;
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

/// An orthogonal map acting on displacements from a symmetry center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Orthogonal {
    /// `x -> -x`.
    CentralReflection,
    /// Negates one coordinate.
    CoordinateReflection { axis: usize },
    /// Exchanges two coordinates.
    Swap { i: usize, j: usize },
    /// Row-major `d x d` matrix, checked for orthogonality.
    Matrix { rows: Vec<f64> },
}

impl Orthogonal {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            Orthogonal::CentralReflection => Ok(()),
            Orthogonal::CoordinateReflection { axis } if *axis < d => Ok(()),
            Orthogonal::Swap { i, j } if *i < d && *j < d => Ok(()),
            Orthogonal::Matrix { rows } => {
                if rows.len() != d * d {
                    return Err(Error::DimensionMismatch { expected: d * d, got: rows.len() });
                }
                for i in 0..d {
                    for j in 0..d {
                        let dot: f64 = (0..d).map(|k| rows[k * d + i] * rows[k * d + j]).sum();
                        let target = if i == j { 1.0 } else { 0.0 };
                        if (dot - target).abs() > 1e-12 {
                            return Err(invalid("matrix is not orthogonal"));
                        }
                    }
                }
                Ok(())
            }
            _ => Err(invalid(format!("map indices out of range for dimension {d}"))),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Orthogonal::CentralReflection => x.iter().map(|v| -v).collect(),
            Orthogonal::CoordinateReflection { axis } => {
                let mut y = x.to_vec();
                y[*axis] = -y[*axis];
                y
            }
            Orthogonal::Swap { i, j } => {
                let mut y = x.to_vec();
                y.swap(*i, *j);
                y
            }
            Orthogonal::Matrix { rows } => {
                let d = x.len();
                (0..d).map(|i| (0..d).map(|k| rows[i * d + k] * x[k]).sum()).collect()
            }
        }
    }
}

/// True when `mu + g(m_k - mu)` is again a component mean with the same
/// weight and variance, for every component.
pub fn is_symmetric(mixture: &MixtureParams, g: &Orthogonal, center: &[f64]) -> bool {
    let image = |m: &[f64]| -> Vec<f64> {
        let dx: Vec<f64> = m.iter().zip(center).map(|(a, c)| a - c).collect();
        g.apply(&dx).iter().zip(center).map(|(a, c)| a + c).collect()
    };
    let tol = 1e-12;
    (0..mixture.components()).all(|k| {
        let target = image(&mixture.means[k]);
        (0..mixture.components()).any(|j| {
            (mixture.weights[j] - mixture.weights[k]).abs() <= tol
                && (mixture.variances[j] - mixture.variances[k]).abs() <= tol
                && mixture.means[j].iter().zip(&target).all(|(a, b)| (a - b).abs() <= tol * (1.0 + b.abs()))
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreservationRow {
    pub t: f64,
    pub density_residual: f64,
    pub score_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreservationReport {
    pub symmetric_input: bool,
    pub rows: Vec<PreservationRow>,
    pub max_density_residual: f64,
    pub max_score_residual: f64,
}

/// Maximum over probes `x ~ N(0, I)` of `|p_t(mu_t + g x) - p_t(mu_t + x)|`
/// and `max_i |s_t(mu_t + g x) - g s_t(mu_t + x)|_i` with `mu_t = e^{-t} mu`,
/// at each OU time. No symmetry precondition: use this to measure how badly
/// an asymmetric mixture breaks equivariance.
pub fn symmetry_residuals(
    mixture: &MixtureParams,
    g: &Orthogonal,
    center: &[f64],
    times: &[f64],
    probes: usize,
    stream: RngStream,
) -> Result<PreservationReport> {
    let d = mixture.dim();
    g.validate(d)?;
    mixture.check_dim(center)?;
    if probes == 0 {
        return Err(invalid("need at least one probe"));
    }
    let mut gen = stream.generator();
    let points: Vec<Vec<f64>> = (0..probes)
        .map(|_| {
            let mut x = vec![0.0; d];
            gen.fill_normal(&mut x);
            x
        })
        .collect();
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        if !(t >= 0.0) {
            return Err(invalid(format!("OU time must be nonnegative, got {t}")));
        }
        let pt = mixture.ou_marginal(t);
        let decay = (-t).exp();
        let mu_t: Vec<f64> = center.iter().map(|c| decay * c).collect();
        let (mut dres, mut sres) = (0.0f64, 0.0f64);
        for x in &points {
            let gx = g.apply(x);
            let at = |v: &[f64]| -> Vec<f64> { v.iter().zip(&mu_t).map(|(a, m)| a + m).collect() };
            let (y, gy) = (at(x), at(&gx));
            dres = dres.max((pt.density(&gy) - pt.density(&y)).abs());
            let lhs = pt.score(&gy);
            let rhs = g.apply(&pt.score(&y));
            for (a, b) in lhs.iter().zip(&rhs) {
                sres = sres.max((a - b).abs());
            }
        }
        rows.push(PreservationRow { t, density_residual: dres, score_residual: sres });
    }
    Ok(PreservationReport {
        symmetric_input: is_symmetric(mixture, g, center),
        max_density_residual: rows.iter().map(|r| r.density_residual).fold(0.0, f64::max),
        max_score_residual: rows.iter().map(|r| r.score_residual).fold(0.0, f64::max),
        rows,
    })
}

/// [`symmetry_residuals`] for a mixture that is symmetric under `g` about
/// `center`; asymmetric inputs are rejected.
pub fn symmetry_preservation_check(
    mixture: &MixtureParams,
    g: &Orthogonal,
    center: &[f64],
    times: &[f64],
    probes: usize,
    stream: RngStream,
) -> Result<PreservationReport> {
    g.validate(mixture.dim())?;
    mixture.check_dim(center)?;
    if !is_symmetric(mixture, g, center) {
        return Err(Error::Precondition("mixture is not symmetric under the given map about the given center".into()));
    }
    symmetry_residuals(mixture, g, center, times, probes, stream)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn times() -> Vec<f64> {
        (1..=30).map(|k| 0.1 * k as f64).collect()
    }

    #[test]
    fn central_reflection_exact() {
        let m = MixtureParams::symmetric_pair(&[0.5, -1.0], &[1.0, 0.7], 0.3).unwrap();
        let r = symmetry_preservation_check(&m, &Orthogonal::CentralReflection, &[0.5, -1.0], &times(), 200, RngStream::new(1, 0)).unwrap();
        assert!(r.max_density_residual < 1e-10);
        assert!(r.max_score_residual < 1e-10);
        assert_eq!(r.rows.len(), 30);
    }

    #[test]
    fn coordinate_swap_exact() {
        let m = MixtureParams::new(
            vec![0.3, 0.3, 0.4],
            vec![vec![1.0, -0.5], vec![-0.5, 1.0], vec![0.2, 0.2]],
            vec![0.4, 0.4, 0.9],
        )
        .unwrap();
        let g = Orthogonal::Swap { i: 0, j: 1 };
        let r = symmetry_preservation_check(&m, &g, &[0.0, 0.0], &times(), 200, RngStream::new(2, 0)).unwrap();
        assert!(r.max_density_residual < 1e-10);
        assert!(r.max_score_residual < 1e-10);
    }

    #[test]
    fn broken_symmetry_is_measured_not_rejected() {
        let m = MixtureParams::new(vec![0.5, 0.5], vec![vec![1.2, 0.0], vec![-1.0, 0.0]], vec![0.3, 0.3]).unwrap();
        let g = Orthogonal::CentralReflection;
        assert!(symmetry_preservation_check(&m, &g, &[0.0, 0.0], &times(), 10, RngStream::new(3, 0)).is_err());
        let r = symmetry_residuals(&m, &g, &[0.0, 0.0], &times(), 50, RngStream::new(3, 0)).unwrap();
        assert!(!r.symmetric_input);
        assert!(r.max_density_residual > 0.0);
    }

    #[test]
    fn matrix_maps() {
        let rot = Orthogonal::Matrix { rows: vec![0.0, -1.0, 1.0, 0.0] };
        rot.validate(2).unwrap();
        assert_eq!(rot.apply(&[1.0, 2.0]), vec![-2.0, 1.0]);
        assert!(Orthogonal::Matrix { rows: vec![1.0, 1.0, 0.0, 1.0] }.validate(2).is_err());
        assert!(Orthogonal::Swap { i: 0, j: 2 }.validate(2).is_err());
    }
}
