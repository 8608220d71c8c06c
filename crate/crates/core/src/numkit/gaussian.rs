use rand::Rng;
use rand_distr::StandardNormal;

use super::cholesky::Cholesky;
use super::eigen::{sym_eigen, JacobiConfig};
use super::matrix::{dot, Matrix};
use super::rng::{Generator, RngStream};
use crate::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// Multivariate normal `N(mean, covariance)` with a symmetric positive
/// semi-definite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    mean: Vec<f64>,
    covariance: Matrix,
}

impl GaussianBelief {
    pub fn new(mean: Vec<f64>, covariance: Matrix) -> Result<Self> {
        let d = mean.len();
        if covariance.rows() != d || covariance.cols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: covariance.rows() });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("mean must be finite".into()));
        }
        if !covariance.is_symmetric(SYMMETRY_TOL) {
            return Err(Error::InvalidArgument("covariance is not symmetric".into()));
        }
        if d > 0 && Cholesky::factor_exact(&covariance).is_err() {
            let ev = sym_eigen(&covariance, JacobiConfig::default())?.values;
            let floor = -PSD_TOL * covariance.max_abs().max(1.0);
            if ev[0] < floor {
                return Err(Error::NotPositiveDefinite);
            }
        }
        Ok(GaussianBelief { mean, covariance })
    }

    /// `N(0, variance · I_d)`.
    pub fn isotropic(d: usize, variance: f64) -> Result<Self> {
        GaussianBelief::new(vec![0.0; d], Matrix::identity(d).scale(variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }
}

pub const KL_RESOLUTION: f64 = 1e-12;

/// `KL(p ‖ q)` between two Gaussians.
///
/// `q` is factored with the jitter ladder; a `q` that cannot be factored is
/// an error. A singular `p` has no density and gives `+∞`. Results below
/// `KL_RESOLUTION · d` are rounding noise and come back as exactly zero.
pub fn gaussian_kl(p: &GaussianBelief, q: &GaussianBelief) -> Result<f64> {
    let d = p.dim();
    if q.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: q.dim() });
    }
    if p == q {
        return Ok(0.0);
    }
    let lq = Cholesky::factor(&q.covariance)?;
    let lp = match Cholesky::factor(&p.covariance) {
        Ok(c) => c,
        Err(Error::NotPositiveDefinite) => return Ok(f64::INFINITY),
        Err(e) => return Err(e),
    };

    // tr(Σq⁻¹ Σp) = ‖Lq⁻¹ Lp‖²_F
    let mut trace = 0.0;
    let mut col = vec![0.0; d];
    for j in 0..d {
        for (i, c) in col.iter_mut().enumerate() {
            *c = lp.lower()[(i, j)];
        }
        lq.forward_substitute(&mut col);
        trace += dot(&col, &col);
    }
    let mut diff: Vec<f64> = q.mean.iter().zip(&p.mean).map(|(a, b)| a - b).collect();
    lq.forward_substitute(&mut diff);
    let mahalanobis = dot(&diff, &diff);

    let kl = 0.5 * (lq.log_det() - lp.log_det() - d as f64 + trace + mahalanobis);
    Ok(if kl < KL_RESOLUTION * d.max(1) as f64 { 0.0 } else { kl })
}

/// Like [`gaussian_kl`] but reports a singular `q` as `+∞` instead of an
/// error.
pub fn gaussian_kl_lenient(p: &GaussianBelief, q: &GaussianBelief) -> Result<f64> {
    match gaussian_kl(p, q) {
        Err(Error::NotPositiveDefinite) => Ok(f64::INFINITY),
        other => other,
    }
}

/// Reusable sampler `μ + L z` for one belief.
///
/// `L` is the exact Cholesky factor when it exists; otherwise a square root
/// built from the clamped eigendecomposition, which keeps degenerate
/// directions exactly degenerate.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: Vec<f64>,
    root: Matrix,
}

impl GaussianSampler {
    pub fn new(belief: &GaussianBelief) -> Result<Self> {
        let d = belief.dim();
        let root = match Cholesky::factor_exact(&belief.covariance) {
            Ok(c) => c.into_lower(),
            Err(_) if d == 0 => Matrix::zeros(0, 0),
            Err(_) => {
                let eig = sym_eigen(&belief.covariance, JacobiConfig::default())?;
                let floor = -PSD_TOL * belief.covariance.max_abs().max(1.0);
                if eig.values[0] < floor {
                    return Err(Error::NotPositiveDefinite);
                }
                let mut root = eig.vectors;
                for (j, lambda) in eig.values.iter().enumerate() {
                    let s = lambda.max(0.0).sqrt();
                    for i in 0..d {
                        root[(i, j)] *= s;
                    }
                }
                root
            }
        };
        Ok(GaussianSampler { mean: belief.mean.clone(), root })
    }

    pub fn sample(&self, g: &mut Generator) -> Vec<f64> {
        let z: Vec<f64> = (0..self.mean.len()).map(|_| g.sample(StandardNormal)).collect();
        self.mean.iter().enumerate().map(|(i, m)| m + dot(self.root.row(i), &z)).collect()
    }
}

/// `n` independent draws from `belief` on the given stream.
pub fn draw_gaussian(rng: &RngStream, belief: &GaussianBelief, n: usize) -> Result<Vec<Vec<f64>>> {
    let sampler = GaussianSampler::new(belief)?;
    let mut g = rng.generator();
    Ok((0..n).map(|_| sampler.sample(&mut g)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(mean: f64, var: f64) -> GaussianBelief {
        GaussianBelief::new(vec![mean], Matrix::from_diag(&[var])).unwrap()
    }

    #[test]
    fn kl_self_is_zero() {
        let p = GaussianBelief::isotropic(3, 1.0).unwrap();
        assert_eq!(gaussian_kl(&p, &p.clone()).unwrap(), 0.0);
    }

    #[test]
    fn kl_scalar_cases() {
        // ½(ln 2 − 1 + ½)
        let want = 0.5 * (2f64.ln() - 0.5);
        let got = gaussian_kl(&scalar(0.0, 1.0), &scalar(0.0, 2.0)).unwrap();
        assert!((got - want).abs() < 1e-14);
        assert!((want - 0.09657).abs() < 1e-5);
        let got = gaussian_kl(&scalar(1.0, 1.0), &scalar(0.0, 1.0)).unwrap();
        assert!((got - 0.5).abs() < 1e-14);
    }

    #[test]
    fn kl_errors_and_sentinels() {
        let p = GaussianBelief::isotropic(2, 1.0).unwrap();
        let zero = GaussianBelief::isotropic(2, 0.0).unwrap();
        assert_eq!(gaussian_kl(&p, &zero), Err(Error::NotPositiveDefinite));
        assert_eq!(gaussian_kl_lenient(&p, &zero), Ok(f64::INFINITY));
        assert_eq!(gaussian_kl(&zero, &p), Ok(f64::INFINITY));
        let q3 = GaussianBelief::isotropic(3, 1.0).unwrap();
        assert!(matches!(gaussian_kl(&p, &q3), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn belief_rejects_indefinite_covariance() {
        let bad = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert_eq!(GaussianBelief::new(vec![0.0, 0.0], bad), Err(Error::NotPositiveDefinite));
        let asym = Matrix::from_rows(&[[1.0, 0.1], [0.0, 1.0]]).unwrap();
        assert!(GaussianBelief::new(vec![0.0, 0.0], asym).is_err());
    }

    #[test]
    fn degenerate_draws_are_exact() {
        let zero = GaussianBelief::isotropic(3, 0.0).unwrap();
        let draws = draw_gaussian(&RngStream::new(1, 2), &zero, 5).unwrap();
        assert_eq!(draws, vec![vec![0.0; 3]; 5]);
    }

    #[test]
    fn draws_are_deterministic() {
        let b = GaussianBelief::new(vec![1.0, -1.0], Matrix::from_rows(&[[2.0, 0.3], [0.3, 0.5]]).unwrap()).unwrap();
        let s = RngStream::new(42, 9);
        assert_eq!(draw_gaussian(&s, &b, 10).unwrap(), draw_gaussian(&s, &b, 10).unwrap());
    }

    #[test]
    fn sample_mean_converges() {
        let cov = Matrix::from_rows(&[[2.0, 0.6, 0.0], [0.6, 1.0, -0.3], [0.0, -0.3, 0.5]]).unwrap();
        let mu = vec![1.0, -2.0, 0.5];
        let b = GaussianBelief::new(mu.clone(), cov.clone()).unwrap();
        let n = 100_000;
        let draws = draw_gaussian(&RngStream::new(3, 4), &b, n).unwrap();
        for k in 0..3 {
            let m = draws.iter().map(|x| x[k]).sum::<f64>() / n as f64;
            let sd = cov[(k, k)].sqrt();
            assert!((m - mu[k]).abs() < 5.0 * sd / (n as f64).sqrt(), "component {k}: {m}");
        }
    }

    #[test]
    fn rank_deficient_draws_stay_in_range() {
        // Covariance v vᵀ with v = (1, 2): all draws satisfy 2 x0 - x1 = 0.
        let mut cov = Matrix::zeros(2, 2);
        cov.add_outer(1.0, &[1.0, 2.0]);
        let b = GaussianBelief::new(vec![0.0, 0.0], cov).unwrap();
        for x in draw_gaussian(&RngStream::new(5, 0), &b, 50).unwrap() {
            assert!((2.0 * x[0] - x[1]).abs() < 1e-7);
        }
    }
}
