use rayon::prelude::*;

use super::data::{Dataset, LinRegEnvironment, LinRegSetting};
use super::ensemble::{ensemble_law, EnsembleSpec};
use crate::numkit::{gaussian_kl_lenient, Cholesky, GaussianBelief, InputSampler, Matrix, RngStream};
use crate::stats::mean_and_std_error;
use crate::{Error, Result};

const PROBE_INPUTS: usize = 100;
const PROBE_SEED: u64 = 0x5eed_0b1a_5ed0_0001;
const UNBIASED_RTOL: f64 = 1e-9;

/// Posterior over `θ*` given the data, with precision
/// `I/σ₀² + Σ x xᵀ/σ²(x)` and mean `Σ_T Σ x y/σ²(x)`.
pub fn exact_posterior(env: &LinRegEnvironment, data: &Dataset) -> Result<GaussianBelief> {
    let setting = &env.setting;
    let d = setting.dim();
    if data.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: data.dim() });
    }
    let mut precision = Matrix::identity(d).scale(1.0 / setting.prior_variance);
    let mut rhs = vec![0.0; d];
    for (x, y) in data.iter() {
        let inv_var = 1.0 / setting.noise_variance(x);
        precision.add_outer(inv_var, x);
        for (r, xi) in rhs.iter_mut().zip(x) {
            *r += inv_var * y * xi;
        }
    }
    let chol = Cholesky::factor(&precision)?;
    let mean = chol.solve_vec(&rhs)?;
    GaussianBelief::new(mean, chol.inverse())
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.iter().any(|v| *v == f64::INFINITY) {
            return McEstimate { estimate: f64::INFINITY, std_error: f64::INFINITY, n: samples.len() };
        }
        let (estimate, std_error) = mean_and_std_error(samples);
        McEstimate { estimate, std_error, n: samples.len() }
    }

    pub fn is_infinite(&self) -> bool {
        self.estimate.is_infinite()
    }

    /// `estimate + k · std_error`.
    pub fn upper(&self, k: f64) -> f64 {
        self.estimate + k * self.std_error
    }
}

/// Expected KL from the exact posterior to the ensemble law after `t`
/// observations, averaged over fresh `θ*` and datasets. Dataset `i` is drawn
/// from `rng.derive(i)`. A singular ensemble law makes the estimate `+∞`.
pub fn expected_kl_mc(
    setting: &LinRegSetting,
    spec: &EnsembleSpec,
    t: usize,
    n_datasets: usize,
    rng: RngStream,
) -> Result<McEstimate> {
    if n_datasets < 30 {
        return Err(Error::InvalidArgument(format!("need at least 30 datasets, got {n_datasets}")));
    }
    let terms = (0..n_datasets)
        .into_par_iter()
        .map(|i| {
            let mut g = rng.derive(i as u64).generator();
            let env = setting.sample_environment(&mut g);
            let data = env.sample_dataset(t, &mut g);
            let exact = exact_posterior(&env, &data)?;
            match ensemble_law(spec, &data) {
                Ok(law) => gaussian_kl_lenient(&exact, &law),
                Err(Error::SingularSystem) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_samples(&terms))
}

/// True when `ν(x) σ²(x)` and `λ σ₀²` share one positive constant on a
/// fixed probe set of inputs.
pub fn is_unbiased(spec: &EnsembleSpec, env: &LinRegEnvironment) -> bool {
    let setting = &env.setting;
    let c = spec.lambda() * setting.prior_variance;
    if !(c > 0.0 && c.is_finite()) {
        return false;
    }
    let mut g = RngStream::new(PROBE_SEED, 0).generator();
    (0..PROBE_INPUTS).all(|_| {
        let x = setting.inputs.sample(&mut g);
        let ci = spec.weight().eval(&x) * setting.noise_variance(&x);
        (ci - c).abs() <= UNBIASED_RTOL * c
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linreg::{InputFn, NoiseModel};
    use crate::numkit::{dot, gaussian_kl, InputDistribution};

    fn scalar_env() -> LinRegEnvironment {
        let setting = LinRegSetting::new(
            1.0,
            NoiseModel::Constant { variance: 1.0 },
            InputDistribution::StandardNormal { dim: 1 },
        )
        .unwrap();
        LinRegEnvironment::new(vec![0.3], setting).unwrap()
    }

    fn hetero_setting(d: usize) -> LinRegSetting {
        LinRegSetting::new(
            1.5,
            NoiseModel::Quadratic { weights: vec![0.5; d], floor: 0.1 },
            InputDistribution::StandardNormal { dim: d },
        )
        .unwrap()
    }

    #[test]
    fn empty_dataset_gives_prior() {
        let env = scalar_env();
        let post = exact_posterior(&env, &Dataset::new(1)).unwrap();
        assert_eq!(post.mean(), &[0.0]);
        assert!((post.covariance()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_posterior_by_hand() {
        let data = Dataset::from_pairs(1, [(vec![1.0], 1.0)]).unwrap();
        let post = exact_posterior(&scalar_env(), &data).unwrap();
        assert!((post.mean()[0] - 0.5).abs() < 1e-15);
        assert!((post.covariance()[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn posterior_dimension_checked() {
        let data = Dataset::new(2);
        assert!(matches!(exact_posterior(&scalar_env(), &data), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn matched_bootstrap_recovers_posterior() {
        let setting = hetero_setting(3);
        let spec = EnsembleSpec::matched_bootstrap(&setting).unwrap();
        let mut g = RngStream::new(4, 0).generator();
        let env = setting.sample_environment(&mut g);
        let data = env.sample_dataset(25, &mut g);
        let exact = exact_posterior(&env, &data).unwrap();
        let law = ensemble_law(&spec, &data).unwrap();
        for (a, b) in exact.mean().iter().zip(law.mean()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(exact.covariance().sub(law.covariance()).unwrap().max_abs() < 1e-10);
        assert!(gaussian_kl(&exact, &law).unwrap() < 1e-9);
    }

    #[test]
    fn expected_kl_sentinels() {
        let setting = hetero_setting(2);
        let bp = EnsembleSpec::matched_bootstrap(&setting).unwrap();
        let est = expected_kl_mc(&setting, &bp, 10, 30, RngStream::new(1, 0)).unwrap();
        assert_eq!((est.estimate, est.std_error), (0.0, 0.0));
        let n = EnsembleSpec::ensemble_n(1.0, InputFn::Constant(1.0)).unwrap();
        let est = expected_kl_mc(&setting, &n, 10, 30, RngStream::new(1, 0)).unwrap();
        assert!(est.is_infinite());
        assert!(expected_kl_mc(&setting, &bp, 10, 29, RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn expected_kl_is_reproducible() {
        let setting = hetero_setting(2);
        let p = EnsembleSpec::unbiased_p(&setting, 1.0, 3.0).unwrap();
        let a = expected_kl_mc(&setting, &p, 5, 40, RngStream::new(8, 1)).unwrap();
        let b = expected_kl_mc(&setting, &p, 5, 40, RngStream::new(8, 1)).unwrap();
        assert_eq!(a, b);
        assert!(a.estimate > 0.0);
    }

    #[test]
    fn unbiasedness_detection() {
        let setting = hetero_setting(2);
        let env = LinRegEnvironment::new(vec![0.0, 0.0], setting.clone()).unwrap();
        for c in [1.0, 2.0] {
            let spec = EnsembleSpec::unbiased_p(&setting, c, 1.0).unwrap();
            assert!(is_unbiased(&spec, &env));
        }
        let plain = EnsembleSpec::ensemble_p(1.0 / 1.5, InputFn::Constant(1.0), 1.0).unwrap();
        assert!(!is_unbiased(&plain, &env));
    }

    #[test]
    fn unbiased_mean_matches_posterior_mean() {
        let setting = hetero_setting(3);
        let spec = EnsembleSpec::unbiased_p(&setting, 2.5, 0.7).unwrap();
        let mut g = RngStream::new(12, 0).generator();
        let env = setting.sample_environment(&mut g);
        let data = env.sample_dataset(15, &mut g);
        let exact = exact_posterior(&env, &data).unwrap();
        let law = ensemble_law(&spec, &data).unwrap();
        for (a, b) in exact.mean().iter().zip(law.mean()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn posterior_mean_approaches_truth() {
        let setting = hetero_setting(2);
        let mut g = RngStream::new(21, 0).generator();
        let env = setting.sample_environment(&mut g);
        let mut errs = Vec::new();
        for t in [1, 10, 100, 1000] {
            let mut total = 0.0;
            for r in 0..50 {
                let mut g = RngStream::new(22, r).generator();
                let data = env.sample_dataset(t, &mut g);
                let post = exact_posterior(&env, &data).unwrap();
                let diff: Vec<f64> = post.mean().iter().zip(&env.theta_star).map(|(a, b)| a - b).collect();
                total += dot(&diff, &diff).sqrt();
            }
            errs.push(total / 50.0);
        }
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }
}
