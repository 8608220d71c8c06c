use super::data::LinRegSetting;
use crate::numkit::{sym_eigen, InputSampler, JacobiConfig, Matrix, RngStream};
use crate::{Error, Result};

/// Expected signal-to-noise matrix `Γ = E[σ₀² x xᵀ / σ²(x)]` and its
/// eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSpectrum {
    pub gamma_matrix: Matrix,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub mean_eigenvalue: f64,
}

impl SnrSpectrum {
    pub fn from_gamma(gamma: Matrix) -> Result<Self> {
        let gamma = gamma.symmetrize();
        let eigenvalues = sym_eigen(&gamma, JacobiConfig::default())?.values;
        let mean_eigenvalue =
            if eigenvalues.is_empty() { 0.0 } else { eigenvalues.iter().sum::<f64>() / eigenvalues.len() as f64 };
        Ok(SnrSpectrum { gamma_matrix: gamma, eigenvalues, mean_eigenvalue })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Monte-Carlo estimate of `Γ` from `mc_samples` inputs.
pub fn snr_spectrum(setting: &LinRegSetting, mc_samples: usize, rng: RngStream) -> Result<SnrSpectrum> {
    if mc_samples < 1000 {
        return Err(Error::InvalidArgument(format!("need at least 1000 samples, got {mc_samples}")));
    }
    let d = setting.dim();
    let mut gamma = Matrix::zeros(d, d);
    let mut g = rng.generator();
    for _ in 0..mc_samples {
        let x = setting.inputs.sample(&mut g);
        gamma.add_outer(setting.prior_variance / setting.noise_variance(&x), &x);
    }
    SnrSpectrum::from_gamma(gamma.scale(1.0 / mc_samples as f64))
}

/// `½ Σᵢ ln((1 + tγ̄)/(1 + tγᵢ))`, a lower bound on the expected KL of any
/// unbiased prior-only ensemble after `t` observations.
pub fn unbiased_kl_lower_bound(spectrum: &SnrSpectrum, t: usize) -> f64 {
    let t = t as f64;
    let clamped: Vec<f64> = spectrum.eigenvalues.iter().map(|g| g.max(0.0)).collect();
    if clamped.is_empty() {
        return 0.0;
    }
    let mean = clamped.iter().sum::<f64>() / clamped.len() as f64;
    let top = (t * mean).ln_1p();
    let bound: f64 = clamped.iter().map(|g| top - (t * g).ln_1p()).sum::<f64>() * 0.5;
    bound.max(0.0)
}

/// Anchor variance `(1 + tγ̄) σ₀²` that minimizes the bound gap for an
/// unbiased prior-only ensemble.
pub fn bound_minimizing_prior_variance(spectrum: &SnrSpectrum, t: usize, prior_variance: f64) -> f64 {
    (1.0 + t as f64 * spectrum.mean_eigenvalue.max(0.0)) * prior_variance
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linreg::NoiseModel;
    use crate::numkit::InputDistribution;

    fn spectrum_of(values: &[f64]) -> SnrSpectrum {
        SnrSpectrum::from_gamma(Matrix::from_diag(values)).unwrap()
    }

    #[test]
    fn bound_hand_value() {
        let b = unbiased_kl_lower_bound(&spectrum_of(&[1.0, 9.0]), 10);
        let want = 0.5 * ((51.0f64 / 11.0).ln() + (51.0f64 / 91.0).ln());
        assert!((b - want).abs() < 1e-12);
        assert!((b - 0.477448).abs() < 1e-6);
    }

    #[test]
    fn bound_trivial_cases() {
        assert_eq!(unbiased_kl_lower_bound(&spectrum_of(&[2.0, 2.0, 2.0]), 50), 0.0);
        assert_eq!(unbiased_kl_lower_bound(&spectrum_of(&[1.0, 9.0]), 0), 0.0);
        assert!(unbiased_kl_lower_bound(&spectrum_of(&[-1e-9, 4.0]), 3) > 0.0);
    }

    #[test]
    fn homoscedastic_gamma_is_identity() {
        let setting = LinRegSetting::new(
            2.0,
            NoiseModel::Constant { variance: 2.0 },
            InputDistribution::StandardNormal { dim: 3 },
        )
        .unwrap();
        let n = 20_000;
        let s = snr_spectrum(&setting, n, RngStream::new(1, 0)).unwrap();
        let tol = 3.0 * (2.0 / n as f64).sqrt() * 3.0;
        for g in &s.eigenvalues {
            assert!((g - 1.0).abs() < tol, "{g}");
        }
        let mean = s.eigenvalues.iter().sum::<f64>() / 3.0;
        assert!((s.mean_eigenvalue - mean).abs() < 1e-12);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn gamma_scales_with_prior_variance() {
        let make = |pv: f64| {
            let setting = LinRegSetting::new(
                pv,
                NoiseModel::Quadratic { weights: vec![1.0, 0.2], floor: 0.1 },
                InputDistribution::StandardNormal { dim: 2 },
            )
            .unwrap();
            snr_spectrum(&setting, 5000, RngStream::new(3, 3)).unwrap()
        };
        let a = make(1.0);
        let b = make(2.0);
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((y - 2.0 * x).abs() < 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let setting = LinRegSetting::new(
            1.0,
            NoiseModel::Constant { variance: 1.0 },
            InputDistribution::StandardNormal { dim: 1 },
        )
        .unwrap();
        assert!(snr_spectrum(&setting, 999, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn optimal_anchor_variance() {
        let s = spectrum_of(&[1.0, 3.0]);
        assert_eq!(bound_minimizing_prior_variance(&s, 10, 0.5), 10.5);
    }
}
