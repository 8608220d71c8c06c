use rand::Rng;
use rand_distr::StandardNormal;

use super::noise::NoiseModel;
use crate::numkit::{dot, Generator, InputDistribution, InputSampler};
use crate::{Error, Result};

/// Ordered training pairs `(xₜ, yₜ₊₁)` sharing one input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Dataset { dim, inputs: Vec::new(), outputs: Vec::new() }
    }

    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (Vec<f64>, f64)>) -> Result<Self> {
        let mut d = Dataset::new(dim);
        for (x, y) in pairs {
            d.push(x, y)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("dataset values must be finite".into()));
        }
        self.inputs.push(x);
        self.outputs.push(y);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.inputs.iter().map(Vec::as_slice).zip(self.outputs.iter().copied())
    }
}

/// Everything about a regression problem except the realized `θ*`:
/// prior scale, noise function and input distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct LinRegSetting {
    pub prior_variance: f64,
    pub noise: NoiseModel,
    pub inputs: InputDistribution,
}

impl LinRegSetting {
    pub fn new(prior_variance: f64, noise: NoiseModel, inputs: InputDistribution) -> Result<Self> {
        if !(prior_variance > 0.0 && prior_variance.is_finite()) {
            return Err(Error::InvalidArgument("prior variance must be positive".into()));
        }
        noise.validate(inputs.dim())?;
        Ok(LinRegSetting { prior_variance, noise, inputs })
    }

    pub fn dim(&self) -> usize {
        self.inputs.dim()
    }

    pub fn noise_variance(&self, x: &[f64]) -> f64 {
        self.noise.variance(x)
    }

    /// Draws `θ* ~ N(0, σ₀² I)`.
    pub fn sample_environment(&self, g: &mut Generator) -> LinRegEnvironment {
        let sd = self.prior_variance.sqrt();
        let theta_star = (0..self.dim()).map(|_| sd * g.sample::<f64, _>(StandardNormal)).collect();
        LinRegEnvironment { theta_star, setting: self.clone() }
    }
}

/// A regression environment: the setting together with a realized `θ*`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinRegEnvironment {
    pub theta_star: Vec<f64>,
    pub setting: LinRegSetting,
}

impl LinRegEnvironment {
    pub fn new(theta_star: Vec<f64>, setting: LinRegSetting) -> Result<Self> {
        if theta_star.len() != setting.dim() {
            return Err(Error::DimensionMismatch { expected: setting.dim(), found: theta_star.len() });
        }
        Ok(LinRegEnvironment { theta_star, setting })
    }

    pub fn mean_output(&self, x: &[f64]) -> f64 {
        dot(&self.theta_star, x)
    }

    /// One noisy observation at `x`.
    pub fn observe(&self, x: &[f64], g: &mut Generator) -> f64 {
        let sd = self.setting.noise_variance(x).sqrt();
        self.mean_output(x) + sd * g.sample::<f64, _>(StandardNormal)
    }

    /// `t` i.i.d. pairs with inputs from the setting's input distribution.
    pub fn sample_dataset(&self, t: usize, g: &mut Generator) -> Dataset {
        let mut data = Dataset::new(self.setting.dim());
        for _ in 0..t {
            let x = self.setting.inputs.sample(g);
            let y = self.observe(&x, g);
            data.inputs.push(x);
            data.outputs.push(y);
        }
        data
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::RngStream;

    #[test]
    fn dataset_rejects_wrong_dimension() {
        let mut d = Dataset::new(2);
        assert!(d.push(vec![1.0], 0.0).is_err());
        assert!(d.push(vec![1.0, f64::INFINITY], 0.0).is_err());
        d.push(vec![1.0, 2.0], 3.0).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn setting_validation() {
        let inputs = InputDistribution::StandardNormal { dim: 2 };
        assert!(LinRegSetting::new(0.0, NoiseModel::Constant { variance: 1.0 }, inputs.clone()).is_err());
        assert!(LinRegSetting::new(1.0, NoiseModel::Constant { variance: 1.0 }, inputs).is_ok());
    }

    #[test]
    fn sampling_is_reproducible() {
        let s = LinRegSetting::new(
            1.0,
            NoiseModel::Constant { variance: 0.5 },
            InputDistribution::StandardNormal { dim: 3 },
        )
        .unwrap();
        let stream = RngStream::new(1, 1);
        let run = || {
            let mut g = stream.generator();
            let env = s.sample_environment(&mut g);
            env.sample_dataset(5, &mut g)
        };
        assert_eq!(run(), run());
    }
}
