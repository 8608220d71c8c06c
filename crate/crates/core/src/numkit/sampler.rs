use rand::Rng;
use rand_distr::StandardNormal;

use super::rng::Generator;

/// Anything that can draw input vectors.
pub trait InputSampler: Sync {
    fn dim(&self) -> usize;
    fn sample(&self, g: &mut Generator) -> Vec<f64>;
}

/// Input distributions used across the experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum InputDistribution {
    /// `N(0, I_d)`.
    StandardNormal { dim: usize },
    /// Independent coordinates `N(0, scales[i]²)`.
    DiagonalNormal { scales: Vec<f64> },
    /// A standard normal scalar placed on a uniformly chosen coordinate axis.
    AxisAligned { dim: usize },
    /// Always the same point.
    PointMass { point: Vec<f64> },
}

impl InputSampler for InputDistribution {
    fn dim(&self) -> usize {
        match self {
            InputDistribution::StandardNormal { dim } | InputDistribution::AxisAligned { dim } => *dim,
            InputDistribution::DiagonalNormal { scales } => scales.len(),
            InputDistribution::PointMass { point } => point.len(),
        }
    }

    fn sample(&self, g: &mut Generator) -> Vec<f64> {
        match self {
            InputDistribution::StandardNormal { dim } => (0..*dim).map(|_| g.sample(StandardNormal)).collect(),
            InputDistribution::DiagonalNormal { scales } => {
                scales.iter().map(|s| s * g.sample::<f64, _>(StandardNormal)).collect()
            }
            InputDistribution::AxisAligned { dim } => {
                let mut x = vec![0.0; *dim];
                let axis = g.random_range(0..*dim);
                x[axis] = g.sample(StandardNormal);
                x
            }
            InputDistribution::PointMass { point } => point.clone(),
        }
    }
}

impl<S: InputSampler + ?Sized> InputSampler for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn sample(&self, g: &mut Generator) -> Vec<f64> {
        (**self).sample(g)
    }
}
