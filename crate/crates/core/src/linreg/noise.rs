use crate::{Error, Result};

/// Catalog of noise-variance functions `σ²(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// `σ²(x) = variance`.
    Constant { variance: f64 },
    /// `σ²(x) = Σᵢ weights[i]·xᵢ² + floor`.
    Quadratic { weights: Vec<f64>, floor: f64 },
    /// Two noise regimes split by a cone around one coordinate axis:
    /// `low_variance` when `|x[axis]| ≥ cone_ratio·‖x without axis‖`, else
    /// `high_variance`.
    TwoRegion { axis: usize, cone_ratio: f64, low_variance: f64, high_variance: f64 },
}

impl NoiseModel {
    pub fn variance(&self, x: &[f64]) -> f64 {
        match self {
            NoiseModel::Constant { variance } => *variance,
            NoiseModel::Quadratic { weights, floor } => {
                weights.iter().zip(x).map(|(w, v)| w * v * v).sum::<f64>() + floor
            }
            NoiseModel::TwoRegion { axis, cone_ratio, low_variance, high_variance } => {
                let rest: f64 = x.iter().enumerate().filter(|(i, _)| i != axis).map(|(_, v)| v * v).sum::<f64>().sqrt();
                if x[*axis].abs() >= cone_ratio * rest {
                    *low_variance
                } else {
                    *high_variance
                }
            }
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        match self {
            NoiseModel::Constant { variance } if !(*variance > 0.0 && variance.is_finite()) => {
                bad("constant noise variance must be positive")
            }
            NoiseModel::Quadratic { weights, floor } => {
                if weights.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: weights.len() });
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || !(*floor >= 0.0) {
                    return bad("quadratic noise weights and floor must be nonnegative");
                }
                Ok(())
            }
            NoiseModel::TwoRegion { axis, cone_ratio, low_variance, high_variance } => {
                if *axis >= dim {
                    return bad("two-region axis out of range");
                }
                if !(*cone_ratio >= 0.0) || !(*low_variance > 0.0) || !(*high_variance > 0.0) {
                    return bad("two-region parameters must be positive");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Scalar function of the input used for loss weights `ν(·)` and
/// bootstrap variances `σ̂²(·)`.
#[derive(Debug, Clone, PartialEq)]
pub enum InputFn {
    Constant(f64),
    /// `scale · σ²(x)`.
    NoiseScaled {
        scale: f64,
        noise: NoiseModel,
    },
    /// `scale / σ²(x)`.
    InverseNoiseScaled {
        scale: f64,
        noise: NoiseModel,
    },
}

impl InputFn {
    pub const ZERO: InputFn = InputFn::Constant(0.0);

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            InputFn::Constant(c) => *c,
            InputFn::NoiseScaled { scale, noise } => scale * noise.variance(x),
            InputFn::InverseNoiseScaled { scale, noise } => scale / noise.variance(x),
        }
    }

    /// True when the function is zero everywhere by construction.
    pub fn is_identically_zero(&self) -> bool {
        match self {
            InputFn::Constant(c) => *c == 0.0,
            InputFn::NoiseScaled { scale, .. } | InputFn::InverseNoiseScaled { scale, .. } => *scale == 0.0,
        }
    }

    pub(crate) fn scale_is_valid(&self, strictly_positive: bool) -> bool {
        let s = match self {
            InputFn::Constant(c) => *c,
            InputFn::NoiseScaled { scale, .. } | InputFn::InverseNoiseScaled { scale, .. } => *scale,
        };
        s.is_finite() && if strictly_positive { s > 0.0 } else { s >= 0.0 }
    }
}
