use rand::seq::index;

use super::mlp::{softmax, MlpParams};
use crate::metrics::{sample_categorical, PredictiveModel};
use crate::numkit::{InputDistribution, InputSampler, RngStream};
use crate::{Error, Result};

pub const HIDDEN_UNITS: usize = 50;

/// Layer sizes `d → 50 → 50 → classes`.
pub fn architecture(input_dim: usize, classes: usize) -> [usize; 4] {
    [input_dim, HIDDEN_UNITS, HIDDEN_UNITS, classes]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConfig {
    pub input_dim: usize,
    pub train_size: usize,
    pub temperature: f64,
    pub flip_fraction: f64,
    pub num_classes: usize,
}

impl ProblemConfig {
    pub fn binary(input_dim: usize, train_size: usize, temperature: f64, flip_fraction: f64) -> Self {
        ProblemConfig { input_dim, train_size, temperature, flip_fraction, num_classes: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidArgument("input dimension must be positive".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!("temperature must be positive, got {}", self.temperature)));
        }
        if !(0.0..1.0).contains(&self.flip_fraction) {
            return Err(Error::InvalidArgument(format!("flip fraction must be in [0, 1), got {}", self.flip_fraction)));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidArgument("need at least two classes".into()));
        }
        Ok(())
    }
}

/// Label law `softmax(logits(x)/ρ)` of a random network.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel {
    pub params: MlpParams,
    pub temperature: f64,
}

impl PredictiveModel for GenerativeModel {
    fn num_classes(&self) -> usize {
        self.params.output_dim()
    }

    fn class_probabilities(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self.params.logits(x).iter().map(|l| l / self.temperature).collect();
        softmax(&logits)
    }
}

/// A sampled classification problem: the true model and a training set
/// whose labels may be partly corrupted.
#[derive(Debug, Clone, PartialEq)]
pub struct TestbedProblem {
    pub config: ProblemConfig,
    pub truth: GenerativeModel,
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Labels as drawn before any flipping.
    pub clean_labels: Vec<usize>,
}

impl TestbedProblem {
    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn train_size(&self) -> usize {
        self.labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn input_distribution(&self) -> InputDistribution {
        InputDistribution::StandardNormal { dim: self.config.input_dim }
    }

    pub fn flipped_count(&self) -> usize {
        self.labels.iter().zip(&self.clean_labels).filter(|(a, b)| a != b).count()
    }
}

/// Samples the generative network, `T` standard-normal inputs and their
/// labels, then moves exactly `round(f · #ones)` randomly chosen label-1
/// rows to label 0.
pub fn generate_problem(config: ProblemConfig, rng: RngStream) -> Result<TestbedProblem> {
    config.validate()?;
    let mut g = rng.derive(0).generator();
    let params = MlpParams::gaussian(&architecture(config.input_dim, config.num_classes), &mut g)?;
    let truth = GenerativeModel { params, temperature: config.temperature };

    let sampler = InputDistribution::StandardNormal { dim: config.input_dim };
    let mut g = rng.derive(1).generator();
    let mut inputs = Vec::with_capacity(config.train_size);
    let mut clean_labels = Vec::with_capacity(config.train_size);
    for _ in 0..config.train_size {
        let x = sampler.sample(&mut g);
        clean_labels.push(sample_categorical(&truth.class_probabilities(&x), &mut g));
        inputs.push(x);
    }

    let mut labels = clean_labels.clone();
    let ones: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let n_flip = (config.flip_fraction * ones.len() as f64).round() as usize;
    let mut g = rng.derive(2).generator();
    for k in index::sample(&mut g, ones.len(), n_flip) {
        labels[ones[k]] = 0;
    }
    Ok(TestbedProblem { config, truth, inputs, labels, clean_labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flips_exact_count_of_ones() {
        let cfg = ProblemConfig::binary(3, 400, 0.5, 0.25);
        let p = generate_problem(cfg, RngStream::new(1, 0)).unwrap();
        let ones = p.clean_labels.iter().filter(|&&y| y == 1).count();
        assert_eq!(p.flipped_count(), (0.25 * ones as f64).round() as usize);
        for (a, b) in p.labels.iter().zip(&p.clean_labels) {
            assert!(a == b || (*b == 1 && *a == 0));
        }
    }

    #[test]
    fn no_flip_keeps_labels() {
        let p = generate_problem(ProblemConfig::binary(2, 50, 0.1, 0.0), RngStream::new(2, 0)).unwrap();
        assert_eq!(p.labels, p.clean_labels);
        assert_eq!(p.train_size(), 50);
    }

    #[test]
    fn cold_temperature_gives_argmax_labels() {
        let p = generate_problem(ProblemConfig::binary(4, 3000, 1e-6, 0.0), RngStream::new(3, 0)).unwrap();
        let agree = p
            .inputs
            .iter()
            .zip(&p.labels)
            .filter(|(x, &y)| {
                let l = p.truth.params.logits(x);
                (if l[1] > l[0] { 1 } else { 0 }) == y
            })
            .count();
        assert!(agree as f64 / 3000.0 > 0.999);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(generate_problem(ProblemConfig::binary(0, 10, 0.1, 0.0), RngStream::new(0, 0)).is_err());
        assert!(generate_problem(ProblemConfig::binary(2, 10, 0.0, 0.0), RngStream::new(0, 0)).is_err());
        assert!(generate_problem(ProblemConfig::binary(2, 10, 0.1, 1.0), RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn problems_are_reproducible() {
        let cfg = ProblemConfig::binary(5, 30, 0.1, 0.25);
        assert_eq!(
            generate_problem(cfg, RngStream::new(4, 4)).unwrap(),
            generate_problem(cfg, RngStream::new(4, 4)).unwrap()
        );
    }
}
