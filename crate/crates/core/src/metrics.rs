//! Quality of predictive distributions: marginal and joint expected KL from
//! the true label law, the dyadic joint variant, and negative log-likelihood.
//!
//! An agent is a list of models read as the uniform mixture
//! `P̂(y₁..y_τ) = (1/M) Σₘ Πₜ pₘ(yₜ | xₜ)`. All likelihoods are accumulated
//! in log space.

use rand::Rng;
use rayon::prelude::*;

use crate::numkit::{Generator, InputSampler, RngStream};
use crate::stats::mean_and_std_error;
use crate::{Error, Result};

/// Probabilities below this are treated as this before taking logs.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

pub const DEFAULT_DYADIC_TAU: usize = 10;
pub const DEFAULT_ANCHOR_PAIRS: usize = 1000;
const MIN_QUERIES: usize = 100;

/// A map from inputs to class probabilities.
pub trait PredictiveModel: Sync {
    fn num_classes(&self) -> usize;

    fn class_probabilities(&self, x: &[f64]) -> Vec<f64>;
}

impl<M: PredictiveModel + ?Sized> PredictiveModel for &M {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn class_probabilities(&self, x: &[f64]) -> Vec<f64> {
        (**self).class_probabilities(x)
    }
}

impl<M: PredictiveModel + ?Sized> PredictiveModel for Box<M> {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn class_probabilities(&self, x: &[f64]) -> Vec<f64> {
        (**self).class_probabilities(x)
    }
}

/// Same probabilities at every input.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantModel(pub Vec<f64>);

impl PredictiveModel for ConstantModel {
    fn num_classes(&self) -> usize {
        self.0.len()
    }

    fn class_probabilities(&self, _x: &[f64]) -> Vec<f64> {
        self.0.clone()
    }
}

/// Model backed by a closure.
pub struct FnModel<F> {
    classes: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> FnModel<F> {
    pub fn new(classes: usize, f: F) -> Self {
        FnModel { classes, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> PredictiveModel for FnModel<F> {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn class_probabilities(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
}

/// `τ` inputs and the labels observed at them.
#[derive(Debug, Clone, PartialEq)]
pub struct JointQuery {
    inputs: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl JointQuery {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidTau(0));
        }
        if inputs.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: inputs.len(), found: labels.len() });
        }
        Ok(JointQuery { inputs, labels })
    }

    pub fn tau(&self) -> usize {
        self.labels.len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlEstimate {
    pub value: f64,
    pub std_error: f64,
    pub tau: usize,
    pub dyadic: bool,
    pub n_queries: usize,
}

fn floored_ln(p: f64) -> f64 {
    p.max(PROBABILITY_FLOOR).ln()
}

/// `Σₜ ln p(yₜ | xₜ)` for one model, reusing the forward pass when
/// consecutive inputs repeat.
pub fn model_log_likelihood<M: PredictiveModel + ?Sized>(model: &M, q: &JointQuery) -> f64 {
    let mut total = 0.0;
    let mut cached: Option<(&[f64], Vec<f64>)> = None;
    for (x, &y) in q.inputs.iter().zip(&q.labels) {
        let probs = match &cached {
            Some((prev, probs)) if *prev == x.as_slice() => probs,
            _ => {
                cached = Some((x.as_slice(), model.class_probabilities(x)));
                &cached.as_ref().unwrap().1
            }
        };
        total += floored_ln(probs.get(y).copied().unwrap_or(0.0));
    }
    total
}

/// Log of the mixture likelihood of the query labels.
pub fn joint_log_likelihood<M: PredictiveModel>(agent: &[M], q: &JointQuery) -> f64 {
    if agent.is_empty() {
        return f64::NEG_INFINITY;
    }
    let logs: Vec<f64> = agent.iter().map(|m| model_log_likelihood(m, q)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    max + sum.ln() - (agent.len() as f64).ln()
}

pub fn joint_likelihood<M: PredictiveModel>(agent: &[M], q: &JointQuery) -> f64 {
    joint_log_likelihood(agent, q).exp()
}

/// Draws a class index from a probability vector.
pub fn sample_categorical(probs: &[f64], g: &mut Generator) -> usize {
    let total: f64 = probs.iter().sum();
    let u = g.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

fn label_queries<T: PredictiveModel + ?Sized>(truth: &T, inputs: Vec<Vec<f64>>, g: &mut Generator) -> JointQuery {
    let mut labels = Vec::with_capacity(inputs.len());
    let mut cached: Option<(usize, Vec<f64>)> = None;
    for (i, x) in inputs.iter().enumerate() {
        let reuse = matches!(&cached, Some((j, _)) if inputs[*j] == *x);
        if !reuse {
            cached = Some((i, truth.class_probabilities(x)));
        }
        labels.push(sample_categorical(&cached.as_ref().unwrap().1, g));
    }
    JointQuery { inputs, labels }
}

/// `n` queries of `τ` i.i.d. inputs with labels drawn from `truth`. Query
/// `i` uses `rng.derive(i)`.
pub fn sample_queries<T: PredictiveModel + ?Sized, S: InputSampler + ?Sized>(
    truth: &T,
    inputs: &S,
    tau: usize,
    n: usize,
    rng: RngStream,
) -> Result<Vec<JointQuery>> {
    if tau == 0 {
        return Err(Error::InvalidTau(tau));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = rng.derive(i as u64).generator();
            let xs = (0..tau).map(|_| inputs.sample(&mut g)).collect();
            label_queries(truth, xs, &mut g)
        })
        .collect())
}

/// Queries built from two anchors `a, b`: `τ/2` copies of `a` followed by
/// `τ/2` copies of `b`, labels drawn from `truth`.
pub fn sample_dyadic_queries<T: PredictiveModel + ?Sized, S: InputSampler + ?Sized>(
    truth: &T,
    inputs: &S,
    tau: usize,
    n_anchor_pairs: usize,
    rng: RngStream,
) -> Result<Vec<JointQuery>> {
    if tau < 2 || tau % 2 != 0 {
        return Err(Error::InvalidTau(tau));
    }
    Ok((0..n_anchor_pairs)
        .into_par_iter()
        .map(|i| {
            let mut g = rng.derive(i as u64).generator();
            let a = inputs.sample(&mut g);
            let b = inputs.sample(&mut g);
            let xs = std::iter::repeat_n(a, tau / 2).chain(std::iter::repeat_n(b, tau / 2)).collect();
            label_queries(truth, xs, &mut g)
        })
        .collect())
}

/// Per-query `ln P*(Y) − ln P̂(Y)`.
pub fn kl_terms<T: PredictiveModel + ?Sized, M: PredictiveModel>(
    truth: &T,
    agent: &[M],
    queries: &[JointQuery],
) -> Vec<f64> {
    queries.par_iter().map(|q| model_log_likelihood(truth, q) - joint_log_likelihood(agent, q)).collect()
}

/// KL estimate on a fixed query set.
pub fn kl_on_queries<T: PredictiveModel + ?Sized, M: PredictiveModel>(
    truth: &T,
    agent: &[M],
    queries: &[JointQuery],
    dyadic: bool,
) -> KlEstimate {
    let terms = kl_terms(truth, agent, queries);
    let (value, std_error) = mean_and_std_error(&terms);
    KlEstimate { value, std_error, tau: queries.first().map_or(0, JointQuery::tau), dyadic, n_queries: terms.len() }
}

/// Expected KL between the true and agent joint label laws over `τ` i.i.d.
/// inputs.
pub fn dkl_tau<T: PredictiveModel + ?Sized, M: PredictiveModel, S: InputSampler + ?Sized>(
    truth: &T,
    agent: &[M],
    inputs: &S,
    tau: usize,
    n_queries: usize,
    rng: RngStream,
) -> Result<KlEstimate> {
    check_agent(agent, n_queries)?;
    let queries = sample_queries(truth, inputs, tau, n_queries, rng)?;
    Ok(kl_on_queries(truth, agent, &queries, false))
}

/// Joint KL over dyadic queries; `tau` must be even.
pub fn dkl_tau_dyadic<T: PredictiveModel + ?Sized, M: PredictiveModel, S: InputSampler + ?Sized>(
    truth: &T,
    agent: &[M],
    inputs: &S,
    tau: usize,
    n_anchor_pairs: usize,
    rng: RngStream,
) -> Result<KlEstimate> {
    check_agent(agent, n_anchor_pairs)?;
    let queries = sample_dyadic_queries(truth, inputs, tau, n_anchor_pairs, rng)?;
    Ok(kl_on_queries(truth, agent, &queries, true))
}

fn check_agent<M>(agent: &[M], n: usize) -> Result<()> {
    if agent.is_empty() {
        return Err(Error::InvalidArgument("agent needs at least one model".into()));
    }
    if n < MIN_QUERIES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_QUERIES} queries, got {n}")));
    }
    Ok(())
}

/// Mean negative log mixture likelihood.
pub fn nll_tau<M: PredictiveModel>(agent: &[M], queries: &[JointQuery]) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::InvalidArgument("nll needs at least one query".into()));
    }
    let terms: Vec<f64> = queries.par_iter().map(|q| -joint_log_likelihood(agent, q)).collect();
    let total: f64 = terms.iter().sum();
    Ok(total / queries.len() as f64)
}

/// Mean `ln P*(Y)` of the true model on the queries.
pub fn mean_truth_log_likelihood<T: PredictiveModel + ?Sized>(truth: &T, queries: &[JointQuery]) -> f64 {
    let terms: Vec<f64> = queries.par_iter().map(|q| model_log_likelihood(truth, q)).collect();
    let total: f64 = terms.iter().sum();
    total / queries.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::InputDistribution;

    fn q(inputs: Vec<Vec<f64>>, labels: Vec<usize>) -> JointQuery {
        JointQuery::new(inputs, labels).unwrap()
    }

    #[test]
    fn query_validation() {
        assert!(JointQuery::new(vec![], vec![]).is_err());
        assert!(JointQuery::new(vec![vec![0.0]], vec![0, 1]).is_err());
    }

    #[test]
    fn single_model_single_label() {
        let m = ConstantModel(vec![0.3, 0.7]);
        let query = q(vec![vec![0.0]], vec![1]);
        assert!((joint_likelihood(&[m.clone()], &query) - 0.7).abs() < 1e-15);
        let twice = joint_likelihood(&[m.clone(), m], &query);
        assert!((twice - 0.7).abs() < 1e-15);
    }

    #[test]
    fn two_model_mixture_by_hand() {
        // Tables depend on the sign of the input.
        let a = FnModel::new(2, |x: &[f64]| if x[0] > 0.0 { vec![0.9, 0.1] } else { vec![0.4, 0.6] });
        let b = FnModel::new(2, |x: &[f64]| if x[0] > 0.0 { vec![0.2, 0.8] } else { vec![0.5, 0.5] });
        let agent: Vec<&dyn PredictiveModel> = vec![&a, &b];
        let xs = vec![vec![1.0], vec![-1.0]];
        let mut total = 0.0;
        for (y1, y2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let pa = [0.9, 0.1][y1] * [0.4, 0.6][y2];
            let pb = [0.2, 0.8][y1] * [0.5, 0.5][y2];
            let got = joint_likelihood(&agent, &q(xs.clone(), vec![y1, y2]));
            assert!((got - 0.5 * (pa + pb)).abs() < 1e-15);
            total += got;
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_probabilities_are_floored() {
        let m = ConstantModel(vec![1.0, 0.0]);
        let l = joint_log_likelihood(&[m], &q(vec![vec![0.0]], vec![1]));
        assert!(l.is_finite());
        assert!((l - PROBABILITY_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn binary_kl_by_hand() {
        let truth = ConstantModel(vec![0.8, 0.2]);
        let agent = [ConstantModel(vec![0.5, 0.5])];
        let inputs = InputDistribution::StandardNormal { dim: 1 };
        let est = dkl_tau(&truth, &agent, &inputs, 1, 20_000, RngStream::new(1, 0)).unwrap();
        let want = 0.8 * (0.8f64 / 0.5).ln() + 0.2 * (0.2f64 / 0.5).ln();
        assert!((want - 0.19274).abs() < 1e-5);
        assert!((est.value - want).abs() < 4.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn self_kl_is_zero() {
        let truth = FnModel::new(3, |x: &[f64]| {
            let e = [x[0].exp(), 1.0, (-x[0]).exp()];
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        });
        let inputs = InputDistribution::StandardNormal { dim: 1 };
        let est = dkl_tau(&truth, &[&truth], &inputs, 4, 200, RngStream::new(2, 0)).unwrap();
        assert_eq!(est.value, 0.0);
        let est = dkl_tau_dyadic(&truth, &[&truth], &inputs, 10, 200, RngStream::new(2, 0)).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(est.dyadic);
    }

    #[test]
    fn dyadic_layout_and_tau_checks() {
        let truth = ConstantModel(vec![0.5, 0.5]);
        let inputs = InputDistribution::StandardNormal { dim: 2 };
        let qs = sample_dyadic_queries(&truth, &inputs, 6, 5, RngStream::new(3, 0)).unwrap();
        for query in &qs {
            let xs = query.inputs();
            assert!(xs[..3].iter().all(|x| *x == xs[0]));
            assert!(xs[3..].iter().all(|x| *x == xs[3]));
            assert_ne!(xs[0], xs[3]);
        }
        for tau in [0, 1, 3, 7] {
            assert_eq!(
                dkl_tau_dyadic(&truth, &[&truth], &inputs, tau, 100, RngStream::new(0, 0)).unwrap_err(),
                Error::InvalidTau(tau)
            );
        }
    }

    #[test]
    fn nll_examples_and_identity() {
        let uniform = [ConstantModel(vec![0.5, 0.5])];
        let queries = vec![q(vec![vec![0.0]], vec![0]), q(vec![vec![1.0]], vec![1])];
        assert!((nll_tau(&uniform, &queries).unwrap() - 2f64.ln()).abs() < 1e-15);

        let sure = [ConstantModel(vec![0.0, 1.0])];
        let own = vec![q(vec![vec![0.0]; 3], vec![1, 1, 1])];
        assert_eq!(nll_tau(&sure, &own).unwrap(), 0.0);
        assert!(nll_tau(&sure, &[]).is_err());

        let truth = ConstantModel(vec![0.3, 0.7]);
        let inputs = InputDistribution::StandardNormal { dim: 1 };
        let qs = sample_queries(&truth, &inputs, 3, 300, RngStream::new(5, 0)).unwrap();
        let kl = kl_on_queries(&truth, &uniform, &qs, false).value;
        let nll = nll_tau(&uniform, &qs).unwrap();
        let diff = kl - (nll + mean_truth_log_likelihood(&truth, &qs));
        assert!(diff.abs() < 1e-12, "{kl} {nll} {diff}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let truth = ConstantModel(vec![0.2, 0.3, 0.5]);
        let inputs = InputDistribution::StandardNormal { dim: 2 };
        let a = sample_queries(&truth, &inputs, 4, 20, RngStream::new(9, 9)).unwrap();
        let b = sample_queries(&truth, &inputs, 4, 20, RngStream::new(9, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn categorical_frequencies() {
        let mut g = RngStream::new(1, 2).generator();
        let probs = [0.1, 0.6, 0.3];
        let n = 30_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[sample_categorical(&probs, &mut g)] += 1;
        }
        for (c, p) in counts.iter().zip(probs) {
            let f = *c as f64 / n as f64;
            assert!((f - p).abs() < 5.0 * (p * (1.0 - p) / n as f64).sqrt());
        }
    }
}
