//! Heteroscedastic linear bandits played by Thompson sampling with
//! infinitely large ensembles.
//!
//! Each step the agent refits its perturbed-loss law to the whole history,
//! draws one parameter vector from it and pulls the action that looks best
//! under that draw. Regret is measured against the known optimal mean reward.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::linreg::{ensemble_law, Dataset, EnsembleSpec, InputFn, NoiseModel};
use crate::numkit::{dot, GaussianSampler, Generator, RngStream};
use crate::stats::mean_and_std_error;
use crate::{EnsembleFamily, Error, Result};

pub const DEFAULT_HORIZON: usize = 200;
pub const DEFAULT_PROBLEMS: usize = 100;

/// A finite set of actions with linear mean rewards `θ*ᵀx` and noise
/// variance `xᵀ Σ_obs x`.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditProblem {
    pub actions: Vec<Vec<f64>>,
    pub theta_star: Vec<f64>,
    /// Diagonal of `Σ_obs`.
    pub obs_cov: Vec<f64>,
    pub prior_variance: f64,
}

impl BanditProblem {
    pub fn new(actions: Vec<Vec<f64>>, theta_star: Vec<f64>, obs_cov: Vec<f64>, prior_variance: f64) -> Result<Self> {
        let d = theta_star.len();
        if actions.len() < 2 {
            return Err(Error::InvalidArgument("need at least two actions".into()));
        }
        if let Some(a) = actions.iter().find(|a| a.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: a.len() });
        }
        if obs_cov.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: obs_cov.len() });
        }
        if obs_cov.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::InvalidArgument("observation variances must lie in (0, 1)".into()));
        }
        if !(prior_variance > 0.0 && prior_variance.is_finite()) {
            return Err(Error::InvalidArgument("prior variance must be positive".into()));
        }
        let p = BanditProblem { actions, theta_star, obs_cov, prior_variance };
        if p.actions.iter().any(|a| !(p.noise_variance(a) > 0.0)) {
            return Err(Error::InvalidArgument("every action needs positive noise variance".into()));
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel::Quadratic { weights: self.obs_cov.clone(), floor: 0.0 }
    }

    pub fn noise_variance(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.obs_cov).map(|(xi, s)| s * xi * xi).sum()
    }

    pub fn mean_reward(&self, action: usize) -> f64 {
        dot(&self.theta_star, &self.actions[action])
    }

    pub fn optimal_reward(&self) -> f64 {
        (0..self.actions.len()).map(|a| self.mean_reward(a)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn regret(&self, action: usize) -> f64 {
        self.optimal_reward() - self.mean_reward(action)
    }

    /// Reward of one pull: mean plus Gaussian noise.
    pub fn pull(&self, action: usize, g: &mut Generator) -> f64 {
        let x = &self.actions[action];
        self.mean_reward(action) + self.noise_variance(x).sqrt() * g.sample::<f64, _>(StandardNormal)
    }
}

/// Actions `N(0, I)`, `θ* ~ N(0, σ₀² I)` and `Σ_obs` diagonal `Uniform(0, 1)`.
pub fn sample_problem(d: usize, n_actions: usize, prior_variance: f64, rng: RngStream) -> Result<BanditProblem> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let mut g = rng.generator();
    let mut normal =
        |n: usize, sd: f64| -> Vec<f64> { (0..n).map(|_| sd * g.sample::<f64, _>(StandardNormal)).collect() };
    let actions = (0..n_actions).map(|_| normal(d, 1.0)).collect();
    let theta_star = normal(d, prior_variance.sqrt());
    let mut obs_cov = Vec::with_capacity(d);
    while obs_cov.len() < d {
        let u: f64 = g.random();
        if u > 0.0 {
            obs_cov.push(u);
        }
    }
    BanditProblem::new(actions, theta_star, obs_cov, prior_variance)
}

/// Agent families in the bandit comparison; `PWeighted` is the prior-only
/// family with data weights `1/σ²(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyFamily {
    N,
    P,
    PWeighted,
    BP,
}

impl PolicyFamily {
    pub const ALL: [PolicyFamily; 4] = [PolicyFamily::N, PolicyFamily::P, PolicyFamily::PWeighted, PolicyFamily::BP];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyFamily::N => "ensemble-n",
            PolicyFamily::P => "ensemble-p",
            PolicyFamily::PWeighted => "ensemble-p-weighted",
            PolicyFamily::BP => "ensemble-bp",
        }
    }

    fn tag(&self) -> u64 {
        match self {
            PolicyFamily::N => 1,
            PolicyFamily::P => 2,
            PolicyFamily::PWeighted => 3,
            PolicyFamily::BP => 4,
        }
    }

    pub fn base_family(&self) -> EnsembleFamily {
        match self {
            PolicyFamily::N => EnsembleFamily::N,
            PolicyFamily::P | PolicyFamily::PWeighted => EnsembleFamily::P,
            PolicyFamily::BP => EnsembleFamily::BP,
        }
    }
}

impl fmt::Display for PolicyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyFamily::ALL
            .into_iter()
            .find(|p| p.name() == s || p.name().trim_start_matches("ensemble-") == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown policy family '{s}'")))
    }
}

/// A Thompson-sampling agent: family plus its tunable knobs. Data weights
/// are 1 for `N`/`P` and `1/σ²(x)` for `PWeighted`; `BP` ignores the knobs
/// and uses the posterior-matching parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentPolicy {
    pub family: PolicyFamily,
    pub lambda: f64,
    pub prior_sample_variance: f64,
}

impl AgentPolicy {
    pub fn new(family: PolicyFamily, lambda: f64, prior_sample_variance: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidSpec(format!("lambda must be positive, got {lambda}")));
        }
        let prior_sample_variance = if family == PolicyFamily::N { 0.0 } else { prior_sample_variance };
        if !(prior_sample_variance >= 0.0 && prior_sample_variance.is_finite()) {
            return Err(Error::InvalidSpec("prior sample variance must be nonnegative".into()));
        }
        Ok(AgentPolicy { family, lambda, prior_sample_variance })
    }

    pub fn matched_bootstrap(prior_variance: f64) -> Self {
        AgentPolicy { family: PolicyFamily::BP, lambda: 1.0 / prior_variance, prior_sample_variance: prior_variance }
    }

    /// The perturbed-loss knobs this policy uses on `problem`.
    pub fn spec_for(&self, problem: &BanditProblem) -> Result<EnsembleSpec> {
        let noise = problem.noise_model();
        match self.family {
            PolicyFamily::N => EnsembleSpec::ensemble_n(self.lambda, InputFn::Constant(1.0)),
            PolicyFamily::P => {
                EnsembleSpec::ensemble_p(self.lambda, InputFn::Constant(1.0), self.prior_sample_variance)
            }
            PolicyFamily::PWeighted => EnsembleSpec::ensemble_p(
                self.lambda,
                InputFn::InverseNoiseScaled { scale: 1.0, noise },
                self.prior_sample_variance,
            ),
            PolicyFamily::BP => EnsembleSpec::new(
                EnsembleFamily::BP,
                1.0 / problem.prior_variance,
                InputFn::InverseNoiseScaled { scale: 1.0, noise: noise.clone() },
                problem.prior_variance,
                InputFn::NoiseScaled { scale: 1.0, noise },
            ),
        }
    }

    /// `key=value` pairs naming the knobs that matter for this family.
    pub fn describe(&self) -> String {
        match self.family {
            PolicyFamily::N => format!("lambda={}", self.lambda),
            PolicyFamily::P | PolicyFamily::PWeighted => {
                format!("lambda={};prior_sample_variance={}", self.lambda, self.prior_sample_variance)
            }
            PolicyFamily::BP => "matched".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub action: usize,
    pub reward: f64,
    pub regret: f64,
}

/// Index of the largest `θᵀx`, lowest index on ties.
pub fn greedy_action(problem: &BanditProblem, theta: &[f64]) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, x) in problem.actions.iter().enumerate() {
        let v = dot(theta, x);
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

/// Acts greedily on `theta` and observes a reward drawn from `noise`.
pub fn act(problem: &BanditProblem, theta: &[f64], noise: &mut Generator) -> StepOutcome {
    let action = greedy_action(problem, theta);
    StepOutcome { action, reward: problem.pull(action, noise), regret: problem.regret(action) }
}

/// One Thompson-sampling step: fit the ensemble law to `history`, draw one
/// member from `sample`, act on it with reward noise from `noise`.
pub fn ts_step(
    problem: &BanditProblem,
    history: &Dataset,
    spec: &EnsembleSpec,
    sample: &mut Generator,
    noise: &mut Generator,
) -> Result<StepOutcome> {
    if history.dim() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), found: history.dim() });
    }
    let law = ensemble_law(spec, history)?;
    let theta = GaussianSampler::new(&law)?.sample(sample);
    Ok(act(problem, &theta, noise))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub per_step: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl RegretTrace {
    pub fn from_per_step(per_step: Vec<f64>) -> Self {
        let cumulative = per_step
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect();
        RegretTrace { per_step, cumulative }
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Plays `horizon` steps. Step `t` draws its member from
/// `stream.derive_path(&[t, 0])` and its reward noise from `[t, 1]`.
pub fn run_episode(
    problem: &BanditProblem,
    policy: &AgentPolicy,
    horizon: usize,
    stream: RngStream,
) -> Result<RegretTrace> {
    let spec = policy.spec_for(problem)?;
    let mut history = Dataset::new(problem.dim());
    let mut regrets = Vec::with_capacity(horizon);
    for t in 0..horizon as u64 {
        let mut sample = stream.derive_path(&[t, 0]).generator();
        let mut noise = stream.derive_path(&[t, 1]).generator();
        let step = ts_step(problem, &history, &spec, &mut sample, &mut noise)?;
        history.push(problem.actions[step.action].clone(), step.reward)?;
        regrets.push(step.regret);
    }
    Ok(RegretTrace::from_per_step(regrets))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanditConfig {
    pub dim: usize,
    pub n_actions: usize,
    pub horizon: usize,
    pub n_problems: usize,
    pub prior_variance: f64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        BanditConfig {
            dim: 2,
            n_actions: 4,
            horizon: DEFAULT_HORIZON,
            n_problems: DEFAULT_PROBLEMS,
            prior_variance: 1.0,
        }
    }
}

/// Stream for problem `j`; every policy sees the same problems.
fn problem_stream(rng: RngStream, j: usize) -> RngStream {
    rng.derive_path(&[0, j as u64])
}

/// Stream for the agent's own randomness on problem `j`.
fn episode_stream(rng: RngStream, j: usize, family: PolicyFamily) -> RngStream {
    rng.derive_path(&[1, j as u64, family.tag()])
}

pub fn problems(config: &BanditConfig, rng: RngStream) -> Result<Vec<BanditProblem>> {
    (0..config.n_problems)
        .map(|j| sample_problem(config.dim, config.n_actions, config.prior_variance, problem_stream(rng, j)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyResult {
    pub policy: AgentPolicy,
    /// Mean cumulative regret after each step.
    pub mean_cumulative: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Final cumulative regret on each problem, in problem order.
    pub final_regrets: Vec<f64>,
}

impl PolicyResult {
    pub fn final_mean(&self) -> f64 {
        self.mean_cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn final_std_error(&self) -> f64 {
        self.std_error.last().copied().unwrap_or(0.0)
    }
}

/// Runs every policy on the same `n_problems` sampled problems.
pub fn evaluate(config: &BanditConfig, policies: &[AgentPolicy], rng: RngStream) -> Result<Vec<PolicyResult>> {
    let problems = problems(config, rng)?;
    policies
        .iter()
        .map(|policy| {
            let traces = problems
                .par_iter()
                .enumerate()
                .map(|(j, p)| run_episode(p, policy, config.horizon, episode_stream(rng, j, policy.family)))
                .collect::<Result<Vec<_>>>()?;
            let mut mean_cumulative = Vec::with_capacity(config.horizon);
            let mut std_error = Vec::with_capacity(config.horizon);
            for t in 0..config.horizon {
                let column: Vec<f64> = traces.iter().map(|tr| tr.cumulative[t]).collect();
                let (m, se) = mean_and_std_error(&column);
                mean_cumulative.push(m);
                std_error.push(se);
            }
            let final_regrets = traces.iter().map(RegretTrace::final_regret).collect();
            Ok(PolicyResult { policy: *policy, mean_cumulative, std_error, final_regrets })
        })
        .collect()
}

/// Candidate knob values for tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrid {
    pub lambdas: Vec<f64>,
    pub prior_sample_variances: Vec<f64>,
}

impl Default for PolicyGrid {
    fn default() -> Self {
        let powers = |lo: i32, hi: i32| (lo..=hi).map(|k| 10f64.powf(k as f64 / 2.0)).collect::<Vec<_>>();
        PolicyGrid { lambdas: powers(-4, 4), prior_sample_variances: powers(-4, 4) }
    }
}

impl PolicyGrid {
    /// Policies allowed for `family`: `N` varies only `λ`, `BP` is the
    /// single posterior-matching policy.
    pub fn candidates(&self, family: PolicyFamily, prior_variance: f64) -> Result<Vec<AgentPolicy>> {
        match family {
            PolicyFamily::BP => Ok(vec![AgentPolicy::matched_bootstrap(prior_variance)]),
            PolicyFamily::N => self.lambdas.iter().map(|&l| AgentPolicy::new(family, l, 0.0)).collect(),
            PolicyFamily::P | PolicyFamily::PWeighted => self
                .lambdas
                .iter()
                .flat_map(|&l| self.prior_sample_variances.iter().map(move |&v| AgentPolicy::new(family, l, v)))
                .collect(),
        }
    }
}

/// Independent stream ids for tuning and evaluation under one seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanditStreams {
    pub evaluation: RngStream,
    pub tuning: RngStream,
}

impl BanditStreams {
    pub fn new(seed: u64) -> Self {
        BanditStreams { evaluation: RngStream::new(seed, 1), tuning: RngStream::new(seed, 2) }
    }
}

/// Grid search for the candidate with the lowest mean final regret on the
/// problems drawn from `rng`; earlier candidates win ties.
pub fn tune_policy(
    family: PolicyFamily,
    config: &BanditConfig,
    grid: &PolicyGrid,
    rng: RngStream,
) -> Result<AgentPolicy> {
    let candidates = grid.candidates(family, config.prior_variance)?;
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("tuning grid is empty".into()));
    }
    if candidates.len() == 1 {
        return Ok(candidates[0]);
    }
    let results = evaluate(config, &candidates, rng)?;
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.final_mean() < results[best].final_mean() {
            best = i;
        }
    }
    Ok(candidates[best])
}
