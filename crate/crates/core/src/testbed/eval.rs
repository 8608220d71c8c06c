use super::problem::TestbedProblem;
use crate::metrics::{dkl_tau, dkl_tau_dyadic, KlEstimate, PredictiveModel, DEFAULT_ANCHOR_PAIRS, DEFAULT_DYADIC_TAU};
use crate::numkit::RngStream;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub marginal_queries: usize,
    pub joint_tau: usize,
    pub anchor_pairs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { marginal_queries: 1000, joint_tau: DEFAULT_DYADIC_TAU, anchor_pairs: DEFAULT_ANCHOR_PAIRS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentEvaluation {
    pub marginal: KlEstimate,
    pub joint: KlEstimate,
}

/// Marginal (`τ = 1`) and dyadic joint KL of an agent against the problem's
/// clean label law. Agents scored with the same `rng` see the same queries.
pub fn evaluate_agent<M: PredictiveModel>(
    problem: &TestbedProblem,
    members: &[M],
    config: &EvalConfig,
    rng: RngStream,
) -> Result<AgentEvaluation> {
    let inputs = problem.input_distribution();
    let marginal = dkl_tau(&problem.truth, members, &inputs, 1, config.marginal_queries, rng.derive(1))?;
    let joint = dkl_tau_dyadic(&problem.truth, members, &inputs, config.joint_tau, config.anchor_pairs, rng.derive(2))?;
    Ok(AgentEvaluation { marginal, joint })
}

const SWEEP_MULTIPLIERS: [f64; 5] = [0.1, 0.3, 1.0, 3.0, 10.0];

/// Weight decay candidates `{0.1, 0.3, 1, 3, 10} · d/√ρ`.
pub fn weight_decay_grid(input_dim: usize, temperature: f64) -> Vec<f64> {
    let base = input_dim as f64 / temperature.sqrt();
    SWEEP_MULTIPLIERS.iter().map(|m| m * base).collect()
}

/// Prior scale candidates `{0.3, 1, 3} × {1/√ρ, 1/ρ}`.
pub fn prior_scale_grid(temperature: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for c in [0.3, 1.0, 3.0] {
        out.push(c / temperature.sqrt());
        out.push(c / temperature);
    }
    out
}
