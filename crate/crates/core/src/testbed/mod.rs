//! Synthetic classification problems drawn from random networks, and
//! ensembles of small networks trained on them.
//!
//! A problem samples a `d → 50 → 50 → K` ReLU network, draws standard-normal
//! inputs and labels from `softmax(logits/ρ)`, and can corrupt a fraction of
//! the label-1 training rows to label 0. Agents are ensembles whose members
//! add a frozen random prior network to their logits and may reweight the
//! training rows, trained with mini-batch SGD on the weighted cross-entropy.

mod eval;
mod member;
mod mlp;
mod problem;

pub use eval::{evaluate_agent, prior_scale_grid, weight_decay_grid, AgentEvaluation, EvalConfig};
pub use member::{
    loss_and_gradient, train_ensemble, train_member, Batch, BootstrapMode, ClassifierMember, LrSchedule, TrainConfig,
};
pub use mlp::{log_softmax, softmax, DenseLayer, MlpParams};
pub use problem::{architecture, generate_problem, GenerativeModel, ProblemConfig, TestbedProblem, HIDDEN_UNITS};
