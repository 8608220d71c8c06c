//! Experiment configurations and the three suite runners.

use std::fmt::Write as _;

use ensemble_lab::bandit::{self, tune_policy, AgentPolicy, BanditConfig, BanditStreams, PolicyFamily, PolicyGrid};
use ensemble_lab::linreg::{
    bound_minimizing_prior_variance, expected_kl_mc, snr_spectrum, unbiased_kl_lower_bound, EnsembleSpec, InputFn,
    LinRegSetting, NoiseModel,
};
use ensemble_lab::numkit::{InputDistribution, RngStream};
use ensemble_lab::testbed::{
    evaluate_agent, generate_problem, train_ensemble, BootstrapMode, EvalConfig, LrSchedule, ProblemConfig, TrainConfig,
};
use ensemble_lab::EnsembleFamily;
use sha2::{Digest, Sha256};

use crate::config::{RawConfig, Section};
use crate::error::{CliError, CliResult};
use crate::results::{join_pairs, render_tsv, ResultRow};

pub const SUITES: [&str; 3] = ["linreg", "testbed", "bandit"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub suite: SuiteConfig,
    /// Fully resolved configuration (defaults filled in), used for hashing.
    pub canonical: RawConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SuiteConfig {
    Linreg(LinregParams),
    Testbed(TestbedParams),
    Bandit(BanditParams),
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let raw = RawConfig::parse(text)?;
        let mut top = Section::new("", raw.section("").unwrap_or(&[]));
        let suite = top
            .choice("suite", "", &SUITES)
            .map_err(|_| CliError::config(format!("top-level 'suite' must be one of {}", SUITES.join(", "))))?;
        let top_entries = top.finish()?;
        if let Some((name, _)) = raw.sections.iter().find(|(n, _)| !n.is_empty() && *n != suite) {
            return Err(CliError::config(format!("unknown section [{name}] for suite {suite}")));
        }
        let mut section = Section::new(&suite, raw.section(&suite).unwrap_or(&[]));
        let parsed = match suite.as_str() {
            "linreg" => SuiteConfig::Linreg(LinregParams::read(&mut section)?),
            "testbed" => SuiteConfig::Testbed(TestbedParams::read(&mut section)?),
            _ => SuiteConfig::Bandit(BanditParams::read(&mut section)?),
        };
        let resolved = section.finish()?;
        let canonical = RawConfig { sections: vec![(String::new(), top_entries), (suite, resolved)] };
        Ok(ExperimentConfig { suite: parsed, canonical })
    }

    pub fn suite_name(&self) -> &'static str {
        match self.suite {
            SuiteConfig::Linreg(_) => "linreg",
            SuiteConfig::Testbed(_) => "testbed",
            SuiteConfig::Bandit(_) => "bandit",
        }
    }

    /// SHA-256 of the resolved configuration text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical.render().as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn run(&self, seed: u64) -> CliResult<RunOutput> {
        match &self.suite {
            SuiteConfig::Linreg(p) => p.run(seed),
            SuiteConfig::Testbed(p) => p.run(seed),
            SuiteConfig::Bandit(p) => p.run(seed),
        }
    }
}

/// Everything a run writes besides the manifest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub text_files: Vec<(String, String)>,
    pub binary_files: Vec<(String, Vec<u8>)>,
}

fn families(section: &mut Section, default: &[&str]) -> CliResult<Vec<EnsembleFamily>> {
    let names: Vec<String> = default.iter().map(|s| s.to_string()).collect();
    let names = section.list::<String>("agents", &names, |s| s.parse::<EnsembleFamily>().is_ok())?;
    let mut out: Vec<EnsembleFamily> = names.iter().map(|s| s.parse().unwrap()).collect();
    let before = out.len();
    out.dedup();
    if out.len() != before {
        return Err(CliError::config("agents lists a family twice"));
    }
    Ok(out)
}

fn positive(v: f64) -> bool {
    v > 0.0
}

fn nonnegative(v: f64) -> bool {
    v >= 0.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinregParams {
    pub setting: LinRegSetting,
    pub noise_name: String,
    pub input_name: String,
    pub train_size: usize,
    pub n_datasets: usize,
    pub mc_samples: usize,
    pub agents: Vec<EnsembleFamily>,
    pub weight_scale: f64,
    /// `None` selects the bound-minimizing anchor variance.
    pub p_prior_sample_variance: Option<f64>,
}

impl LinregParams {
    fn read(s: &mut Section) -> CliResult<Self> {
        let dim = s.count("dim", 2, 1, 100)?;
        let train_size = s.count("train_size", 10, 0, 1_000_000)?;
        let prior_variance = s.real("prior_variance", 1.0, "positive", positive)?;
        let noise_name = s.choice("noise", "two-region", &["constant", "quadratic", "two-region"])?;
        let noise = match noise_name.as_str() {
            "constant" => NoiseModel::Constant { variance: s.real("noise_variance", 1.0, "positive", positive)? },
            "quadratic" => NoiseModel::Quadratic {
                weights: s.list("noise_weights", &vec![1.0; dim], |v: &f64| v.is_finite() && *v >= 0.0)?,
                floor: s.real("noise_floor", 0.1, "positive", positive)?,
            },
            _ => NoiseModel::TwoRegion {
                axis: s.count("region_axis", 0, 0, dim - 1)?,
                cone_ratio: s.real("cone_ratio", 2.0, "positive", positive)?,
                low_variance: s.real("low_variance", 0.05, "positive", positive)?,
                high_variance: s.real("high_variance", 5.0, "positive", positive)?,
            },
        };
        let input_name = s.choice("inputs", "standard-normal", &["standard-normal", "axis-aligned"])?;
        let inputs = match input_name.as_str() {
            "axis-aligned" => InputDistribution::AxisAligned { dim },
            _ => InputDistribution::StandardNormal { dim },
        };
        let setting = LinRegSetting::new(prior_variance, noise, inputs).map_err(|e| CliError::config(e.to_string()))?;
        let n_datasets = s.count("n_datasets", 100, 30, 1_000_000)?;
        let mc_samples = s.count("mc_samples", 100_000, 1000, 100_000_000)?;
        let agents = families(s, &["n", "p", "bp"])?;
        let weight_scale = s.real("weight_scale", 1.0, "positive", positive)?;
        let anchor = s.parse_or::<String>("p_prior_sample_variance", "optimal".to_string())?;
        let p_prior_sample_variance = match anchor.as_str() {
            "optimal" => None,
            other => match other.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Some(v),
                _ => return Err(CliError::config("p_prior_sample_variance must be 'optimal' or a nonnegative number")),
            },
        };
        Ok(LinregParams {
            setting,
            noise_name,
            input_name,
            train_size,
            n_datasets,
            mc_samples,
            agents,
            weight_scale,
            p_prior_sample_variance,
        })
    }

    fn run(&self, seed: u64) -> CliResult<RunOutput> {
        let setting = &self.setting;
        let t = self.train_size;
        let spectrum = snr_spectrum(setting, self.mc_samples, RngStream::new(seed, 1))?;
        let label = join_pairs(&[
            ("d", setting.dim().to_string()),
            ("T", t.to_string()),
            ("prior_variance", setting.prior_variance.to_string()),
            ("noise", self.noise_name.clone()),
            ("inputs", self.input_name.clone()),
        ]);
        let row = |agent: &str, params: String, metric: &str, value: f64, std_error: f64| ResultRow {
            suite: "linreg".into(),
            agent: agent.into(),
            params,
            setting: label.clone(),
            metric: metric.into(),
            value,
            std_error,
            seed,
        };
        let c = self.weight_scale;
        let weight = InputFn::InverseNoiseScaled { scale: c, noise: setting.noise.clone() };
        let anchor = self
            .p_prior_sample_variance
            .unwrap_or_else(|| bound_minimizing_prior_variance(&spectrum, t, setting.prior_variance));
        let anchor_label = self.p_prior_sample_variance.map_or("optimal".to_string(), |v| v.to_string());
        let p_params = join_pairs(&[("c", c.to_string()), ("prior_sample_variance", anchor_label)]);
        let mut rows = Vec::new();
        for family in &self.agents {
            let (spec, params) = match family {
                EnsembleFamily::N => {
                    (EnsembleSpec::ensemble_n(c / setting.prior_variance, weight.clone())?, format!("c={c}"))
                }
                EnsembleFamily::P => (EnsembleSpec::unbiased_p(setting, c, anchor)?, p_params.clone()),
                EnsembleFamily::BP => (EnsembleSpec::matched_bootstrap(setting)?, "matched".to_string()),
            };
            let est = expected_kl_mc(setting, &spec, t, self.n_datasets, RngStream::new(seed, 2))?;
            rows.push(row(family.name(), params, "expected_kl", est.estimate, est.std_error));
            if *family == EnsembleFamily::P {
                rows.push(row(family.name(), p_params.clone(), "prior_sample_variance", anchor, 0.0));
            }
        }
        rows.push(row(
            "lower-bound",
            "none".into(),
            "unbiased_kl_lower_bound",
            unbiased_kl_lower_bound(&spectrum, t),
            0.0,
        ));
        rows.push(row("lower-bound", "none".into(), "snr_mean_eigenvalue", spectrum.mean_eigenvalue, 0.0));
        Ok(RunOutput { rows, ..RunOutput::default() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestbedParams {
    pub problem: ProblemConfig,
    pub ensemble_size: usize,
    pub agents: Vec<EnsembleFamily>,
    pub weight_decay_multiplier: f64,
    pub prior_scale_multiplier: f64,
    pub prior_scale_exponent: f64,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub save_checkpoints: bool,
}

impl TestbedParams {
    fn read(s: &mut Section) -> CliResult<Self> {
        let input_dim = s.count("input_dim", 10, 1, 1000)?;
        let train_size = s.count("train_size", 100, 1, 1_000_000)?;
        let temperature = s.real("temperature", 0.1, "positive", positive)?;
        let flip_fraction = s.real("flip_fraction", 0.0, "in [0, 1)", |v| (0.0..1.0).contains(&v))?;
        let ensemble_size = s.count("ensemble_size", 30, 1, 10_000)?;
        let agents = families(s, &["n", "p", "bp"])?;
        let weight_decay_multiplier = s.real("weight_decay_multiplier", 0.1, "nonnegative", nonnegative)?;
        let prior_scale_multiplier = s.real("prior_scale_multiplier", 1.0, "nonnegative", nonnegative)?;
        let prior_scale_exponent = s.real("prior_scale_exponent", 1.0, "0.5 or 1", |v| v == 0.5 || v == 1.0)?;
        let epochs = s.count("epochs", 200, 0, 1_000_000)?;
        let batch_size = s.count("batch_size", 32, 1, 1_000_000)?;
        let learning_rate = s.real("learning_rate", 0.05, "positive", positive)?;
        let schedule = match s.choice("schedule", "step-decay", &["step-decay", "constant"])?.as_str() {
            "constant" => LrSchedule::Constant,
            _ => LrSchedule::StepDecay,
        };
        let bootstrap = match s.choice("bootstrap", "double-half", &["double-half", "bernoulli", "none"])?.as_str() {
            "bernoulli" => BootstrapMode::Bernoulli {
                p: s.real("bootstrap_probability", 0.5, "in (0, 1]", |v| v > 0.0 && v <= 1.0)?,
            },
            "none" => BootstrapMode::None,
            _ => BootstrapMode::DoubleHalf,
        };
        let eval = EvalConfig {
            marginal_queries: s.count("marginal_queries", 1000, 100, 10_000_000)?,
            anchor_pairs: s.count("anchor_pairs", 1000, 100, 10_000_000)?,
            joint_tau: s.count("joint_tau", 10, 2, 1000)?,
        };
        if eval.joint_tau % 2 != 0 {
            return Err(CliError::config("[testbed] joint_tau must be even"));
        }
        let save_checkpoints = s.flag("save_checkpoints", false)?;
        let base = input_dim as f64 / temperature.sqrt();
        let train = TrainConfig {
            weight_decay: weight_decay_multiplier * base,
            prior_scale: prior_scale_multiplier / temperature.powf(prior_scale_exponent),
            learning_rate,
            schedule,
            epochs,
            batch_size,
            bootstrap,
        };
        Ok(TestbedParams {
            problem: ProblemConfig::binary(input_dim, train_size, temperature, flip_fraction),
            ensemble_size,
            agents,
            weight_decay_multiplier,
            prior_scale_multiplier,
            prior_scale_exponent,
            train,
            eval,
            save_checkpoints,
        })
    }

    fn params_label(&self, family: EnsembleFamily) -> String {
        let mut pairs = vec![("wd_mult", self.weight_decay_multiplier.to_string())];
        if family.uses_prior() {
            pairs.push(("prior_mult", self.prior_scale_multiplier.to_string()));
            pairs.push(("prior_exp", self.prior_scale_exponent.to_string()));
        }
        join_pairs(&pairs)
    }

    fn run(&self, seed: u64) -> CliResult<RunOutput> {
        let cfg = &self.problem;
        let problem = generate_problem(*cfg, RngStream::new(seed, 0))?;
        let label = join_pairs(&[
            ("d", cfg.input_dim.to_string()),
            ("T", cfg.train_size.to_string()),
            ("rho", cfg.temperature.to_string()),
            ("flip", cfg.flip_fraction.to_string()),
        ]);
        let mut out = RunOutput::default();
        for &family in &self.agents {
            let members = train_ensemble(&problem, self.ensemble_size, family, &self.train, RngStream::new(seed, 1))?;
            let eval = evaluate_agent(&problem, &members, &self.eval, RngStream::new(seed, 2))?;
            for (metric, est) in [("marginal_kl", eval.marginal), ("joint_kl", eval.joint)] {
                out.rows.push(ResultRow {
                    suite: "testbed".into(),
                    agent: family.name().into(),
                    params: self.params_label(family),
                    setting: label.clone(),
                    metric: metric.into(),
                    value: est.value,
                    std_error: est.std_error,
                    seed,
                });
            }
            if self.save_checkpoints {
                for (m, member) in members.iter().enumerate() {
                    out.binary_files
                        .push((format!("checkpoints/{family}-{m:04}-trainable.bin"), member.trainable.to_bytes()));
                    out.binary_files
                        .push((format!("checkpoints/{family}-{m:04}-prior.bin"), member.prior().to_bytes()));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditParams {
    pub config: BanditConfig,
    pub agents: Vec<PolicyFamily>,
    pub tune: bool,
    pub tuning_problems: usize,
    pub grid: PolicyGrid,
    pub lambda: f64,
    pub prior_sample_variance: f64,
}

impl BanditParams {
    fn read(s: &mut Section) -> CliResult<Self> {
        let config = BanditConfig {
            dim: s.count("dim", 2, 1, 100)?,
            n_actions: s.count("n_actions", 4, 2, 10_000)?,
            horizon: s.count("horizon", bandit::DEFAULT_HORIZON, 1, 1_000_000)?,
            n_problems: s.count("problems", bandit::DEFAULT_PROBLEMS, 1, 1_000_000)?,
            prior_variance: s.real("prior_variance", 1.0, "positive", positive)?,
        };
        let names: Vec<String> = ["n", "p", "bp"].iter().map(|s| s.to_string()).collect();
        let names = s.list::<String>("agents", &names, |n| n.parse::<PolicyFamily>().is_ok())?;
        let mut agents: Vec<PolicyFamily> = names.iter().map(|n| n.parse().unwrap()).collect();
        let before = agents.len();
        agents.sort();
        agents.dedup();
        if agents.len() != before {
            return Err(CliError::config("agents lists a family twice"));
        }
        let tune = s.flag("tune", true)?;
        let defaults = PolicyGrid::default();
        let (grid, tuning_problems, lambda, prior_sample_variance) = if tune {
            let tuning_problems = s.count("tuning_problems", bandit::DEFAULT_PROBLEMS, 1, 1_000_000)?;
            let grid = PolicyGrid {
                lambdas: s.list("lambda_grid", &defaults.lambdas, |v: &f64| v.is_finite() && *v > 0.0)?,
                prior_sample_variances: s.list(
                    "prior_sample_variance_grid",
                    &defaults.prior_sample_variances,
                    |v: &f64| v.is_finite() && *v >= 0.0,
                )?,
            };
            (grid, tuning_problems, 1.0, 1.0)
        } else {
            let lambda = s.real("lambda", 1.0, "positive", positive)?;
            let psv = s.real("prior_sample_variance", 1.0, "nonnegative", nonnegative)?;
            (defaults, 0, lambda, psv)
        };
        Ok(BanditParams { config, agents, tune, tuning_problems, grid, lambda, prior_sample_variance })
    }

    fn run(&self, seed: u64) -> CliResult<RunOutput> {
        let cfg = &self.config;
        let streams = BanditStreams::new(seed);
        let tuning_cfg = BanditConfig { n_problems: self.tuning_problems, ..*cfg };
        let mut policies = Vec::new();
        let mut tuned = String::new();
        for &family in &self.agents {
            let policy = if self.tune {
                let p = tune_policy(family, &tuning_cfg, &self.grid, streams.tuning)?;
                tuned.push_str(&format!("{family}={}\n", p.describe()));
                p
            } else if family == PolicyFamily::BP {
                AgentPolicy::matched_bootstrap(cfg.prior_variance)
            } else {
                AgentPolicy::new(family, self.lambda, self.prior_sample_variance)?
            };
            policies.push(policy);
        }
        let results = bandit::evaluate(cfg, &policies, streams.evaluation)?;
        let label = join_pairs(&[
            ("d", cfg.dim.to_string()),
            ("N", cfg.n_actions.to_string()),
            ("T", cfg.horizon.to_string()),
            ("J", cfg.n_problems.to_string()),
        ]);
        let mut out = RunOutput::default();
        for r in &results {
            let family = r.policy.family;
            out.rows.push(ResultRow {
                suite: "bandit".into(),
                agent: family.name().into(),
                params: if self.tune { "tuned".into() } else { r.policy.describe() },
                setting: label.clone(),
                metric: "final_regret".into(),
                value: r.final_mean(),
                std_error: r.final_std_error(),
                seed,
            });
            let curve = r.mean_cumulative.iter().enumerate().map(|(t, v)| (t + 1, *v));
            out.text_files.push((format!("regret_{family}.tsv"), render_tsv(curve)));
        }
        if self.tune {
            out.text_files.push(("tuned_policies.txt".into(), tuned));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_and_sections_checked() {
        assert!(ExperimentConfig::parse("").is_err());
        assert!(ExperimentConfig::parse("suite = nope").is_err());
        assert!(ExperimentConfig::parse("suite = bandit\n[testbed]\ndim = 2").is_err());
        assert!(ExperimentConfig::parse("suite = bandit\nother = 1").is_err());
        assert!(ExperimentConfig::parse("suite = bandit\n[bandit]\nhorizont = 5").is_err());
        assert!(ExperimentConfig::parse("suite = bandit\n[bandit]\nn_actions = 1").is_err());
        assert!(ExperimentConfig::parse("suite = testbed\n[testbed]\nflip_fraction = 1").is_err());
        assert!(ExperimentConfig::parse("suite = testbed\n[testbed]\njoint_tau = 5").is_err());
        assert!(ExperimentConfig::parse("suite = linreg\n[linreg]\nn_datasets = 29").is_err());
        // Keys of an unselected noise model are unknown.
        assert!(ExperimentConfig::parse("suite = linreg\n[linreg]\nnoise = constant\ncone_ratio = 3").is_err());
    }

    #[test]
    fn hash_ignores_formatting_but_not_values() {
        let a = ExperimentConfig::parse("suite = bandit\n[bandit]\nhorizon = 10").unwrap();
        let b = ExperimentConfig::parse("# note\nsuite=bandit\n\n[bandit]\nhorizon=10 # same\n").unwrap();
        let c = ExperimentConfig::parse("suite = bandit\n[bandit]\nhorizon = 11").unwrap();
        let d = ExperimentConfig::parse("suite = bandit").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_ne!(a.hash(), d.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn testbed_scales_follow_temperature() {
        let cfg = ExperimentConfig::parse(
            "suite = testbed\n[testbed]\ninput_dim = 4\ntemperature = 0.25\nweight_decay_multiplier = 3\nprior_scale_multiplier = 2\nprior_scale_exponent = 0.5",
        )
        .unwrap();
        let SuiteConfig::Testbed(p) = cfg.suite else { panic!() };
        assert_eq!(p.train.weight_decay, 24.0);
        assert_eq!(p.train.prior_scale, 4.0);
    }

    #[test]
    fn matched_linreg_reports_zero() {
        let cfg = ExperimentConfig::parse(
            "suite = linreg\n[linreg]\nagents = bp,n\nn_datasets = 30\nmc_samples = 1000\ntrain_size = 5",
        )
        .unwrap();
        let out = cfg.run(1).unwrap();
        let bp = out.rows.iter().find(|r| r.agent == "ensemble-bp").unwrap();
        assert_eq!((bp.value, bp.std_error), (0.0, 0.0));
        let n = out.rows.iter().find(|r| r.agent == "ensemble-n").unwrap();
        assert_eq!(n.value, f64::INFINITY);
    }
}
