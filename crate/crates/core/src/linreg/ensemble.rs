use rand::Rng;
use rand_distr::StandardNormal;

use super::data::{Dataset, LinRegSetting};
use super::noise::InputFn;
use crate::numkit::{dot, Cholesky, GaussianBelief, Generator, Matrix};
use crate::{EnsembleFamily, Error, Result};

/// Knobs of the perturbed loss, tied to an agent family.
///
/// Construction enforces the family constraints: `N` has no prior anchor
/// and no bootstrap perturbation, `P` has no bootstrap perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    family: EnsembleFamily,
    lambda: f64,
    weight: InputFn,
    prior_sample_variance: f64,
    bootstrap_variance: InputFn,
}

impl EnsembleSpec {
    pub fn new(
        family: EnsembleFamily,
        lambda: f64,
        weight: InputFn,
        prior_sample_variance: f64,
        bootstrap_variance: InputFn,
    ) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidSpec(format!("lambda must be nonnegative, got {lambda}")));
        }
        if !weight.scale_is_valid(true) {
            return Err(Error::InvalidSpec("weight function must be positive".into()));
        }
        if !(prior_sample_variance >= 0.0 && prior_sample_variance.is_finite()) {
            return Err(Error::InvalidSpec("prior sample variance must be nonnegative".into()));
        }
        if !bootstrap_variance.scale_is_valid(false) {
            return Err(Error::InvalidSpec("bootstrap variance must be nonnegative".into()));
        }
        match family {
            EnsembleFamily::N if prior_sample_variance != 0.0 => {
                return Err(Error::InvalidSpec("ensemble-n fixes the prior sample variance at 0".into()))
            }
            EnsembleFamily::N | EnsembleFamily::P if !bootstrap_variance.is_identically_zero() => {
                return Err(Error::InvalidSpec(format!("{family} fixes the bootstrap variance at 0")))
            }
            _ => {}
        }
        Ok(EnsembleSpec { family, lambda, weight, prior_sample_variance, bootstrap_variance })
    }

    pub fn ensemble_n(lambda: f64, weight: InputFn) -> Result<Self> {
        EnsembleSpec::new(EnsembleFamily::N, lambda, weight, 0.0, InputFn::ZERO)
    }

    pub fn ensemble_p(lambda: f64, weight: InputFn, prior_sample_variance: f64) -> Result<Self> {
        EnsembleSpec::new(EnsembleFamily::P, lambda, weight, prior_sample_variance, InputFn::ZERO)
    }

    /// `σ̂² = σ²`, `ν = 1/σ²`, `σ̂₀² = σ₀²`, `λ = 1/σ₀²`: the ensemble law
    /// equals the exact posterior.
    pub fn matched_bootstrap(setting: &LinRegSetting) -> Result<Self> {
        let noise = setting.noise.clone();
        EnsembleSpec::new(
            EnsembleFamily::BP,
            1.0 / setting.prior_variance,
            InputFn::InverseNoiseScaled { scale: 1.0, noise: noise.clone() },
            setting.prior_variance,
            InputFn::NoiseScaled { scale: 1.0, noise },
        )
    }

    /// Prior-only ensemble with `ν = c/σ²` and `λ = c/σ₀²`, whose mean
    /// matches the posterior mean for every dataset.
    pub fn unbiased_p(setting: &LinRegSetting, c: f64, prior_sample_variance: f64) -> Result<Self> {
        EnsembleSpec::ensemble_p(
            c / setting.prior_variance,
            InputFn::InverseNoiseScaled { scale: c, noise: setting.noise.clone() },
            prior_sample_variance,
        )
    }

    pub fn family(&self) -> EnsembleFamily {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn weight(&self) -> &InputFn {
        &self.weight
    }

    pub fn prior_sample_variance(&self) -> f64 {
        self.prior_sample_variance
    }

    pub fn bootstrap_variance(&self) -> &InputFn {
        &self.bootstrap_variance
    }

    /// `Σ ν(x) x xᵀ + λ I`, factored.
    fn regularized_gram(&self, data: &Dataset) -> Result<Cholesky> {
        let d = data.dim();
        let mut a = Matrix::zeros(d, d);
        for (x, _) in data.iter() {
            a.add_outer(self.weight.eval(x), x);
        }
        a.add_diagonal(self.lambda);
        Cholesky::factor_exact(&a).map_err(|_| Error::SingularSystem)
    }
}

/// The randomness one ensemble member sees: one perturbation per data pair
/// and an anchor for the regularizer.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMemberDraw {
    pub perturbations: Vec<f64>,
    pub prior_anchor: Vec<f64>,
}

pub fn sample_member_draw(spec: &EnsembleSpec, data: &Dataset, g: &mut Generator) -> EnsembleMemberDraw {
    let perturbations = data
        .iter()
        .map(|(x, _)| {
            let var = spec.bootstrap_variance.eval(x);
            if var == 0.0 {
                0.0
            } else {
                var.sqrt() * g.sample::<f64, _>(StandardNormal)
            }
        })
        .collect();
    let sd = spec.prior_sample_variance.sqrt();
    let prior_anchor =
        (0..data.dim()).map(|_| if sd == 0.0 { 0.0 } else { sd * g.sample::<f64, _>(StandardNormal) }).collect();
    EnsembleMemberDraw { perturbations, prior_anchor }
}

fn check_draw(data: &Dataset, draw: &EnsembleMemberDraw) -> Result<()> {
    if draw.perturbations.len() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), found: draw.perturbations.len() });
    }
    if draw.prior_anchor.len() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), found: draw.prior_anchor.len() });
    }
    Ok(())
}

/// Right-hand side `Σ ν (y + z) x + λ θ̃`.
fn member_rhs(spec: &EnsembleSpec, data: &Dataset, draw: &EnsembleMemberDraw) -> Vec<f64> {
    let mut b: Vec<f64> = draw.prior_anchor.iter().map(|v| spec.lambda * v).collect();
    for ((x, y), z) in data.iter().zip(&draw.perturbations) {
        let w = spec.weight.eval(x) * (y + z);
        for (bi, xi) in b.iter_mut().zip(x) {
            *bi += w * xi;
        }
    }
    b
}

/// Exact minimizer of the perturbed loss for one member.
pub fn ensemble_member(spec: &EnsembleSpec, data: &Dataset, draw: &EnsembleMemberDraw) -> Result<Vec<f64>> {
    check_draw(data, draw)?;
    let chol = spec.regularized_gram(data)?;
    let b = member_rhs(spec, data, draw);
    let mut theta = chol.solve_vec(&b)?;
    // One round of iterative refinement against the loss gradient.
    let residual = loss_gradient(spec, data, draw, &theta)?;
    let correction = chol.solve_vec(&residual)?;
    for (t, c) in theta.iter_mut().zip(correction) {
        *t -= c;
    }
    Ok(theta)
}

/// Gradient of the perturbed loss at `theta`:
/// `Σ ν (θᵀx − y − z) x + λ (θ − θ̃)`.
pub fn loss_gradient(
    spec: &EnsembleSpec,
    data: &Dataset,
    draw: &EnsembleMemberDraw,
    theta: &[f64],
) -> Result<Vec<f64>> {
    check_draw(data, draw)?;
    if theta.len() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), found: theta.len() });
    }
    let mut grad: Vec<f64> = theta.iter().zip(&draw.prior_anchor).map(|(t, a)| spec.lambda * (t - a)).collect();
    for ((x, y), z) in data.iter().zip(&draw.perturbations) {
        let r = spec.weight.eval(x) * (dot(theta, x) - y - z);
        for (gi, xi) in grad.iter_mut().zip(x) {
            *gi += r * xi;
        }
    }
    Ok(grad)
}

/// Law `N(μ̂, Σ̂)` of a member given the data, with
/// `A = Σ ν x xᵀ + λ I`, `μ̂ = A⁻¹ Σ ν y x` and
/// `Σ̂ = A⁻¹ (Σ ν² σ̂² x xᵀ + λ² σ̂₀² I) A⁻¹`.
pub fn ensemble_law(spec: &EnsembleSpec, data: &Dataset) -> Result<GaussianBelief> {
    let d = data.dim();
    let chol = spec.regularized_gram(data)?;
    let zero_draw = EnsembleMemberDraw { perturbations: vec![0.0; data.len()], prior_anchor: vec![0.0; d] };
    let mean = chol.solve_vec(&member_rhs(spec, data, &zero_draw))?;

    let mut spread = Matrix::zeros(d, d);
    for (x, _) in data.iter() {
        let nu = spec.weight.eval(x);
        spread.add_outer(nu * nu * spec.bootstrap_variance.eval(x), x);
    }
    spread.add_diagonal(spec.lambda * spec.lambda * spec.prior_sample_variance);

    let covariance = if spread.max_abs() == 0.0 {
        spread
    } else {
        let left = chol.solve_mat(&spread)?;
        chol.solve_mat(&left.transpose())?.symmetrize()
    };
    GaussianBelief::new(mean, covariance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linreg::NoiseModel;
    use crate::numkit::{InputDistribution, RngStream};

    fn one_point() -> Dataset {
        Dataset::from_pairs(1, [(vec![1.0], 1.0)]).unwrap()
    }

    #[test]
    fn family_constraints_enforced() {
        assert!(EnsembleSpec::new(EnsembleFamily::N, 1.0, InputFn::Constant(1.0), 0.5, InputFn::ZERO).is_err());
        assert!(EnsembleSpec::new(EnsembleFamily::P, 1.0, InputFn::Constant(1.0), 0.5, InputFn::Constant(0.1)).is_err());
        assert!(EnsembleSpec::new(EnsembleFamily::BP, 1.0, InputFn::Constant(1.0), 0.5, InputFn::Constant(0.1)).is_ok());
        assert!(EnsembleSpec::ensemble_n(-1.0, InputFn::Constant(1.0)).is_err());
        assert!(EnsembleSpec::ensemble_n(1.0, InputFn::Constant(0.0)).is_err());
    }

    #[test]
    fn scalar_closed_form() {
        // θ̂ = (1 + 1)⁻¹ (1·1·1 + 0) = 0.5
        let spec = EnsembleSpec::ensemble_p(1.0, InputFn::Constant(1.0), 1.0).unwrap();
        let draw = EnsembleMemberDraw { perturbations: vec![0.0], prior_anchor: vec![0.0] };
        let theta = ensemble_member(&spec, &one_point(), &draw).unwrap();
        assert!((theta[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn heavy_regularization_shrinks_to_anchor() {
        let spec = EnsembleSpec::ensemble_n(1e12, InputFn::Constant(1.0)).unwrap();
        let draw = EnsembleMemberDraw { perturbations: vec![0.0], prior_anchor: vec![0.0] };
        let theta = ensemble_member(&spec, &one_point(), &draw).unwrap();
        assert!(theta[0].abs() < 1e-11);
    }

    #[test]
    fn family_n_is_deterministic() {
        let spec = EnsembleSpec::ensemble_n(0.7, InputFn::Constant(2.0)).unwrap();
        let data = Dataset::from_pairs(2, [(vec![1.0, 0.5], 1.0), (vec![-0.3, 2.0], -1.0)]).unwrap();
        let mut g1 = RngStream::new(1, 1).generator();
        let mut g2 = RngStream::new(2, 2).generator();
        let a = ensemble_member(&spec, &data, &sample_member_draw(&spec, &data, &mut g1)).unwrap();
        let b = ensemble_member(&spec, &data, &sample_member_draw(&spec, &data, &mut g2)).unwrap();
        assert_eq!(a, b);
        let law = ensemble_law(&spec, &data).unwrap();
        assert_eq!(law.covariance().max_abs(), 0.0);
    }

    #[test]
    fn singular_system_without_regularization() {
        let spec = EnsembleSpec::ensemble_n(0.0, InputFn::Constant(1.0)).unwrap();
        let data = Dataset::from_pairs(2, [(vec![1.0, 1.0], 1.0)]).unwrap();
        let draw = EnsembleMemberDraw { perturbations: vec![0.0], prior_anchor: vec![0.0, 0.0] };
        assert_eq!(ensemble_member(&spec, &data, &draw), Err(Error::SingularSystem));
        assert_eq!(ensemble_law(&spec, &data).unwrap_err(), Error::SingularSystem);
    }

    #[test]
    fn draw_shape_is_checked() {
        let spec = EnsembleSpec::ensemble_n(1.0, InputFn::Constant(1.0)).unwrap();
        let draw = EnsembleMemberDraw { perturbations: vec![], prior_anchor: vec![0.0] };
        assert!(matches!(ensemble_member(&spec, &one_point(), &draw), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn member_draws_respect_family() {
        let setting = LinRegSetting::new(
            2.0,
            NoiseModel::Constant { variance: 0.5 },
            InputDistribution::StandardNormal { dim: 2 },
        )
        .unwrap();
        let data = Dataset::from_pairs(2, [(vec![1.0, 0.0], 1.0), (vec![0.0, 1.0], 2.0)]).unwrap();
        let mut g = RngStream::new(3, 0).generator();
        let p = EnsembleSpec::unbiased_p(&setting, 1.0, 2.0).unwrap();
        let draw = sample_member_draw(&p, &data, &mut g);
        assert_eq!(draw.perturbations, vec![0.0, 0.0]);
        assert!(draw.prior_anchor.iter().all(|v| *v != 0.0));
        let bp = EnsembleSpec::matched_bootstrap(&setting).unwrap();
        let draw = sample_member_draw(&bp, &data, &mut g);
        assert!(draw.perturbations.iter().all(|v| *v != 0.0));
    }
}
