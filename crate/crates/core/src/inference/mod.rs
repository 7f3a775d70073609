//! Likelihood, priors and posterior assembly.
//!
//! Densities are returned as natural logarithms; `-inf` encodes zero density
//! (constraint violations, failed forward solves).

mod sampler;

pub use sampler::{acceptance_probability, propose, run_chain, run_chains, Chain, LogTarget, MHConfig};

use std::f64::consts::PI;

use crate::domain::{MaterialParams, MeasurementSet, ParameterLayout, SurfaceCoefficient};
use crate::error::{Error, Result};
use crate::forward::ForwardModel;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Gaussian log-likelihood of independent errors with common standard deviation.
pub fn log_likelihood(observed: &[f64], predicted: &[f64], sigma: f64) -> Result<f64> {
    if observed.len() != predicted.len() {
        return Err(Error::domain(format!(
            "{} observations but {} predictions",
            observed.len(),
            predicted.len()
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("noise std must be positive, got {sigma}")));
    }
    let d = observed.len() as f64;
    let ss: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(y, t)| (y - t) * (y - t))
        .sum();
    Ok(-0.5 * d * LN_2PI - d * sigma.ln() - 0.5 * ss / (sigma * sigma))
}

/// Independent Gaussian prior, optionally restricted to positive values.
///
/// The truncation normalisers are omitted: they do not depend on the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior {
    mean: Vec<f64>,
    std: Vec<f64>,
    positive: bool,
}

impl GaussianPrior {
    pub fn new(mean: Vec<f64>, std: Vec<f64>, positive: bool) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::domain("prior mean and std lengths differ"));
        }
        if let Some(s) = std.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::domain(format!("prior std must be positive, got {s}")));
        }
        Ok(Self { mean, std, positive })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }
}

pub fn log_gaussian_prior(p: &[f64], prior: &GaussianPrior) -> f64 {
    debug_assert_eq!(p.len(), prior.len());
    let mut acc = 0.0;
    for ((&x, &m), &s) in p.iter().zip(&prior.mean).zip(&prior.std) {
        if prior.positive && !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        let z = (x - m) / s;
        acc += -0.5 * LN_2PI - s.ln() - 0.5 * z * z;
    }
    acc
}

/// First-order difference smoothness prior on the surface coefficients.
///
/// The reference vector is zero; the difference operator annihilates constants,
/// so any constant reference gives the same density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessPrior {
    size: usize,
    gamma0: f64,
}

impl SmoothnessPrior {
    pub fn new(size: usize, gamma0: f64) -> Result<Self> {
        if size < 2 {
            return Err(Error::domain(format!("smoothness prior needs at least 2 values, got {size}")));
        }
        if !(gamma0.is_finite() && gamma0 > 0.0) {
            return Err(Error::domain(format!("gamma0 must be positive, got {gamma0}")));
        }
        Ok(Self { size, gamma0 })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }
}

/// The `(n − 1) × n` first-order difference matrix, row-major.
pub fn difference_matrix(n: usize) -> Vec<f64> {
    let mut d = vec![0.0; n.saturating_sub(1) * n];
    for i in 0..n.saturating_sub(1) {
        d[i * n + i] = -1.0;
        d[i * n + i + 1] = 1.0;
    }
    d
}

/// ‖D·h‖² without forming D.
pub fn squared_differences(h: &[f64]) -> f64 {
    h.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum()
}

/// `(n/2)·ln γ − (γ/2)·‖D·h‖²`, dropping terms independent of `(h, γ)`.
pub fn log_smoothness_prior(h: &[f64], gamma: f64, prior: &SmoothnessPrior) -> Result<f64> {
    if h.len() != prior.size {
        return Err(Error::domain(format!(
            "smoothness prior of size {} given {} values",
            prior.size,
            h.len()
        )));
    }
    if !(gamma > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(0.5 * prior.size as f64 * gamma.ln() - 0.5 * gamma * squared_differences(h))
}

/// Rayleigh log-density with scale `gamma0`.
pub fn log_rayleigh(gamma: f64, gamma0: f64) -> f64 {
    if !(gamma > 0.0) {
        return f64::NEG_INFINITY;
    }
    let z = gamma / gamma0;
    gamma.ln() - 2.0 * gamma0.ln() - 0.5 * z * z
}

/// Prior terms of the posterior.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorModel {
    /// Constant prior (positivity still enforced by the posterior).
    Flat,
    /// Independent positive Gaussians on every parameter (three-interval cases).
    Gaussian(GaussianPrior),
    /// Gaussians on (κ, C), smoothness prior on h with precision γ sampled as the
    /// last parameter, and a Rayleigh hyperprior on γ when `hyperprior` is set.
    Smoothness {
        material: GaussianPrior,
        smoothness: SmoothnessPrior,
        hyperprior: bool,
    },
}

impl PriorModel {
    pub fn log_density(&self, p: &[f64], layout: &ParameterLayout) -> f64 {
        match self {
            PriorModel::Flat => 0.0,
            PriorModel::Gaussian(g) => log_gaussian_prior(p, g),
            PriorModel::Smoothness {
                material,
                smoothness,
                hyperprior,
            } => {
                let Some(gi) = layout.gamma_index() else {
                    return f64::NEG_INFINITY;
                };
                let gamma = p[gi];
                let mut lp = log_gaussian_prior(&p[..2], material);
                lp += log_smoothness_prior(&p[layout.h_range()], gamma, smoothness)
                    .unwrap_or(f64::NEG_INFINITY);
                if *hyperprior {
                    lp += log_rayleigh(gamma, smoothness.gamma0);
                }
                lp
            }
        }
    }
}

/// Temperature data and the forward model that predicts them.
#[derive(Debug, Clone)]
pub struct DataLikelihood {
    model: ForwardModel,
    data: MeasurementSet,
    h_template: SurfaceCoefficient,
}

impl DataLikelihood {
    /// `breakpoints` is the time partition of the unknown surface coefficient.
    pub fn new(model: ForwardModel, data: MeasurementSet, breakpoints: Vec<f64>) -> Result<Self> {
        data.check_within(model.problem().depth, model.problem().final_time)?;
        let n = breakpoints.len().saturating_sub(1);
        let h_template = SurfaceCoefficient::new(breakpoints, vec![1.0; n])?;
        Ok(Self {
            model,
            data,
            h_template,
        })
    }

    pub fn model(&self) -> &ForwardModel {
        &self.model
    }

    pub fn data(&self) -> &MeasurementSet {
        &self.data
    }

    pub fn breakpoints(&self) -> &[f64] {
        self.h_template.breakpoints()
    }

    pub fn n_intervals(&self) -> usize {
        self.h_template.n_intervals()
    }

    /// Surface coefficient for the given h values on this partition.
    pub fn surface_coefficient(&self, h: &[f64]) -> Result<SurfaceCoefficient> {
        self.h_template.with_values(h.to_vec())
    }

    /// Predicted temperatures for a physical parameter vector `(κ, C, h…)`.
    pub fn predict(&self, p: &[f64]) -> Result<Vec<f64>> {
        let material = MaterialParams::new(p[0], p[1])?;
        let h = self.surface_coefficient(&p[2..2 + self.n_intervals()])?;
        self.model.predict_measurements(&material, &h, &self.data)
    }

    pub fn log_density(&self, p: &[f64]) -> Result<f64> {
        let pred = self.predict(p)?;
        log_likelihood(self.data.temperatures(), &pred, self.data.noise_std())
    }
}

/// Unnormalised log-posterior over a [`ParameterLayout`].
#[derive(Debug, Clone)]
pub struct Posterior {
    layout: ParameterLayout,
    prior: PriorModel,
    likelihood: Option<DataLikelihood>,
    proposal_scale: Vec<f64>,
}

impl Posterior {
    /// `likelihood = None` makes the likelihood constant (prior-only sampling).
    /// `proposal_scale` sets the per-parameter unit of the random-walk radius.
    pub fn new(
        layout: ParameterLayout,
        prior: PriorModel,
        likelihood: Option<DataLikelihood>,
        proposal_scale: Vec<f64>,
    ) -> Result<Self> {
        if proposal_scale.len() != layout.len() {
            return Err(Error::domain("proposal scale length does not match the layout"));
        }
        if let Some(l) = &likelihood {
            if l.n_intervals() != layout.n_intervals {
                return Err(Error::domain("partition size does not match the layout"));
            }
        }
        match &prior {
            PriorModel::Gaussian(g) if g.len() != layout.len() => {
                return Err(Error::domain("Gaussian prior length does not match the layout"));
            }
            PriorModel::Smoothness {
                material,
                smoothness,
                ..
            } if material.len() != 2 || smoothness.size() != layout.n_intervals || !layout.hyperparameter => {
                return Err(Error::domain("smoothness prior does not match the layout"));
            }
            _ => {}
        }
        Ok(Self {
            layout,
            prior,
            likelihood,
            proposal_scale,
        })
    }

    pub fn layout(&self) -> ParameterLayout {
        self.layout
    }

    pub fn prior(&self) -> &PriorModel {
        &self.prior
    }

    pub fn likelihood(&self) -> Option<&DataLikelihood> {
        self.likelihood.as_ref()
    }

    pub fn log_prior(&self, p: &[f64]) -> f64 {
        self.prior.log_density(p, &self.layout)
    }

    /// Log-prior plus log-likelihood; `-inf` for non-positive components
    /// (without solving) and for failed solves.
    pub fn log_posterior(&self, p: &[f64]) -> f64 {
        if p.len() != self.layout.len() || p.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return f64::NEG_INFINITY;
        }
        let lp = self.log_prior(p);
        if lp == f64::NEG_INFINITY || lp.is_nan() {
            return f64::NEG_INFINITY;
        }
        match &self.likelihood {
            None => lp,
            Some(l) => match l.log_density(p) {
                Ok(ll) => lp + ll,
                Err(e) => {
                    log::warn!("forward solve failed, rejecting candidate: {e}");
                    f64::NEG_INFINITY
                }
            },
        }
    }
}

impl LogTarget for Posterior {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn log_density(&self, p: &[f64]) -> f64 {
        self.log_posterior(p)
    }

    fn proposal_scale(&self) -> &[f64] {
        &self.proposal_scale
    }
}

/// Normal density, used by tests and diagnostics.
pub fn normal_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    (-0.5 * z * z).exp() / (std * (2.0 * PI).sqrt())
}
