//! Sub-asymptotic models: Gaussian copula, Gaussian scale mixtures (HOT and
//! Huser–Wadsworth), Gaussian location mixtures, inverted max-stable and
//! max-mixture structures.

mod bivariate;
mod mixture;

pub use bivariate::{
    fit_pairwise_sub, ims_bivariate, maxmix_bivariate_cdf, pair_model_from_params, pair_model_params,
    pair_model_simulate, pairwise_loglik_sub, ImsKind, PairModel,
};
pub use mixture::{
    censored_loglik_mixture, fit_mixture, hw_chi, marginal_cdf, marginal_pdf, marginal_quantile, mixture_cdf,
    mixture_from_params, mixture_params, mixture_partial_cdf, mixture_simulate, MixtureLikelihood, SimModel,
};

use serde::{Deserialize, Serialize};

use crate::asymptotic::MaxStableSpec;
use crate::error::{invalid_param, Result};
use crate::gauss::CovarianceSpec;

/// Below this `|β|` the HOT radial law is treated as its Pareto limit.
const BETA_EPS: f64 = 1e-8;

/// Scale mixture `R·W` with `F_R(r) = 1 − exp{−γ(r^β − 1)/β}`, `r ≥ 1`, and `W`
/// a standard Gaussian process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotSpec {
    pub beta: f64,
    pub gamma: f64,
    pub cov: CovarianceSpec,
}

impl HotSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return invalid_param(format!("beta={} must be nonnegative", self.beta));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return invalid_param(format!("gamma={} must be positive", self.gamma));
        }
        self.cov.validate()
    }
}

/// `X = R^δ W^{1−δ}` with `R` unit Pareto and `W` a Gaussian copula process
/// on unit Pareto margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HwSpec {
    pub delta: f64,
    pub cov: CovarianceSpec,
}

impl HwSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return invalid_param(format!("delta={} must lie in (0, 1)", self.delta));
        }
        self.cov.validate()
    }
}

/// `X = R + W` with `R ~ Exp(θ)` and `W` a standard Gaussian process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationMixSpec {
    pub theta: f64,
    pub cov: CovarianceSpec,
}

impl LocationMixSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return invalid_param(format!("theta={} must be positive", self.theta));
        }
        self.cov.validate()
    }
}

/// Inverted max-stable process `1/Z` on unit exponential margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImsSpec {
    pub base: MaxStableSpec,
}

/// `max{a Z_ms, (1 − a) Z_ims}` on unit Fréchet margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxMixSpec {
    pub a: f64,
    pub ms: MaxStableSpec,
    pub ims: ImsSpec,
}

impl MaxMixSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.a) {
            return invalid_param(format!("mixing weight a={} must lie in [0, 1]", self.a));
        }
        self.ms.validate()?;
        self.ims.base.validate()
    }
}

/// Models handled by the censored multivariate likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MixtureModel {
    GaussianCopula { cov: CovarianceSpec },
    Hot(HotSpec),
    Hw(HwSpec),
}

impl MixtureModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            MixtureModel::GaussianCopula { cov } => cov.validate(),
            MixtureModel::Hot(h) => h.validate(),
            MixtureModel::Hw(h) => h.validate(),
        }
    }

    pub fn covariance(&self) -> &CovarianceSpec {
        match self {
            MixtureModel::GaussianCopula { cov } => cov,
            MixtureModel::Hot(h) => &h.cov,
            MixtureModel::Hw(h) => &h.cov,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrKind {
    Cdf,
    Pdf,
    /// The argument is a probability.
    Quantile,
}

/// `(r^β − 1)/β`, continuous at `β = 0`.
fn box_cox(r: f64, beta: f64) -> f64 {
    if beta.abs() < BETA_EPS {
        r.ln()
    } else {
        (beta * r.ln()).exp_m1() / beta
    }
}

/// Distribution, density or quantile of the HOT radial variable.
pub fn hot_fr(r: f64, spec: &HotSpec, kind: FrKind) -> f64 {
    let (b, g) = (spec.beta, spec.gamma);
    match kind {
        FrKind::Cdf => {
            if r <= 1.0 {
                0.0
            } else {
                -(-g * box_cox(r, b)).exp_m1()
            }
        }
        FrKind::Pdf => {
            if r < 1.0 {
                0.0
            } else {
                g * r.powf(b - 1.0) * (-g * box_cox(r, b)).exp()
            }
        }
        FrKind::Quantile => {
            let s = -(-r).ln_1p() / g;
            if b.abs() < BETA_EPS {
                s.exp()
            } else {
                ((b * s).ln_1p() / b).exp()
            }
        }
    }
}
