//! Max-stable processes (Brown–Resnick, extremal-t) and r-Pareto processes:
//! exponent functions, densities, simulation and likelihoods.

mod exponent;
mod likelihood;
mod simulate;

pub use exponent::{
    exponent_v, exponent_v_partials, maxstable_density, set_partitions, Dependence, PairDependence, Partials,
    PartialOrder,
};
pub use likelihood::{
    censored_loglik_rpareto, fit_maxstable_pairwise, fit_rpareto, maxstable_from_params, maxstable_params,
    pairwise_loglik_maxstable, pareto_threshold, site_pairs, LoglikValue,
};
pub use simulate::{maxstable_simulate, rpareto_simulate, ProfileSampler, SimDiagnostics, SimSettings};

use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Result};
use crate::gauss::CovarianceSpec;

/// Max-stable dependence family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MaxStableSpec {
    /// Semivariogram `γ(h) = (h/φ)^ν`, with `h` measured under the optional anisotropy.
    BrownResnick { variogram: CovarianceSpec },
    /// Gaussian correlation `cov` and degrees of freedom `dof`.
    ExtremalT { dof: f64, cov: CovarianceSpec },
}

impl MaxStableSpec {
    pub fn brown_resnick(phi: f64, nu: f64) -> Self {
        MaxStableSpec::BrownResnick { variogram: CovarianceSpec::isotropic(phi, nu) }
    }

    pub fn extremal_t(dof: f64, phi: f64, nu: f64) -> Self {
        MaxStableSpec::ExtremalT { dof, cov: CovarianceSpec::isotropic(phi, nu) }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MaxStableSpec::BrownResnick { variogram } => {
                variogram.validate()?;
                if variogram.nu >= 2.0 {
                    return invalid_param("Brown-Resnick variogram exponent must lie in (0, 2)");
                }
                Ok(())
            }
            MaxStableSpec::ExtremalT { dof, cov } => {
                if !(*dof > 0.0 && dof.is_finite()) {
                    return invalid_param(format!("extremal-t degrees of freedom {dof} must be positive"));
                }
                cov.validate()
            }
        }
    }

    pub fn covariance(&self) -> &CovarianceSpec {
        match self {
            MaxStableSpec::BrownResnick { variogram } => variogram,
            MaxStableSpec::ExtremalT { cov, .. } => cov,
        }
    }

    /// Bivariate dependence at separation `h`.
    pub fn pair_at(&self, h: f64) -> PairDependence {
        match self {
            MaxStableSpec::BrownResnick { variogram } => {
                PairDependence::BrownResnick { a: (2.0 * (h / variogram.phi).powf(variogram.nu)).sqrt() }
            }
            MaxStableSpec::ExtremalT { dof, cov } => PairDependence::ExtremalT { rho: cov.corr_at(h), dof: *dof },
        }
    }

    /// Extremal coefficient `V(1, 1)` at separation `h`.
    pub fn extremal_coefficient(&self, h: f64) -> f64 {
        self.pair_at(h).partials(1.0, 1.0).v
    }
}

/// Homogeneous risk functional defining an r-Pareto exceedance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskFunctional {
    Max,
    Min,
    Mean,
    Site(usize),
}

impl RiskFunctional {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            RiskFunctional::Max => x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            RiskFunctional::Min => x.iter().copied().fold(f64::INFINITY, f64::min),
            RiskFunctional::Mean => x.iter().sum::<f64>() / x.len() as f64,
            RiskFunctional::Site(j) => x[*j],
        }
    }
}

/// `r(x)` for the given functional.
pub fn risk_eval(functional: &RiskFunctional, x: &[f64]) -> f64 {
    functional.eval(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RParetoSpec {
    pub base: MaxStableSpec,
    pub functional: RiskFunctional,
}
