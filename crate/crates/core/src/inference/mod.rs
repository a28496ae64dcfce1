//! Likelihood maximization, observed-information standard errors, the
//! stationary bootstrap and BIC.

mod bootstrap;
mod optimizer;
mod stderr;

pub use bootstrap::{quantile, stationary_bootstrap, stationary_indices, BootstrapSummary};
pub use optimizer::{maximize, OptimSettings, Optimum};
pub use stderr::{observed_info_se, StdErrors};

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{invalid_param, Result};

/// Map from an unconstrained optimization coordinate to a natural parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Transform {
    Identity,
    Log,
    /// Bounded to the open interval `(lo, hi)`.
    Logit { lo: f64, hi: f64 },
    /// Bounded to `(-π/2, π/2)`.
    Angle,
}

impl Transform {
    pub fn to_natural(self, y: f64) -> f64 {
        match self {
            Transform::Identity => y,
            Transform::Log => y.exp(),
            Transform::Logit { lo, hi } => {
                if y >= 0.0 {
                    lo + (hi - lo) / (1.0 + (-y).exp())
                } else {
                    let e = y.exp();
                    lo + (hi - lo) * e / (1.0 + e)
                }
            }
            Transform::Angle => y.atan(),
        }
    }

    pub fn to_unconstrained(self, x: f64) -> Result<f64> {
        let y = match self {
            Transform::Identity => x,
            Transform::Log => {
                if x <= 0.0 {
                    return invalid_param(format!("{x} is not positive"));
                }
                x.ln()
            }
            Transform::Logit { lo, hi } => {
                if x <= lo || x >= hi {
                    return invalid_param(format!("{x} is outside ({lo}, {hi})"));
                }
                ((x - lo) / (hi - x)).ln()
            }
            Transform::Angle => {
                if x.abs() >= FRAC_PI_2 {
                    return invalid_param(format!("angle {x} is outside (-pi/2, pi/2)"));
                }
                x.tan()
            }
        };
        Ok(y)
    }

    /// `dx/dy` at the unconstrained coordinate `y`.
    pub fn derivative(self, y: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::Log => y.exp(),
            Transform::Logit { lo, hi } => {
                let x = self.to_natural(y);
                (x - lo) * (hi - x) / (hi - lo)
            }
            Transform::Angle => 1.0 / (1.0 + y * y),
        }
    }
}

/// A named free parameter with its starting value and transform.
#[derive(Debug, Clone)]
pub struct ParamSpec {
    pub name: String,
    pub init: f64,
    pub transform: Transform,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, init: f64, transform: Transform) -> Self {
        Self { name: name.into(), init, transform }
    }
}

/// A full parameter vector of which only some entries are optimized; the
/// rest stay at their initial values.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    pub all: Vec<ParamSpec>,
    free: Vec<usize>,
}

impl ParamLayout {
    /// `free` lists the names to optimize; `None` frees everything.
    pub fn new(all: Vec<ParamSpec>, free: Option<&[&str]>) -> Result<Self> {
        let idx = match free {
            None => (0..all.len()).collect(),
            Some(names) => {
                let mut idx = Vec::new();
                for n in names {
                    match all.iter().position(|p| p.name == *n) {
                        Some(i) => idx.push(i),
                        None => return invalid_param(format!("unknown parameter '{n}'")),
                    }
                }
                idx.sort_unstable();
                idx
            }
        };
        Ok(Self { all, free: idx })
    }

    /// Free parameters, with starting values on a bounded scale moved off the bounds.
    pub fn free_params(&self) -> Vec<ParamSpec> {
        self.free
            .iter()
            .map(|&i| {
                let mut p = self.all[i].clone();
                if let Transform::Logit { lo, hi } = p.transform {
                    let pad = 1e-3 * (hi - lo);
                    p.init = p.init.clamp(lo + pad, hi - pad);
                }
                p
            })
            .collect()
    }

    /// Full natural-scale vector from the free values.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut full: Vec<f64> = self.all.iter().map(|p| p.init).collect();
        for (&i, &v) in self.free.iter().zip(x) {
            full[i] = v;
        }
        full
    }
}

/// Outcome of a maximum-likelihood fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    pub stderrs: Vec<Option<f64>>,
    pub loglik: f64,
    pub bic: f64,
    pub n_effective: usize,
    pub converged: bool,
    pub censor_level: Option<f64>,
    pub evaluations: usize,
    /// Diagnostics worth surfacing, e.g. boundary estimates or Hessian trouble.
    pub flags: Vec<String>,
}

impl FitResult {
    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.estimates[i])
    }

    pub fn stderr(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).and_then(|i| self.stderrs[i])
    }
}

/// Bayesian information criterion `-2ℓ + k log n`.
pub fn bic(loglik: f64, k: usize, n: usize) -> f64 {
    -2.0 * loglik + k as f64 * (n.max(1) as f64).ln()
}

/// Maximizes `objective` and packages estimates, standard errors and BIC.
pub fn fit<F>(
    objective: F,
    params: &[ParamSpec],
    settings: &OptimSettings,
    n_effective: usize,
    with_stderr: bool,
) -> Result<FitResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let opt = maximize(&objective, params, settings)?;
    let mut flags = Vec::new();
    if !opt.converged {
        flags.push("optimizer did not meet its convergence tolerance".to_string());
    }
    let stderrs = if with_stderr {
        let transforms: Vec<Transform> = params.iter().map(|p| p.transform).collect();
        let se = observed_info_se(&objective, &opt.estimate, &transforms)?;
        flags.extend(se.flags);
        se.stderrs
    } else {
        vec![None; params.len()]
    };
    Ok(FitResult {
        names: params.iter().map(|p| p.name.clone()).collect(),
        estimates: opt.estimate,
        stderrs,
        loglik: opt.value,
        bic: bic(opt.value, params.len(), n_effective),
        n_effective,
        converged: opt.converged,
        censor_level: None,
        evaluations: opt.evaluations,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bic_examples() {
        assert!((bic(4294.1, 4, 1594) - -8558.7).abs() < 0.1);
        assert!((bic(4292.7, 3, 1594) - -8563.3).abs() < 0.1);
        assert_eq!(bic(0.0, 0, 10), 0.0);
    }

    proptest! {
        #[test]
        fn transforms_round_trip(y in -20.0f64..20.0) {
            for t in [Transform::Identity, Transform::Log, Transform::Logit { lo: -1.0, hi: 3.0 }, Transform::Angle] {
                let x = t.to_natural(y);
                if let Ok(back) = t.to_unconstrained(x) {
                    prop_assert!((back - y).abs() < 1e-6 * (1.0 + y.abs()));
                }
            }
        }

        #[test]
        fn transform_derivative_matches_difference(y in -5.0f64..5.0) {
            for t in [Transform::Log, Transform::Logit { lo: 0.0, hi: 2.0 }, Transform::Angle] {
                let h = 1e-6;
                let fd = (t.to_natural(y + h) - t.to_natural(y - h)) / (2.0 * h);
                prop_assert!((fd - t.derivative(y)).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }
}
