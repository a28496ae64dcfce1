use std::collections::HashMap;

use rayon::prelude::*;

use super::exponent::Dependence;
use super::{MaxStableSpec, RParetoSpec, RiskFunctional};
use crate::data::ObservationMatrix;
use crate::error::{invalid_input, Error, Result};
use crate::gauss::{Anisotropy, QmcRule, SiteSet};
use crate::inference::{fit, FitResult, OptimSettings, ParamSpec, Transform};

/// Log-likelihood value with the number of replicates that contributed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoglikValue {
    pub value: f64,
    pub n_used: usize,
}

/// Pareto-scale threshold for a marginal probability level.
pub fn pareto_threshold(prob: f64) -> f64 {
    1.0 / (1.0 - prob)
}

/// Pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn site_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect()
}

/// Pairwise log-likelihood of unit Fréchet data. `weights`, if given, has one
/// entry per pair in the order of [`site_pairs`]; zero-weight pairs are skipped.
pub fn pairwise_loglik_maxstable(
    spec: &MaxStableSpec,
    sites: &SiteSet,
    data: &ObservationMatrix,
    weights: Option<&[f64]>,
) -> Result<LoglikValue> {
    let d = sites.len();
    if data.ncols() != d {
        return invalid_input(format!("data has {} columns for {d} sites", data.ncols()));
    }
    if data.values().iter().any(|&v| !v.is_nan() && v <= 0.0) {
        return invalid_input("unit Frechet data must be positive");
    }
    let pairs = site_pairs(d);
    if let Some(w) = weights {
        if w.len() != pairs.len() {
            return invalid_input(format!("{} weights for {} pairs", w.len(), pairs.len()));
        }
    }
    let dep = Dependence::new(spec, sites)?;
    let terms: Vec<Result<f64>> = pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let w = weights.map_or(1.0, |w| w[k]);
            if w == 0.0 {
                return Ok(0.0);
            }
            let pd = dep.pair(i, j);
            let mut sum = 0.0;
            for row in data.rows() {
                let (z1, z2) = (row[i], row[j]);
                if z1.is_nan() || z2.is_nan() {
                    continue;
                }
                let p = pd.partials(z1, z2);
                let term = -p.v + (p.v1 * p.v2 - p.v12).ln();
                if !term.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite pairwise contribution for sites ({i}, {j}) at ({z1}, {z2})"
                    )));
                }
                sum += term;
            }
            Ok(w * sum)
        })
        .collect();
    let mut value = 0.0;
    for t in terms {
        value += t?;
    }
    Ok(LoglikValue { value, n_used: data.nrows() })
}

struct Pattern {
    dep: Dependence,
    rule: QmcRule,
    log_k: f64,
}

/// Censored r-Pareto log-likelihood for data on the standard Pareto scale.
///
/// Rows whose risk does not exceed `u` are skipped when
/// `only_rows_with_exceedance` is set and rejected otherwise. Missing values
/// are handled by restricting the dependence to the observed sites.
pub fn censored_loglik_rpareto(
    spec: &RParetoSpec,
    sites: &SiteSet,
    data: &ObservationMatrix,
    u: f64,
    only_rows_with_exceedance: bool,
) -> Result<LoglikValue> {
    let d = sites.len();
    if data.ncols() != d {
        return invalid_input(format!("data has {} columns for {d} sites", data.ncols()));
    }
    if !(u > 0.0) {
        return invalid_input(format!("threshold {u} must be positive"));
    }
    if spec.functional == RiskFunctional::Min {
        return Err(Error::Unsupported("censored likelihood normalization for the min functional".into()));
    }
    let full = Dependence::new(&spec.base, sites)?;

    let mut rows: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    for (i, row) in data.rows().enumerate() {
        let obs: Vec<usize> = (0..d).filter(|&j| !row[j].is_nan()).collect();
        if obs.is_empty() {
            continue;
        }
        let y: Vec<f64> = obs.iter().map(|&j| row[j]).collect();
        let risk = match spec.functional {
            RiskFunctional::Site(s) => {
                if row.get(s).is_none_or(|v| v.is_nan()) {
                    continue;
                }
                row[s]
            }
            f => f.eval(&y),
        };
        if !(risk > u) {
            if only_rows_with_exceedance {
                continue;
            }
            return invalid_input(format!("row {i} has risk {risk} not above the threshold {u}"));
        }
        rows.push((obs, y));
    }

    let mut patterns: HashMap<Vec<usize>, Pattern> = HashMap::new();
    for (obs, _) in &rows {
        if patterns.contains_key(obs) {
            continue;
        }
        let dep = if obs.len() == d { full.clone() } else { full.subset(obs) };
        let rule = QmcRule::for_likelihood(dep.rule_dim());
        let log_k = match spec.functional {
            RiskFunctional::Max => (dep.exponent(&vec![1.0; obs.len()], &rule)? / u).ln(),
            RiskFunctional::Site(_) => -u.ln(),
            _ => 0.0,
        };
        patterns.insert(obs.clone(), Pattern { dep, rule, log_k });
    }

    let terms: Vec<Result<f64>> = rows
        .par_iter()
        .map(|(obs, y)| {
            let p = &patterns[obs];
            let yt: Vec<f64> = y.iter().map(|&v| v.max(u)).collect();
            let set: Vec<usize> = (0..y.len()).filter(|&j| y[j] > u).collect();
            let l = p.dep.log_neg_partial(&yt, &set, &p.rule)? - p.log_k;
            if l.is_finite() {
                Ok(l)
            } else {
                Err(Error::Numerical(format!("non-finite censored contribution at {y:?}")))
            }
        })
        .collect();
    let mut value = 0.0;
    for t in terms {
        value += t?;
    }
    Ok(LoglikValue { value, n_used: rows.len() })
}

/// Free parameters of a max-stable family, initialized at `spec`. Anisotropy
/// parameters are included when `spec` carries them.
pub fn maxstable_params(spec: &MaxStableSpec) -> Vec<ParamSpec> {
    let cov = spec.covariance();
    let mut p = Vec::new();
    if let MaxStableSpec::ExtremalT { dof, .. } = spec {
        p.push(ParamSpec::new("dof", *dof, Transform::Log));
    }
    p.push(ParamSpec::new("phi", cov.phi, Transform::Log));
    p.push(ParamSpec::new("nu", cov.nu, Transform::Logit { lo: 0.0, hi: 2.0 }));
    if let Some(a) = cov.aniso {
        p.push(ParamSpec::new("psi", a.psi, Transform::Angle));
        p.push(ParamSpec::new("L", a.l, Transform::Log));
    }
    p
}

/// Inverse of [`maxstable_params`]: rebuilds a spec of the same shape as
/// `template` from natural-scale values.
pub fn maxstable_from_params(template: &MaxStableSpec, x: &[f64]) -> MaxStableSpec {
    let mut spec = *template;
    let mut it = x.iter().copied();
    if let MaxStableSpec::ExtremalT { dof, .. } = &mut spec {
        *dof = it.next().unwrap_or(*dof);
    }
    let cov = match &mut spec {
        MaxStableSpec::BrownResnick { variogram } => variogram,
        MaxStableSpec::ExtremalT { cov, .. } => cov,
    };
    cov.phi = it.next().unwrap_or(cov.phi);
    cov.nu = it.next().unwrap_or(cov.nu);
    if cov.aniso.is_some() {
        let psi = it.next().unwrap_or(0.0);
        let l = it.next().unwrap_or(1.0);
        cov.aniso = Some(Anisotropy { psi, l });
    }
    spec
}

/// Maximum pairwise likelihood fit of a max-stable model.
pub fn fit_maxstable_pairwise(
    init: &MaxStableSpec,
    sites: &SiteSet,
    data: &ObservationMatrix,
    weights: Option<&[f64]>,
    settings: &OptimSettings,
    with_stderr: bool,
) -> Result<FitResult> {
    let params = maxstable_params(init);
    let objective = |x: &[f64]| {
        let spec = maxstable_from_params(init, x);
        pairwise_loglik_maxstable(&spec, sites, data, weights).map_or(f64::NAN, |l| l.value)
    };
    fit(objective, &params, settings, data.nrows(), with_stderr)
}

/// Censored likelihood fit of an r-Pareto model at Pareto-scale threshold `u`.
pub fn fit_rpareto(
    init: &RParetoSpec,
    sites: &SiteSet,
    data: &ObservationMatrix,
    u: f64,
    settings: &OptimSettings,
    with_stderr: bool,
) -> Result<FitResult> {
    let params = maxstable_params(&init.base);
    let n = censored_loglik_rpareto(init, sites, data, u, true)?.n_used;
    if n == 0 {
        return Err(Error::InsufficientData(format!("no rows exceed the threshold {u}")));
    }
    let objective = |x: &[f64]| {
        let spec = RParetoSpec { base: maxstable_from_params(&init.base, x), functional: init.functional };
        censored_loglik_rpareto(&spec, sites, data, u, true).map_or(f64::NAN, |l| l.value)
    };
    let mut out = fit(objective, &params, settings, n, with_stderr)?;
    out.censor_level = Some(u);
    Ok(out)
}
