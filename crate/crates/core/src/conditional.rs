//! Conditional spatial extremes: normalizing functions, delta-Laplace
//! residual margins, composite likelihood, conditional simulation and
//! the probability that the spatial maximum exceeds a level.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::asymptotic::LoglikValue;
use crate::data::ObservationMatrix;
use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::gauss::{cholesky_jitter, correlation_matrix, Anisotropy, CovarianceSpec, GaussianSlice, SiteSet};
use crate::inference::{fit, FitResult, OptimSettings, ParamLayout, ParamSpec, Transform};
use crate::margins::MarginScale;
use crate::rng::par_rows;
use crate::special::{gamma_quantile, norm_isf, norm_logpdf, norm_quantile, norm_sf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BForm {
    /// `b = 1 + a^β`
    OnePlusAPowBeta,
    /// `b = x^β`
    XPowBeta,
}

/// Shape of the delta-Laplace residual margins as a function of distance
/// from the conditioning site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum DeltaProfile {
    Constant { delta: f64 },
    /// `δ(h) = 1 + exp{−(h/δ₁)^δ₂}`
    Decay { delta1: f64, delta2: f64 },
}

impl DeltaProfile {
    pub fn at(&self, h: f64) -> f64 {
        match *self {
            DeltaProfile::Constant { delta } => delta,
            DeltaProfile::Decay { delta1, delta2 } => 1.0 + (-(h / delta1).powf(delta2)).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceSpec {
    pub kappa: f64,
    pub lambda: f64,
    #[serde(default)]
    pub delta_lag: f64,
    pub beta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub cov: CovarianceSpec,
    pub delta: DeltaProfile,
    pub b_form: BForm,
}

impl SceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.lambda > 0.0) {
            return invalid_param(format!("kappa={} and lambda={} must be positive", self.kappa, self.lambda));
        }
        if !(self.delta_lag >= 0.0) {
            return invalid_param(format!("delta_lag={} must be nonnegative", self.delta_lag));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return invalid_param(format!("beta={} must lie in [0, 1]", self.beta));
        }
        if !(self.sigma > 0.0) || !self.mu.is_finite() {
            return invalid_param(format!("need finite mu and positive sigma, got {} and {}", self.mu, self.sigma));
        }
        match self.delta {
            DeltaProfile::Constant { delta } if !(delta > 0.0) => {
                return invalid_param(format!("delta={delta} must be positive"));
            }
            DeltaProfile::Decay { delta1, delta2 } if !(delta1 > 0.0 && delta2 > 0.0) => {
                return invalid_param("delta1 and delta2 must be positive");
            }
            _ => {}
        }
        self.cov.validate()
    }
}

/// `α(h)`: one up to lag `Δ`, then `exp{−(h − Δ)^κ / λ}`.
pub fn alpha_fn(h: f64, spec: &SceSpec) -> f64 {
    if h <= spec.delta_lag {
        1.0
    } else {
        (-(h - spec.delta_lag).powf(spec.kappa) / spec.lambda).exp()
    }
}

/// Normalizing functions `(a, b)` at conditioning value `x` and distance `h`.
pub fn norm_ab(x: f64, h: f64, spec: &SceSpec) -> Result<(f64, f64)> {
    let a = alpha_fn(h, spec) * x;
    let b = match spec.b_form {
        BForm::OnePlusAPowBeta => {
            if a < 0.0 {
                return invalid_input(format!("a={a} must be nonnegative for b = 1 + a^beta"));
            }
            1.0 + a.powf(spec.beta)
        }
        BForm::XPowBeta => {
            if x <= 0.0 {
                return invalid_input(format!("b = x^beta needs a positive conditioning value, got {x}"));
            }
            x.powf(spec.beta)
        }
    };
    Ok((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaLaplaceParams {
    pub mu: f64,
    pub sigma: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlKind {
    Pdf,
    Cdf,
    /// The argument is a probability.
    Quantile,
}

impl DeltaLaplaceParams {
    pub fn logpdf(&self, z: f64) -> f64 {
        let y = ((z - self.mu) / self.sigma).abs();
        self.delta.ln() - (2.0 * self.sigma).ln() - ln_gamma(1.0 / self.delta) - y.powf(self.delta)
    }

    /// Standard normal score `Φ^{-1}(F(z))`, accurate in both tails.
    pub fn normal_score(&self, z: f64) -> f64 {
        let y = (z - self.mu) / self.sigma;
        let tail = half_tail(y, self.delta);
        if y > 0.0 {
            norm_isf(tail)
        } else {
            norm_quantile(tail)
        }
    }

    /// Inverse of [`normal_score`](Self::normal_score).
    pub fn from_normal_score(&self, e: f64) -> f64 {
        let tail = norm_sf(e.abs());
        let y = gamma_quantile(1.0 / self.delta, 1.0 - 2.0 * tail).powf(1.0 / self.delta);
        self.mu + self.sigma * if e > 0.0 { y } else { -y }
    }

    /// Variance `σ² Γ(3/δ) / Γ(1/δ)`.
    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma * (ln_gamma(3.0 / self.delta) - ln_gamma(1.0 / self.delta)).exp()
    }

    /// The delta-Laplace law with shape `delta` and the given mean and variance.
    pub fn matching(mean: f64, var: f64, delta: f64) -> Self {
        let sigma = (var * (ln_gamma(1.0 / delta) - ln_gamma(3.0 / delta)).exp()).sqrt();
        Self { mu: mean, sigma, delta }
    }
}

/// `Pr{|Y| > |y|} / 2` for the standardized variable.
fn half_tail(y: f64, delta: f64) -> f64 {
    let t = y.abs().powf(delta);
    if t == 0.0 {
        0.5
    } else if t.is_infinite() {
        0.0
    } else {
        0.5 * gamma_ur(1.0 / delta, t)
    }
}

pub fn dlaplace_eval(z: f64, p: &DeltaLaplaceParams, kind: DlKind) -> f64 {
    match kind {
        DlKind::Pdf => p.logpdf(z).exp(),
        DlKind::Cdf => {
            let y = (z - p.mu) / p.sigma;
            let tail = half_tail(y, p.delta);
            if y > 0.0 {
                1.0 - tail
            } else {
                tail
            }
        }
        DlKind::Quantile => {
            if !(z > 0.0 && z < 1.0) {
                return if z == 0.0 { f64::NEG_INFINITY } else if z == 1.0 { f64::INFINITY } else { f64::NAN };
            }
            let y = gamma_quantile(1.0 / p.delta, (2.0 * z - 1.0).abs()).powf(1.0 / p.delta);
            p.mu + p.sigma * if z >= 0.5 { y } else { -y }
        }
    }
}

/// Law of the residual process `Z⁰` given conditioning at `s0`. Entries are
/// indexed by site; those of `s0` are degenerate at zero.
#[derive(Debug, Clone)]
pub struct ResidualLaw {
    pub s0: usize,
    /// Other sites in order.
    pub others: Vec<usize>,
    /// Mean of the Gaussian process given its value at `s0` is zero.
    pub mean: Vec<f64>,
    /// Covariance over `others`.
    pub cov: DMatrix<f64>,
    /// Delta-Laplace margins over `others`, moment-matched to the Gaussian.
    pub margins: Vec<DeltaLaplaceParams>,
    pub distances: Vec<f64>,
}

pub fn residual_law(sites: &SiteSet, s0: usize, spec: &SceSpec) -> Result<ResidualLaw> {
    spec.validate()?;
    if s0 >= sites.len() {
        return invalid_input(format!("conditioning index {s0} out of range"));
    }
    let rho = correlation_matrix(sites, &spec.cov);
    let others: Vec<usize> = (0..sites.len()).filter(|&j| j != s0).collect();
    let s2 = spec.sigma * spec.sigma;
    let cov = DMatrix::from_fn(others.len(), others.len(), |a, b| {
        let (i, j) = (others[a], others[b]);
        s2 * (rho[(i, j)] - rho[(i, s0)] * rho[(j, s0)])
    });
    let mean: Vec<f64> = others.iter().map(|&j| spec.mu * (1.0 - rho[(j, s0)])).collect();
    let distances: Vec<f64> = others.iter().map(|&j| spec.cov.distance(sites.coords[j], sites.coords[s0])).collect();
    let margins = (0..others.len())
        .map(|a| DeltaLaplaceParams::matching(mean[a], cov[(a, a)], spec.delta.at(distances[a])))
        .collect();
    Ok(ResidualLaw { s0, others, mean, cov, margins, distances })
}

impl ResidualLaw {
    fn sd(&self, a: usize) -> f64 {
        self.cov[(a, a)].sqrt()
    }
}

fn check_laplace(data: &ObservationMatrix, sites: &SiteSet) -> Result<()> {
    if data.ncols() != sites.len() {
        return invalid_input(format!("data has {} columns for {} sites", data.ncols(), sites.len()));
    }
    if data.scale() != MarginScale::Laplace {
        return invalid_input("conditional extremes likelihood expects Laplace-scale data");
    }
    Ok(())
}

/// Conditional log-likelihood of the rows with `X(s0) > u`.
pub fn sce_loglik(
    data: &ObservationMatrix,
    sites: &SiteSet,
    s0: usize,
    u: f64,
    spec: &SceSpec,
) -> Result<LoglikValue> {
    check_laplace(data, sites)?;
    let law = residual_law(sites, s0, spec)?;
    let k = law.others.len();
    let rows: Vec<usize> = (0..data.nrows()).filter(|&i| data.get(i, s0) > u).collect();
    let mut slices: HashMap<Vec<usize>, GaussianSlice> = HashMap::new();
    for &i in &rows {
        let obs: Vec<usize> = (0..k).filter(|&a| !data.get(i, law.others[a]).is_nan()).collect();
        if let std::collections::hash_map::Entry::Vacant(e) = slices.entry(obs) {
            let o = e.key();
            let sub = DMatrix::from_fn(o.len(), o.len(), |p, q| law.cov[(o[p], o[q])]);
            let all: Vec<usize> = (0..o.len()).collect();
            let slice = GaussianSlice::new(&sub, &all)?;
            e.insert(slice);
        }
    }
    let ab: Vec<(f64, f64)> = law.distances.iter().map(|_| (0.0, 0.0)).collect();
    let terms: Vec<Result<f64>> = rows
        .par_iter()
        .map(|&i| {
            let x0 = data.get(i, s0);
            let obs: Vec<usize> = (0..k).filter(|&a| !data.get(i, law.others[a]).is_nan()).collect();
            let mut g = Vec::with_capacity(obs.len());
            let mut l = 0.0;
            let mut ab = ab.clone();
            for &a in &obs {
                ab[a] = norm_ab(x0, law.distances[a], spec)?;
                let (av, bv) = ab[a];
                if !(bv > 0.0) {
                    return invalid_input(format!("b={bv} is not positive at site {}", law.others[a]));
                }
                let z = (data.get(i, law.others[a]) - av) / bv;
                let m = &law.margins[a];
                let e = m.normal_score(z);
                let sd = law.sd(a);
                g.push(sd * e);
                let jac = m.logpdf(z) - norm_logpdf(e) + sd.ln() - bv.ln();
                if !jac.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite Jacobian at site {} in replicate {i}",
                        law.others[a]
                    )));
                }
                l += jac;
            }
            Ok(l + slices[&obs].log_density(&g))
        })
        .collect();
    let mut value = 0.0;
    for t in terms {
        value += t?;
    }
    Ok(LoglikValue { value, n_used: rows.len() })
}

/// Composite log-likelihood summing [`sce_loglik`] over conditioning sites.
pub fn sce_composite_loglik(
    data: &ObservationMatrix,
    sites: &SiteSet,
    subset: &[usize],
    u: f64,
    spec: &SceSpec,
) -> Result<LoglikValue> {
    if subset.is_empty() {
        return invalid_input("conditioning subset must be nonempty");
    }
    let parts: Vec<Result<LoglikValue>> = subset.par_iter().map(|&s0| sce_loglik(data, sites, s0, u, spec)).collect();
    let mut out = LoglikValue { value: 0.0, n_used: 0 };
    for p in parts {
        let p = p?;
        out.value += p.value;
        out.n_used += p.n_used;
    }
    Ok(out)
}

/// `k` spatially spread sites chosen by farthest-point traversal, starting
/// from the site closest to the centroid.
pub fn farthest_point_subset(sites: &SiteSet, k: usize) -> Vec<usize> {
    let d = sites.len();
    let k = k.min(d);
    if k == 0 {
        return vec![];
    }
    let c = sites.coords.iter().fold([0.0, 0.0], |acc, s| [acc[0] + s[0] / d as f64, acc[1] + s[1] / d as f64]);
    let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let first = (0..d).min_by(|&i, &j| dist(sites.coords[i], c).total_cmp(&dist(sites.coords[j], c))).unwrap();
    let mut chosen = vec![first];
    let mut near: Vec<f64> = (0..d).map(|j| dist(sites.coords[j], sites.coords[first])).collect();
    while chosen.len() < k {
        let next = (0..d).max_by(|&i, &j| near[i].total_cmp(&near[j]).then(j.cmp(&i))).unwrap();
        chosen.push(next);
        for j in 0..d {
            near[j] = near[j].min(dist(sites.coords[j], sites.coords[next]));
        }
    }
    chosen
}

struct Sampler {
    law: ResidualLaw,
    chol: DMatrix<f64>,
}

impl Sampler {
    fn new(sites: &SiteSet, s0: usize, spec: &SceSpec) -> Result<Self> {
        let law = residual_law(sites, s0, spec)?;
        let chol = if law.others.is_empty() { DMatrix::zeros(0, 0) } else { cholesky_jitter(&law.cov)?.0 };
        Ok(Self { law, chol })
    }

    fn draw(&self, x0: f64, spec: &SceSpec, d: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
        let k = self.law.others.len();
        let e: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let mut out = vec![0.0; d];
        out[self.law.s0] = x0;
        for a in 0..k {
            let g: f64 = (0..=a).map(|c| self.chol[(a, c)] * e[c]).sum();
            let z = self.law.margins[a].from_normal_score(g / self.law.sd(a));
            let (av, bv) = norm_ab(x0, self.law.distances[a], spec)?;
            out[self.law.others[a]] = av + bv * z;
        }
        Ok(out)
    }
}

/// Simulates `X` given `X(s0) > u` on the Laplace scale, with
/// `X(s0) = u + E` for standard exponential `E`.
pub fn sce_simulate(
    spec: &SceSpec,
    sites: &SiteSet,
    s0: usize,
    u: f64,
    n: usize,
    seed: u64,
) -> Result<ObservationMatrix> {
    let sampler = Sampler::new(sites, s0, spec)?;
    let d = sites.len();
    let rows = par_rows(n, seed, |_, rng| {
        let x0 = u + rng.sample::<f64, _>(Exp1);
        sampler.draw(x0, spec, d, rng)
    });
    let mut values = Vec::with_capacity(n * d);
    for r in rows {
        values.extend(r?);
    }
    ObservationMatrix::new(n, d, values, MarginScale::Laplace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExceedanceEstimate {
    pub prob: f64,
    pub mc_error: f64,
}

/// `Pr{max_j X(s_j) > v}` by importance sampling over conditioning sites:
/// with `J` uniform and `X` drawn given `X(s_J) > v`,
/// `Pr{max > v} = D · Pr{X(s) > v} · E[1/N]`, `N` the number of exceedances.
pub fn exceedance_prob_max(spec: &SceSpec, sites: &SiteSet, v: f64, nsim: usize, seed: u64) -> Result<ExceedanceEstimate> {
    spec.validate()?;
    let d = sites.len();
    if d == 0 || nsim == 0 {
        return invalid_input("need at least one site and one simulation");
    }
    let single = MarginScale::Laplace.tail_prob(v);
    if d == 1 {
        return Ok(ExceedanceEstimate { prob: single, mc_error: 0.0 });
    }
    let samplers: Vec<Sampler> = (0..d).map(|s| Sampler::new(sites, s, spec)).collect::<Result<_>>()?;
    let inv: Vec<Result<f64>> = par_rows(nsim, seed, |_, rng| {
        let j = rng.random_range(0..d);
        let x0 = v + rng.sample::<f64, _>(Exp1);
        let x = samplers[j].draw(x0, spec, d, rng)?;
        let n = x.iter().filter(|&&y| y > v).count();
        Ok(1.0 / n as f64)
    });
    let inv: Vec<f64> = inv.into_iter().collect::<Result<_>>()?;
    let m = inv.iter().sum::<f64>() / nsim as f64;
    if !(m > 0.0) {
        return Err(Error::Numerical("conditional exceedance estimate is zero".into()));
    }
    let var = if nsim > 1 { inv.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (nsim - 1) as f64 } else { 0.0 };
    let scale = d as f64 * single;
    Ok(ExceedanceEstimate { prob: scale * m, mc_error: scale * (var / nsim as f64).sqrt() })
}

/// Parameters of a conditional extremes model. `delta_lag` is a parameter
/// only when initialized above zero.
pub fn sce_params(spec: &SceSpec) -> Vec<ParamSpec> {
    let mut p = vec![
        ParamSpec::new("kappa", spec.kappa, Transform::Log),
        ParamSpec::new("lambda", spec.lambda, Transform::Log),
    ];
    if spec.delta_lag > 0.0 {
        p.push(ParamSpec::new("delta_lag", spec.delta_lag, Transform::Log));
    }
    p.push(ParamSpec::new("beta", spec.beta, Transform::Logit { lo: 0.0, hi: 1.0 }));
    p.push(ParamSpec::new("mu", spec.mu, Transform::Identity));
    p.push(ParamSpec::new("sigma", spec.sigma, Transform::Log));
    p.push(ParamSpec::new("phi", spec.cov.phi, Transform::Log));
    p.push(ParamSpec::new("nu", spec.cov.nu, Transform::Logit { lo: 0.0, hi: 2.0 }));
    match spec.delta {
        DeltaProfile::Constant { delta } => p.push(ParamSpec::new("delta", delta, Transform::Log)),
        DeltaProfile::Decay { delta1, delta2 } => {
            p.push(ParamSpec::new("delta1", delta1, Transform::Log));
            p.push(ParamSpec::new("delta2", delta2, Transform::Log));
        }
    }
    if let Some(a) = spec.cov.aniso {
        p.push(ParamSpec::new("psi", a.psi, Transform::Angle));
        p.push(ParamSpec::new("L", a.l, Transform::Log));
    }
    p
}

pub fn sce_from_params(template: &SceSpec, x: &[f64]) -> SceSpec {
    let mut s = *template;
    let mut it = x.iter().copied();
    let mut next = |d: f64| it.next().unwrap_or(d);
    s.kappa = next(s.kappa);
    s.lambda = next(s.lambda);
    if template.delta_lag > 0.0 {
        s.delta_lag = next(s.delta_lag);
    }
    s.beta = next(s.beta);
    s.mu = next(s.mu);
    s.sigma = next(s.sigma);
    s.cov.phi = next(s.cov.phi);
    s.cov.nu = next(s.cov.nu);
    s.delta = match s.delta {
        DeltaProfile::Constant { delta } => DeltaProfile::Constant { delta: next(delta) },
        DeltaProfile::Decay { delta1, delta2 } => DeltaProfile::Decay { delta1: next(delta1), delta2: next(delta2) },
    };
    if let Some(a) = s.cov.aniso {
        s.cov.aniso = Some(Anisotropy { psi: next(a.psi), l: next(a.l) });
    }
    s
}

/// Composite-likelihood fit. `free` restricts the optimized parameters by name.
#[allow(clippy::too_many_arguments)]
pub fn fit_sce(
    init: &SceSpec,
    sites: &SiteSet,
    data: &ObservationMatrix,
    subset: &[usize],
    u: f64,
    free: Option<&[&str]>,
    settings: &OptimSettings,
    with_stderr: bool,
) -> Result<FitResult> {
    let layout = ParamLayout::new(sce_params(init), free)?;
    let n = sce_composite_loglik(data, sites, subset, u, init)?.n_used;
    if n == 0 {
        return Err(Error::InsufficientData(format!("no conditioning exceedances above {u}")));
    }
    let objective = |x: &[f64]| {
        let spec = sce_from_params(init, &layout.expand(x));
        sce_composite_loglik(data, sites, subset, u, &spec).map_or(f64::NAN, |l| l.value)
    };
    let mut out = fit(objective, &layout.free_params(), settings, n, with_stderr)?;
    out.censor_level = Some(MarginScale::Laplace.to_uniform(u));
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadSettings};
    use proptest::prelude::*;

    pub(crate) fn spec() -> SceSpec {
        SceSpec {
            kappa: 1.2,
            lambda: 2.0,
            delta_lag: 0.0,
            beta: 0.3,
            mu: 0.5,
            sigma: 1.3,
            cov: CovarianceSpec::isotropic(1.5, 1.0),
            delta: DeltaProfile::Constant { delta: 1.4 },
            b_form: BForm::XPowBeta,
        }
    }

    #[test]
    fn alpha_and_normalization_examples() {
        let mut s = spec();
        assert_eq!(alpha_fn(0.0, &s), 1.0);
        s.kappa = 1.0;
        s.lambda = 2.0;
        assert!((alpha_fn(2.0, &s) - (-1f64).exp()).abs() < 1e-15);
        assert!(alpha_fn(1e4, &s) < 1e-300);
        s.delta_lag = 0.5;
        assert_eq!(alpha_fn(0.5, &s), 1.0);
        assert!((alpha_fn(0.5 + 1e-12, &s) - 1.0).abs() < 1e-9);
        s.b_form = BForm::OnePlusAPowBeta;
        s.beta = 0.0;
        assert_eq!(norm_ab(3.0, 0.1, &s).unwrap().1, 2.0);
        s.b_form = BForm::XPowBeta;
        assert!(norm_ab(-1.0, 0.1, &s).is_err());
    }

    #[test]
    fn delta_laplace_examples() {
        let p1 = DeltaLaplaceParams { mu: 0.3, sigma: 2.0, delta: 1.0 };
        assert!((dlaplace_eval(0.3, &p1, DlKind::Pdf) - 0.25).abs() < 1e-14);
        let p2 = DeltaLaplaceParams { mu: 0.0, sigma: 1.5, delta: 2.0 };
        assert!((dlaplace_eval(0.0, &p2, DlKind::Pdf) - 1.0 / (1.5 * std::f64::consts::PI.sqrt())).abs() < 1e-14);
        // δ = 2 is Gaussian with standard deviation σ/√2
        for z in [-2.0, -0.3, 0.0, 1.1, 3.0] {
            let want = crate::special::norm_cdf(z * std::f64::consts::SQRT_2 / 1.5);
            assert!((dlaplace_eval(z, &p2, DlKind::Cdf) - want).abs() < 1e-12, "{z} {} {want}", dlaplace_eval(z, &p2, DlKind::Cdf));
        }
        for p in [p1, p2, DeltaLaplaceParams { mu: -1.0, sigma: 0.7, delta: 1.6 }] {
            let q = QuadSettings { abs_tol: 1e-12, rel_tol: 1e-12, max_intervals: 500 };
            let s = integrate(|z| dlaplace_eval(z, &p, DlKind::Pdf), p.mu - 40.0 * p.sigma, p.mu + 40.0 * p.sigma, &q);
            assert!((s.value - 1.0).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn delta_laplace_quantile_round_trip(u in 0.001f64..0.999, delta in 0.5f64..2.5) {
            let p = DeltaLaplaceParams { mu: 0.2, sigma: 1.1, delta };
            let z = dlaplace_eval(u, &p, DlKind::Quantile);
            prop_assert!((dlaplace_eval(z, &p, DlKind::Cdf) - u).abs() < 1e-10);
            let e = p.normal_score(z);
            prop_assert!((e - norm_quantile(u)).abs() < 1e-8);
            prop_assert!((p.from_normal_score(e) - z).abs() < 1e-8 * (1.0 + z.abs()));
        }

        #[test]
        fn alpha_nonincreasing(h in 0.0f64..10.0, dh in 0.0f64..1.0) {
            let s = SceSpec { delta_lag: 0.7, ..spec() };
            prop_assert!(alpha_fn(h + dh, &s) <= alpha_fn(h, &s));
        }
    }

    #[test]
    fn residual_law_shape() {
        let sites = SiteSet::transect(4, 1.0);
        let mut s = spec();
        s.delta = DeltaProfile::Decay { delta1: 1.5, delta2: 50.0 };
        let law = residual_law(&sites, 1, &s).unwrap();
        assert_eq!(law.others, vec![0, 2, 3]);
        assert!((law.margins[0].delta - 2.0).abs() < 1e-6);
        assert!((law.margins[2].delta - 1.0).abs() < 1e-6);
        let m = law.margins[1];
        assert!((m.variance() - law.cov[(1, 1)]).abs() < 1e-12);
        let x = sce_simulate(&s, &sites, 1, 2.0, 50, 4).unwrap();
        for i in 0..50 {
            assert!(x.get(i, 1) > 2.0);
        }
    }

    #[test]
    fn two_site_gaussian_case() {
        let sites = SiteSet::transect(2, 0.8);
        let mut s = spec();
        s.mu = 0.0;
        s.delta = DeltaProfile::Constant { delta: 2.0 };
        let (x0, x1) = (3.0, 1.7);
        let data = ObservationMatrix::from_rows(&[vec![x0, x1]], MarginScale::Laplace).unwrap();
        let l = sce_loglik(&data, &sites, 0, 2.5, &s).unwrap();
        let (a, b) = norm_ab(x0, 0.8, &s).unwrap();
        let rho = s.cov.corr_at(0.8);
        let sd = s.sigma * (1.0 - rho * rho).sqrt();
        let z = (x1 - a) / b;
        let want = norm_logpdf(z / sd) - sd.ln() - b.ln();
        assert!((l.value - want).abs() < 1e-10, "{} {want}", l.value);
        assert_eq!(sce_composite_loglik(&data, &sites, &[0], 2.5, &s).unwrap().value, l.value);
    }

    #[test]
    fn exceedance_probability_bounds() {
        let sites = SiteSet::transect(5, 0.5);
        let s = spec();
        let one = exceedance_prob_max(&s, &SiteSet::transect(1, 1.0), 4.0, 10, 1).unwrap();
        assert_eq!(one.prob, 0.5 * (-4f64).exp());
        let mut last = f64::INFINITY;
        for v in [3.0, 4.0, 5.0, 6.0] {
            let e = exceedance_prob_max(&s, &sites, v, 4000, 2).unwrap();
            let single = 0.5 * (-v).exp();
            assert!(e.prob >= single && e.prob <= 5.0 * single);
            assert!(e.prob <= last);
            last = e.prob;
        }
    }

    #[test]
    fn farthest_points_are_distinct_and_spread() {
        let sites = SiteSet::grid(5, 5, 1.0);
        let sub = farthest_point_subset(&sites, 5);
        assert_eq!(sub[0], 12);
        let mut u = sub.clone();
        u.sort_unstable();
        u.dedup();
        assert_eq!(u.len(), 5);
        assert_eq!(farthest_point_subset(&sites, 100).len(), 25);
    }
}
