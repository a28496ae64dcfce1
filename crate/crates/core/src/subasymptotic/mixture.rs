use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;

use super::{hot_fr, FrKind, HotSpec, HwSpec, LocationMixSpec, MixtureModel};
use crate::asymptotic::LoglikValue;
use crate::data::ObservationMatrix;
use crate::error::{invalid_input, Error, Result};
use crate::gauss::{cholesky_jitter, correlation_matrix, Anisotropy, CovarianceSpec, GaussianSlice, QmcRule, SiteSet};
use crate::inference::{fit, FitResult, OptimSettings, ParamLayout, ParamSpec, Transform};
use crate::margins::MarginScale;
use crate::quadrature::{integrate, QuadEstimate, QuadSettings};
use crate::rng::par_rows;
use crate::special::{norm_cdf, norm_isf, norm_logpdf, norm_pdf, norm_quantile, norm_sf};

const T_MAX: f64 = 1.0 - 1e-15;

const MARGIN_QUAD: QuadSettings = QuadSettings { abs_tol: 1e-15, rel_tol: 1e-11, max_intervals: 300 };

fn hw_survival(x: f64, delta: f64) -> f64 {
    if x <= 1.0 {
        return 1.0;
    }
    let d2 = 2.0 * delta - 1.0;
    if d2.abs() < 1e-6 {
        (1.0 + 2.0 * x.ln()) / (x * x)
    } else {
        (delta * x.powf(-1.0 / delta) - (1.0 - delta) * x.powf(-1.0 / (1.0 - delta))) / d2
    }
}

fn hw_pdf(x: f64, delta: f64) -> f64 {
    if x <= 1.0 {
        return 0.0;
    }
    let d2 = 2.0 * delta - 1.0;
    if d2.abs() < 1e-6 {
        4.0 * x.ln() / (x * x * x)
    } else {
        (x.powf(-1.0 / delta - 1.0) - x.powf(-1.0 / (1.0 - delta) - 1.0)) / d2
    }
}

fn hot_survival(x: f64, h: &HotSpec) -> f64 {
    if x < 0.0 {
        return 1.0 - hot_survival(-x, h);
    }
    integrate(|t| norm_sf(x / hot_fr(t.min(T_MAX), h, FrKind::Quantile)), 0.0, 1.0, &MARGIN_QUAD).value
}

/// Marginal distribution function of `X(s)`.
pub fn marginal_cdf(model: &MixtureModel, x: f64) -> f64 {
    match model {
        MixtureModel::GaussianCopula { .. } => norm_cdf(x),
        MixtureModel::Hot(h) => 1.0 - hot_survival(x, h),
        MixtureModel::Hw(h) => 1.0 - hw_survival(x, h.delta),
    }
}

fn marginal_survival(model: &MixtureModel, x: f64) -> f64 {
    match model {
        MixtureModel::GaussianCopula { .. } => norm_sf(x),
        MixtureModel::Hot(h) => hot_survival(x, h),
        MixtureModel::Hw(h) => hw_survival(x, h.delta),
    }
}

pub fn marginal_pdf(model: &MixtureModel, x: f64) -> f64 {
    match model {
        MixtureModel::GaussianCopula { .. } => norm_pdf(x),
        MixtureModel::Hot(h) => {
            integrate(
                |t| {
                    let r = hot_fr(t.min(T_MAX), h, FrKind::Quantile);
                    norm_pdf(x / r) / r
                },
                0.0,
                1.0,
                &MARGIN_QUAD,
            )
            .value
        }
        MixtureModel::Hw(h) => hw_pdf(x, h.delta),
    }
}

/// Marginal quantile, by bisection for the mixture families.
pub fn marginal_quantile(model: &MixtureModel, p: f64) -> f64 {
    if !(p > 0.0 && p < 1.0) {
        return f64::NAN;
    }
    match model {
        MixtureModel::GaussianCopula { .. } => norm_quantile(p),
        MixtureModel::Hot(_) => {
            if p < 0.5 {
                return -marginal_quantile(model, 1.0 - p);
            }
            let q = 1.0 - p;
            let mut hi = 1.0;
            while marginal_survival(model, hi) > q {
                hi *= 2.0;
                if hi > 1e300 {
                    return f64::INFINITY;
                }
            }
            bisect(|x| marginal_survival(model, x) > q, 0.0, hi)
        }
        MixtureModel::Hw(_) => {
            let q = 1.0 - p;
            let mut hi = 2.0;
            while marginal_survival(model, hi) > q {
                hi *= 2.0;
                if hi > 1e300 {
                    return f64::INFINITY;
                }
            }
            bisect(|x| marginal_survival(model, x) > q, 1.0, hi)
        }
    }
}

/// Bisection for the switch point of a monotone predicate: `below(lo)` holds,
/// `below(hi)` does not.
fn bisect(below: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `∂_I F(x)` given a slice over the sites, with `xo` the values at the
/// slice's observed (differentiated) coordinates and `xc` at the others.
fn partial_prepared(
    model: &MixtureModel,
    slice: &GaussianSlice,
    xo: &[f64],
    xc: &[f64],
    rule: &QmcRule,
    quad: &QuadSettings,
) -> QuadEstimate {
    let k = xo.len() as f64;
    match model {
        MixtureModel::GaussianCopula { .. } => {
            let v = slice.log_density(xo).exp() * slice.cond_prob(xo, xc, rule);
            QuadEstimate { value: v, error: 0.0, converged: true }
        }
        MixtureModel::Hot(h) => {
            let f = |t: f64| {
                let r = hot_fr(t.min(T_MAX), h, FrKind::Quantile);
                let ao: Vec<f64> = xo.iter().map(|x| x / r).collect();
                let ac: Vec<f64> = xc.iter().map(|x| x / r).collect();
                (slice.log_density(&ao) - k * r.ln()).exp() * slice.cond_prob(&ao, &ac, rule)
            };
            integrate(f, 0.0, 1.0, quad)
        }
        MixtureModel::Hw(h) => {
            let delta = h.delta;
            let lmin = xo.iter().chain(xc).map(|x| x.ln()).fold(f64::INFINITY, f64::min);
            if !(lmin > 0.0) {
                return QuadEstimate { value: 0.0, error: 0.0, converged: true };
            }
            let t_hi = -(-lmin / delta).exp_m1();
            let to_g = |x: f64, lr: f64| -> Option<(f64, f64)> {
                let lw = (x.ln() - delta * lr) / (1.0 - delta);
                if !(lw > 0.0) {
                    return None;
                }
                let g = if lw > std::f64::consts::LN_2 { norm_isf((-lw).exp()) } else { -norm_isf(-(-lw).exp_m1()) };
                Some((g, -lw - (1.0 - delta).ln() - x.ln() - norm_logpdf(g)))
            };
            let f = |t: f64| {
                let lr = -(-t).ln_1p();
                let mut go = Vec::with_capacity(xo.len());
                let mut jac = 0.0;
                for &x in xo {
                    match to_g(x, lr) {
                        Some((g, j)) => {
                            go.push(g);
                            jac += j;
                        }
                        None => return 0.0,
                    }
                }
                let mut gc = Vec::with_capacity(xc.len());
                for &x in xc {
                    match to_g(x, lr) {
                        Some((g, _)) => gc.push(g),
                        None => return 0.0,
                    }
                }
                let v = (slice.log_density(&go) + jac).exp() * slice.cond_prob(&go, &gc, rule);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            };
            integrate(f, 0.0, t_hi, quad)
        }
    }
}

fn cdf_rule(dim: usize) -> QmcRule {
    QmcRule::new(dim, 8, 1024, 0x3c7)
}

/// `∂^{|I|} F(x) / ∂x_I` for the joint distribution function of the model at
/// `sites`, on the model's native scale.
pub fn mixture_partial_cdf(
    model: &MixtureModel,
    sites: &SiteSet,
    x: &[f64],
    set: &[usize],
    quad: &QuadSettings,
) -> Result<QuadEstimate> {
    model.validate()?;
    if x.len() != sites.len() {
        return invalid_input("one value per site is required");
    }
    if set.iter().any(|&j| j >= x.len()) {
        return invalid_input("derivative index out of range");
    }
    let corr = correlation_matrix(sites, model.covariance());
    let slice = GaussianSlice::new(&corr, set)?;
    let xo: Vec<f64> = slice.observed.iter().map(|&j| x[j]).collect();
    let xc: Vec<f64> = slice.censored.iter().map(|&j| x[j]).collect();
    let est = partial_prepared(model, &slice, &xo, &xc, &cdf_rule(sites.len()), quad);
    if !est.converged {
        log::warn!("mixture integral did not converge (error estimate {:.3e})", est.error);
    }
    Ok(est)
}

/// Joint distribution function `P(X ≤ x)`.
pub fn mixture_cdf(model: &MixtureModel, sites: &SiteSet, x: &[f64], quad: &QuadSettings) -> Result<QuadEstimate> {
    mixture_partial_cdf(model, sites, x, &[], quad)
}

/// Accuracy settings for [`censored_loglik_mixture`].
#[derive(Debug, Clone)]
pub struct MixtureLikelihood {
    pub quad: QuadSettings,
    pub qmc_shifts: usize,
    pub qmc_points: usize,
}

impl Default for MixtureLikelihood {
    fn default() -> Self {
        Self {
            quad: QuadSettings { abs_tol: 0.0, rel_tol: 1e-6, max_intervals: 100 },
            qmc_shifts: 8,
            qmc_points: 64,
        }
    }
}

/// The HW density is unbounded where several coordinates coincide, so exactly
/// tied exceedances are spread evenly over their shared rank cell
/// `1 - v ± 1/(2(n+1))` on the survival scale.
fn spread_ties(v: &mut [f64], sites: &[usize], counts: &[usize], u: f64) {
    let mut done = vec![false; v.len()];
    for a in 0..v.len() {
        if done[a] {
            continue;
        }
        let group: Vec<usize> = (a..v.len()).filter(|&b| v[b] == v[a]).collect();
        if group.len() < 2 {
            continue;
        }
        let q = 1.0 - v[a];
        let m = group.len() as f64;
        for (k, &b) in group.iter().enumerate() {
            let h = 0.5 / (counts[sites[b]] as f64 + 1.0);
            let qk = (q + h * ((2 * k + 1) as f64 / m - 1.0)).clamp(0.5 * q, 0.5 * (q + 1.0 - u));
            v[b] = 1.0 - qk;
            done[b] = true;
        }
    }
}

fn mask(idx: &[usize]) -> u64 {
    idx.iter().fold(0u64, |m, &j| m | (1 << j))
}

/// Censored log-likelihood of uniform-scale data. Values above `u` contribute
/// density coordinates and values at or below `u` are censored at the
/// threshold; rows with nothing above `u` contribute the joint distribution
/// function at the threshold. The result is on the copula scale.
pub fn censored_loglik_mixture(
    model: &MixtureModel,
    sites: &SiteSet,
    data: &ObservationMatrix,
    u: f64,
    opts: &MixtureLikelihood,
) -> Result<LoglikValue> {
    model.validate()?;
    let d = sites.len();
    if data.ncols() != d {
        return invalid_input(format!("data has {} columns for {d} sites", data.ncols()));
    }
    if d > 64 {
        return invalid_input("at most 64 sites are supported");
    }
    if data.scale() != MarginScale::Uniform {
        return invalid_input("censored mixture likelihood expects uniform-scale data");
    }
    if !(u > 0.0 && u < 1.0) {
        return invalid_input(format!("censoring level {u} must lie in (0, 1)"));
    }
    let corr = correlation_matrix(sites, model.covariance());
    let x_u = marginal_quantile(model, u);

    struct Row {
        obs: Vec<usize>,
        exc: Vec<usize>,
    }
    let rows: Vec<Row> = data
        .rows()
        .map(|row| {
            let obs: Vec<usize> = (0..d).filter(|&j| !row[j].is_nan()).collect();
            let exc: Vec<usize> = obs.iter().copied().filter(|&j| row[j] > u).collect();
            Row { obs, exc }
        })
        .collect();

    let mut slices: HashMap<(u64, u64), GaussianSlice> = HashMap::new();
    let mut rules: HashMap<usize, QmcRule> = HashMap::new();
    let mut censored_counts: HashMap<u64, (Vec<usize>, usize)> = HashMap::new();
    for r in &rows {
        if r.obs.is_empty() {
            continue;
        }
        let key = (mask(&r.obs), mask(&r.exc));
        if let std::collections::hash_map::Entry::Vacant(e) = slices.entry(key) {
            let sub = DMatrix::from_fn(r.obs.len(), r.obs.len(), |a, b| corr[(r.obs[a], r.obs[b])]);
            let local: Vec<usize> = r.exc.iter().map(|j| r.obs.iter().position(|o| o == j).unwrap()).collect();
            e.insert(GaussianSlice::new(&sub, &local)?);
        }
        rules
            .entry(r.obs.len())
            .or_insert_with(|| QmcRule::new(r.obs.len(), opts.qmc_shifts, opts.qmc_points, 0x9a55));
        if r.exc.is_empty() {
            censored_counts.entry(key.0).or_insert_with(|| (r.obs.clone(), 0)).1 += 1;
        }
    }

    let site_counts: Vec<usize> = (0..d).map(|j| (0..data.nrows()).filter(|&i| !data.is_missing(i, j)).count()).collect();
    let term = |i: usize, r: &Row| -> Result<f64> {
        let row = data.row(i);
        let slice = &slices[&(mask(&r.obs), mask(&r.exc))];
        let mut vo: Vec<f64> = r.exc.iter().map(|&j| row[j]).collect();
        if matches!(model, MixtureModel::Hw(_)) {
            spread_ties(&mut vo, &r.exc, &site_counts, u);
        }
        let xo: Vec<f64> = vo.iter().map(|&v| marginal_quantile(model, v)).collect();
        let xc = vec![x_u; r.obs.len() - r.exc.len()];
        let est = partial_prepared(model, slice, &xo, &xc, &rules[&r.obs.len()], &opts.quad);
        let mut l = est.value.ln();
        for &x in &xo {
            l -= marginal_pdf(model, x).ln();
        }
        if l.is_finite() {
            Ok(l)
        } else {
            Err(Error::Numerical(format!("non-finite censored likelihood contribution in replicate {i}")))
        }
    };

    let terms: Vec<Result<f64>> = rows
        .par_iter()
        .enumerate()
        .map(|(i, r)| if r.obs.is_empty() || r.exc.is_empty() { Ok(0.0) } else { term(i, r) })
        .collect();
    let mut value = 0.0;
    for t in terms {
        value += t?;
    }
    let mut keys: Vec<&u64> = censored_counts.keys().collect();
    keys.sort_unstable();
    for k in keys {
        let (obs, count) = &censored_counts[k];
        let slice = &slices[&(*k, 0)];
        let est = partial_prepared(model, slice, &[], &vec![x_u; obs.len()], &rules[&obs.len()], &opts.quad);
        let l = est.value.ln();
        if !l.is_finite() {
            return Err(Error::Numerical("non-finite contribution for fully censored replicates".into()));
        }
        value += *count as f64 * l;
    }
    Ok(LoglikValue { value, n_used: rows.iter().filter(|r| !r.obs.is_empty()).count() })
}

fn cov_params(cov: &CovarianceSpec, p: &mut Vec<ParamSpec>) {
    p.push(ParamSpec::new("phi", cov.phi, Transform::Log));
    p.push(ParamSpec::new("nu", cov.nu, Transform::Logit { lo: 0.0, hi: 2.0 }));
    if let Some(a) = cov.aniso {
        p.push(ParamSpec::new("psi", a.psi, Transform::Angle));
        p.push(ParamSpec::new("L", a.l, Transform::Log));
    }
}

fn cov_from(cov: &mut CovarianceSpec, it: &mut impl Iterator<Item = f64>) {
    cov.phi = it.next().unwrap_or(cov.phi);
    cov.nu = it.next().unwrap_or(cov.nu);
    if let Some(a) = cov.aniso {
        cov.aniso = Some(Anisotropy { psi: it.next().unwrap_or(a.psi), l: it.next().unwrap_or(a.l) });
    }
}

/// Free parameters of a mixture model. A HOT model initialized at `β = 0`
/// is the Pareto-tailed limit and `β` is not a parameter.
pub fn mixture_params(model: &MixtureModel) -> Vec<ParamSpec> {
    let mut p = Vec::new();
    match model {
        MixtureModel::GaussianCopula { .. } => {}
        MixtureModel::Hot(h) => {
            if h.beta > 0.0 {
                p.push(ParamSpec::new("beta", h.beta, Transform::Log));
            }
            p.push(ParamSpec::new("gamma", h.gamma, Transform::Log));
        }
        MixtureModel::Hw(h) => {
            p.push(ParamSpec::new("delta", h.delta, Transform::Logit { lo: 0.001, hi: 0.999 }));
        }
    }
    cov_params(model.covariance(), &mut p);
    p
}

pub fn mixture_from_params(template: &MixtureModel, x: &[f64]) -> MixtureModel {
    let mut m = *template;
    let mut it = x.iter().copied();
    match &mut m {
        MixtureModel::GaussianCopula { cov } => cov_from(cov, &mut it),
        MixtureModel::Hot(h) => {
            if h.beta > 0.0 {
                h.beta = it.next().unwrap_or(h.beta);
            }
            h.gamma = it.next().unwrap_or(h.gamma);
            cov_from(&mut h.cov, &mut it);
        }
        MixtureModel::Hw(h) => {
            h.delta = it.next().unwrap_or(h.delta);
            cov_from(&mut h.cov, &mut it);
        }
    }
    m
}

/// Censored-likelihood fit. `free` restricts the optimized parameters by name.
pub fn fit_mixture(
    init: &MixtureModel,
    sites: &SiteSet,
    data: &ObservationMatrix,
    u: f64,
    free: Option<&[&str]>,
    settings: &OptimSettings,
    opts: &MixtureLikelihood,
    with_stderr: bool,
) -> Result<FitResult> {
    let layout = ParamLayout::new(mixture_params(init), free)?;
    let objective = |x: &[f64]| {
        let m = mixture_from_params(init, &layout.expand(x));
        censored_loglik_mixture(&m, sites, data, u, opts).map_or(f64::NAN, |l| l.value)
    };
    let n = censored_loglik_mixture(init, sites, data, u, opts)?.n_used;
    let mut out = fit(objective, &layout.free_params(), settings, n, with_stderr)?;
    out.censor_level = Some(u);
    if let Some(d) = out.estimate("delta") {
        if !(0.002..=0.998).contains(&d) {
            out.flags.push(format!("delta estimate {d:.4} is at the boundary of [0.001, 0.999]"));
        }
    }
    Ok(out)
}

/// Families that can be simulated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimModel {
    Gaussian(CovarianceSpec),
    Hot(HotSpec),
    Hw(HwSpec),
    LocationMix(LocationMixSpec),
}

impl From<MixtureModel> for SimModel {
    fn from(m: MixtureModel) -> Self {
        match m {
            MixtureModel::GaussianCopula { cov } => SimModel::Gaussian(cov),
            MixtureModel::Hot(h) => SimModel::Hot(h),
            MixtureModel::Hw(h) => SimModel::Hw(h),
        }
    }
}

/// Simulates `n` replicates on the model's native scale.
pub fn mixture_simulate(model: &SimModel, sites: &SiteSet, n: usize, seed: u64) -> Result<ObservationMatrix> {
    let cov = match model {
        SimModel::Gaussian(c) => {
            c.validate()?;
            c
        }
        SimModel::Hot(h) => {
            h.validate()?;
            &h.cov
        }
        SimModel::Hw(h) => {
            h.validate()?;
            &h.cov
        }
        SimModel::LocationMix(l) => {
            l.validate()?;
            &l.cov
        }
    };
    let (l, _) = cholesky_jitter(&correlation_matrix(sites, cov))?;
    let d = sites.len();
    let rows = par_rows(n, seed, |_, rng| {
        let e: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let mut g = vec![0.0; d];
        for i in 0..d {
            g[i] = (0..=i).map(|k| l[(i, k)] * e[k]).sum();
        }
        match model {
            SimModel::Gaussian(_) => g,
            SimModel::Hot(h) => {
                let r = hot_fr(rng.random::<f64>(), h, FrKind::Quantile);
                g.iter().map(|v| r * v).collect()
            }
            SimModel::Hw(h) => {
                let lr = -(1.0 - rng.random::<f64>()).ln();
                g.iter()
                    .map(|&v| (h.delta * lr + (1.0 - h.delta) * (-norm_sf(v).ln())).exp())
                    .collect()
            }
            SimModel::LocationMix(s) => {
                let r: f64 = Exp::new(s.theta).expect("positive rate").sample(rng);
                g.iter().map(|v| r + v).collect()
            }
        }
    });
    ObservationMatrix::new(n, d, rows.concat(), MarginScale::Raw)
}

type ChiCache = Mutex<HashMap<(u64, u64), (f64, f64)>>;

/// Limiting χ of the Huser–Wadsworth model for a pair with Gaussian
/// correlation `rho`, as `(value, Monte-Carlo standard error)`; zero for
/// `δ ≤ 1/2`. The expectation is estimated from 10^6 seeded draws and cached.
pub fn hw_chi(delta: f64, rho: f64) -> (f64, f64) {
    if delta <= 0.5 {
        return (0.0, 0.0);
    }
    static CACHE: OnceLock<ChiCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (delta.to_bits(), rho.to_bits());
    if let Some(&v) = cache.lock().expect("cache lock").get(&key) {
        return v;
    }
    let n = 1_000_000;
    let p = (1.0 - delta) / delta;
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    let draws = par_rows(n, 0xc41, |_, rng| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rho * a + s * rng.sample::<f64, _>(StandardNormal);
        // min of unit Pareto W1, W2 is attained at the smaller Gaussian
        (-p * norm_sf(a.min(b)).ln()).exp()
    });
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let c = (2.0 * delta - 1.0) / delta;
    let out = (c * mean, c * (var / n as f64).sqrt());
    cache.lock().expect("cache lock").insert(key, out);
    out
}
