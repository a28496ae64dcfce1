//! Tail-dependence summaries: empirical and model `χ_u`, `η_u`, their
//! limits, and the extremogram.

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::conditional::sce_simulate;
use crate::data::ObservationMatrix;
use crate::error::{invalid_input, Error, Result};
use crate::gauss::SiteSet;
use crate::inference::quantile;
use crate::margins::MarginScale;
use crate::model::ModelSpec;
use crate::quadrature::{integrate, QuadSettings};
use crate::rng::stream_rng;
use crate::special::{bvn_upper, norm_cdf, norm_sf, t_cdf};
use crate::subasymptotic::{hw_chi, marginal_quantile, maxmix_bivariate_cdf, mixture_cdf, LocationMixSpec};

const PERMUTATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Chi,
    Eta,
    Extremogram,
}

#[derive(Debug, Clone, Serialize)]
pub struct DependenceCurve {
    pub pair: (usize, usize),
    pub levels: Vec<f64>,
    /// `NaN` where the measure is undefined; see `flags`.
    pub values: Vec<f64>,
    pub kind: CurveKind,
    pub flags: Vec<String>,
}

struct Counts {
    n: usize,
    first: usize,
    second: usize,
    joint: usize,
}

fn pair_counts(data: &ObservationMatrix, (i, j): (usize, usize), u: f64) -> Result<Counts> {
    if data.scale() != MarginScale::Uniform {
        return invalid_input("empirical dependence measures expect uniform margins");
    }
    if i >= data.ncols() || j >= data.ncols() {
        return invalid_input(format!("pair ({i}, {j}) out of range"));
    }
    if !(u > 0.0 && u < 1.0) {
        return invalid_input(format!("level u={u} must lie in (0, 1)"));
    }
    let mut c = Counts { n: 0, first: 0, second: 0, joint: 0 };
    for row in data.rows() {
        let (a, b) = (row[i], row[j]);
        if a.is_nan() || b.is_nan() {
            continue;
        }
        c.n += 1;
        c.first += (a > u) as usize;
        c.second += (b > u) as usize;
        c.joint += (a > u && b > u) as usize;
    }
    if (c.n as f64) < 1.0 / (1.0 - u) {
        return Err(Error::InsufficientData(format!(
            "pair ({i}, {j}) has {} joint observations, fewer than 1/(1-u) at u={u}",
            c.n
        )));
    }
    Ok(c)
}

/// Joint exceedances over the mean of the two single-site exceedance counts.
pub fn chi_u_empirical(data: &ObservationMatrix, pair: (usize, usize), u: f64) -> Result<f64> {
    let c = pair_counts(data, pair, u)?;
    let denom = 0.5 * (c.first + c.second) as f64;
    if denom == 0.0 {
        return Err(Error::InsufficientData(format!("no exceedances of u={u} at pair {pair:?}")));
    }
    Ok(c.joint as f64 / denom)
}

/// `log(1 − u) / log p̂`, with `p̂` the empirical joint survival at `u`.
pub fn eta_u_empirical(data: &ObservationMatrix, pair: (usize, usize), u: f64) -> Result<f64> {
    let c = pair_counts(data, pair, u)?;
    if c.joint == 0 {
        return Err(Error::InsufficientData(format!("no joint exceedances of u={u} at pair {pair:?}")));
    }
    let p = c.joint as f64 / c.n as f64;
    Ok(if p >= 1.0 { 1.0 } else { (1.0 - u).ln() / p.ln() })
}

fn curve<F>(pair: (usize, usize), levels: &[f64], kind: CurveKind, f: F) -> Result<DependenceCurve>
where
    F: Fn(f64) -> Result<f64>,
{
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return invalid_input("levels must be strictly increasing");
    }
    let mut flags = Vec::new();
    let mut values = Vec::with_capacity(levels.len());
    for &u in levels {
        match f(u) {
            Ok(v) => values.push(v),
            Err(Error::InsufficientData(msg)) => {
                flags.push(msg);
                values.push(f64::NAN);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(DependenceCurve { pair, levels: levels.to_vec(), values, kind, flags })
}

pub fn chi_curve_empirical(data: &ObservationMatrix, pair: (usize, usize), levels: &[f64]) -> Result<DependenceCurve> {
    curve(pair, levels, CurveKind::Chi, |u| chi_u_empirical(data, pair, u))
}

pub fn eta_curve_empirical(data: &ObservationMatrix, pair: (usize, usize), levels: &[f64]) -> Result<DependenceCurve> {
    curve(pair, levels, CurveKind::Eta, |u| eta_u_empirical(data, pair, u))
}

#[derive(Debug, Clone, Serialize)]
pub struct Extremogram {
    pub lags: Vec<usize>,
    /// `NaN` at lags without conditioning exceedances.
    pub values: Vec<f64>,
    /// Pointwise 95% quantile of the extremogram of permuted series.
    pub upper_bound: Vec<f64>,
    pub flags: Vec<String>,
}

fn extremogram_values(x: &[f64], u: f64, max_lag: usize) -> Vec<Option<f64>> {
    (1..=max_lag)
        .map(|h| {
            let (mut base, mut joint) = (0usize, 0usize);
            for t in 0..x.len().saturating_sub(h) {
                let (a, b) = (x[t], x[t + h]);
                if a.is_nan() || b.is_nan() || a <= u {
                    continue;
                }
                base += 1;
                joint += (b > u) as usize;
            }
            (base > 0).then(|| joint as f64 / base as f64)
        })
        .collect()
}

/// `P̂{U_{t+h} > u | U_t > u}` for `h = 1..=max_lag` on a uniform-scale series
/// with missing entries as `NaN`.
pub fn extremogram(series: &[f64], u: f64, max_lag: usize, seed: u64) -> Result<Extremogram> {
    if !(u > 0.0 && u < 1.0) {
        return invalid_input(format!("level u={u} must lie in (0, 1)"));
    }
    let valid: Vec<usize> = (0..series.len()).filter(|&t| !series[t].is_nan()).collect();
    if (valid.len() as f64) < 1.0 / (1.0 - u) {
        return Err(Error::InsufficientData(format!(
            "{} observations are fewer than 1/(1-u) at u={u}",
            valid.len()
        )));
    }
    let observed = extremogram_values(series, u, max_lag);
    let mut rng = stream_rng(seed, 0);
    let mut perm = vec![Vec::with_capacity(PERMUTATIONS); max_lag];
    let mut shuffled = series.to_vec();
    let mut vals: Vec<f64> = valid.iter().map(|&t| series[t]).collect();
    for _ in 0..PERMUTATIONS {
        vals.shuffle(&mut rng);
        for (k, &t) in valid.iter().enumerate() {
            shuffled[t] = vals[k];
        }
        for (h, v) in extremogram_values(&shuffled, u, max_lag).into_iter().enumerate() {
            if let Some(v) = v {
                perm[h].push(v);
            }
        }
    }
    let mut flags = Vec::new();
    let values = observed
        .iter()
        .enumerate()
        .map(|(h, v)| {
            v.unwrap_or_else(|| {
                flags.push(format!("no exceedance pairs at lag {}", h + 1));
                f64::NAN
            })
        })
        .collect();
    let upper_bound = perm
        .into_iter()
        .map(|mut p| {
            p.sort_by(f64::total_cmp);
            quantile(&p, 0.95)
        })
        .collect();
    Ok(Extremogram { lags: (1..=max_lag).collect(), values, upper_bound, flags })
}

/// A model dependence limit with its Monte-Carlo standard error (zero for
/// closed forms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitValue {
    pub value: f64,
    pub std_error: f64,
}

impl LimitValue {
    fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0 }
    }
}

fn unsupported<T>(what: &str, model: &ModelSpec) -> Result<T> {
    Err(Error::Unsupported(format!("{what} is not available for the {} family", model.name())))
}

/// `χ` at separation `h`.
pub fn chi_theoretical(model: &ModelSpec, h: f64) -> Result<LimitValue> {
    model.validate()?;
    let rho = model.covariance().corr_at(h);
    Ok(match model {
        ModelSpec::GaussianCopula { .. } => LimitValue::exact(if rho >= 1.0 { 1.0 } else { 0.0 }),
        ModelSpec::Hot(s) => {
            if s.beta > 0.0 {
                LimitValue::exact(0.0)
            } else if rho >= 1.0 {
                LimitValue::exact(1.0)
            } else {
                let g = s.gamma;
                let arg = (1.0 + g).sqrt() * (1.0 - rho) / (1.0 - rho * rho).sqrt();
                LimitValue::exact(2.0 - 2.0 * t_cdf(arg, g + 1.0))
            }
        }
        ModelSpec::Hw(s) => {
            let (value, std_error) = hw_chi(s.delta, rho);
            LimitValue { value, std_error }
        }
        ModelSpec::LocationMix(s) => LimitValue::exact(2.0 - 2.0 * norm_cdf(s.theta * ((1.0 - rho) / 2.0).sqrt())),
        ModelSpec::MaxStable(s) => LimitValue::exact(2.0 - s.extremal_coefficient(h)),
        ModelSpec::RPareto(s) => LimitValue::exact(2.0 - s.base.extremal_coefficient(h)),
        ModelSpec::Ims(s) => LimitValue::exact(if s.base.extremal_coefficient(h) <= 1.0 { 1.0 } else { 0.0 }),
        ModelSpec::MaxMix(s) => LimitValue::exact(s.a * (2.0 - s.ms.extremal_coefficient(h))),
        ModelSpec::Sce(_) => return unsupported("a chi limit", model),
    })
}

/// `η` at separation `h`.
pub fn eta_theoretical(model: &ModelSpec, h: f64) -> Result<f64> {
    model.validate()?;
    let rho = model.covariance().corr_at(h);
    Ok(match model {
        ModelSpec::GaussianCopula { .. } => (1.0 + rho) / 2.0,
        ModelSpec::Hot(s) => {
            if s.beta > 0.0 {
                ((1.0 + rho) / 2.0).powf(s.beta / (s.beta + 2.0))
            } else {
                1.0
            }
        }
        ModelSpec::Hw(s) => hw_eta(s.delta, (1.0 + rho) / 2.0),
        ModelSpec::LocationMix(_) | ModelSpec::MaxStable(_) | ModelSpec::RPareto(_) => 1.0,
        ModelSpec::Ims(s) => 1.0 / s.base.extremal_coefficient(h),
        ModelSpec::MaxMix(s) => {
            if s.a > 0.0 {
                1.0
            } else {
                1.0 / s.ims.base.extremal_coefficient(h)
            }
        }
        ModelSpec::Sce(_) => return unsupported("an eta limit", model),
    })
}

/// Piecewise `η` of the Huser–Wadsworth model given `η_W` of its Gaussian
/// component.
pub fn hw_eta(delta: f64, eta_w: f64) -> f64 {
    if delta >= 0.5 {
        1.0
    } else if delta > eta_w / (1.0 + eta_w) {
        delta / (1.0 - delta)
    } else {
        eta_w
    }
}

/// Settings for model `χ_u` and `η_u` at finite levels.
#[derive(Debug, Clone)]
pub struct ModelCurveSettings {
    pub quad: QuadSettings,
    /// Conditional simulations per level for the conditional extremes model.
    pub nsim: usize,
    pub seed: u64,
}

impl Default for ModelCurveSettings {
    fn default() -> Self {
        Self {
            quad: QuadSettings { abs_tol: 1e-13, rel_tol: 1e-10, max_intervals: 400 },
            nsim: 20_000,
            seed: 0xd1a9,
        }
    }
}

fn locmix_survival(x: f64, theta: f64) -> f64 {
    norm_sf(x) + (theta * theta / 2.0 - theta * x).exp() * norm_cdf(x - theta)
}

fn locmix_quantile(u: f64, theta: f64) -> f64 {
    let target = 1.0 - u;
    let (mut lo, mut hi) = (-40.0, 40.0 + 800.0 / theta);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if locmix_survival(mid, theta) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn locmix_joint_survival(x: f64, rho: f64, s: &LocationMixSpec, quad: &QuadSettings) -> f64 {
    // R = −log(1 − t)/θ
    integrate(
        |t| {
            let r = -(-t.min(1.0 - 1e-15)).ln_1p() / s.theta;
            bvn_upper(x - r, x - r, rho)
        },
        0.0,
        1.0,
        quad,
    )
    .value
}

/// `Pr{U₁ > u, U₂ > u}` for the model at the two given sites.
pub fn joint_survival_model(model: &ModelSpec, pair: &SiteSet, u: f64, settings: &ModelCurveSettings) -> Result<f64> {
    model.validate()?;
    if pair.len() != 2 {
        return invalid_input("model joint survival needs exactly two sites");
    }
    if !(u > 0.0 && u < 1.0) {
        return invalid_input(format!("level u={u} must lie in (0, 1)"));
    }
    let h = model.covariance().distance(pair.coords[0], pair.coords[1]);
    if let Some(m) = model.as_mixture() {
        let q = marginal_quantile(&m, u);
        let c = mixture_cdf(&m, pair, &[q, q], &settings.quad)?.value;
        return Ok((1.0 - 2.0 * u + c).max(0.0));
    }
    Ok(match model {
        ModelSpec::LocationMix(s) => {
            let rho = s.cov.corr_at(h);
            locmix_joint_survival(locmix_quantile(u, s.theta), rho, s, &settings.quad)
        }
        ModelSpec::MaxStable(s) => 1.0 - 2.0 * u + u.powf(s.extremal_coefficient(h)),
        ModelSpec::Ims(s) => (1.0 - u).powf(s.base.extremal_coefficient(h)),
        ModelSpec::MaxMix(s) => {
            let q = -1.0 / u.ln();
            1.0 - 2.0 * u + maxmix_bivariate_cdf(s, h, q, q)?
        }
        ModelSpec::Sce(s) => {
            let v = MarginScale::Laplace.from_uniform(u);
            let x = sce_simulate(s, pair, 0, v, settings.nsim, settings.seed)?;
            let hits = (0..x.nrows()).filter(|&i| x.get(i, 1) > v).count();
            (1.0 - u) * hits as f64 / x.nrows() as f64
        }
        ModelSpec::RPareto(_) => return unsupported("a joint survival at finite levels", model),
        _ => unreachable!("mixture families handled above"),
    })
}

/// Model `χ_u`; r-Pareto processes are threshold stable, so their `χ_u` is the limit.
pub fn chi_u_model(model: &ModelSpec, pair: &SiteSet, u: f64, settings: &ModelCurveSettings) -> Result<f64> {
    if let ModelSpec::RPareto(s) = model {
        if pair.len() != 2 {
            return invalid_input("model chi_u needs exactly two sites");
        }
        return Ok(2.0 - s.base.extremal_coefficient(s.base.covariance().distance(pair.coords[0], pair.coords[1])));
    }
    Ok(joint_survival_model(model, pair, u, settings)? / (1.0 - u))
}

pub fn eta_u_model(model: &ModelSpec, pair: &SiteSet, u: f64, settings: &ModelCurveSettings) -> Result<f64> {
    if let ModelSpec::RPareto(_) = model {
        return Ok(1.0);
    }
    let p = joint_survival_model(model, pair, u, settings)?;
    if !(p > 0.0) {
        return Err(Error::Numerical(format!("model joint survival at u={u} is zero")));
    }
    Ok(if p >= 1.0 - u { 1.0 } else { (1.0 - u).ln() / p.ln() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotic::{maxstable_simulate, MaxStableSpec, SimSettings};
    use crate::gauss::CovarianceSpec;
    use crate::margins::empirical_uniform;
    use crate::subasymptotic::{mixture_simulate, HotSpec, HwSpec, SimModel};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn uniform(rows: Vec<Vec<f64>>) -> ObservationMatrix {
        ObservationMatrix::from_rows(&rows, MarginScale::Uniform).unwrap()
    }

    #[test]
    fn hand_counted_chi() {
        let m = uniform(vec![vec![0.2, 0.9], vec![0.4, 0.3], vec![0.6, 0.1], vec![0.8, 0.7]]);
        assert_eq!(chi_u_empirical(&m, (0, 1), 0.5).unwrap(), 0.5);
        let same = uniform((1..=40).map(|i| vec![i as f64 / 41.0; 2]).collect());
        for u in [0.1, 0.5, 0.9] {
            assert_eq!(chi_u_empirical(&same, (0, 1), u).unwrap(), 1.0);
            assert!((eta_u_empirical(&same, (0, 1), u).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(chi_u_empirical(&m, (0, 1), 0.95), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn independence_levels() {
        let mut rng = stream_rng(5, 0);
        let rows: Vec<Vec<f64>> = (0..200_000).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let m = uniform(rows);
        assert!((chi_u_empirical(&m, (0, 1), 0.9).unwrap() - 0.1).abs() < 0.006);
        assert!((eta_u_empirical(&m, (0, 1), 0.9).unwrap() - 0.5).abs() < 0.01);
        let c = chi_curve_empirical(&m, (0, 1), &[0.5, 0.9, 0.99999999]).unwrap();
        assert!(c.values[2].is_nan() && !c.flags.is_empty());
        assert!(chi_curve_empirical(&m, (0, 1), &[0.9, 0.5]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn chi_uses_ranks_only(seed in 0u64..1000, u in 0.5f64..0.95) {
            let mut rng = stream_rng(seed, 1);
            let rows: Vec<Vec<f64>> = (0..300).map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                vec![a, 0.6 * a + 0.8 * b]
            }).collect();
            let raw = ObservationMatrix::from_rows(&rows, MarginScale::Raw).unwrap();
            let warped = raw.map(MarginScale::Raw, |v| v.exp() * 3.0 + v.powi(3));
            let a = chi_u_empirical(&empirical_uniform(&raw, 1).unwrap(), (0, 1), u).unwrap();
            let b = chi_u_empirical(&empirical_uniform(&warped, 1).unwrap(), (0, 1), u).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn extremogram_cases() {
        let mut rng = stream_rng(2, 0);
        let iid: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let e = extremogram(&iid, 0.95, 20, 7).unwrap();
        let above = e.values.iter().zip(&e.upper_bound).filter(|(v, b)| v > b).count();
        assert!(above <= 3, "{above}");
        // AR(1) Gaussian driving uniform margins
        let mut z = 0.0f64;
        let ar: Vec<f64> = (0..20_000)
            .map(|_| {
                z = 0.9 * z + (1.0 - 0.81f64).sqrt() * rng.sample::<f64, _>(StandardNormal);
                norm_cdf(z)
            })
            .collect();
        let e = extremogram(&ar, 0.95, 5, 3).unwrap();
        assert!(e.values[0] > e.upper_bound[0] && e.values[0] > 0.4);
        let holes: Vec<f64> = (0..100).map(|t| if t % 2 == 0 { 0.99 } else { f64::NAN }).collect();
        let e = extremogram(&holes, 0.9, 1, 1).unwrap();
        assert!(e.values[0].is_nan() && e.flags.len() == 1);
    }

    #[test]
    fn persistent_series_has_unit_lag_one() {
        // x_{t+1} ≥ x_t, so every exceedance is followed by one
        let x: Vec<f64> = (1..=2000).map(|t| t as f64 / 2001.0).collect();
        let e = extremogram(&x, 0.95, 2, 1).unwrap();
        assert_eq!(e.values[0], 1.0);
        assert!(e.values[0] > e.upper_bound[0]);
    }

    #[test]
    fn limits_match_known_values() {
        let cov = CovarianceSpec::isotropic(1.0, 1.0);
        let g = ModelSpec::GaussianCopula { cov };
        let h = -(0.5f64).ln();
        assert_eq!(chi_theoretical(&g, h).unwrap().value, 0.0);
        assert!((eta_theoretical(&g, h).unwrap() - 0.75).abs() < 1e-12);
        let hot = ModelSpec::Hot(HotSpec { beta: 0.0, gamma: 1.0, cov });
        let want = 2.0 - 2.0 * t_two_cdf((2.0f64).sqrt() * 0.5 / 0.75f64.sqrt());
        assert!((chi_theoretical(&hot, h).unwrap().value - want).abs() < 1e-10);
        let hot_w = ModelSpec::Hot(HotSpec { beta: 2.0, gamma: 1.0, cov });
        assert!((eta_theoretical(&hot_w, 1e6).unwrap() - 0.5f64.sqrt()).abs() < 1e-10);
        assert_eq!(chi_theoretical(&hot_w, h).unwrap().value, 0.0);
        assert_eq!(hw_eta(0.25, 0.75), 0.75);
        assert!((hw_eta(0.45, 0.6) - 0.45 / 0.55).abs() < 1e-15);
        assert_eq!(hw_eta(0.6, 0.6), 1.0);
        let hw = ModelSpec::Hw(HwSpec { delta: 0.44, cov });
        assert_eq!(chi_theoretical(&hw, h).unwrap().value, 0.0);
        let ms = ModelSpec::MaxStable(MaxStableSpec::brown_resnick(1.0, 1.0));
        let v = 2.0 * norm_cdf((0.5f64).sqrt());
        assert!((chi_theoretical(&ms, 1.0).unwrap().value - (2.0 - v)).abs() < 1e-12);
        let sce = ModelSpec::Sce(crate::conditional::tests::spec());
        assert!(matches!(chi_theoretical(&sce, 1.0), Err(Error::Unsupported(_))));
    }

    /// Student-t(2) distribution function by quadrature of the density.
    fn t_two_cdf(x: f64) -> f64 {
        let q = QuadSettings { abs_tol: 1e-14, rel_tol: 1e-13, max_intervals: 500 };
        let pdf = |t: f64| (1.0 + t * t / 2.0).powf(-1.5) / (2.0 * 2f64.sqrt());
        0.5 + integrate(pdf, 0.0, x, &q).value
    }

    #[test]
    fn gaussian_eta_is_positive_association() {
        let g = ModelSpec::GaussianCopula { cov: CovarianceSpec::isotropic(2.0, 1.5) };
        for h in [0.01, 0.5, 2.0, 10.0] {
            let e = eta_theoretical(&g, h).unwrap();
            assert!(e > 0.5 && e < 1.0);
        }
    }

    #[test]
    fn model_curves() {
        let pair = SiteSet::transect(2, 0.7);
        let s = ModelCurveSettings::default();
        let g = ModelSpec::GaussianCopula { cov: CovarianceSpec::isotropic(1.0, 1.0) };
        let rho = (-0.7f64).exp();
        let mut last = 1.0;
        for u in [0.9, 0.95, 0.99, 0.999] {
            let c = chi_u_model(&g, &pair, u, &s).unwrap();
            let z = crate::special::norm_quantile(u);
            assert!((c - bvn_upper(z, z, rho) / (1.0 - u)).abs() < 1e-7);
            assert!(c < last);
            last = c;
        }
        let ms = ModelSpec::MaxStable(MaxStableSpec::brown_resnick(1.0, 1.0));
        let c = chi_u_model(&ms, &pair, 0.999, &s).unwrap();
        assert!((c - chi_theoretical(&ms, 0.7).unwrap().value).abs() < 2e-3);
        let ims = ModelSpec::Ims(crate::subasymptotic::ImsSpec { base: MaxStableSpec::brown_resnick(1.0, 1.0) });
        assert!((eta_u_model(&ims, &pair, 0.9, &s).unwrap() - eta_theoretical(&ims, 0.7).unwrap()).abs() < 1e-12);
        let lm = ModelSpec::LocationMix(LocationMixSpec { theta: 1.5, cov: CovarianceSpec::isotropic(1.0, 1.0) });
        let x = locmix_quantile(0.99, 1.5);
        assert!((locmix_survival(x, 1.5) - 0.01).abs() < 1e-12);
        let deep = chi_u_model(&lm, &pair, 0.99999, &s).unwrap();
        assert!((deep - chi_theoretical(&lm, 0.7).unwrap().value).abs() < 0.05);
    }

    #[test]
    fn model_chi_u_agrees_with_simulation() {
        let pair = SiteSet::transect(2, 0.5);
        let s = ModelCurveSettings::default();
        let spec = MaxStableSpec::extremal_t(3.0, 1.0, 1.0);
        let (z, _) = maxstable_simulate(&spec, &pair, 40_000, 8, &SimSettings::default()).unwrap();
        let u = z.map(MarginScale::Uniform, |v| (-1.0 / v).exp());
        let emp = chi_u_empirical(&u, (0, 1), 0.95).unwrap();
        let model = chi_u_model(&ModelSpec::MaxStable(spec), &pair, 0.95, &s).unwrap();
        assert!((emp - model).abs() < 0.03, "{emp} {model}");
        let hw = HwSpec { delta: 0.6, cov: CovarianceSpec::isotropic(1.0, 1.0) };
        let x = mixture_simulate(&SimModel::Hw(hw), &pair, 40_000, 9).unwrap();
        let u = empirical_uniform(&x, 0).unwrap();
        let emp = chi_u_empirical(&u, (0, 1), 0.95).unwrap();
        let model = chi_u_model(&ModelSpec::Hw(hw), &pair, 0.95, &s).unwrap();
        assert!((emp - model).abs() < 0.03, "{emp} {model}");
    }
}
