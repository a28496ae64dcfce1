use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ImsSpec, MaxMixSpec};
use crate::asymptotic::{
    maxstable_from_params, maxstable_params, maxstable_simulate, site_pairs, Dependence, LoglikValue, PairDependence,
    SimSettings,
};
use crate::data::ObservationMatrix;
use crate::error::{invalid_input, Error, Result};
use crate::gauss::SiteSet;
use crate::inference::{fit, FitResult, OptimSettings, ParamLayout, ParamSpec, Transform};
use crate::margins::MarginScale;

/// Pairwise-likelihood models built from bivariate max-stable exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PairModel {
    Ims(ImsSpec),
    MaxMix(MaxMixSpec),
}

impl PairModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            PairModel::Ims(s) => s.base.validate(),
            PairModel::MaxMix(m) => m.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImsKind {
    Survival,
    Density,
}

/// Bivariate survival function or density of an inverted max-stable pair at
/// separation `h`, on unit exponential margins.
pub fn ims_bivariate(spec: &ImsSpec, h: f64, z1: f64, z2: f64, kind: ImsKind) -> Result<f64> {
    spec.base.validate()?;
    if !(z1 > 0.0 && z2 > 0.0) {
        return invalid_input("inverted max-stable arguments must be positive");
    }
    let p = spec.base.pair_at(h).partials(1.0 / z1, 1.0 / z2);
    let s = (-p.v).exp();
    Ok(match kind {
        ImsKind::Survival => s,
        ImsKind::Density => s * (p.v1 * p.v2 - p.v12) / (z1 * z1 * z2 * z2),
    })
}

/// `log G` and its first and mixed partial derivatives.
#[derive(Debug, Clone, Copy, Default)]
struct LogParts {
    l: f64,
    l1: f64,
    l2: f64,
    l12: f64,
}

impl std::ops::Add for LogParts {
    type Output = LogParts;
    fn add(self, o: LogParts) -> LogParts {
        LogParts { l: self.l + o.l, l1: self.l1 + o.l1, l2: self.l2 + o.l2, l12: self.l12 + o.l12 }
    }
}

fn ms_parts(pd: &PairDependence, z1: f64, z2: f64, a: f64) -> LogParts {
    let p = pd.partials(z1, z2);
    LogParts { l: -a * p.v, l1: -a * p.v1, l2: -a * p.v2, l12: -a * p.v12 }
}

/// Parts of the inverted max-stable CDF on Fréchet margins at `(f1, f2)`.
fn ims_frechet_parts(pd: &PairDependence, f1: f64, f2: f64) -> LogParts {
    let side = |f: f64| {
        let one_minus_u = -(-1.0 / f).exp_m1();
        let u = 1.0 - one_minus_u;
        let e = -one_minus_u.ln();
        (u, one_minus_u, e, u / (one_minus_u * f * f))
    };
    let (u1, c1, e1, d1) = side(f1);
    let (u2, c2, e2, d2) = side(f2);
    let p = pd.partials(1.0 / e1, 1.0 / e2);
    let s = (-p.v).exp();
    let h = u1 + u2 - 1.0 + s;
    let h1 = (c1 + s * p.v1 / (e1 * e1)) * d1;
    let h2 = (c2 + s * p.v2 / (e2 * e2)) * d2;
    let h12 = s * (p.v1 * p.v2 - p.v12) / (e1 * e1 * e2 * e2) * d1 * d2;
    let (l1, l2) = (h1 / h, h2 / h);
    LogParts { l: h.ln(), l1, l2, l12: h12 / h - l1 * l2 }
}

fn maxmix_parts(a: f64, ms: &PairDependence, ims: &PairDependence, z1: f64, z2: f64) -> LogParts {
    let mut out = LogParts::default();
    if a > 0.0 {
        out = out + ms_parts(ms, z1, z2, a);
    }
    if a < 1.0 {
        let b = 1.0 - a;
        let q = ims_frechet_parts(ims, z1 / b, z2 / b);
        out = out + LogParts { l: q.l, l1: q.l1 / b, l2: q.l2 / b, l12: q.l12 / (b * b) };
    }
    out
}

/// Bivariate max-mixture distribution function on unit Fréchet margins.
pub fn maxmix_bivariate_cdf(spec: &MaxMixSpec, h: f64, z1: f64, z2: f64) -> Result<f64> {
    spec.validate()?;
    if !(z1 > 0.0 && z2 > 0.0) {
        return invalid_input("max-mixture arguments must be positive");
    }
    Ok(maxmix_parts(spec.a, &spec.ms.pair_at(h), &spec.ims.base.pair_at(h), z1, z2).l.exp())
}

fn frechet_logpdf(z: f64) -> f64 {
    -2.0 * z.ln() - 1.0 / z
}

/// Pairwise log-likelihood of uniform-scale data. With `censored`, values at
/// or below `u` are censored at the threshold. Contributions are on the
/// copula scale.
pub fn pairwise_loglik_sub(
    model: &PairModel,
    sites: &SiteSet,
    data: &ObservationMatrix,
    u: f64,
    censored: bool,
    weights: Option<&[f64]>,
) -> Result<LoglikValue> {
    model.validate()?;
    let d = sites.len();
    if data.ncols() != d {
        return invalid_input(format!("data has {} columns for {d} sites", data.ncols()));
    }
    if data.scale() != MarginScale::Uniform {
        return invalid_input("pairwise likelihood expects uniform-scale data");
    }
    if censored && !(u > 0.0 && u < 1.0) {
        return invalid_input(format!("censoring level {u} must lie in (0, 1)"));
    }
    let pairs = site_pairs(d);
    if let Some(w) = weights {
        if w.len() != pairs.len() {
            return invalid_input(format!("{} weights for {} pairs", w.len(), pairs.len()));
        }
    }
    let (a, ms_base, ims_base) = match model {
        PairModel::Ims(s) => (0.0, s.base, s.base),
        PairModel::MaxMix(m) => (m.a, m.ms, m.ims.base),
    };
    let ms_dep = Dependence::new(&ms_base, sites)?;
    let ims_dep = Dependence::new(&ims_base, sites)?;
    let c = -1.0 / u.ln();
    let frechet = |v: f64| -1.0 / v.ln();

    let terms: Vec<Result<f64>> = pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let w = weights.map_or(1.0, |w| w[k]);
            if w == 0.0 {
                return Ok(0.0);
            }
            let (pm, pi) = (ms_dep.pair(i, j), ims_dep.pair(i, j));
            let both_censored = maxmix_parts(a, &pm, &pi, c, c).l;
            let mut sum = 0.0;
            for row in data.rows() {
                let (v1, v2) = (row[i], row[j]);
                if v1.is_nan() || v2.is_nan() {
                    continue;
                }
                let (hi1, hi2) = (!censored || v1 > u, !censored || v2 > u);
                let term = match (hi1, hi2) {
                    (true, true) => {
                        let (z1, z2) = (frechet(v1), frechet(v2));
                        let p = maxmix_parts(a, &pm, &pi, z1, z2);
                        p.l + (p.l1 * p.l2 + p.l12).ln() - frechet_logpdf(z1) - frechet_logpdf(z2)
                    }
                    (true, false) => {
                        let z1 = frechet(v1);
                        let p = maxmix_parts(a, &pm, &pi, z1, c);
                        p.l + p.l1.ln() - frechet_logpdf(z1)
                    }
                    (false, true) => {
                        let z2 = frechet(v2);
                        let p = maxmix_parts(a, &pm, &pi, c, z2);
                        p.l + p.l2.ln() - frechet_logpdf(z2)
                    }
                    (false, false) => both_censored,
                };
                if !term.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite pairwise contribution for sites ({i}, {j}) at ({v1}, {v2})"
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

fn prefixed(prefix: &str, params: Vec<ParamSpec>) -> Vec<ParamSpec> {
    params.into_iter().map(|p| ParamSpec { name: format!("{prefix}{}", p.name), ..p }).collect()
}

/// Free parameters: the base family's for an inverted max-stable model;
/// `a` followed by `ms_`- and `ims_`-prefixed base parameters for a max-mixture.
pub fn pair_model_params(model: &PairModel) -> Vec<ParamSpec> {
    match model {
        PairModel::Ims(s) => maxstable_params(&s.base),
        PairModel::MaxMix(m) => {
            let mut p = vec![ParamSpec::new("a", m.a, Transform::Logit { lo: 0.0, hi: 1.0 })];
            p.extend(prefixed("ms_", maxstable_params(&m.ms)));
            p.extend(prefixed("ims_", maxstable_params(&m.ims.base)));
            p
        }
    }
}

pub fn pair_model_from_params(template: &PairModel, x: &[f64]) -> PairModel {
    match template {
        PairModel::Ims(s) => PairModel::Ims(ImsSpec { base: maxstable_from_params(&s.base, x) }),
        PairModel::MaxMix(m) => {
            let k = maxstable_params(&m.ms).len();
            PairModel::MaxMix(MaxMixSpec {
                a: x[0],
                ms: maxstable_from_params(&m.ms, &x[1..1 + k]),
                ims: ImsSpec { base: maxstable_from_params(&m.ims.base, &x[1 + k..]) },
            })
        }
    }
}

/// Pairwise-likelihood fit. `free` restricts the optimized parameters by name.
#[allow(clippy::too_many_arguments)]
pub fn fit_pairwise_sub(
    init: &PairModel,
    sites: &SiteSet,
    data: &ObservationMatrix,
    u: f64,
    censored: bool,
    weights: Option<&[f64]>,
    free: Option<&[&str]>,
    settings: &OptimSettings,
    with_stderr: bool,
) -> Result<FitResult> {
    let layout = ParamLayout::new(pair_model_params(init), free)?;
    let objective = |x: &[f64]| {
        let m = pair_model_from_params(init, &layout.expand(x));
        pairwise_loglik_sub(&m, sites, data, u, censored, weights).map_or(f64::NAN, |l| l.value)
    };
    let mut out = fit(objective, &layout.free_params(), settings, data.nrows(), with_stderr)?;
    if censored {
        out.censor_level = Some(u);
    }
    Ok(out)
}

/// Simulates a pair model on the uniform scale.
pub fn pair_model_simulate(model: &PairModel, sites: &SiteSet, n: usize, seed: u64) -> Result<ObservationMatrix> {
    model.validate()?;
    let settings = SimSettings::default();
    // inverted field: U = 1 - exp(-1/Z) for unit Fréchet Z
    let inverted = |base, s| -> Result<ObservationMatrix> {
        let (z, _) = maxstable_simulate(base, sites, n, s, &settings)?;
        Ok(z.map(MarginScale::Uniform, |v| -(-1.0 / v).exp_m1()))
    };
    match model {
        PairModel::Ims(s) => inverted(&s.base, seed),
        PairModel::MaxMix(m) => {
            let (zm, _) = maxstable_simulate(&m.ms, sites, n, seed, &settings)?;
            let ui = inverted(&m.ims.base, seed ^ 0x1a5)?;
            let mut out = ObservationMatrix::filled(n, sites.len(), f64::NAN, MarginScale::Uniform);
            for i in 0..n {
                for j in 0..sites.len() {
                    let fi = -1.0 / ui.get(i, j).ln();
                    let z = (m.a * zm.get(i, j)).max((1.0 - m.a) * fi);
                    out.set(i, j, (-1.0 / z).exp());
                }
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotic::MaxStableSpec;

    fn ims() -> ImsSpec {
        ImsSpec { base: MaxStableSpec::brown_resnick(1.0, 1.0) }
    }

    #[test]
    fn ims_limits() {
        let far = ImsSpec { base: MaxStableSpec::brown_resnick(1.0, 1.0) };
        let s = ims_bivariate(&far, 1e6, 0.7, 1.1, ImsKind::Survival).unwrap();
        assert!((s - (-1.8f64).exp()).abs() < 1e-12);
        let s = ims_bivariate(&ims(), 0.5, 0.9, 1e-12, ImsKind::Survival).unwrap();
        assert!((s - (-0.9f64).exp()).abs() < 1e-9);
        let near = ims_bivariate(&ims(), 1e-12, 1.3, 1.3, ImsKind::Survival).unwrap();
        assert!((near - (-1.3f64).exp()).abs() < 1e-6);
        assert!(ims_bivariate(&ims(), 1.0, -1.0, 1.0, ImsKind::Density).is_err());
    }

    #[test]
    fn maxmix_boundaries_and_product() {
        let ms = MaxStableSpec::extremal_t(2.0, 1.0, 1.0);
        let h = 0.8;
        let (z1, z2) = (1.3, 0.6);
        let pure_ms = maxmix_bivariate_cdf(&MaxMixSpec { a: 1.0, ms, ims: ims() }, h, z1, z2).unwrap();
        assert!((pure_ms - (-ms.pair_at(h).partials(z1, z2).v).exp()).abs() < 1e-14);
        let pure_ims = maxmix_bivariate_cdf(&MaxMixSpec { a: 0.0, ms, ims: ims() }, h, z1, z2).unwrap();
        let (u1, u2) = ((-1.0 / z1).exp(), (-1.0 / z2).exp());
        let (e1, e2) = (-(1.0 - u1).ln(), -(1.0f64 - u2).ln());
        let want = u1 + u2 - 1.0 + ims_bivariate(&ims(), h, e1, e2, ImsKind::Survival).unwrap();
        assert!((pure_ims - want).abs() < 1e-12);
        let a = 0.3;
        let mix = maxmix_bivariate_cdf(&MaxMixSpec { a, ms, ims: ims() }, h, z1, z2).unwrap();
        let p1 = maxmix_bivariate_cdf(&MaxMixSpec { a: 1.0, ms, ims: ims() }, h, z1 / a, z2 / a).unwrap();
        let p2 = maxmix_bivariate_cdf(&MaxMixSpec { a: 0.0, ms, ims: ims() }, h, z1 / (1.0 - a), z2 / (1.0 - a)).unwrap();
        assert!((mix.ln() - p1.ln() - p2.ln()).abs() < 1e-12);
    }

    #[test]
    fn uncensored_ims_pair_is_copula_density() {
        let sites = SiteSet::transect(2, 0.9);
        let (u1, u2) = (0.4, 0.93);
        let data = ObservationMatrix::from_rows(&[vec![u1, u2]], MarginScale::Uniform).unwrap();
        let l = pairwise_loglik_sub(&PairModel::Ims(ims()), &sites, &data, 0.5, false, None).unwrap().value;
        let (e1, e2) = (-(1.0f64 - u1).ln(), -(1.0f64 - u2).ln());
        let want = ims_bivariate(&ims(), 0.9, e1, e2, ImsKind::Density).unwrap().ln() + e1 + e2;
        assert!((l - want).abs() < 1e-9, "{l} {want}");
    }

    #[test]
    fn censored_terms_match_finite_differences() {
        let sites = SiteSet::transect(2, 0.9);
        let m = MaxMixSpec { a: 0.4, ms: MaxStableSpec::brown_resnick(1.5, 1.2), ims: ims() };
        let u = 0.8;
        let v1 = 0.95;
        let data = ObservationMatrix::from_rows(&[vec![v1, 0.3]], MarginScale::Uniform).unwrap();
        let l = pairwise_loglik_sub(&PairModel::MaxMix(m), &sites, &data, u, true, None).unwrap().value;
        // ∂/∂u1 of C(u1, u) where C(u1, u2) = G(-1/ln u1, -1/ln u2)
        let c = |a: f64, b: f64| maxmix_bivariate_cdf(&m, 0.9, -1.0 / a.ln(), -1.0 / b.ln()).unwrap();
        let h = 1e-6;
        let fd = (c(v1 + h, u) - c(v1 - h, u)) / (2.0 * h);
        assert!((l - fd.ln()).abs() < 1e-6, "{l} {}", fd.ln());
        let weights = [0.0];
        assert_eq!(pairwise_loglik_sub(&PairModel::MaxMix(m), &sites, &data, u, true, Some(&weights)).unwrap().value, 0.0);
    }

    #[test]
    fn params_round_trip() {
        let m = PairModel::MaxMix(MaxMixSpec { a: 0.4, ms: MaxStableSpec::brown_resnick(1.5, 1.2), ims: ims() });
        let x: Vec<f64> = pair_model_params(&m).iter().map(|p| p.init).collect();
        assert_eq!(pair_model_from_params(&m, &x), m);
        assert_eq!(pair_model_params(&m)[1].name, "ms_phi");
    }
}
