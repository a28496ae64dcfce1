use rayon::prelude::*;

use super::config::{Coordinates, FitConfig, RunConfig};
use super::io::{fmt_num, fmt_opt, key_values, read_observations, read_stations, write_observations, write_stations, write_table, Panel};
use super::{Outputs, StageError};
use crate::asymptotic::{
    fit_maxstable_pairwise, fit_rpareto, maxstable_from_params, maxstable_params, maxstable_simulate, pareto_threshold,
    rpareto_simulate, site_pairs, RParetoSpec, SimSettings,
};
use crate::conditional::{exceedance_prob_max, farthest_point_subset, fit_sce, sce_from_params, sce_params, sce_simulate};
use crate::data::ObservationMatrix;
use crate::depmeasures::{chi_u_empirical, chi_u_model, eta_u_empirical, eta_u_model, extremogram, ModelCurveSettings};
use crate::error::{Error, Result};
use crate::gauss::{lonlat_to_km, transform_sites, Anisotropy, SiteSet};
use crate::inference::{stationary_bootstrap, FitResult, OptimSettings, ParamLayout};
use crate::margins::{empirical_uniform, rescale, to_uniform, MarginScale};
use crate::model::ModelSpec;
use crate::subasymptotic::{
    fit_mixture, fit_pairwise_sub, marginal_cdf, mixture_from_params, mixture_params, mixture_simulate,
    pair_model_from_params, pair_model_params, pair_model_simulate, MixtureLikelihood, MixtureModel,
};

/// Conditioning sites used by the conditional extremes composite likelihood
/// unless the configuration says otherwise.
const DEFAULT_CONDITIONING_SITES: usize = 30;

fn stage<T>(name: &'static str, r: Result<T>) -> std::result::Result<T, StageError> {
    r.map_err(|error| StageError { stage: name, error })
}

/// Independent seed for a named sub-task.
fn sub_seed(seed: u64, tag: u64) -> u64 {
    seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn load_sites(cfg: &RunConfig) -> Result<SiteSet> {
    let d = cfg.data()?;
    let mut sites = read_stations(&d.stations)?;
    if d.coordinates == Coordinates::Lonlat {
        sites.coords = lonlat_to_km(&sites.coords);
    }
    Ok(sites)
}

/// Observations on uniform margins with the stations ordered as the data columns.
fn load_panel(cfg: &RunConfig, seed: u64) -> Result<(SiteSet, Panel)> {
    let d = cfg.data()?;
    let sites = load_sites(cfg)?;
    let path = d.observations.as_ref().ok_or_else(|| Error::Config("data.observations is required".into()))?;
    let scale = d.scale.ok_or_else(|| Error::Config("data.scale is required".into()))?;
    let mut panel = read_observations(path, scale)?;
    let order = panel
        .sites
        .iter()
        .map(|s| {
            sites
                .labels
                .iter()
                .position(|l| l == s)
                .ok_or_else(|| Error::InvalidInput(format!("site column {s:?} has no station")))
        })
        .collect::<Result<Vec<usize>>>()?;
    let sites = sites.subset(&order);
    panel.data = if scale == MarginScale::Raw { empirical_uniform(&panel.data, sub_seed(seed, 1))? } else { to_uniform(&panel.data)? };
    Ok((sites, panel))
}

fn optim_settings(f: &FitConfig, seed: u64) -> OptimSettings {
    let mut s = OptimSettings { seed: sub_seed(seed, 2), ..OptimSettings::default() };
    if let Some(m) = f.max_evals {
        s.max_evals = m;
    }
    if let Some(r) = f.restarts {
        s.restarts = r;
    }
    s
}

pub struct FitOutcome {
    pub result: FitResult,
    pub fitted: ModelSpec,
    pub prefit: Option<FitResult>,
}

fn free_names(f: &FitConfig) -> Option<Vec<&str>> {
    f.free.as_ref().map(|v| v.iter().map(String::as_str).collect())
}

fn no_free(f: &FitConfig, model: &ModelSpec) -> Result<()> {
    if f.free.is_some() {
        return Err(Error::Config(format!("fit.free is not supported for the {} family", model.name())));
    }
    Ok(())
}

/// Single-stage fit of `model` to uniform-margin data on `sites`.
fn fit_once(model: &ModelSpec, sites: &SiteSet, data: &ObservationMatrix, f: &FitConfig, settings: &OptimSettings, stderr: bool) -> Result<(FitResult, ModelSpec)> {
    let free = free_names(f);
    let free = free.as_deref();
    if let Some(m) = model.as_mixture() {
        let u = f.level("censored likelihoods")?;
        let r = fit_mixture(&m, sites, data, u, free, settings, &MixtureLikelihood::default(), stderr)?;
        let layout = ParamLayout::new(mixture_params(&m), free)?;
        return Ok((r.clone(), mixture_from_params(&m, &layout.expand(&r.estimates)).into()));
    }
    if let Some(p) = model.as_pair_model() {
        let u = f.level("censored pairwise likelihoods")?;
        let censored = f.censored.ok_or_else(|| Error::Config("fit.censored is required for this family".into()))?;
        let r = fit_pairwise_sub(&p, sites, data, u, censored, None, free, settings, stderr)?;
        let layout = ParamLayout::new(pair_model_params(&p), free)?;
        return Ok((r.clone(), pair_model_from_params(&p, &layout.expand(&r.estimates)).into()));
    }
    match model {
        ModelSpec::MaxStable(s) => {
            no_free(f, model)?;
            let z = rescale(data, MarginScale::Frechet)?;
            let r = fit_maxstable_pairwise(s, sites, &z, None, settings, stderr)?;
            let fitted = ModelSpec::MaxStable(maxstable_from_params(s, &r.estimates));
            debug_assert_eq!(maxstable_params(s).len(), r.estimates.len());
            Ok((r, fitted))
        }
        ModelSpec::RPareto(s) => {
            no_free(f, model)?;
            let u = f.level("the r-Pareto likelihood")?;
            let x = rescale(data, MarginScale::Pareto)?;
            let r = fit_rpareto(s, sites, &x, pareto_threshold(u), settings, stderr)?;
            let fitted = ModelSpec::RPareto(RParetoSpec { base: maxstable_from_params(&s.base, &r.estimates), ..*s });
            Ok((r, fitted))
        }
        ModelSpec::Sce(s) => {
            let u = f.level("conditional extremes")?;
            let x = rescale(data, MarginScale::Laplace)?;
            let subset = farthest_point_subset(sites, f.conditioning_sites.unwrap_or(DEFAULT_CONDITIONING_SITES));
            let v = MarginScale::Laplace.from_uniform(u);
            let r = fit_sce(s, sites, &x, &subset, v, free, settings, stderr)?;
            let layout = ParamLayout::new(sce_params(s), free)?;
            Ok((r.clone(), ModelSpec::Sce(sce_from_params(s, &layout.expand(&r.estimates)))))
        }
        _ => Err(Error::Unsupported(format!("fitting the {} family", model.name()))),
    }
}

/// Full fit pipeline: optional anisotropy pre-fit with a Gaussian copula,
/// then the model fit on the transformed, isotropic sites.
pub fn fit_pipeline(
    model: &ModelSpec,
    sites: &SiteSet,
    data: &ObservationMatrix,
    f: &FitConfig,
    seed: u64,
    stderr: bool,
) -> std::result::Result<FitOutcome, StageError> {
    let settings = optim_settings(f, seed);
    if !f.anisotropy_prefit {
        let (result, fitted) = stage("model fit", fit_once(model, sites, data, f, &settings, stderr))?;
        return Ok(FitOutcome { result, fitted, prefit: None });
    }
    let u = stage("anisotropy pre-fit", f.level("the anisotropy pre-fit"))?;
    let mut cov = *model.covariance();
    cov.aniso = Some(cov.aniso.unwrap_or(Anisotropy { psi: 0.0, l: 1.0 }));
    let gauss = MixtureModel::GaussianCopula { cov };
    let pre = stage(
        "anisotropy pre-fit",
        fit_mixture(&gauss, sites, data, u, None, &settings, &MixtureLikelihood::default(), stderr),
    )?;
    let aniso = Anisotropy {
        psi: pre.estimate("psi").expect("pre-fit estimates psi"),
        l: pre.estimate("L").expect("pre-fit estimates L"),
    };
    let moved = transform_sites(sites, aniso.psi, aniso.l);
    let iso = model.map_covariances(|c| c.aniso = None);
    let (result, fitted) = stage("model fit", fit_once(&iso, &moved, data, f, &settings, stderr))?;
    let fitted = fitted.map_covariances(|c| c.aniso = Some(aniso));
    Ok(FitOutcome { result, fitted, prefit: Some(pre) })
}

fn fit_documents(model: &ModelSpec, out: &FitOutcome, outputs: &mut Outputs) -> Result<()> {
    let r = &out.result;
    let mut kv = vec![
        ("family".to_string(), model.name().to_string()),
        ("converged".to_string(), r.converged.to_string()),
        ("loglik".to_string(), fmt_num(r.loglik)),
        ("bic".to_string(), fmt_num(r.bic)),
        ("k".to_string(), r.estimates.len().to_string()),
        ("n_effective".to_string(), r.n_effective.to_string()),
        ("censor_level".to_string(), fmt_opt(r.censor_level)),
        ("evaluations".to_string(), r.evaluations.to_string()),
    ];
    for (i, name) in r.names.iter().enumerate() {
        kv.push((format!("estimate.{name}"), fmt_num(r.estimates[i])));
        kv.push((format!("stderr.{name}"), fmt_opt(r.stderrs[i])));
    }
    if let Some(p) = &out.prefit {
        for (i, name) in p.names.iter().enumerate() {
            kv.push((format!("prefit.{name}"), fmt_num(p.estimates[i])));
        }
        kv.push(("prefit.loglik".to_string(), fmt_num(p.loglik)));
    }
    for (i, flag) in r.flags.iter().enumerate() {
        kv.push((format!("flag.{i}"), flag.clone()));
    }
    outputs.push("fit.txt", key_values(&kv));
    let rows: Vec<Vec<String>> =
        r.names.iter().enumerate().map(|(i, n)| vec![n.clone(), fmt_num(r.estimates[i]), fmt_opt(r.stderrs[i])]).collect();
    outputs.push("estimates.csv", write_table(&["name", "estimate", "stderr"], &rows)?);
    let doc = toml::to_string(&out.fitted).map_err(|e| Error::Config(format!("cannot serialize fitted model: {e}")))?;
    outputs.push("fitted_model.toml", doc.into_bytes());
    Ok(())
}

pub fn cmd_fit(cfg: &RunConfig, seed: u64, outputs: &mut Outputs) -> std::result::Result<(), StageError> {
    let model = stage("config", cfg.model())?;
    let f = stage("config", cfg.fit())?;
    let (sites, panel) = stage("margins", load_panel(cfg, seed))?;
    let out = fit_pipeline(&model, &sites, &panel.data, f, seed, f.stderr)?;
    stage("output", fit_documents(&model, &out, outputs))
}

pub fn cmd_bootstrap(cfg: &RunConfig, seed: u64, outputs: &mut Outputs) -> std::result::Result<(), StageError> {
    let model = stage("config", cfg.model())?;
    let f = stage("config", cfg.fit())?;
    let b = cfg.bootstrap.clone().ok_or_else(|| StageError {
        stage: "config",
        error: Error::Config("missing [bootstrap] section".into()),
    })?;
    let (sites, panel) = stage("margins", load_panel(cfg, seed))?;
    let point = fit_pipeline(&model, &sites, &panel.data, f, seed, false)?;
    let fitter = |d: &ObservationMatrix| {
        fit_pipeline(&model, &sites, d, f, seed, false).map(|o| o.result.estimates).map_err(|e| e.error)
    };
    let summary = stage(
        "bootstrap",
        stationary_bootstrap(&panel.data, b.mean_block, b.replicates, fitter, sub_seed(seed, 3), &b.levels),
    )?;
    let mut header = vec!["name".to_string(), "estimate".to_string()];
    header.extend(b.levels.iter().map(|l| format!("q{l}")));
    let rows: Vec<Vec<String>> = point
        .result
        .names
        .iter()
        .enumerate()
        .map(|(p, n)| {
            let mut r = vec![n.clone(), fmt_num(point.result.estimates[p])];
            r.extend(summary.quantiles[p].iter().map(|&q| fmt_num(q)));
            r
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    outputs.push("bootstrap.csv", stage("output", write_table(&header, &rows))?);
    let kv = vec![
        ("family".to_string(), model.name().to_string()),
        ("replicates".to_string(), b.replicates.to_string()),
        ("mean_block".to_string(), b.mean_block.to_string()),
        ("failures".to_string(), summary.failures.to_string()),
    ];
    outputs.push("bootstrap.txt", key_values(&kv));
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig, seed: u64, outputs: &mut Outputs) -> std::result::Result<(), StageError> {
    let model = stage("config", cfg.model())?;
    let s = cfg.simulate.clone().ok_or_else(|| StageError {
        stage: "config",
        error: Error::Config("missing [simulate] section".into()),
    })?;
    let sites = stage("stations", load_sites(cfg))?;
    let n = s.n;
    let sim_seed = sub_seed(seed, 4);
    let mut kv = vec![("family".to_string(), model.name().to_string()), ("n".to_string(), n.to_string())];
    let data = stage("simulate", (|| -> Result<ObservationMatrix> {
        if let Some(m) = model.as_sim_model() {
            return mixture_simulate(&m, &sites, n, sim_seed);
        }
        if let Some(p) = model.as_pair_model() {
            return pair_model_simulate(&p, &sites, n, sim_seed);
        }
        match &model {
            ModelSpec::MaxStable(m) => {
                let (z, diag) = maxstable_simulate(m, &sites, n, sim_seed, &SimSettings::default())?;
                kv.push(("truncated".to_string(), diag.truncated.to_string()));
                Ok(z)
            }
            ModelSpec::RPareto(r) => {
                let (x, diag) = rpareto_simulate(r, &sites, n, sim_seed, &SimSettings::default())?;
                kv.push(("rejection_rate".to_string(), fmt_num(diag.rejection_rate)));
                Ok(x)
            }
            ModelSpec::Sce(c) => {
                let s0 = s.conditioning_site.ok_or_else(|| Error::Config("simulate.conditioning_site is required".into()))?;
                let u = s.u.ok_or_else(|| Error::Config("simulate.u is required for conditional extremes".into()))?;
                if !(u > 0.0 && u < 1.0) {
                    return Err(Error::Config(format!("simulate.u = {u} must lie in (0, 1)")));
                }
                sce_simulate(c, &sites, s0, MarginScale::Laplace.from_uniform(u), n, sim_seed)
            }
            _ => Err(Error::Unsupported(format!("simulating the {} family", model.name()))),
        }
    })())?;
    kv.push(("scale".to_string(), format!("{:?}", data.scale()).to_lowercase()));
    let ids: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    outputs.push("simulations.csv", stage("output", write_observations(&ids, &sites.labels, &data))?);
    outputs.push("simulate.txt", key_values(&kv));
    Ok(())
}

pub fn cmd_transform_coords(cfg: &RunConfig, outputs: &mut Outputs) -> std::result::Result<(), StageError> {
    let sites = stage("stations", load_sites(cfg))?;
    let sites = match &cfg.transform {
        Some(t) => {
            let check = crate::gauss::CovarianceSpec { phi: 1.0, nu: 1.0, aniso: Some(Anisotropy { psi: t.psi, l: t.l }) };
            stage("config", check.validate())?;
            transform_sites(&sites, t.psi, t.l)
        }
        None => sites,
    };
    outputs.push("stations_transformed.csv", stage("output", write_stations(&sites))?);
    Ok(())
}

/// Uniform-scale simulations from `model` for model-based exceedance curves.
fn model_uniform_draws(model: &ModelSpec, sites: &SiteSet, n: usize, seed: u64) -> Result<ObservationMatrix> {
    if let Some(m) = model.as_mixture() {
        let x = mixture_simulate(&m.into(), sites, n, seed)?;
        return Ok(x.map(MarginScale::Uniform, |v| marginal_cdf(&m, v)));
    }
    if let Some(p) = model.as_pair_model() {
        return pair_model_simulate(&p, sites, n, seed);
    }
    match model {
        ModelSpec::MaxStable(m) => to_uniform(&maxstable_simulate(m, sites, n, seed, &SimSettings::default())?.0),
        _ => Err(Error::Unsupported(format!("unconditional simulation of the {} family", model.name()))),
    }
}

pub fn cmd_diagnose(cfg: &RunConfig, seed: u64, outputs: &mut Outputs) -> std::result::Result<(), StageError> {
    let model = stage("config", cfg.model())?;
    let dcfg = cfg.diagnose.clone().ok_or_else(|| StageError {
        stage: "config",
        error: Error::Config("missing [diagnose] section".into()),
    })?;
    if dcfg.levels.iter().any(|&u| !(u > 0.0 && u < 1.0)) {
        return Err(StageError { stage: "config", error: Error::Config("diagnose.levels must lie in (0, 1)".into()) });
    }
    let (sites, panel) = stage("margins", load_panel(cfg, seed))?;
    let data = &panel.data;
    let curve_settings = ModelCurveSettings { seed: sub_seed(seed, 5), ..ModelCurveSettings::default() };
    let mut notes: Vec<String> = Vec::new();

    let pairs = site_pairs(sites.len());
    type Row = (Vec<String>, Vec<String>, Vec<String>);
    let rows: Vec<Result<Row>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let pair = sites.subset(&[i, j]);
            let h = model.covariance().distance(sites.coords[i], sites.coords[j]);
            let mut chi = Vec::new();
            let mut eta = Vec::new();
            let mut skipped = Vec::new();
            for &u in &dcfg.levels {
                let ec = chi_u_empirical(data, (i, j), u);
                let ee = eta_u_empirical(data, (i, j), u);
                for e in [&ec, &ee] {
                    if let Err(Error::InsufficientData(m)) = e {
                        skipped.push(m.clone());
                    }
                }
                let mc = match chi_u_model(&model, &pair, u, &curve_settings) {
                    Ok(v) => Some(v),
                    Err(Error::Unsupported(_)) => None,
                    Err(e) => return Err(e),
                };
                let me = match eta_u_model(&model, &pair, u, &curve_settings) {
                    Ok(v) => Some(v),
                    Err(Error::Unsupported(_) | Error::Numerical(_)) => None,
                    Err(e) => return Err(e),
                };
                let base = |v: Option<f64>, m: Option<f64>| {
                    vec![
                        sites.labels[i].clone(),
                        sites.labels[j].clone(),
                        fmt_num(sites.euclidean(i, j)),
                        fmt_num(h),
                        u.to_string(),
                        fmt_opt(v),
                        fmt_opt(m),
                    ]
                };
                chi.push(base(ec.ok(), mc));
                eta.push(base(ee.ok(), me));
            }
            Ok((chi.concat(), eta.concat(), skipped))
        })
        .collect();
    let mut chi_rows = Vec::new();
    let mut eta_rows = Vec::new();
    let width = 7;
    for r in rows {
        let (c, e, s) = stage("dependence curves", r)?;
        chi_rows.extend(c.chunks(width).map(<[String]>::to_vec));
        eta_rows.extend(e.chunks(width).map(<[String]>::to_vec));
        notes.extend(s);
    }
    let header = ["site_i", "site_j", "distance", "model_distance", "u", "empirical", "model"];
    outputs.push("chi.csv", stage("output", write_table(&header, &chi_rows))?);
    outputs.push("eta.csv", stage("output", write_table(&header, &eta_rows))?);

    let ext_sites: Vec<usize> = dcfg.extremogram_sites.clone().unwrap_or_else(|| (0..sites.len()).collect());
    let mut ext_rows = Vec::new();
    for &j in &ext_sites {
        if j >= sites.len() {
            return Err(StageError { stage: "config", error: Error::Config(format!("extremogram site {j} out of range")) });
        }
        for &u in &dcfg.levels {
            match extremogram(&data.column(j), u, dcfg.max_lag, sub_seed(seed, 6 + j as u64)) {
                Ok(e) => {
                    for k in 0..e.lags.len() {
                        ext_rows.push(vec![
                            sites.labels[j].clone(),
                            u.to_string(),
                            e.lags[k].to_string(),
                            fmt_num(e.values[k]),
                            fmt_num(e.upper_bound[k]),
                        ]);
                    }
                    notes.extend(e.flags.into_iter().map(|f| format!("site {} at u={u}: {f}", sites.labels[j])));
                }
                Err(Error::InsufficientData(m)) => notes.push(format!("site {}: {m}", sites.labels[j])),
                Err(e) => return Err(StageError { stage: "extremogram", error: e }),
            }
        }
    }
    outputs.push(
        "extremogram.csv",
        stage("output", write_table(&["site", "u", "lag", "value", "upper_bound"], &ext_rows))?,
    );

    if !dcfg.exceedance_levels.is_empty() {
        let lap = data.map(MarginScale::Laplace, |u| MarginScale::Laplace.from_uniform(u));
        let maxima: Vec<f64> = lap
            .rows()
            .filter_map(|r| r.iter().copied().filter(|v| !v.is_nan()).reduce(f64::max))
            .collect();
        let draws = match &model {
            ModelSpec::Sce(_) => None,
            m => match model_uniform_draws(m, &sites, dcfg.nsim, sub_seed(seed, 7)) {
                Ok(d) => Some(Ok(d)),
                Err(Error::Unsupported(msg)) => {
                    notes.push(msg);
                    Some(Err(()))
                }
                Err(e) => return Err(StageError { stage: "exceedance curve", error: e }),
            },
        };
        let mut rows = Vec::new();
        for &v in &dcfg.exceedance_levels {
            let emp = maxima.iter().filter(|&&m| m > v).count() as f64 / maxima.len().max(1) as f64;
            let (p, se) = match (&model, &draws) {
                (ModelSpec::Sce(s), _) => {
                    let e = stage("exceedance curve", exceedance_prob_max(s, &sites, v, dcfg.nsim, sub_seed(seed, 8)))?;
                    (Some(e.prob), Some(e.mc_error))
                }
                (_, Some(Ok(d))) => {
                    let u = MarginScale::Laplace.to_uniform(v);
                    let hits = d.rows().filter(|r| r.iter().any(|&x| x > u)).count() as f64;
                    let p = hits / d.nrows() as f64;
                    (Some(p), Some((p * (1.0 - p) / d.nrows() as f64).sqrt()))
                }
                _ => (None, None),
            };
            rows.push(vec![v.to_string(), fmt_num(emp), fmt_opt(p), fmt_opt(se)]);
        }
        outputs.push("exceedance.csv", stage("output", write_table(&["v", "empirical", "model", "mc_error"], &rows))?);
    }

    let mut kv = vec![
        ("family".to_string(), model.name().to_string()),
        ("pairs".to_string(), pairs.len().to_string()),
        ("levels".to_string(), dcfg.levels.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")),
    ];
    for (i, n) in notes.iter().enumerate() {
        kv.push((format!("note.{i}"), n.clone()));
    }
    outputs.push("diagnose.txt", key_values(&kv));
    Ok(())
}
