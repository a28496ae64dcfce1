//! Gaussian scale mixtures: tail dependence of the HW and HOT models and a censored fit.

use spatial_extremes::depmeasures::chi_u_empirical;
use spatial_extremes::gauss::{CovarianceSpec, SiteSet};
use spatial_extremes::inference::OptimSettings;
use spatial_extremes::margins::empirical_uniform;
use spatial_extremes::quadrature::QuadSettings;
use spatial_extremes::subasymptotic::{
    fit_mixture, hw_chi, mixture_cdf, mixture_simulate, HotSpec, HwSpec, MixtureLikelihood, MixtureModel, SimModel,
};

fn main() -> spatial_extremes::error::Result<()> {
    let pair = SiteSet::transect(2, 0.5);
    let cov = CovarianceSpec::isotropic(1.0, 1.0);
    let rho = cov.corr_at(0.5);
    for delta in [0.3, 0.7] {
        let x = empirical_uniform(&mixture_simulate(&SimModel::Hw(HwSpec { delta, cov }), &pair, 200_000, 31)?, 32)?;
        let chi = chi_u_empirical(&x, (0, 1), 0.99)?;
        println!("HW delta {delta}: chi_0.99 {chi:.3}, limit {:.3}", hw_chi(delta, rho).0);
    }

    let hot = MixtureModel::Hot(HotSpec { beta: 0.5, gamma: 1.0, cov });
    let q = QuadSettings { abs_tol: 1e-12, rel_tol: 1e-9, max_intervals: 200 };
    println!("HOT joint CDF at (2, 2): {:.5}", mixture_cdf(&hot, &pair, &[2.0, 2.0], &q)?.value);

    let sites = SiteSet::transect(3, 0.5);
    let x = mixture_simulate(&SimModel::Hw(HwSpec { delta: 0.7, cov }), &sites, 400, 33)?;
    let u = empirical_uniform(&x, 34)?;
    let init = MixtureModel::Hw(HwSpec { delta: 0.5, cov });
    let settings = OptimSettings { restarts: 0, ..OptimSettings::default() };
    let fit = fit_mixture(&init, &sites, &u, 0.9, Some(&["delta"]), &settings, &MixtureLikelihood::default(), false)?;
    println!("censored fit: delta {:.3} (truth 0.7), loglik {:.2}, BIC {:.2}", fit.estimates[0], fit.loglik, fit.bic);
    Ok(())
}
