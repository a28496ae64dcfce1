//! Spatial conditional extremes: simulate given an extreme at one site, fit, and
//! estimate the probability that the field maximum exceeds a level.

use spatial_extremes::conditional::{exceedance_prob_max, fit_sce, sce_simulate, BForm, DeltaProfile, SceSpec};
use spatial_extremes::gauss::{CovarianceSpec, SiteSet};
use spatial_extremes::inference::OptimSettings;
use spatial_extremes::margins::MarginScale;

fn main() -> spatial_extremes::error::Result<()> {
    let sites = SiteSet::transect(6, 0.4);
    let truth = SceSpec {
        kappa: 1.2,
        lambda: 2.0,
        delta_lag: 0.0,
        beta: 0.3,
        mu: 0.5,
        sigma: 1.3,
        cov: CovarianceSpec::isotropic(1.5, 1.0),
        delta: DeltaProfile::Constant { delta: 1.4 },
        b_form: BForm::XPowBeta,
    };
    let u = MarginScale::Laplace.from_uniform(0.95);
    let x = sce_simulate(&truth, &sites, 0, u, 1000, 61)?;
    println!("{} conditional fields above Laplace level {u:.3}", x.nrows());

    let init = SceSpec { kappa: 0.9, lambda: 1.5, beta: 0.2, ..truth };
    let fit = fit_sce(&init, &sites, &x, &[0], u, Some(&["kappa", "lambda", "beta"]), &OptimSettings::default(), false)?;
    for (name, est) in fit.names.iter().zip(&fit.estimates) {
        println!("{name:>6} = {est:.3}");
    }

    for v in [4.0, 6.0] {
        let p = exceedance_prob_max(&truth, &sites, v, 20_000, 62)?;
        println!("P(max > {v}) = {:.3e} +/- {:.1e}; single site {:.3e}", p.prob, p.mc_error, (-v).exp() / 2.0);
    }
    Ok(())
}
