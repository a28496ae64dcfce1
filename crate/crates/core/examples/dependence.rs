//! Empirical and model dependence measures: chi, eta and the extremogram.

use spatial_extremes::depmeasures::{chi_curve_empirical, chi_theoretical, eta_curve_empirical, eta_theoretical, extremogram};
use spatial_extremes::gauss::{gp_simulate, CovarianceSpec, SiteSet};
use spatial_extremes::margins::empirical_uniform;
use spatial_extremes::model::ModelSpec;
use spatial_extremes::subasymptotic::HwSpec;

fn main() -> spatial_extremes::error::Result<()> {
    let sites = SiteSet::transect(2, 0.4);
    let cov = CovarianceSpec::isotropic(1.0, 1.0);
    let x = empirical_uniform(&gp_simulate(&sites, &cov, 100_000, 51)?, 52)?;
    let levels = [0.9, 0.95, 0.99];
    let chi = chi_curve_empirical(&x, (0, 1), &levels)?;
    let eta = eta_curve_empirical(&x, (0, 1), &levels)?;
    for ((u, c), e) in levels.iter().zip(&chi.values).zip(&eta.values) {
        println!("u {u}: chi {c:.3}, eta {e:.3}");
    }

    let gauss = ModelSpec::GaussianCopula { cov };
    let hw = ModelSpec::Hw(HwSpec { delta: 0.7, cov });
    for (name, m) in [("gaussian", &gauss), ("hw 0.7", &hw)] {
        println!("{name}: chi limit {:.3}, eta limit {:.3}", chi_theoretical(m, 0.4)?.value, eta_theoretical(m, 0.4)?);
    }

    let series = x.column(0);
    let ext = extremogram(&series, 0.95, 3, 53)?;
    for ((lag, v), ub) in ext.lags.iter().zip(&ext.values).zip(&ext.upper_bound) {
        println!("lag {lag}: extremogram {v:.3} (null band {ub:.3})");
    }
    Ok(())
}
