//! r-Pareto processes: threshold exceedances of a risk functional.

use spatial_extremes::asymptotic::{fit_rpareto, rpareto_simulate, MaxStableSpec, RParetoSpec, RiskFunctional, SimSettings};
use spatial_extremes::gauss::SiteSet;
use spatial_extremes::inference::OptimSettings;

fn main() -> spatial_extremes::error::Result<()> {
    let sites = SiteSet::transect(4, 0.5);
    let truth = RParetoSpec { base: MaxStableSpec::brown_resnick(1.0, 1.0), functional: RiskFunctional::Max };
    let (x, diag) = rpareto_simulate(&truth, &sites, 500, 21, &SimSettings::default())?;
    let above = x.rows().filter(|r| truth.functional.eval(r) > 2.0).count();
    println!("{} exceedances, rejection rate {:.3}; {above} also exceed 2", x.nrows(), diag.rejection_rate);

    let init = RParetoSpec { base: MaxStableSpec::brown_resnick(0.6, 0.7), ..truth };
    let settings = OptimSettings { restarts: 0, ..OptimSettings::default() };
    let fit = fit_rpareto(&init, &sites, &x, 1.0, &settings, false)?;
    println!("phi {:.3}, nu {:.3}", fit.estimate("phi").unwrap(), fit.estimate("nu").unwrap());
    Ok(())
}
