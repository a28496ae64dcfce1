//! Stationary block bootstrap of a max-stable fit to serially dependent data.

use spatial_extremes::asymptotic::{fit_maxstable_pairwise, maxstable_simulate, MaxStableSpec, SimSettings};
use spatial_extremes::gauss::SiteSet;
use spatial_extremes::inference::{stationary_bootstrap, OptimSettings};

fn main() -> spatial_extremes::error::Result<()> {
    let sites = SiteSet::transect(3, 0.5);
    let truth = MaxStableSpec::brown_resnick(1.0, 1.0);
    let (z, _) = maxstable_simulate(&truth, &sites, 600, 71, &SimSettings::default())?;
    let settings = OptimSettings { restarts: 0, ..OptimSettings::default() };
    let fitter = |d: &_| Ok(fit_maxstable_pairwise(&truth, &sites, d, None, &settings, false)?.estimates);

    let full = fitter(&z)?;
    let summary = stationary_bootstrap(&z, 10.0, 20, fitter, 72, &[0.05, 0.95])?;
    for (k, name) in ["phi", "nu"].iter().enumerate() {
        let q = &summary.quantiles[k];
        println!("{name} = {:.3}, 90% interval [{:.3}, {:.3}]", full[k], q[0], q[1]);
    }
    println!("{} of {} replicates failed", summary.failures, summary.replicates.len() + summary.failures);
    Ok(())
}
