//! Simulate a Brown-Resnick process and recover it by pairwise likelihood.

use spatial_extremes::asymptotic::{fit_maxstable_pairwise, maxstable_simulate, MaxStableSpec, SimSettings};
use spatial_extremes::gauss::SiteSet;
use spatial_extremes::inference::OptimSettings;

fn main() -> spatial_extremes::error::Result<()> {
    let sites = SiteSet::transect(5, 0.5);
    let truth = MaxStableSpec::brown_resnick(1.0, 1.0);
    let (z, diag) = maxstable_simulate(&truth, &sites, 400, 11, &SimSettings::default())?;
    println!("{} fields, {:.1} spectral points on average, {} truncated", z.nrows(), diag.mean_points, diag.truncated);

    let init = MaxStableSpec::brown_resnick(0.5, 0.8);
    let fit = fit_maxstable_pairwise(&init, &sites, &z, None, &OptimSettings::default(), true)?;
    for ((name, est), se) in fit.names.iter().zip(&fit.estimates).zip(&fit.stderrs) {
        println!("{name:>4} = {est:.3} (se {})", se.map_or("n/a".into(), |s| format!("{s:.3}")));
    }
    Ok(())
}
