//! Gaussian random fields: correlation, simulation, anisotropy and orthant probabilities.

use spatial_extremes::gauss::{
    correlation_matrix, gp_simulate, mvn_cdf, transform_sites, Anisotropy, CovarianceSpec, MvnAccuracy, SiteSet,
};

fn main() -> spatial_extremes::error::Result<()> {
    let sites = SiteSet::grid(3, 2, 0.5);
    let cov = CovarianceSpec { aniso: Some(Anisotropy { psi: 0.4, l: 1.8 }), ..CovarianceSpec::isotropic(1.0, 1.5) };
    let corr = correlation_matrix(&sites, &cov);
    println!("correlation between sites 0 and 4: {:.4}", corr[(0, 4)]);

    let moved = transform_sites(&sites, 0.4, 1.8);
    println!("site 4 after rotation and stretch: {:?}", moved.coords[4]);

    let x = gp_simulate(&sites, &cov, 10_000, 7)?;
    let mean: f64 = x.column(0).iter().sum::<f64>() / x.nrows() as f64;
    println!("simulated {} fields, site 0 mean {mean:.4}", x.nrows());

    let p = mvn_cdf(&[0.0; 6], &corr, &MvnAccuracy::default(), 3)?;
    println!("P(all six below zero) = {:.5} +/- {:.1e}", p.prob, p.error);
    Ok(())
}
