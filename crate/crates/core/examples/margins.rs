//! Fit GEV block maxima and a GP tail, then check the threshold-stability link.

use rand::Rng;
use spatial_extremes::inference::OptimSettings;
use spatial_extremes::margins::{fit_gev, fit_gp, gev_eval, gp_from_gev, Eval, GevParams};
use spatial_extremes::rng::stream_rng;

fn main() -> spatial_extremes::error::Result<()> {
    let truth = GevParams::new(10.0, 2.0, 0.1)?;
    let mut rng = stream_rng(1, 0);
    let maxima: Vec<f64> =
        (0..500).map(|_| gev_eval(rng.random::<f64>(), &truth, Eval::Quantile)).collect::<Result<_, _>>()?;

    let fit = fit_gev(&maxima, &OptimSettings::default())?;
    for (name, est) in fit.names.iter().zip(&fit.estimates) {
        println!("gev {name:>5} = {est:.3}");
    }

    let u = gev_eval(0.8, &truth, Eval::Quantile)?;
    let implied = gp_from_gev(&truth, u)?;
    let tail = fit_gp(&maxima, u, &OptimSettings::default())?;
    println!("threshold {u:.3}: implied GP (tau {:.3}, xi {:.3})", implied.tau, implied.xi);
    println!("fitted GP tau {:.3}, xi {:.3}", tail.estimate("tau").unwrap(), tail.estimate("xi").unwrap());
    println!("100-block return level {:.3}", gev_eval(0.99, &truth, Eval::Quantile)?);
    Ok(())
}
