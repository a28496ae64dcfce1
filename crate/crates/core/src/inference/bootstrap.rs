use rand::Rng;
use rayon::prelude::*;

use crate::data::ObservationMatrix;
use crate::error::{invalid_param, Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone)]
pub struct BootstrapSummary {
    pub levels: Vec<f64>,
    /// `quantiles[p][l]` is the level-`l` quantile of parameter `p`.
    pub quantiles: Vec<Vec<f64>>,
    /// Successful replicate estimates, in replicate order.
    pub replicates: Vec<Vec<f64>>,
    pub failures: usize,
}

/// Row indices of one stationary-bootstrap resample of a length-`n` series.
/// Blocks start uniformly at random, have geometric lengths with mean
/// `mean_block`, and wrap around the end of the series.
pub fn stationary_indices<R: Rng>(n: usize, mean_block: f64, rng: &mut R) -> Vec<usize> {
    let p = 1.0 / mean_block.max(1.0);
    let mut out = Vec::with_capacity(n);
    let mut pos = rng.random_range(0..n);
    while out.len() < n {
        out.push(pos);
        if rng.random::<f64>() < p {
            pos = rng.random_range(0..n);
        } else {
            pos = (pos + 1) % n;
        }
    }
    out
}

/// Linear-interpolation sample quantile (type 7).
pub fn quantile(sorted: &[f64], level: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * level.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Refits `fitter` to `replicates` stationary-bootstrap resamples of the rows
/// of `data` and summarizes each parameter by the requested quantile levels.
pub fn stationary_bootstrap<F>(
    data: &ObservationMatrix,
    mean_block: f64,
    replicates: usize,
    fitter: F,
    seed: u64,
    levels: &[f64],
) -> Result<BootstrapSummary>
where
    F: Fn(&ObservationMatrix) -> Result<Vec<f64>> + Sync,
{
    let n = data.nrows();
    if (n as f64) < 2.0 * mean_block {
        return invalid_param(format!("{n} rows are too few for mean block length {mean_block}"));
    }
    let fits: Vec<Result<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let idx = stationary_indices(n, mean_block, &mut rng);
            fitter(&data.select_rows(&idx))
        })
        .collect();
    let mut ok = Vec::new();
    let mut failures = 0;
    for f in fits {
        match f {
            Ok(v) if v.iter().all(|x| x.is_finite()) => ok.push(v),
            _ => failures += 1,
        }
    }
    if ok.is_empty() {
        return Err(Error::Optimization(format!("all {replicates} bootstrap refits failed")));
    }
    let k = ok[0].len();
    let quantiles = (0..k)
        .map(|p| {
            let mut col: Vec<f64> = ok.iter().map(|v| v[p]).collect();
            col.sort_by(f64::total_cmp);
            levels.iter().map(|&l| quantile(&col, l)).collect()
        })
        .collect();
    Ok(BootstrapSummary { levels: levels.to_vec(), quantiles, replicates: ok, failures })
}
