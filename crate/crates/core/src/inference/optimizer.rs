use rand::Rng;

use super::ParamSpec;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Nelder–Mead settings. Tolerances apply on the unconstrained scale.
#[derive(Debug, Clone)]
pub struct OptimSettings {
    pub max_evals: usize,
    /// Additional runs after the first, each started from a jittered copy of the
    /// best point so far.
    pub restarts: usize,
    pub xtol: f64,
    pub ftol: f64,
    pub initial_step: f64,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for OptimSettings {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            restarts: 2,
            xtol: 1e-6,
            ftol: 1e-8,
            initial_step: 0.25,
            jitter: 0.1,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimum {
    /// Maximizer on the natural scale.
    pub estimate: Vec<f64>,
    pub unconstrained: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub evaluations: usize,
}

struct RunResult {
    x: Vec<f64>,
    f: f64,
    converged: bool,
    evals: usize,
}

/// Minimizes `f` from `x0` with the adaptive-coefficient Nelder–Mead method.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, s: &OptimSettings) -> RunResult {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step * x0[i].abs().max(1.0);
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
    let mut converged = false;
    while evals.get() < s.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < s.xtol && spread.abs() < s.ftol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(alpha);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(alpha * gamma);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(alpha * rho);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            for (x, b) in simplex[i].iter_mut().zip(&best) {
                *x = b + sigma * (*x - b);
            }
            values[i] = eval(&simplex[i]);
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    RunResult { x: simplex[best].clone(), f: values[best], converged, evals: evals.get() }
}

/// Maximizes `objective` (a function of natural-scale parameters) by
/// Nelder–Mead on the unconstrained space, with seeded restarts.
pub fn maximize<F>(objective: F, params: &[ParamSpec], settings: &OptimSettings) -> Result<Optimum>
where
    F: Fn(&[f64]) -> f64,
{
    if params.is_empty() {
        let v = objective(&[]);
        return Ok(Optimum { estimate: vec![], unconstrained: vec![], value: v, converged: v.is_finite(), evaluations: 1 });
    }
    let to_natural = |y: &[f64]| -> Vec<f64> {
        params.iter().zip(y).map(|(p, &v)| p.transform.to_natural(v)).collect()
    };
    let neg = |y: &[f64]| -> f64 {
        let x = to_natural(y);
        if x.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        let v = objective(&x);
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };
    let mut rng = stream_rng(settings.seed, 0x0b7);
    let y0: Vec<f64> = params
        .iter()
        .map(|p| p.transform.to_unconstrained(p.init))
        .collect::<Result<_>>()?;

    let mut start = y0.clone();
    let mut evaluations = 1;
    let mut f_start = neg(&start);
    let mut tries = 0;
    while !f_start.is_finite() && tries < 50 {
        start = y0
            .iter()
            .map(|&v| v + settings.jitter * 5.0 * v.abs().max(1.0) * rng.random_range(-1.0..1.0))
            .collect();
        f_start = neg(&start);
        evaluations += 1;
        tries += 1;
    }
    if !f_start.is_finite() {
        return Err(Error::Optimization(
            "objective is not finite at the initial value or any jittered start".into(),
        ));
    }

    let mut best = nelder_mead(&neg, &start, settings.initial_step, settings);
    evaluations += best.evals;
    for _ in 0..settings.restarts {
        let y: Vec<f64> = best
            .x
            .iter()
            .map(|&v| v + settings.jitter * v.abs().max(1.0) * rng.random_range(-1.0..1.0))
            .collect();
        let run = nelder_mead(&neg, &y, settings.initial_step, settings);
        evaluations += run.evals;
        if run.f < best.f || (run.f == best.f && run.converged) {
            best = run;
        } else if (run.f - best.f).abs() < settings.ftol.max(1e-12) {
            best.converged |= run.converged;
        }
    }
    if !best.f.is_finite() {
        return Err(Error::Optimization("every restart ended at a non-finite value".into()));
    }
    Ok(Optimum {
        estimate: to_natural(&best.x),
        unconstrained: best.x,
        value: -best.f,
        converged: best.converged,
        evaluations,
    })
}
