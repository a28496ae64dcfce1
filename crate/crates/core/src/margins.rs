//! Generalized extreme-value and generalized Pareto distributions, their
//! fitting, and transforms between marginal scales.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::ObservationMatrix;
use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::inference::{self, FitResult, OptimSettings, ParamSpec, Transform};
use crate::rng::stream_rng;

/// Below this magnitude the shape parameter is treated as exactly zero.
pub const XI_ZERO: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginScale {
    Raw,
    Uniform,
    Frechet,
    Pareto,
    Laplace,
    Exponential,
}

impl MarginScale {
    /// Maps a uniform value in `(0, 1)` to this scale.
    pub fn from_uniform(self, u: f64) -> f64 {
        match self {
            MarginScale::Raw | MarginScale::Uniform => u,
            MarginScale::Frechet => -1.0 / u.ln(),
            MarginScale::Pareto => 1.0 / (1.0 - u),
            MarginScale::Exponential => -(-u).ln_1p(),
            MarginScale::Laplace => {
                if u < 0.5 {
                    (2.0 * u).ln()
                } else {
                    -(2.0 * (1.0 - u)).ln()
                }
            }
        }
    }

    /// Inverse of [`from_uniform`](Self::from_uniform).
    pub fn to_uniform(self, x: f64) -> f64 {
        match self {
            MarginScale::Raw | MarginScale::Uniform => x,
            MarginScale::Frechet => (-1.0 / x).exp(),
            MarginScale::Pareto => 1.0 - 1.0 / x,
            MarginScale::Exponential => -(-x).exp_m1(),
            MarginScale::Laplace => {
                if x < 0.0 {
                    0.5 * x.exp()
                } else {
                    1.0 - 0.5 * (-x).exp()
                }
            }
        }
    }

    /// Upper-tail probability `1 - u` of a value on this scale, computed
    /// without forming `u` first.
    pub fn tail_prob(self, x: f64) -> f64 {
        match self {
            MarginScale::Raw | MarginScale::Uniform => 1.0 - x,
            MarginScale::Frechet => -(-1.0 / x).exp_m1(),
            MarginScale::Pareto => 1.0 / x,
            MarginScale::Exponential => (-x).exp(),
            MarginScale::Laplace => {
                if x < 0.0 {
                    1.0 - 0.5 * x.exp()
                } else {
                    0.5 * (-x).exp()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Eval {
    Cdf,
    Survival,
    Pdf,
    Quantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
}

impl GevParams {
    pub fn new(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        if !(sigma > 0.0) || !mu.is_finite() || !xi.is_finite() || !sigma.is_finite() {
            return invalid_param(format!("invalid GEV parameters ({mu}, {sigma}, {xi})"));
        }
        Ok(Self { mu, sigma, xi })
    }

    /// `t(z)` such that `G(z) = exp(-t)`; infinite or zero outside the support.
    fn t(&self, z: f64) -> f64 {
        let s = (z - self.mu) / self.sigma;
        if self.xi.abs() <= XI_ZERO {
            (-s).exp()
        } else {
            let w = 1.0 + self.xi * s;
            if w <= 0.0 {
                if self.xi > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            } else {
                (-(self.xi * s).ln_1p() / self.xi).exp()
            }
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        (-self.t(z)).exp()
    }

    pub fn logpdf(&self, z: f64) -> f64 {
        let s = (z - self.mu) / self.sigma;
        if self.xi.abs() <= XI_ZERO {
            return -self.sigma.ln() - s - (-s).exp();
        }
        let w = 1.0 + self.xi * s;
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let lw = (self.xi * s).ln_1p();
        -self.sigma.ln() - (1.0 / self.xi + 1.0) * lw - (-lw / self.xi).exp()
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.logpdf(z).exp()
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let y = -p.ln();
        if self.xi.abs() <= XI_ZERO {
            self.mu - self.sigma * y.ln()
        } else {
            self.mu + self.sigma * (-self.xi * y.ln()).exp_m1() / self.xi
        }
    }

    /// Constants `(α_t, β_t)` with `G(α_t z + β_t)^t = G(z)`.
    pub fn max_stable_constants(&self, t: f64) -> (f64, f64) {
        if self.xi.abs() <= XI_ZERO {
            (1.0, self.sigma * t.ln())
        } else {
            let am1 = (self.xi * t.ln()).exp_m1();
            (1.0 + am1, -self.mu * am1 + self.sigma * am1 / self.xi)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    pub tau: f64,
    pub xi: f64,
}

impl GpParams {
    pub fn new(tau: f64, xi: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() || !xi.is_finite() {
            return invalid_param(format!("invalid GP parameters ({tau}, {xi})"));
        }
        Ok(Self { tau, xi })
    }

    pub fn survival(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        if self.xi.abs() <= XI_ZERO {
            (-y / self.tau).exp()
        } else {
            let w = 1.0 + self.xi * y / self.tau;
            if w <= 0.0 {
                0.0
            } else {
                (-(self.xi * y / self.tau).ln_1p() / self.xi).exp()
            }
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        1.0 - self.survival(y)
    }

    pub fn logpdf(&self, y: f64) -> f64 {
        if y < 0.0 {
            return f64::NEG_INFINITY;
        }
        if self.xi.abs() <= XI_ZERO {
            return -self.tau.ln() - y / self.tau;
        }
        let w = 1.0 + self.xi * y / self.tau;
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        -self.tau.ln() - (1.0 / self.xi + 1.0) * w.ln()
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.logpdf(y).exp()
    }

    pub fn quantile(&self, p: f64) -> f64 {
        if self.xi.abs() <= XI_ZERO {
            -self.tau * (-p).ln_1p()
        } else {
            self.tau * ((-p).ln_1p() * -self.xi).exp_m1() / self.xi
        }
    }
}

fn check_quantile_arg(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return invalid_input(format!("quantile argument {p} is outside (0, 1)"));
    }
    Ok(())
}

pub fn gev_eval(z: f64, p: &GevParams, kind: Eval) -> Result<f64> {
    let p = GevParams::new(p.mu, p.sigma, p.xi)?;
    Ok(match kind {
        Eval::Cdf => p.cdf(z),
        Eval::Survival => -(-p.t(z)).exp_m1(),
        Eval::Pdf => p.pdf(z),
        Eval::Quantile => {
            check_quantile_arg(z)?;
            p.quantile(z)
        }
    })
}

pub fn gp_eval(y: f64, p: &GpParams, kind: Eval) -> Result<f64> {
    let p = GpParams::new(p.tau, p.xi)?;
    Ok(match kind {
        Eval::Cdf => {
            if y < 0.0 {
                0.0
            } else {
                p.cdf(y)
            }
        }
        Eval::Survival => p.survival(y),
        Eval::Pdf => p.pdf(y),
        Eval::Quantile => {
            check_quantile_arg(y)?;
            p.quantile(y)
        }
    })
}

/// Parameters of the exceedances over a threshold raised by `shift`.
pub fn gp_shift(p: &GpParams, shift: f64) -> Result<GpParams> {
    if shift < 0.0 {
        return invalid_param("threshold shift must be nonnegative");
    }
    let tau = p.tau + p.xi * shift;
    if tau <= 0.0 {
        return invalid_param(format!("shift {shift} reaches the upper endpoint"));
    }
    GpParams::new(tau, p.xi)
}

/// GP parameters implied above `u_star` by a GEV for block maxima.
pub fn gp_from_gev(g: &GevParams, u_star: f64) -> Result<GpParams> {
    if 1.0 + g.xi * (u_star - g.mu) / g.sigma <= 0.0 {
        return invalid_param(format!("{u_star} is outside the GEV support"));
    }
    let tau = if g.xi.abs() <= XI_ZERO { g.sigma } else { g.sigma + g.xi * (u_star - g.mu) };
    GpParams::new(tau, g.xi)
}

fn finite_values(data: &[f64]) -> Vec<f64> {
    data.iter().copied().filter(|v| v.is_finite()).collect()
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, v.sqrt())
}

/// Maximum-likelihood GEV fit to block maxima.
pub fn fit_gev(block_maxima: &[f64], settings: &OptimSettings) -> Result<FitResult> {
    let x = finite_values(block_maxima);
    if x.len() < 20 {
        return Err(Error::InsufficientData(format!("{} maxima, need at least 20", x.len())));
    }
    let (m, sd) = mean_sd(&x);
    if !(sd > 1e-12 * m.abs().max(1.0)) {
        return invalid_input("block maxima are constant");
    }
    let s0 = sd * 6f64.sqrt() / std::f64::consts::PI;
    let params = [
        ParamSpec::new("mu", m - 0.577_215_664_9 * s0, Transform::Identity),
        ParamSpec::new("sigma", s0, Transform::Log),
        ParamSpec::new("xi", 0.05, Transform::Identity),
    ];
    let ll = |p: &[f64]| {
        let g = GevParams { mu: p[0], sigma: p[1], xi: p[2] };
        x.iter().map(|&z| g.logpdf(z)).sum::<f64>()
    };
    let mut fit = inference::fit(ll, &params, settings, x.len(), true)?;
    if fit.estimates[2] < -1.0 {
        fit.flags.push("xi below -1: the likelihood is irregular".into());
    }
    Ok(fit)
}

/// Maximum-likelihood GP fit to the exceedances of `threshold`.
pub fn fit_gp(data: &[f64], threshold: f64, settings: &OptimSettings) -> Result<FitResult> {
    let y: Vec<f64> = finite_values(data).into_iter().filter(|&v| v > threshold).map(|v| v - threshold).collect();
    if y.len() < 20 {
        return Err(Error::InsufficientData(format!("{} exceedances, need at least 20", y.len())));
    }
    let (m, _) = mean_sd(&y);
    let params = [ParamSpec::new("tau", m, Transform::Log), ParamSpec::new("xi", 0.05, Transform::Identity)];
    let ll = |p: &[f64]| {
        let g = GpParams { tau: p[0], xi: p[1] };
        y.iter().map(|&v| g.logpdf(v)).sum::<f64>()
    };
    inference::fit(ll, &params, settings, y.len(), true)
}

/// Per-site ranks divided by `n_site + 1`, with ties broken at random.
pub fn empirical_uniform(obs: &ObservationMatrix, seed: u64) -> Result<ObservationMatrix> {
    let mut out = ObservationMatrix::filled(obs.nrows(), obs.ncols(), f64::NAN, MarginScale::Uniform);
    for j in 0..obs.ncols() {
        let mut rng = stream_rng(seed, j as u64);
        let mut entries: Vec<(f64, u64, usize)> = (0..obs.nrows())
            .filter(|&i| !obs.is_missing(i, j))
            .map(|i| (obs.get(i, j), rng.random::<u64>(), i))
            .collect();
        if entries.len() < 2 {
            return invalid_input(format!("site {j} has fewer than two observations"));
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let denom = entries.len() as f64 + 1.0;
        for (r, &(_, _, i)) in entries.iter().enumerate() {
            out.set(i, j, (r + 1) as f64 / denom);
        }
    }
    Ok(out)
}

/// Transforms a uniform-scale matrix to `target` margins.
pub fn rescale(u: &ObservationMatrix, target: MarginScale) -> Result<ObservationMatrix> {
    if u.scale() != MarginScale::Uniform {
        return invalid_input(format!("expected uniform margins, found {:?}", u.scale()));
    }
    if target == MarginScale::Raw {
        return invalid_input("cannot rescale to raw margins");
    }
    if u.values().iter().any(|&v| !v.is_nan() && !(v > 0.0 && v < 1.0)) {
        return invalid_input("uniform entries must lie strictly inside (0, 1)");
    }
    Ok(u.map(target, |v| target.from_uniform(v)))
}

/// Inverse of [`rescale`]: back to uniform margins from the matrix's own scale.
pub fn to_uniform(x: &ObservationMatrix) -> Result<ObservationMatrix> {
    if x.scale() == MarginScale::Raw {
        return invalid_input("raw data need empirical_uniform first");
    }
    let s = x.scale();
    Ok(x.map(MarginScale::Uniform, |v| s.to_uniform(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gev_examples() {
        let g = GevParams::new(0.0, 1.0, 0.0).unwrap();
        assert!((g.cdf(0.0) - (-1f64).exp()).abs() < 1e-15);
        let g = GevParams::new(0.0, 1.0, -0.5).unwrap();
        assert_eq!(g.cdf(2.0), 1.0);
        assert_eq!(g.cdf(3.0), 1.0);
        let g = GevParams::new(0.0, 1.0, 0.5).unwrap();
        assert!((g.cdf(1.0) - (-(1.5f64).powf(-2.0)).exp()).abs() < 1e-15);
        assert!((g.cdf(1.0) - 0.641_180).abs() < 1e-6);
        assert_eq!(g.cdf(-3.0), 0.0);
        assert!(GevParams::new(0.0, -1.0, 0.0).is_err());
        assert!(gev_eval(1.5, &GevParams { mu: 0.0, sigma: 1.0, xi: 0.0 }, Eval::Quantile).is_err());
    }

    #[test]
    fn gp_examples() {
        let p = GpParams::new(1.0, 0.5).unwrap();
        assert_eq!(p.survival(0.0), 1.0);
        assert!((p.survival(2.0) - 0.25).abs() < 1e-15);
        let e = GpParams::new(1.0, 0.0).unwrap();
        assert!((e.survival(1.0) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(gp_eval(-1.0, &p, Eval::Cdf).unwrap(), 0.0);
    }

    #[test]
    fn gp_shift_and_from_gev() {
        let s = gp_shift(&GpParams { tau: 1.0, xi: 0.5 }, 2.0).unwrap();
        assert_eq!((s.tau, s.xi), (2.0, 0.5));
        let s = gp_shift(&GpParams { tau: 1.0, xi: 0.0 }, 5.0).unwrap();
        assert_eq!((s.tau, s.xi), (1.0, 0.0));
        let s = gp_shift(&GpParams { tau: 1.0, xi: -0.5 }, 1.0).unwrap();
        assert_eq!((s.tau, s.xi), (0.5, -0.5));
        assert!(gp_shift(&GpParams { tau: 1.0, xi: -0.5 }, 2.0).is_err());

        let g = gp_from_gev(&GevParams { mu: 0.0, sigma: 1.0, xi: 0.5 }, 2.0).unwrap();
        assert_eq!((g.tau, g.xi), (2.0, 0.5));
        let g = gp_from_gev(&GevParams { mu: 0.0, sigma: 1.0, xi: 0.0 }, 7.3).unwrap();
        assert_eq!((g.tau, g.xi), (1.0, 0.0));
        let g = gp_from_gev(&GevParams { mu: 1.0, sigma: 2.0, xi: -0.25 }, 3.0).unwrap();
        assert_eq!((g.tau, g.xi), (1.5, -0.25));
    }

    #[test]
    fn empirical_uniform_ranks() {
        let m = ObservationMatrix::from_rows(&[vec![5.1], vec![2.2], vec![9.9]], MarginScale::Raw).unwrap();
        let u = empirical_uniform(&m, 1).unwrap();
        assert_eq!(u.column(0), vec![0.5, 0.25, 0.75]);
        let cubed = m.map(MarginScale::Raw, |v| v * v * v);
        assert_eq!(empirical_uniform(&cubed, 1).unwrap(), u);

        let ties = ObservationMatrix::from_rows(&[vec![1.0], vec![1.0], vec![2.0]], MarginScale::Raw).unwrap();
        for seed in [1, 2] {
            let u = empirical_uniform(&ties, seed).unwrap().column(0);
            let mut tied = vec![u[0], u[1]];
            tied.sort_by(f64::total_cmp);
            assert_eq!(tied, vec![0.25, 0.5]);
            assert_eq!(u[2], 0.75);
        }
        let missing =
            ObservationMatrix::from_rows(&[vec![f64::NAN, 1.0], vec![f64::NAN, 2.0]], MarginScale::Raw).unwrap();
        assert!(empirical_uniform(&missing, 0).is_err());
    }

    #[test]
    fn rescale_examples() {
        let u = ObservationMatrix::from_rows(&[vec![0.5]], MarginScale::Uniform).unwrap();
        assert_eq!(rescale(&u, MarginScale::Pareto).unwrap().get(0, 0), 2.0);
        assert_eq!(rescale(&u, MarginScale::Laplace).unwrap().get(0, 0), 0.0);
        assert!((rescale(&u, MarginScale::Frechet).unwrap().get(0, 0) - std::f64::consts::LOG2_E).abs() < 1e-6);
        let bad = ObservationMatrix::from_rows(&[vec![1.0]], MarginScale::Uniform).unwrap();
        assert!(rescale(&bad, MarginScale::Pareto).is_err());
    }

    proptest! {
        #[test]
        fn gev_max_stability(xi in -0.8f64..0.8, t in 0.1f64..20.0, mu in -2.0f64..2.0, sigma in 0.2f64..3.0) {
            for xi in [xi, 0.0] {
                let g = GevParams::new(mu, sigma, xi).unwrap();
                let (a, b) = g.max_stable_constants(t);
                for k in 1..20 {
                    let z = g.quantile(k as f64 / 20.0);
                    let lhs = g.cdf(a * z + b).powf(t);
                    prop_assert!((lhs - g.cdf(z)).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn gp_shift_composes(a in 0.0f64..3.0, b in 0.0f64..3.0, xi in -0.1f64..1.0) {
            let p = GpParams { tau: 1.5, xi };
            let two = gp_shift(&gp_shift(&p, a).unwrap(), b).unwrap();
            let one = gp_shift(&p, a + b).unwrap();
            prop_assert!((two.tau - one.tau).abs() <= 1e-15 * one.tau.max(1.0) * 4.0);
        }

        #[test]
        fn quantile_inverts_cdf(p in 0.001f64..0.999, xi in prop::sample::select(vec![-0.4, 0.0, 0.35])) {
            let g = GevParams::new(0.3, 1.7, xi).unwrap();
            prop_assert!((g.cdf(g.quantile(p)) - p).abs() < 1e-10);
            let q = GpParams::new(0.8, xi).unwrap();
            prop_assert!((q.cdf(q.quantile(p)) - p).abs() < 1e-10);
        }

        #[test]
        fn uniform_ranks_are_a_permutation(v in prop::collection::vec(-100.0f64..100.0, 2..40), seed in 0u64..100) {
            let n = v.len();
            let m = ObservationMatrix::new(n, 1, v, MarginScale::Raw).unwrap();
            let mut u = empirical_uniform(&m, seed).unwrap().column(0);
            u.sort_by(f64::total_cmp);
            for (i, x) in u.iter().enumerate() {
                prop_assert_eq!(*x, (i + 1) as f64 / (n + 1) as f64);
            }
        }

        #[test]
        fn rescale_round_trip(u in 1e-6f64..(1.0 - 1e-6)) {
            for s in [MarginScale::Frechet, MarginScale::Pareto, MarginScale::Laplace, MarginScale::Exponential] {
                let back = s.to_uniform(s.from_uniform(u));
                prop_assert!((back - u).abs() < 1e-12);
            }
        }
    }
}
