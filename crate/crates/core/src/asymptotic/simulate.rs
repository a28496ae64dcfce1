use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal};

use super::{MaxStableSpec, RParetoSpec, RiskFunctional};
use crate::data::ObservationMatrix;
use crate::error::{invalid_input, Error, Result};
use crate::gauss::{cholesky_jitter, correlation_matrix, SiteSet};
use crate::margins::MarginScale;
use crate::rng::par_rows;

#[derive(Debug, Clone)]
pub struct SimSettings {
    /// Poisson points allowed per max-stable field before it is flagged as truncated.
    pub max_points: usize,
    /// Proposals allowed per r-Pareto draw under rejection sampling.
    pub max_attempts: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { max_points: 100_000, max_attempts: 100_000 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimDiagnostics {
    /// Fields whose point budget ran out before the stopping rule was met.
    pub truncated: usize,
    pub mean_points: f64,
    /// Fraction of proposed profiles rejected (r-Pareto with max or min functionals).
    pub rejection_rate: f64,
}

#[derive(Debug, Clone)]
enum Kind {
    /// Lower Cholesky factor of `Cov(W(s_j) - W(s_0))` for `j ≥ 1`, plus `γ`.
    BrownResnick { chol: DMatrix<f64>, gamma: DMatrix<f64> },
    ExtremalT { chol: DMatrix<f64>, rho: DMatrix<f64>, dof: f64 },
}

/// Draws spectral profiles of a max-stable family rooted at a chosen site,
/// i.e. from the law of `Y / Y(s_T)` tilted by `Y(s_T)`.
#[derive(Debug, Clone)]
pub struct ProfileSampler {
    d: usize,
    kind: Kind,
}

impl ProfileSampler {
    pub fn new(spec: &MaxStableSpec, sites: &SiteSet) -> Result<Self> {
        spec.validate()?;
        let d = sites.len();
        if d == 0 {
            return invalid_input("no sites");
        }
        let kind = match spec {
            MaxStableSpec::BrownResnick { variogram } => {
                let gamma = DMatrix::from_fn(d, d, |i, j| {
                    (variogram.distance(sites.coords[i], sites.coords[j]) / variogram.phi).powf(variogram.nu)
                });
                let chol = if d > 1 {
                    let c = DMatrix::from_fn(d - 1, d - 1, |a, b| {
                        gamma[(0, a + 1)] + gamma[(0, b + 1)] - gamma[(a + 1, b + 1)]
                    });
                    cholesky_jitter(&c)?.0
                } else {
                    DMatrix::zeros(0, 0)
                };
                Kind::BrownResnick { chol, gamma }
            }
            MaxStableSpec::ExtremalT { dof, cov } => {
                let rho = correlation_matrix(sites, cov);
                Kind::ExtremalT { chol: cholesky_jitter(&rho)?.0, rho, dof: *dof }
            }
        };
        Ok(Self { d, kind })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// A profile rooted at site `root`; its value there is 1.
    pub fn rooted(&self, root: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let d = self.d;
        match &self.kind {
            Kind::BrownResnick { chol, gamma } => {
                let mut h = vec![0.0; d];
                if d > 1 {
                    let e = DVector::from_fn(d - 1, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let g = chol * e;
                    h[1..].copy_from_slice(g.as_slice());
                }
                let ht = h[root];
                (0..d).map(|j| (h[j] - ht - gamma[(root, j)]).exp()).collect()
            }
            Kind::ExtremalT { chol, rho, dof } => {
                let e = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let eps = chol * e;
                let chi = ChiSquared::new(dof + 1.0).expect("positive dof").sample(rng).sqrt();
                let et = eps[root];
                (0..d)
                    .map(|j| {
                        let t = (eps[j] - rho[(root, j)] * et) / chi;
                        (rho[(root, j)] + t).max(0.0).powf(*dof)
                    })
                    .collect()
            }
        }
    }

    /// A profile normalized to have mean one over the sites, with the root
    /// chosen uniformly. Mixing over roots this way gives the spectral measure
    /// of the mean functional.
    pub fn normalized(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let root = rng.random_range(0..self.d);
        let mut y = self.rooted(root, rng);
        let m = y.iter().sum::<f64>() / self.d as f64;
        for v in &mut y {
            *v /= m;
        }
        y
    }
}

/// Simulates `n` independent max-stable fields on unit Fréchet margins.
///
/// Poisson points `ζ_i = 1/Γ_i` are generated in decreasing order and combined
/// with mean-normalized profiles, which are bounded by `D`; generation stops
/// once `ζ_i · D` cannot exceed the current minimum, so output is exact up to
/// the point budget.
pub fn maxstable_simulate(
    spec: &MaxStableSpec,
    sites: &SiteSet,
    n: usize,
    seed: u64,
    settings: &SimSettings,
) -> Result<(ObservationMatrix, SimDiagnostics)> {
    let sampler = ProfileSampler::new(spec, sites)?;
    let d = sampler.dim();
    let rows = par_rows(n, seed, |_, rng| {
        let mut z = vec![0.0f64; d];
        let mut gamma = 0.0;
        let mut points = 0usize;
        loop {
            gamma += rng.sample::<f64, _>(Exp1);
            let zeta = 1.0 / gamma;
            let zmin = z.iter().copied().fold(f64::INFINITY, f64::min);
            if zeta * d as f64 <= zmin {
                return (z, points, false);
            }
            if points >= settings.max_points {
                return (z, points, true);
            }
            let w = sampler.normalized(rng);
            for (zj, wj) in z.iter_mut().zip(&w) {
                *zj = zj.max(zeta * wj);
            }
            points += 1;
        }
    });
    let mut out = ObservationMatrix::filled(n, d, f64::NAN, MarginScale::Frechet);
    let mut diag = SimDiagnostics::default();
    for (i, (z, p, trunc)) in rows.into_iter().enumerate() {
        out.row_mut(i).copy_from_slice(&z);
        diag.mean_points += p as f64;
        diag.truncated += trunc as usize;
    }
    if n > 0 {
        diag.mean_points /= n as f64;
    }
    if diag.truncated > 0 {
        log::warn!("{} of {n} max-stable fields hit the point budget", diag.truncated);
    }
    Ok((out, diag))
}

/// Simulates `n` draws of an r-Pareto process on the standard Pareto scale,
/// `X = R·W` with `R ~ Pareto(1)` and `r(W) = 1`, so `r(X) = R > 1`.
pub fn rpareto_simulate(
    spec: &RParetoSpec,
    sites: &SiteSet,
    n: usize,
    seed: u64,
    settings: &SimSettings,
) -> Result<(ObservationMatrix, SimDiagnostics)> {
    let sampler = ProfileSampler::new(&spec.base, sites)?;
    let d = sampler.dim();
    if let RiskFunctional::Site(j) = spec.functional {
        if j >= d {
            return invalid_input(format!("site functional index {j} out of range for {d} sites"));
        }
    }
    let rows = par_rows(n, seed, |_, rng| -> Result<(Vec<f64>, usize)> {
        let mut proposals = 0usize;
        let w = loop {
            proposals += 1;
            if proposals > settings.max_attempts {
                return Err(Error::Numerical(format!(
                    "r-Pareto rejection sampler accepted nothing in {} proposals",
                    settings.max_attempts
                )));
            }
            match spec.functional {
                RiskFunctional::Site(j) => break sampler.rooted(j, rng),
                RiskFunctional::Mean => break sampler.normalized(rng),
                RiskFunctional::Max => {
                    let q = sampler.normalized(rng);
                    let m = q.iter().copied().fold(0.0, f64::max);
                    if rng.random::<f64>() * d as f64 <= m {
                        break q.iter().map(|v| v / m).collect();
                    }
                }
                RiskFunctional::Min => {
                    let q = sampler.normalized(rng);
                    let m = q.iter().copied().fold(f64::INFINITY, f64::min);
                    if m > 0.0 && rng.random::<f64>() <= m {
                        break q.iter().map(|v| v / m).collect();
                    }
                }
            }
        };
        let r = 1.0 / (1.0 - rng.random::<f64>());
        Ok((w.into_iter().map(|v| r * v).collect(), proposals))
    });
    let mut out = ObservationMatrix::filled(n, d, f64::NAN, MarginScale::Pareto);
    let mut proposals = 0usize;
    for (i, row) in rows.into_iter().enumerate() {
        let (x, p) = row?;
        out.row_mut(i).copy_from_slice(&x);
        proposals += p;
    }
    let diag = SimDiagnostics {
        truncated: 0,
        mean_points: 0.0,
        rejection_rate: if proposals > 0 { 1.0 - n as f64 / proposals as f64 } else { 0.0 },
    };
    Ok((out, diag))
}
