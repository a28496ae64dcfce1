use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

use super::MaxStableSpec;
use crate::error::{invalid_input, Error, Result};
use crate::gauss::{correlation_matrix, GaussianSlice, QmcRule, SiteSet};
use crate::special::{norm_cdf, norm_pdf, t_cdf, t_pdf};

/// Values of the bivariate exponent function and its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partials {
    pub v: f64,
    pub v1: f64,
    pub v2: f64,
    pub v12: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartialOrder {
    One,
    Two,
    OneTwo,
}

/// Dependence between two sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairDependence {
    /// Hüsler–Reiss parameter `a = √(2γ(h))`.
    BrownResnick { a: f64 },
    ExtremalT { rho: f64, dof: f64 },
}

impl PairDependence {
    pub fn partials(&self, z1: f64, z2: f64) -> Partials {
        match *self {
            PairDependence::BrownResnick { a } => {
                let a = a.max(1e-12);
                let q = a / 2.0 + (z2 / z1).ln() / a;
                let r = a - q;
                let (pq, pr) = (norm_cdf(q), norm_cdf(r));
                Partials {
                    v: pq / z1 + pr / z2,
                    v1: -pq / (z1 * z1),
                    v2: -pr / (z2 * z2),
                    v12: -norm_pdf(q) / (a * z1 * z1 * z2),
                }
            }
            PairDependence::ExtremalT { rho, dof } => {
                let m = dof + 1.0;
                let k = (m / (1.0 - rho * rho).max(1e-300)).sqrt();
                let u = (z2 / z1).powf(1.0 / dof);
                let b1 = k * (u - rho);
                let b2 = k * (1.0 / u - rho);
                let (t1, t2) = (t_cdf(b1, m), t_cdf(b2, m));
                Partials {
                    v: t1 / z1 + t2 / z2,
                    v1: -t1 / (z1 * z1),
                    v2: -t2 / (z2 * z2),
                    v12: -t_pdf(b1, m) * k * u / (dof * z1 * z1 * z2),
                }
            }
        }
    }

    pub fn extremal_coefficient(&self) -> f64 {
        self.partials(1.0, 1.0).v
    }
}

/// Precomputed dependence structure over a fixed set of sites.
#[derive(Debug, Clone)]
pub enum Dependence {
    /// Semivariogram matrix `γ(s_j - s_k)`.
    BrownResnick { gamma: DMatrix<f64> },
    /// Correlation matrix of the underlying Gaussian process.
    ExtremalT { rho: DMatrix<f64>, dof: f64 },
}

impl Dependence {
    pub fn new(spec: &MaxStableSpec, sites: &SiteSet) -> Result<Self> {
        spec.validate()?;
        Ok(match spec {
            MaxStableSpec::BrownResnick { variogram } => {
                let d = sites.len();
                let gamma = DMatrix::from_fn(d, d, |i, j| {
                    (variogram.distance(sites.coords[i], sites.coords[j]) / variogram.phi).powf(variogram.nu)
                });
                Dependence::BrownResnick { gamma }
            }
            MaxStableSpec::ExtremalT { dof, cov } => {
                Dependence::ExtremalT { rho: correlation_matrix(sites, cov), dof: *dof }
            }
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Dependence::BrownResnick { gamma } => gamma.nrows(),
            Dependence::ExtremalT { rho, .. } => rho.nrows(),
        }
    }

    /// Lattice dimension needed by [`log_neg_partial`](Self::log_neg_partial).
    pub fn rule_dim(&self) -> usize {
        self.dim().max(1)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let pick = |m: &DMatrix<f64>| DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])]);
        match self {
            Dependence::BrownResnick { gamma } => Dependence::BrownResnick { gamma: pick(gamma) },
            Dependence::ExtremalT { rho, dof } => Dependence::ExtremalT { rho: pick(rho), dof: *dof },
        }
    }

    pub fn pair(&self, i: usize, j: usize) -> PairDependence {
        match self {
            Dependence::BrownResnick { gamma } => PairDependence::BrownResnick { a: (2.0 * gamma[(i, j)]).sqrt() },
            Dependence::ExtremalT { rho, dof } => PairDependence::ExtremalT { rho: rho[(i, j)], dof: *dof },
        }
    }

    /// `log(-V_I(z))`, the log of minus the mixed partial derivative of the
    /// exponent function with respect to the coordinates in `set`.
    pub fn log_neg_partial(&self, z: &[f64], set: &[usize], rule: &QmcRule) -> Result<f64> {
        let d = self.dim();
        if z.len() != d {
            return invalid_input(format!("{} values for {d} sites", z.len()));
        }
        if set.is_empty() || set.iter().any(|&j| j >= d) {
            return invalid_input("partial derivative index set must be nonempty and in range");
        }
        if z.iter().any(|&v| !(v > 0.0)) {
            return invalid_input("exponent function arguments must be positive");
        }
        match self {
            Dependence::BrownResnick { gamma } => br_log_neg_partial(gamma, z, set, rule),
            Dependence::ExtremalT { rho, dof } => et_log_neg_partial(rho, *dof, z, set, rule),
        }
    }

    /// Exponent function `V(z)`, using `V = -Σ_j z_j V_j` (homogeneity of order −1).
    pub fn exponent(&self, z: &[f64], rule: &QmcRule) -> Result<f64> {
        match z.len() {
            0 => invalid_input("empty argument"),
            1 => Ok(1.0 / z[0]),
            2 => Ok(self.pair(0, 1).partials(z[0], z[1]).v),
            d => {
                let mut v = 0.0;
                for j in 0..d {
                    v += z[j] * self.log_neg_partial(z, &[j], rule)?.exp();
                }
                Ok(v)
            }
        }
    }

    /// Log of the full joint density on unit Fréchet margins, summing over all
    /// set partitions of the coordinates.
    pub fn log_density(&self, z: &[f64], rule: &QmcRule) -> Result<f64> {
        let d = z.len();
        let v = self.exponent(z, rule)?;
        let mut cache: HashMap<u32, f64> = HashMap::new();
        let mut total = 0.0;
        for part in set_partitions(d) {
            let mut prod = 1.0;
            for block in &part {
                let mask = block.iter().fold(0u32, |m, &j| m | (1 << j));
                let value = match cache.get(&mask) {
                    Some(&x) => x,
                    None => {
                        let x = self.log_neg_partial(z, block, rule)?.exp();
                        cache.insert(mask, x);
                        x
                    }
                };
                prod *= value;
            }
            total += prod;
        }
        Ok(-v + total.ln())
    }
}

fn br_log_neg_partial(gamma: &DMatrix<f64>, z: &[f64], set: &[usize], rule: &QmcRule) -> Result<f64> {
    let d = z.len();
    let i0 = set[0];
    if d == 1 {
        return Ok(-2.0 * z[0].ln());
    }
    let others: Vec<usize> = (0..d).filter(|&j| j != i0).collect();
    let cov = DMatrix::from_fn(d - 1, d - 1, |a, b| {
        let (j, k) = (others[a], others[b]);
        gamma[(i0, j)] + gamma[(i0, k)] - gamma[(j, k)]
    });
    let observed: Vec<usize> = set[1..].iter().map(|j| others.iter().position(|o| o == j).unwrap()).collect();
    let slice = GaussianSlice::new(&cov, &observed)?;
    let dev = |j: usize| (z[j] / z[i0]).ln() + gamma[(i0, j)];
    let dx: Vec<f64> = slice.observed.iter().map(|&p| dev(others[p])).collect();
    let bx: Vec<f64> = slice.censored.iter().map(|&p| dev(others[p])).collect();
    let prob = slice.cond_prob(&dx, &bx, rule);
    let mut out = -2.0 * z[i0].ln() + slice.log_density(&dx) + prob.ln();
    for &j in &set[1..] {
        out -= z[j].ln();
    }
    Ok(out)
}

fn et_log_neg_partial(rho: &DMatrix<f64>, nu: f64, z: &[f64], set: &[usize], rule: &QmcRule) -> Result<f64> {
    let k = set.len() as f64;
    let tau: Vec<f64> = z.iter().map(|v| v.powf(1.0 / nu)).collect();
    let slice = GaussianSlice::new(rho, set)?;
    let t_obs: Vec<f64> = slice.observed.iter().map(|&j| tau[j]).collect();
    let t_cen: Vec<f64> = slice.censored.iter().map(|&j| tau[j]).collect();
    let q = slice.quad_form(&t_obs);
    let ln_c = 0.5 * PI.ln() - 0.5 * (nu - 2.0) * 2f64.ln() - ln_gamma((nu + 1.0) / 2.0);
    let ln_ck = ln_c + nu.ln() - 0.5 * k * (2.0 * PI).ln() - 0.5 * slice.log_det()
        + ((k + nu) / 2.0 - 1.0) * 2f64.ln()
        + ln_gamma((k + nu) / 2.0);
    let mut out = ln_ck - 0.5 * (k + nu) * q.ln();
    for &j in set {
        out += (1.0 / nu - 1.0) * z[j].ln() - nu.ln();
    }
    let prob = slice.cond_t_prob(&t_obs, &t_cen, q / (nu + k), nu + k, rule);
    Ok(out + prob.ln())
}

/// All set partitions of `{0, …, n-1}`.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(i);
            rec(i + 1, n, cur, out);
            cur[b].pop();
        }
        cur.push(vec![i]);
        rec(i + 1, n, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    rec(0, n, &mut Vec::new(), &mut out);
    out
}

fn accurate_rule(dim: usize) -> QmcRule {
    QmcRule::new(dim, 8, 4096, 0x5eed)
}

/// Exponent function `V` restricted to the sites in `subset`, at the
/// corresponding entries of `z`.
pub fn exponent_v(spec: &MaxStableSpec, sites: &SiteSet, z: &[f64], subset: &[usize]) -> Result<f64> {
    if z.len() != sites.len() {
        return invalid_input("one value per site is required");
    }
    if subset.is_empty() || subset.iter().any(|&j| j >= sites.len()) {
        return invalid_input("subset must be nonempty and index existing sites");
    }
    if subset.len() > 10 {
        return Err(Error::Unsupported(format!("multivariate exponent limited to 10 sites, got {}", subset.len())));
    }
    if subset.iter().any(|&j| !(z[j] > 0.0)) {
        return invalid_input("exponent function arguments must be positive");
    }
    let dep = Dependence::new(spec, &sites.subset(subset))?;
    let zs: Vec<f64> = subset.iter().map(|&j| z[j]).collect();
    dep.exponent(&zs, &accurate_rule(dep.rule_dim()))
}

/// A bivariate partial derivative of `V` at separation `h`.
pub fn exponent_v_partials(spec: &MaxStableSpec, h: f64, z1: f64, z2: f64, order: PartialOrder) -> Result<f64> {
    spec.validate()?;
    if !(z1 > 0.0 && z2 > 0.0) {
        return invalid_input("exponent function arguments must be positive");
    }
    let p = spec.pair_at(h).partials(z1, z2);
    Ok(match order {
        PartialOrder::One => p.v1,
        PartialOrder::Two => p.v2,
        PartialOrder::OneTwo => p.v12,
    })
}

/// Joint density of a max-stable vector on unit Fréchet margins (`D ≤ 6`).
pub fn maxstable_density(spec: &MaxStableSpec, sites: &SiteSet, z: &[f64]) -> Result<f64> {
    if sites.len() > 6 {
        return Err(Error::Unsupported(format!(
            "full density needs all set partitions; {} sites is too many, use the pairwise likelihood",
            sites.len()
        )));
    }
    if z.len() != sites.len() {
        return invalid_input("one value per site is required");
    }
    let dep = Dependence::new(spec, sites)?;
    Ok(dep.log_density(z, &accurate_rule(dep.rule_dim()))?.exp())
}
