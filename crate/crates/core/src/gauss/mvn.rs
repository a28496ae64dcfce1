use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use super::cholesky_jitter;
use crate::error::{invalid_input, Error, Result};
use crate::quadrature::{integrate, QuadSettings};
use crate::rng::stream_rng;
use crate::special::{bvn_cdf, bvt_cdf, chi2_quantile, norm_cdf, norm_logpdf, norm_quantile, t_cdf};

const PRIMES: [u32; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103,
    107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

/// Quasi-Monte-Carlo settings for [`mvn_cdf`] and [`mvt_cdf`].
#[derive(Debug, Clone, Copy)]
pub struct MvnAccuracy {
    /// Lattice points per random shift (each evaluated with its antithetic twin).
    pub points: usize,
    pub shifts: usize,
    /// Keep doubling the lattice until the error estimate falls below this.
    pub tolerance: Option<f64>,
    pub max_points: usize,
}

impl Default for MvnAccuracy {
    fn default() -> Self {
        Self { points: 10_000, shifts: 8, tolerance: None, max_points: 1 << 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnEstimate {
    pub prob: f64,
    /// Three standard errors across random shifts; zero for exact evaluations.
    pub error: f64,
}

#[inline]
fn tent(x: f64) -> f64 {
    (2.0 * x - 1.0).abs()
}

fn generators(dim: usize) -> Vec<f64> {
    (0..dim).map(|k| (PRIMES[k % PRIMES.len()] as f64).sqrt().fract()).collect()
}

/// Lower Cholesky factor with rows reordered by increasing expected
/// conditional probability (Genz–Bretz prioritization).
fn reorder(upper: &[f64], cov: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let d = upper.len();
    let mut lrow = vec![vec![0.0; d]; d];
    let mut remaining: Vec<usize> = (0..d).collect();
    let mut perm = Vec::with_capacity(d);
    let mut y = vec![0.0; d];
    for i in 0..d {
        let mut best = (0usize, f64::INFINITY, 0.0, 0.0);
        for (pos, &v) in remaining.iter().enumerate() {
            let s = cov[(v, v)] - (0..i).map(|k| lrow[v][k] * lrow[v][k]).sum::<f64>();
            let sd = s.max(1e-300).sqrt();
            let m: f64 = (0..i).map(|k| lrow[v][k] * y[k]).sum();
            let bt = (upper[v] - m) / sd;
            let p = norm_cdf(bt);
            if p < best.1 {
                best = (pos, p, sd, bt);
            }
        }
        let (pos, p, lii, bt) = best;
        let v = remaining.swap_remove(pos);
        lrow[v][i] = lii;
        for &w in &remaining {
            let dot: f64 = (0..i).map(|k| lrow[w][k] * lrow[v][k]).sum();
            lrow[w][i] = (cov[(w, v)] - dot) / lii;
        }
        y[i] = if p > 1e-300 { -(norm_logpdf(bt) - p.ln()).exp() } else { bt };
        perm.push(v);
    }
    let l = DMatrix::from_fn(d, d, |i, k| if k <= i { lrow[perm[i]][k] } else { 0.0 });
    let b = perm.iter().map(|&v| upper[v]).collect();
    (b, l)
}

/// Separation-of-variables integrand for `P(L ε ≤ b)`; `w` has at least
/// `d - 1` coordinates in `[0, 1]`.
#[inline]
/// Trivariate `P(N(0, L Lᵀ) ≤ b)` as a one-dimensional integral of the
/// bivariate distribution function over the first coordinate.
fn trivariate_prob(b: &[f64], l: &DMatrix<f64>) -> f64 {
    let top = norm_cdf(b[0] / l[(0, 0)]);
    if top == 0.0 {
        return 0.0;
    }
    let s1 = l[(1, 1)];
    let s2 = (l[(2, 1)] * l[(2, 1)] + l[(2, 2)] * l[(2, 2)]).sqrt();
    let r = (l[(2, 1)] / s2).clamp(-1.0, 1.0);
    let f = |w: f64| {
        let t = norm_quantile(w);
        bvn_cdf((b[1] - l[(1, 0)] * t) / s1, (b[2] - l[(2, 0)] * t) / s2, r)
    };
    let q = QuadSettings { abs_tol: 1e-15, rel_tol: 1e-12, max_intervals: 200 };
    integrate(f, 0.0, top, &q).value.clamp(0.0, 1.0)
}

fn sov(b: &[f64], l: &DMatrix<f64>, w: &[f64], y: &mut [f64]) -> f64 {
    let d = b.len();
    let mut f = 1.0;
    for i in 0..d {
        let mut s = 0.0;
        for k in 0..i {
            s += l[(i, k)] * y[k];
        }
        let e = norm_cdf((b[i] - s) / l[(i, i)]);
        f *= e;
        if f == 0.0 {
            return 0.0;
        }
        if i + 1 < d {
            let q = (w[i] * e).clamp(1e-300, 1.0 - 1e-16);
            y[i] = norm_quantile(q);
        }
    }
    f
}

#[inline]
fn chi_scale(w: f64, dof: f64) -> f64 {
    let w = w.clamp(1e-15, 1.0 - 1e-15);
    (chi2_quantile(dof, w) / dof).sqrt()
}

fn sov_t(b: &[f64], l: &DMatrix<f64>, dof: f64, w: &[f64], y: &mut [f64], bs: &mut [f64]) -> f64 {
    let s = chi_scale(w[0], dof);
    for (o, &v) in bs.iter_mut().zip(b) {
        *o = v * s;
    }
    sov(bs, l, &w[1..], y)
}

fn check_corr(upper: &[f64], corr: &DMatrix<f64>) -> Result<()> {
    let d = upper.len();
    if d > 64 {
        return Err(Error::Unsupported(format!("dimension {d} exceeds the supported maximum of 64")));
    }
    if d == 0 || corr.nrows() != d || corr.ncols() != d {
        return invalid_input("upper limits and correlation matrix dimensions differ");
    }
    for i in 0..d {
        if (corr[(i, i)] - 1.0).abs() > 1e-8 {
            return invalid_input("correlation matrix must have a unit diagonal");
        }
        for j in 0..i {
            if (corr[(i, j)] - corr[(j, i)]).abs() > 1e-10 || corr[(i, j)].abs() > 1.0 {
                return invalid_input("correlation matrix must be symmetric with entries in [-1, 1]");
            }
        }
    }
    if upper.iter().any(|v| v.is_nan()) {
        return invalid_input("upper limits must not be NaN");
    }
    Ok(())
}

/// Drops coordinates with `+∞` limits. `None` means some limit is `-∞`.
fn reduce(upper: &[f64], corr: &DMatrix<f64>) -> Option<(Vec<f64>, DMatrix<f64>)> {
    if upper.contains(&f64::NEG_INFINITY) {
        return None;
    }
    let keep: Vec<usize> = (0..upper.len()).filter(|&i| upper[i].is_finite()).collect();
    let c = DMatrix::from_fn(keep.len(), keep.len(), |a, b| corr[(keep[a], keep[b])]);
    Some((keep.iter().map(|&i| upper[i]).collect(), c))
}

fn qmc_estimate<F>(dim: usize, acc: &MvnAccuracy, seed: u64, f: F) -> MvnEstimate
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let z = generators(dim);
    let shifts: Vec<Vec<f64>> = (0..acc.shifts.max(2))
        .map(|s| {
            let mut rng = stream_rng(seed, s as u64);
            (0..dim).map(|_| rng.random::<f64>()).collect()
        })
        .collect();
    let mut sums = vec![0.0; shifts.len()];
    let mut done = 0usize;
    let mut next = acc.points.max(1);
    loop {
        let part: Vec<f64> = shifts
            .par_iter()
            .map(|shift| {
                let mut w = vec![0.0; dim];
                let mut wa = vec![0.0; dim];
                let mut acc_s = 0.0;
                for i in done + 1..=next {
                    for k in 0..dim {
                        let x = tent((i as f64 * z[k] + shift[k]).fract());
                        w[k] = x;
                        wa[k] = 1.0 - x;
                    }
                    acc_s += 0.5 * (f(&w) + f(&wa));
                }
                acc_s
            })
            .collect();
        for (s, p) in sums.iter_mut().zip(part) {
            *s += p;
        }
        done = next;
        let means: Vec<f64> = sums.iter().map(|s| s / done as f64).collect();
        let k = means.len() as f64;
        let prob = means.iter().sum::<f64>() / k;
        let var = means.iter().map(|m| (m - prob).powi(2)).sum::<f64>() / (k - 1.0);
        let error = 3.0 * (var / k).sqrt();
        let stop = match acc.tolerance {
            Some(t) => error <= t || 2 * done > acc.max_points,
            None => true,
        };
        if stop {
            return MvnEstimate { prob: prob.clamp(0.0, 1.0), error };
        }
        next = 2 * done;
    }
}

/// `P(X ≤ upper)` for a centred Gaussian vector with correlation `corr`.
pub fn mvn_cdf(upper: &[f64], corr: &DMatrix<f64>, acc: &MvnAccuracy, seed: u64) -> Result<MvnEstimate> {
    check_corr(upper, corr)?;
    let Some((b, c)) = reduce(upper, corr) else {
        return Ok(MvnEstimate { prob: 0.0, error: 0.0 });
    };
    let exact = |prob| Ok(MvnEstimate { prob, error: 0.0 });
    match b.len() {
        0 => return exact(1.0),
        1 => return exact(norm_cdf(b[0])),
        2 => {
            cholesky_jitter(&c).map_err(|_| Error::InvalidInput("correlation matrix is not positive definite".into()))?;
            return exact(bvn_cdf(b[0], b[1], c[(0, 1)]));
        }
        _ => {}
    }
    let (l0, jitter) =
        cholesky_jitter(&c).map_err(|_| Error::InvalidInput("correlation matrix is not positive definite".into()))?;
    drop(l0);
    let mut cj = c.clone();
    for i in 0..cj.nrows() {
        cj[(i, i)] += jitter;
    }
    let (bp, l) = reorder(&b, &cj);
    let d = bp.len();
    Ok(qmc_estimate(d - 1, acc, seed, |w| {
        let mut y = [0.0; 64];
        sov(&bp, &l, w, &mut y[..d])
    }))
}

/// `P(T ≤ upper)` for a central multivariate t vector with `dof` degrees of freedom.
pub fn mvt_cdf(upper: &[f64], corr: &DMatrix<f64>, dof: f64, acc: &MvnAccuracy, seed: u64) -> Result<MvnEstimate> {
    if !(dof > 0.0) {
        return invalid_input("degrees of freedom must be positive");
    }
    if dof.is_infinite() {
        return mvn_cdf(upper, corr, acc, seed);
    }
    check_corr(upper, corr)?;
    let Some((b, c)) = reduce(upper, corr) else {
        return Ok(MvnEstimate { prob: 0.0, error: 0.0 });
    };
    let exact = |prob| Ok(MvnEstimate { prob, error: 0.0 });
    match b.len() {
        0 => return exact(1.0),
        1 => return exact(t_cdf(b[0], dof)),
        2 => {
            cholesky_jitter(&c).map_err(|_| Error::InvalidInput("correlation matrix is not positive definite".into()))?;
            return exact(bvt_cdf(b[0], b[1], c[(0, 1)], dof));
        }
        _ => {}
    }
    let (_, jitter) =
        cholesky_jitter(&c).map_err(|_| Error::InvalidInput("correlation matrix is not positive definite".into()))?;
    let mut cj = c.clone();
    for i in 0..cj.nrows() {
        cj[(i, i)] += jitter;
    }
    let (bp, l) = reorder(&b, &cj);
    let d = bp.len();
    Ok(qmc_estimate(d, acc, seed, |w| {
        let mut y = [0.0; 64];
        let mut bs = [0.0; 64];
        sov_t(&bp, &l, dof, w, &mut y[..d], &mut bs[..d])
    }))
}

/// A fixed randomized lattice used inside likelihoods. The same nodes are
/// reused for every evaluation, and no reordering is applied, so estimated
/// probabilities vary smoothly with the parameters.
#[derive(Debug, Clone)]
pub struct QmcRule {
    dim: usize,
    nodes: Vec<f64>,
}

impl QmcRule {
    pub fn new(dim: usize, shifts: usize, points: usize, seed: u64) -> Self {
        let dim = dim.max(1);
        let z = generators(dim);
        let mut nodes = Vec::with_capacity(shifts * points * dim);
        for s in 0..shifts {
            let mut rng = stream_rng(seed, s as u64);
            let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            for i in 1..=points {
                for k in 0..dim {
                    nodes.push(tent((i as f64 * z[k] + shift[k]).fract()));
                }
            }
        }
        Self { dim, nodes }
    }

    /// A small rule adequate for likelihood optimization.
    pub fn for_likelihood(dim: usize) -> Self {
        Self::new(dim, 8, 64, 0x9a55)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `P(N(0, L Lᵀ) ≤ b)` for lower-triangular `l`.
    pub fn normal_prob(&self, b: &[f64], l: &DMatrix<f64>) -> f64 {
        let d = b.len();
        match d {
            0 => 1.0,
            1 => norm_cdf(b[0] / l[(0, 0)]),
            2 => {
                let s0 = l[(0, 0)];
                let s1 = (l[(1, 0)] * l[(1, 0)] + l[(1, 1)] * l[(1, 1)]).sqrt();
                let r = (l[(1, 0)] / s1).clamp(-1.0, 1.0);
                bvn_cdf(b[0] / s0, b[1] / s1, r)
            }
            3 => trivariate_prob(b, l),
            _ => {
                assert!(d - 1 <= self.dim, "rule dimension {} too small for {d} variables", self.dim);
                let mut y = [0.0; 64];
                let mut acc = 0.0;
                let mut wa = [0.0; 64];
                for w in self.nodes.chunks_exact(self.dim) {
                    acc += sov(b, l, w, &mut y[..d]);
                    for k in 0..d - 1 {
                        wa[k] = 1.0 - w[k];
                    }
                    acc += sov(b, l, &wa[..d - 1], &mut y[..d]);
                }
                acc / (self.nodes.len() / self.dim * 2) as f64
            }
        }
    }

    /// `P(T ≤ b)` for a centred multivariate t with scale `L Lᵀ` and `dof` degrees of freedom.
    pub fn t_prob(&self, b: &[f64], l: &DMatrix<f64>, dof: f64) -> f64 {
        let d = b.len();
        match d {
            0 => 1.0,
            1 => t_cdf(b[0] / l[(0, 0)], dof),
            2 => {
                let s0 = l[(0, 0)];
                let s1 = (l[(1, 0)] * l[(1, 0)] + l[(1, 1)] * l[(1, 1)]).sqrt();
                let r = (l[(1, 0)] / s1).clamp(-1.0, 1.0);
                bvt_cdf(b[0] / s0, b[1] / s1, r, dof)
            }
            _ => {
                assert!(d <= self.dim, "rule dimension {} too small for {d} t variables", self.dim);
                let mut y = [0.0; 64];
                let mut bs = [0.0; 64];
                let mut wa = [0.0; 64];
                let mut acc = 0.0;
                for w in self.nodes.chunks_exact(self.dim) {
                    acc += sov_t(b, l, dof, &w[..d], &mut y[..d], &mut bs[..d]);
                    for k in 0..d {
                        wa[k] = 1.0 - w[k];
                    }
                    acc += sov_t(b, l, dof, &wa[..d], &mut y[..d], &mut bs[..d]);
                }
                acc / (self.nodes.len() / self.dim * 2) as f64
            }
        }
    }
}

/// A Gaussian vector split into observed coordinates `I` and the rest `C`,
/// prepared for evaluating `log f(x_I) + log P(X_C ≤ b_C | X_I = x_I)`.
#[derive(Debug, Clone)]
pub struct GaussianSlice {
    pub observed: Vec<usize>,
    pub censored: Vec<usize>,
    chol_i: DMatrix<f64>,
    log_norm: f64,
    /// `Σ_CI Σ_II⁻¹`
    regress: DMatrix<f64>,
    cond_chol: DMatrix<f64>,
}

impl GaussianSlice {
    pub fn new(cov: &DMatrix<f64>, observed: &[usize]) -> Result<Self> {
        let d = cov.nrows();
        let censored: Vec<usize> = (0..d).filter(|j| !observed.contains(j)).collect();
        let k = observed.len();
        let s_ii = DMatrix::from_fn(k, k, |a, b| cov[(observed[a], observed[b])]);
        let s_ci = DMatrix::from_fn(censored.len(), k, |a, b| cov[(censored[a], observed[b])]);
        let s_cc = DMatrix::from_fn(censored.len(), censored.len(), |a, b| cov[(censored[a], censored[b])]);
        let (chol_i, _) = if k > 0 { cholesky_jitter(&s_ii)? } else { (DMatrix::zeros(0, 0), 0.0) };
        let log_det: f64 = (0..k).map(|i| chol_i[(i, i)].ln()).sum::<f64>() * 2.0;
        let log_norm = -0.5 * (k as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det;
        let (regress, cond_chol) = if censored.is_empty() {
            (DMatrix::zeros(0, k), DMatrix::zeros(0, 0))
        } else if k == 0 {
            (DMatrix::zeros(censored.len(), 0), cholesky_jitter(&s_cc)?.0)
        } else {
            let w = chol_i.solve_lower_triangular(&s_ci.transpose()).expect("nonsingular factor");
            let regress = chol_i.tr_solve_lower_triangular(&w).expect("nonsingular factor").transpose();
            let mut cond = &s_cc - &regress * s_ci.transpose();
            cond = (&cond + cond.transpose()) * 0.5;
            (regress, cholesky_jitter(&cond)?.0)
        };
        Ok(Self { observed: observed.to_vec(), censored, chol_i, log_norm, regress, cond_chol })
    }

    /// Log-density of the observed block at deviation `dx = x_I - m_I`.
    pub fn log_density(&self, dx: &[f64]) -> f64 {
        if dx.is_empty() {
            return 0.0;
        }
        let v = nalgebra::DVector::from_column_slice(dx);
        let z = self.chol_i.solve_lower_triangular(&v).expect("nonsingular factor");
        self.log_norm - 0.5 * z.norm_squared()
    }

    /// `P(X_C ≤ b | X_I)` where `b` is given as the deviation of the upper
    /// limits from the unconditional mean of `X_C`, and `dx` as for
    /// [`log_density`](Self::log_density).
    pub fn cond_prob(&self, dx: &[f64], b_dev: &[f64], rule: &QmcRule) -> f64 {
        if self.censored.is_empty() {
            return 1.0;
        }
        let mut b = b_dev.to_vec();
        if !dx.is_empty() {
            for (a, bv) in b.iter_mut().enumerate() {
                let mut m = 0.0;
                for (k, d) in dx.iter().enumerate() {
                    m += self.regress[(a, k)] * d;
                }
                *bv -= m;
            }
        }
        rule.normal_prob(&b, &self.cond_chol)
    }

    /// Same as [`cond_prob`](Self::cond_prob) for a multivariate t whose
    /// conditional scale matrix is `scale` times the Gaussian one.
    pub fn cond_t_prob(&self, dx: &[f64], b_dev: &[f64], scale: f64, dof: f64, rule: &QmcRule) -> f64 {
        if self.censored.is_empty() {
            return 1.0;
        }
        let f = 1.0 / scale.sqrt();
        let mut b = b_dev.to_vec();
        for (a, bv) in b.iter_mut().enumerate() {
            let mut m = 0.0;
            for (k, d) in dx.iter().enumerate() {
                m += self.regress[(a, k)] * d;
            }
            *bv = (*bv - m) * f;
        }
        rule.t_prob(&b, &self.cond_chol, dof)
    }

    /// Mahalanobis form `dxᵀ Σ_II⁻¹ dx`.
    pub fn quad_form(&self, dx: &[f64]) -> f64 {
        if dx.is_empty() {
            return 0.0;
        }
        let v = nalgebra::DVector::from_column_slice(dx);
        self.chol_i.solve_lower_triangular(&v).expect("nonsingular factor").norm_squared()
    }

    /// `log |Σ_II|`.
    pub fn log_det(&self) -> f64 {
        (0..self.chol_i.nrows()).map(|i| self.chol_i[(i, i)].ln()).sum::<f64>() * 2.0
    }

    pub fn cond_chol(&self) -> &DMatrix<f64> {
        &self.cond_chol
    }

    pub fn regression(&self) -> &DMatrix<f64> {
        &self.regress
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadSettings};
    use crate::special::norm_pdf;

    fn corr2(r: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0])
    }

    #[test]
    fn low_dimensional_exact_cases() {
        let acc = MvnAccuracy::default();
        let one = DMatrix::from_element(1, 1, 1.0);
        assert_eq!(mvn_cdf(&[0.0], &one, &acc, 1).unwrap().prob, 0.5);
        assert!((mvn_cdf(&[0.0, 0.0], &corr2(0.0), &acc, 1).unwrap().prob - 0.25).abs() < 1e-15);
        // oracle: integrate φ(x)Φ((0 - ρx)/√(1-ρ²)) over x < 0
        let r: f64 = 0.5;
        let s = (1.0 - r * r).sqrt();
        let q = QuadSettings { abs_tol: 1e-14, rel_tol: 1e-13, max_intervals: 400 };
        let want = integrate(|x| norm_pdf(x) * norm_cdf(-r * x / s), -40.0, 0.0, &q).value;
        let got = mvn_cdf(&[0.0, 0.0], &corr2(r), &acc, 1).unwrap().prob;
        assert!((got - want).abs() < 1e-10 && (got - 1.0 / 3.0).abs() < 1e-5, "{got} {want}");
        assert_eq!(mvt_cdf(&[0.0], &one, 3.0, &acc, 1).unwrap().prob, 0.5);
        assert!((mvt_cdf(&[0.0, 0.0], &corr2(0.0), 1.0, &acc, 1).unwrap().prob - 0.25).abs() < 1e-9);
        let big = mvt_cdf(&[0.0, 0.0], &corr2(0.5), 1e6, &acc, 1).unwrap().prob;
        assert!((big - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn qmc_orthant_matches_closed_form() {
        // equicorrelated trivariate orthant: 1/8 + 3 asin(ρ)/(4π)
        let r: f64 = 0.3;
        let c = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { r });
        let want = 0.125 + 3.0 * r.asin() / (4.0 * std::f64::consts::PI);
        let est = mvn_cdf(&[0.0; 3], &c, &MvnAccuracy::default(), 3).unwrap();
        assert!((est.prob - want).abs() < 1e-5, "{est:?}");
        assert!(est.error < 1e-4);
        let rule = QmcRule::new(2, 8, 512, 1);
        let ch = c.clone().cholesky().unwrap().l();
        assert!((rule.normal_prob(&[0.0; 3], &ch) - want).abs() < 1e-4);
    }

    #[test]
    fn trivariate_t_orthant() {
        // orthant probabilities are the same for every elliptical law
        let r: f64 = 0.3;
        let c = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { r });
        let want = 0.125 + 3.0 * r.asin() / (4.0 * std::f64::consts::PI);
        let est = mvt_cdf(&[0.0; 3], &c, 2.5, &MvnAccuracy::default(), 3).unwrap();
        assert!((est.prob - want).abs() < 1e-5, "{est:?}");
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        assert!(mvn_cdf(&[0.0; 3], &c, &MvnAccuracy::default(), 1).is_err());
    }

    #[test]
    fn doubling_reduces_error() {
        let c = DMatrix::from_fn(5, 5, |i, j| if i == j { 1.0 } else { 0.4 + 0.05 * (i + j) as f64 / 8.0 });
        let b = [0.3, -0.2, 1.0, 0.5, 0.0];
        let small = mvn_cdf(&b, &c, &MvnAccuracy { points: 500, ..Default::default() }, 2).unwrap();
        let large = mvn_cdf(&b, &c, &MvnAccuracy { points: 500, tolerance: Some(small.error / 4.0), ..Default::default() }, 2)
            .unwrap();
        assert!(large.error < small.error);
        assert!((large.prob - small.prob).abs() < 3.0 * small.error.max(1e-6));
    }

    #[test]
    fn slice_matches_direct_conditioning() {
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 1.0, 0.4, 0.2, 0.4, 1.0]);
        let slice = GaussianSlice::new(&c, &[1]).unwrap();
        let rule = QmcRule::new(2, 8, 256, 1);
        let x1 = 0.7;
        let got = slice.log_density(&[x1]) + slice.cond_prob(&[x1], &[0.1, -0.3], &rule).ln();
        // conditional law of (X0, X2) given X1 = x1
        let m = [0.5 * x1, 0.4 * x1];
        let cc: [f64; 3] = [1.0 - 0.25, 0.2 - 0.5 * 0.4, 1.0 - 0.16];
        let (s0, s2) = (cc[0].sqrt(), cc[2].sqrt());
        let r = cc[1] / (s0 * s2);
        let want = norm_logpdf(x1) + bvn_cdf((0.1 - m[0]) / s0, (-0.3 - m[1]) / s2, r).ln();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn slice_regression_with_several_observed() {
        let c = DMatrix::from_fn(5, 5, |i, j| (-(i as f64 - j as f64).abs() / 2.0).exp());
        let obs = [0, 1, 3];
        let slice = GaussianSlice::new(&c, &obs).unwrap();
        let cen = [2, 4];
        let s_ii = DMatrix::from_fn(3, 3, |a, b| c[(obs[a], obs[b])]);
        let s_ci = DMatrix::from_fn(2, 3, |a, b| c[(cen[a], obs[b])]);
        let want = &s_ci * s_ii.clone().try_inverse().unwrap();
        assert!((&slice.regress - want).abs().max() < 1e-12);
        let x = [0.3, -0.4, 1.1];
        let with_det = -1.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * s_ii.determinant().ln();
        let xv = nalgebra::DVector::from_column_slice(&x);
        let q = (xv.transpose() * s_ii.try_inverse().unwrap() * &xv)[(0, 0)];
        assert!((slice.log_density(&x) - (with_det - 0.5 * q)).abs() < 1e-12);
    }

    #[test]
    fn trivariate_orthant_and_qmc_agreement() {
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.6, -0.2, 0.6, 1.0, 0.3, -0.2, 0.3, 1.0]);
        let l = c.clone().cholesky().unwrap().l();
        let rule = QmcRule::new(2, 8, 64, 1);
        let want = 0.125 + (0.6f64.asin() + (-0.2f64).asin() + 0.3f64.asin()) / (4.0 * std::f64::consts::PI);
        assert!((rule.normal_prob(&[0.0; 3], &l) - want).abs() < 1e-12);
        let b = [0.4, -0.7, 1.3];
        let fine = mvn_cdf(&b, &c, &MvnAccuracy { points: 50_000, ..Default::default() }, 3).unwrap();
        assert!((rule.normal_prob(&b, &l) - fine.prob).abs() < fine.error.max(1e-9));
    }
}
