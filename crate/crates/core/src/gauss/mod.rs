//! Powered-exponential covariance with geometric anisotropy, Gaussian process
//! simulation and conditioning, and multivariate normal / t probabilities.

mod mvn;

pub use mvn::{
    mvn_cdf, mvt_cdf, GaussianSlice, MvnAccuracy, MvnEstimate, QmcRule,
};

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservationMatrix;
use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::margins::MarginScale;
use crate::rng::{stream_rng, CHUNK};

/// Rotation angle and stretch of a geometric anisotropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anisotropy {
    pub psi: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub phi: f64,
    pub nu: f64,
    #[serde(default)]
    pub aniso: Option<Anisotropy>,
}

impl CovarianceSpec {
    pub fn isotropic(phi: f64, nu: f64) -> Self {
        Self { phi, nu, aniso: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return invalid_param(format!("range phi={} must be positive", self.phi));
        }
        if !(self.nu > 0.0 && self.nu <= 2.0) {
            return invalid_param(format!("smoothness nu={} must lie in (0, 2]", self.nu));
        }
        if let Some(a) = self.aniso {
            if !(a.l > 0.0) || !(a.psi.abs() < std::f64::consts::FRAC_PI_2) {
                return invalid_param(format!("invalid anisotropy psi={}, L={}", a.psi, a.l));
            }
        }
        if self.nu == 2.0 {
            log::warn!("nu = 2 gives a Gaussian-shaped correlation that is nearly singular on dense grids");
        }
        Ok(())
    }

    /// Correlation at (already anisotropy-adjusted) distance `h`.
    #[inline]
    pub fn corr_at(&self, h: f64) -> f64 {
        (-(h / self.phi).powf(self.nu)).exp()
    }

    /// Distance between two sites under the anisotropy metric.
    pub fn distance(&self, s1: [f64; 2], s2: [f64; 2]) -> f64 {
        let d = [s1[0] - s2[0], s1[1] - s2[1]];
        match self.aniso {
            None => d[0].hypot(d[1]),
            Some(a) => {
                let t = aniso_map(d, a.psi, a.l);
                t[0].hypot(t[1])
            }
        }
    }
}

#[inline]
fn aniso_map(s: [f64; 2], psi: f64, l: f64) -> [f64; 2] {
    let (sn, cs) = psi.sin_cos();
    [cs * s[0] + sn * s[1], l * (-sn * s[0] + cs * s[1])]
}

/// Planar station coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSet {
    pub coords: Vec<[f64; 2]>,
    pub labels: Vec<String>,
}

impl SiteSet {
    pub fn new(coords: Vec<[f64; 2]>, labels: Vec<String>) -> Result<Self> {
        if coords.is_empty() {
            return invalid_input("a site set needs at least one site");
        }
        if coords.len() != labels.len() {
            return invalid_input("one label per site is required");
        }
        if coords.iter().flatten().any(|v| !v.is_finite()) {
            return invalid_input("site coordinates must be finite");
        }
        Ok(Self { coords, labels })
    }

    /// Sites labelled `s0, s1, ...`.
    pub fn from_coords(coords: Vec<[f64; 2]>) -> Result<Self> {
        let labels = (0..coords.len()).map(|i| format!("s{i}")).collect();
        Self::new(coords, labels)
    }

    /// Sites evenly spaced on a line.
    pub fn transect(d: usize, spacing: f64) -> Self {
        Self::from_coords((0..d).map(|i| [i as f64 * spacing, 0.0]).collect()).expect("nonempty")
    }

    /// A `nx × ny` grid with unit spacing times `spacing`.
    pub fn grid(nx: usize, ny: usize, spacing: f64) -> Self {
        let coords = (0..ny)
            .flat_map(|j| (0..nx).map(move |i| [i as f64 * spacing, j as f64 * spacing]))
            .collect();
        Self::from_coords(coords).expect("nonempty")
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn euclidean(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.coords[i], self.coords[j]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    /// Distances under the metric of `spec` (isotropic when it has no anisotropy).
    pub fn distance_matrix(&self, spec: &CovarianceSpec) -> DMatrix<f64> {
        let d = self.len();
        DMatrix::from_fn(d, d, |i, j| spec.distance(self.coords[i], self.coords[j]))
    }

    pub fn subset(&self, idx: &[usize]) -> SiteSet {
        SiteSet {
            coords: idx.iter().map(|&i| self.coords[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }
}

pub fn correlation(spec: &CovarianceSpec, s1: [f64; 2], s2: [f64; 2]) -> f64 {
    spec.corr_at(spec.distance(s1, s2))
}

/// Applies the rotation by `psi` followed by the stretch `diag(1, L)` to every site.
pub fn transform_sites(sites: &SiteSet, psi: f64, l: f64) -> SiteSet {
    SiteSet {
        coords: sites.coords.iter().map(|&s| aniso_map(s, psi, l)).collect(),
        labels: sites.labels.clone(),
    }
}

/// Equirectangular projection of `(longitude, latitude)` pairs in degrees to
/// planar kilometres, centred on the mean latitude.
pub fn lonlat_to_km(lonlat: &[[f64; 2]]) -> Vec<[f64; 2]> {
    const EARTH_RADIUS_KM: f64 = 6371.0088;
    if lonlat.is_empty() {
        return vec![];
    }
    let lat0 = (lonlat.iter().map(|p| p[1]).sum::<f64>() / lonlat.len() as f64).to_radians();
    lonlat
        .iter()
        .map(|p| [EARTH_RADIUS_KM * p[0].to_radians() * lat0.cos(), EARTH_RADIUS_KM * p[1].to_radians()])
        .collect()
}

pub fn correlation_matrix(sites: &SiteSet, spec: &CovarianceSpec) -> DMatrix<f64> {
    let d = sites.len();
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { correlation(spec, sites.coords[i], sites.coords[j]) })
}

/// Lower Cholesky factor, retrying with diagonal jitter `1e-10, 1e-9, …, 1e-6`.
/// Returns the factor and the jitter that was needed.
pub fn cholesky_jitter(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if let Some(c) = m.clone().cholesky() {
        return Ok((c.l(), 0.0));
    }
    let mut jitter = 1e-10;
    while jitter <= 1e-6 * (1.0 + 1e-9) {
        let mut a = m.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += jitter;
        }
        if let Some(c) = a.cholesky() {
            return Ok((c.l(), jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Numerical("matrix is not positive definite even with jitter 1e-6".into()))
}

/// `n` independent zero-mean, unit-variance Gaussian vectors at `sites`.
pub fn gp_simulate(sites: &SiteSet, spec: &CovarianceSpec, n: usize, seed: u64) -> Result<ObservationMatrix> {
    spec.validate()?;
    let (l, _) = cholesky_jitter(&correlation_matrix(sites, spec))?;
    Ok(simulate_with_factor(&l, n, seed))
}

pub(crate) fn simulate_with_factor(l: &DMatrix<f64>, n: usize, seed: u64) -> ObservationMatrix {
    let d = l.nrows();
    let chunks: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let rows = CHUNK.min(n - c * CHUNK);
            let mut out = vec![0.0; rows * d];
            let mut e = vec![0.0; d];
            for r in 0..rows {
                for v in e.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                let row = &mut out[r * d..(r + 1) * d];
                for i in 0..d {
                    let mut acc = 0.0;
                    for k in 0..=i {
                        acc += l[(i, k)] * e[k];
                    }
                    row[i] = acc;
                }
            }
            out
        })
        .collect();
    let values = chunks.concat();
    ObservationMatrix::new(n, d, values, MarginScale::Raw).expect("finite draws")
}

#[derive(Debug, Clone)]
pub struct ConditionedGaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Law of the zero-mean process at `sites` given its value at `s0` is zero.
pub fn gp_condition_zero(sites: &SiteSet, s0: usize, spec: &CovarianceSpec) -> Result<ConditionedGaussian> {
    if s0 >= sites.len() {
        return invalid_input(format!("conditioning index {s0} out of range"));
    }
    spec.validate()?;
    let c = correlation_matrix(sites, spec);
    let d = sites.len();
    let c0 = c.column(s0).clone_owned();
    let c00 = c[(s0, s0)];
    let mut cov = &c - (&c0 * c0.transpose()) / c00;
    cov[(s0, s0)] = 0.0;
    for j in 0..d {
        cov[(s0, j)] = 0.0;
        cov[(j, s0)] = 0.0;
    }
    Ok(ConditionedGaussian { mean: DVector::zeros(d), cov })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn correlation_examples() {
        let iso = CovarianceSpec::isotropic(1.0, 1.0);
        assert_eq!(correlation(&iso, [0.3, 0.2], [0.3, 0.2]), 1.0);
        assert!((correlation(&iso, [0.0, 0.0], [1.0, 0.0]) - (-1f64).exp()).abs() < 1e-15);
        let rot = CovarianceSpec { aniso: Some(Anisotropy { psi: 0.7, l: 1.0 }), ..iso };
        let (a, b) = ([0.1, 2.0], [1.3, -0.4]);
        assert!((correlation(&rot, a, b) - correlation(&iso, a, b)).abs() < 1e-14);
    }

    #[test]
    fn transform_examples() {
        let s = SiteSet::from_coords(vec![[1.0, 0.0], [2.0, -3.0]]).unwrap();
        assert_eq!(transform_sites(&s, 0.0, 1.0).coords, s.coords);
        let t = transform_sites(&s, -1.08, 0.53);
        assert!((t.coords[0][0] - 0.4713).abs() < 1e-4);
        assert!((t.coords[0][1] - 0.4674).abs() < 1e-4);
        // rotations compose but the stretch does not, so the map is not a group action in psi
        let psi = FRAC_PI_4 - 0.01;
        let twice = transform_sites(&transform_sites(&s, psi, 0.5), psi, 0.5);
        let doubled = transform_sites(&s, 2.0 * psi, 0.5);
        assert!((twice.coords[1][0] - doubled.coords[1][0]).abs() > 1e-3);
    }

    #[test]
    fn transformed_distance_is_mahalanobis() {
        let spec = CovarianceSpec { phi: 1.0, nu: 1.0, aniso: Some(Anisotropy { psi: 0.4, l: 0.3 }) };
        let s = SiteSet::from_coords(vec![[0.5, 1.0], [-1.0, 2.5]]).unwrap();
        let t = transform_sites(&s, 0.4, 0.3);
        let (sn, cs) = 0.4f64.sin_cos();
        let r = nalgebra::Matrix2::new(cs, -sn, sn, cs);
        let omega_inv = r * nalgebra::Matrix2::new(1.0, 0.0, 0.0, 0.09) * r.transpose();
        let d = nalgebra::Vector2::new(0.5 + 1.0, 1.0 - 2.5);
        let maha = (d.transpose() * omega_inv * d)[0].sqrt();
        assert!((t.euclidean(0, 1) - maha).abs() < 1e-12);
        assert!((spec.distance(s.coords[0], s.coords[1]) - maha).abs() < 1e-12);
    }

    #[test]
    fn simulation_is_reproducible_and_correlated() {
        let s = SiteSet::from_coords(vec![[0.0, 0.0], [(-(0.8f64).ln()), 0.0]]).unwrap();
        let spec = CovarianceSpec::isotropic(1.0, 1.0);
        let a = gp_simulate(&s, &spec, 200_000, 4).unwrap();
        let b = gp_simulate(&s, &spec, 200_000, 4).unwrap();
        assert_eq!(a, b);
        let (x, y) = (a.column(0), a.column(1));
        let r = x.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>() / x.len() as f64;
        assert!((r - 0.8).abs() < 0.01);
    }

    #[test]
    fn conditioning_on_zero() {
        let s = SiteSet::from_coords(vec![[0.0, 0.0], [0.7, 0.0], [5.0, 5.0]]).unwrap();
        let spec = CovarianceSpec::isotropic(1.0, 1.0);
        let c = gp_condition_zero(&s, 0, &spec).unwrap();
        let rho = spec.corr_at(0.7);
        assert_eq!(c.cov[(0, 0)], 0.0);
        assert!((c.cov[(1, 1)] - (1.0 - rho * rho)).abs() < 1e-14);
    }

    #[test]
    fn jitter_rescues_near_singular_matrices() {
        let s = SiteSet::from_coords(vec![[0.0, 0.0], [1e-9, 0.0], [1.0, 0.0]]).unwrap();
        let spec = CovarianceSpec::isotropic(1.0, 1.0);
        let (_, j) = cholesky_jitter(&correlation_matrix(&s, &spec)).unwrap();
        assert!(j <= 1e-8);
        assert!(cholesky_jitter(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    }

    #[test]
    fn lonlat_projection_distances() {
        let km = lonlat_to_km(&[[5.0, 52.0], [6.0, 52.0], [5.0, 53.0]]);
        let one_deg = 6371.0088 * std::f64::consts::PI / 180.0;
        let lat0 = (52.0f64 + 52.0 + 53.0) / 3.0;
        assert!(((km[1][0] - km[0][0]) - one_deg * lat0.to_radians().cos()).abs() < 1e-9);
        assert!(((km[2][1] - km[0][1]) - one_deg).abs() < 1e-9);
        assert!((one_deg - 111.195).abs() < 1e-3);
    }
}
