use nalgebra::{DMatrix, SymmetricEigen};

use super::Transform;
use crate::error::{invalid_param, Result};

#[derive(Debug, Clone)]
pub struct StdErrors {
    /// Natural-scale standard errors; `None` where the information matrix is
    /// not positive definite along that parameter.
    pub stderrs: Vec<Option<f64>>,
    /// Covariance of the unconstrained coordinates, when fully available.
    pub covariance: Option<DMatrix<f64>>,
    pub flags: Vec<String>,
}

fn hessian(f: &dyn Fn(&[f64]) -> f64, y: &[f64], steps: &[f64]) -> DMatrix<f64> {
    let k = y.len();
    let f0 = f(y);
    let mut h = DMatrix::zeros(k, k);
    let shifted = |pairs: &[(usize, f64)]| {
        let mut z = y.to_vec();
        for &(i, d) in pairs {
            z[i] += d;
        }
        f(&z)
    };
    for i in 0..k {
        let hi = steps[i];
        h[(i, i)] = (shifted(&[(i, hi)]) - 2.0 * f0 + shifted(&[(i, -hi)])) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let v = (shifted(&[(i, hi), (j, hj)]) - shifted(&[(i, hi), (j, -hj)])
                - shifted(&[(i, -hi), (j, hj)])
                + shifted(&[(i, -hi), (j, -hj)]))
                / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Standard errors from the observed information at a maximizer.
///
/// The Hessian of the log-likelihood is taken on the unconstrained scale by
/// central differences with step `1e-4 · max(|y|, 1)`, refined by one Richardson
/// step, then mapped back to natural parameters with the delta method.
pub fn observed_info_se<F>(objective: F, estimate: &[f64], transforms: &[Transform]) -> Result<StdErrors>
where
    F: Fn(&[f64]) -> f64,
{
    if estimate.len() != transforms.len() {
        return invalid_param("estimate and transform lengths differ");
    }
    let k = estimate.len();
    let y: Vec<f64> = estimate
        .iter()
        .zip(transforms)
        .map(|(&x, t)| t.to_unconstrained(x))
        .collect::<Result<_>>()?;
    let f = |z: &[f64]| {
        let x: Vec<f64> = z.iter().zip(transforms).map(|(&v, t)| t.to_natural(v)).collect();
        objective(&x)
    };
    let steps: Vec<f64> = y.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
    let half: Vec<f64> = steps.iter().map(|s| s / 2.0).collect();
    let h1 = hessian(&f, &y, &steps);
    let h2 = hessian(&f, &y, &half);
    let hess = (h2 * 4.0 - h1) / 3.0;
    let info = -hess;

    let mut flags = Vec::new();
    let mut good: Vec<bool> = vec![true; k];
    if info.iter().any(|v| !v.is_finite()) {
        flags.push("observed information is not finite".into());
        return Ok(StdErrors { stderrs: vec![None; k], covariance: None, flags });
    }
    let eig = SymmetricEigen::new(info.clone());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam <= 1e-10 * scale.max(1e-300) {
            let v = eig.eigenvectors.column(idx);
            for i in 0..k {
                if v[i].abs() > 0.1 {
                    good[i] = false;
                }
            }
        }
    }
    for (i, ok) in good.iter().enumerate() {
        if !ok {
            flags.push(format!("parameter {i}: observed information not positive definite"));
        }
    }
    let keep: Vec<usize> = (0..k).filter(|&i| good[i]).collect();
    let mut stderrs = vec![None; k];
    let mut covariance = None;
    if !keep.is_empty() {
        let sub = DMatrix::from_fn(keep.len(), keep.len(), |a, b| info[(keep[a], keep[b])]);
        if let Some(ch) = sub.cholesky() {
            let cov = ch.inverse();
            for (a, &i) in keep.iter().enumerate() {
                let var = cov[(a, a)];
                if var.is_finite() && var > 0.0 {
                    stderrs[i] = Some(var.sqrt() * transforms[i].derivative(y[i]).abs());
                }
            }
            if keep.len() == k {
                covariance = Some(cov);
            }
        } else {
            flags.push("information matrix could not be factorized".into());
        }
    }
    Ok(StdErrors { stderrs, covariance, flags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn gaussian_mean_standard_error() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 500;
        let sigma = 2.0;
        let xs: Vec<f64> = (0..n).map(|_| Normal::new(1.0, sigma).unwrap().sample(&mut rng)).collect();
        let ll = |p: &[f64]| -xs.iter().map(|x| (x - p[0]).powi(2)).sum::<f64>() / (2.0 * sigma * sigma);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = observed_info_se(ll, &[mean], &[Transform::Identity]).unwrap();
        let want = sigma / (n as f64).sqrt();
        assert!((se.stderrs[0].unwrap() / want - 1.0).abs() < 0.05);
    }

    #[test]
    fn flat_direction_is_flagged() {
        let ll = |p: &[f64]| -(p[0] - 1.0).powi(2);
        let se = observed_info_se(ll, &[1.0, 3.0], &[Transform::Identity, Transform::Identity]).unwrap();
        assert!(se.stderrs[0].is_some());
        assert!(se.stderrs[1].is_none());
        assert!(!se.flags.is_empty());
    }

    #[test]
    fn delta_method_on_log_scale() {
        // ℓ(θ) = -(θ - 2)² / (2·0.01), SE of θ is 0.1 whichever scale is optimized
        let ll = |p: &[f64]| -(p[0] - 2.0).powi(2) / 0.02;
        let se = observed_info_se(ll, &[2.0], &[Transform::Log]).unwrap();
        assert!((se.stderrs[0].unwrap() - 0.1).abs() < 1e-6);
    }
}
