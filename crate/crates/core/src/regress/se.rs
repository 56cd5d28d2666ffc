//! Coefficient covariance estimators and t-based inference.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::domain::SeMode;
use crate::error::{Error, Result};

fn cross(x: &[&[f64]], weights: impl Fn(usize) -> f64) -> DMatrix<f64> {
    let k = x.len();
    let n = x.first().map_or(0, |c| c.len());
    let w: Vec<f64> = (0..n).map(weights).collect();
    let mut m = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..=a {
            let s: f64 = x[a].iter().zip(x[b]).zip(&w).map(|((p, q), w)| p * q * w).sum();
            m[(a, b)] = s;
            m[(b, a)] = s;
        }
    }
    m
}

/// Number of distinct cluster ids.
pub fn cluster_count(clusters: &[u32]) -> usize {
    let max = clusters.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut seen = vec![false; max];
    clusters.iter().for_each(|&c| seen[c as usize] = true);
    seen.into_iter().filter(|&s| s).count()
}

/// Covariance of the slope estimates given `(XᵀX)⁻¹`.
///
/// `dof` is the residual degrees of freedom `n − k − dof_absorbed`. hc1
/// scales the sandwich by `n / dof`; cluster mode uses
/// `G/(G−1) · (n−1)/(n−k)`.
pub fn covariance(
    x: &[&[f64]],
    residuals: &[f64],
    xtx_inv: &DMatrix<f64>,
    mode: SeMode,
    clusters: Option<&[u32]>,
    dof: usize,
) -> Result<DMatrix<f64>> {
    let n = residuals.len();
    let k = x.len();
    if x.iter().any(|c| c.len() != n) {
        return Err(Error::Argument("residual length does not match design rows".into()));
    }
    if dof == 0 {
        return Err(Error::Estimation("no residual degrees of freedom".into()));
    }
    match mode {
        SeMode::Classical => {
            let ssr: f64 = residuals.iter().map(|e| e * e).sum();
            Ok(xtx_inv * (ssr / dof as f64))
        }
        SeMode::Hc1Robust => {
            let meat = cross(x, |i| residuals[i] * residuals[i]);
            Ok(xtx_inv * meat * xtx_inv * (n as f64 / dof as f64))
        }
        SeMode::ClusterByEntity => {
            let clusters = clusters
                .ok_or_else(|| Error::Argument("cluster standard errors need cluster ids".into()))?;
            if clusters.len() != n {
                return Err(Error::Argument("cluster ids do not match residual length".into()));
            }
            let g = cluster_count(clusters);
            if g < 2 {
                return Err(Error::Estimation(format!(
                    "cluster standard errors need at least 2 clusters, found {g}"
                )));
            }
            let slots = clusters.iter().copied().max().unwrap_or(0) as usize + 1;
            let mut scores = vec![DVector::<f64>::zeros(k); slots];
            for (i, &c) in clusters.iter().enumerate() {
                let s = &mut scores[c as usize];
                for a in 0..k {
                    s[a] += x[a][i] * residuals[i];
                }
            }
            let mut meat = DMatrix::zeros(k, k);
            for s in &scores {
                meat += s * s.transpose();
            }
            let scale = (g as f64 / (g - 1) as f64) * ((n - 1) as f64 / (n.saturating_sub(k)).max(1) as f64);
            Ok(xtx_inv * meat * xtx_inv * scale)
        }
    }
}

/// Standard errors for the columns of `x`, computing `(XᵀX)⁻¹` directly.
pub fn robust_se(
    x: &[Vec<f64>],
    residuals: &[f64],
    mode: SeMode,
    clusters: Option<&[u32]>,
    dof_absorbed: usize,
) -> Result<Vec<f64>> {
    let cols: Vec<&[f64]> = x.iter().map(|c| c.as_slice()).collect();
    let xtx = cross(&cols, |_| 1.0);
    let inv = xtx
        .cholesky()
        .ok_or_else(|| Error::Estimation("XᵀX is not positive definite".into()))?
        .inverse();
    let dof = residuals
        .len()
        .checked_sub(x.len() + dof_absorbed)
        .ok_or_else(|| Error::Estimation("fewer observations than parameters".into()))?;
    let cov = covariance(&cols, residuals, &inv, mode, clusters, dof)?;
    Ok((0..x.len()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect())
}

/// Degrees of freedom for t inference: `G − 1` under clustering.
pub fn inference_df(mode: SeMode, clusters: Option<&[u32]>, dof: usize) -> usize {
    match (mode, clusters) {
        (SeMode::ClusterByEntity, Some(c)) => cluster_count(c).saturating_sub(1),
        _ => dof,
    }
}

/// Two-sided p-value of a t statistic.
pub fn two_sided_p(t: f64, df: usize) -> Option<f64> {
    if df == 0 || !t.is_finite() {
        return None;
    }
    let dist = StudentsT::new(0.0, 1.0, df as f64).ok()?;
    Some((2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_residuals_give_zero_se() {
        let x = vec![vec![1.0, -1.0, 2.0, 0.5], vec![0.3, 0.1, -0.7, 0.2]];
        let e = vec![0.0; 4];
        for mode in [SeMode::Classical, SeMode::Hc1Robust] {
            assert_eq!(robust_se(&x, &e, mode, None, 0).unwrap(), vec![0.0, 0.0]);
        }
        let se = robust_se(&x, &e, SeMode::ClusterByEntity, Some(&[0, 0, 1, 1]), 0).unwrap();
        assert_eq!(se, vec![0.0, 0.0]);
    }

    #[test]
    fn single_cluster_is_an_error() {
        let x = vec![vec![1.0, 2.0, 3.0]];
        let r = robust_se(&x, &[0.1, -0.1, 0.2], SeMode::ClusterByEntity, Some(&[4, 4, 4]), 0);
        assert!(matches!(r, Err(Error::Estimation(_))));
    }

    #[test]
    fn classical_matches_hand_formula() {
        // one regressor: var = σ² / Σx², σ² = SSR / (n − 1)
        let x = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let e = [0.5, -0.5, 0.25, -0.25];
        let se = robust_se(&x, &e, SeMode::Classical, None, 0).unwrap();
        let want = ((0.625 / 3.0) / 30.0f64).sqrt();
        assert_relative_eq!(se[0], want, max_relative = 1e-14);
    }

    #[test]
    fn hc1_matches_hand_formula() {
        let x = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let e = [0.5, -0.5, 0.25, -0.25];
        let se = robust_se(&x, &e, SeMode::Hc1Robust, None, 0).unwrap();
        let meat: f64 = x[0].iter().zip(&e).map(|(x, e)| x * x * e * e).sum();
        let want = (meat / 900.0 * 4.0 / 3.0f64).sqrt();
        assert_relative_eq!(se[0], want, max_relative = 1e-14);
    }

    #[test]
    fn p_values() {
        assert_relative_eq!(two_sided_p(0.0, 10).unwrap(), 1.0);
        // t_{0.975, 10} = 2.228138851986
        assert_relative_eq!(two_sided_p(2.228138851986, 10).unwrap(), 0.05, max_relative = 1e-9);
        assert!(two_sided_p(1.0, 0).is_none());
    }
}
