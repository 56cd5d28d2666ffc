//! Least squares on absorbed columns via Householder QR.

use nalgebra::DMatrix;

use super::se;
use crate::domain::{Coefficient, Regressor, SeMode};
use crate::error::{Error, Result};

/// Columns whose absorbed norm falls to this fraction of their
/// pre-absorption norm are dropped and reported as `0 (0)`.
pub const DROP_TOL: f64 = 1e-12;

/// Relative residual norm under which a column is treated as a linear
/// combination of earlier ones.
pub const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct OlsOptions<'a> {
    pub dof_absorbed: usize,
    pub se_mode: SeMode,
    pub clusters: Option<&'a [u32]>,
    /// Column norms before absorption, for the drop rule. `None` drops only
    /// exactly-zero columns.
    pub pre_norms: Option<&'a [f64]>,
}

impl Default for OlsOptions<'_> {
    fn default() -> Self {
        OlsOptions {
            dof_absorbed: 0,
            se_mode: SeMode::Classical,
            clusters: None,
            pre_norms: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    /// One entry per input column, dropped columns included.
    pub coefficients: Vec<Coefficient>,
    /// Indices of the columns that entered the solve.
    pub kept: Vec<usize>,
    /// Covariance over `kept`, in that order.
    pub covariance: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub ssr: f64,
    /// Σy² of the supplied (already centred) dependent.
    pub tss: f64,
    /// `1 − SSR/TSS`, 0 when TSS is 0.
    pub r_squared: f64,
    pub dof: usize,
}

fn norm(c: &[f64]) -> f64 {
    c.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Greedy modified Gram-Schmidt: the first column (in input order) that is
/// a combination of those before it is reported.
fn collinear_columns(cols: &[&[f64]]) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut bad = Vec::new();
    for (j, c) in cols.iter().enumerate() {
        let scale = norm(c);
        let mut v = c.to_vec();
        for q in &basis {
            let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(x, q)| *x -= d * q);
        }
        let r = norm(&v);
        if r <= COLLINEAR_TOL * scale {
            bad.push(j);
        } else {
            v.iter_mut().for_each(|x| *x /= r);
            basis.push(v);
        }
    }
    bad
}

/// Regress `y` on the columns of `x` (no intercept; inputs are already
/// absorbed). Residual degrees of freedom are `n − k − dof_absorbed` with
/// `k` the number of kept columns.
pub fn ols_fit(names: &[Regressor], x: &[Vec<f64>], y: &[f64], opts: &OlsOptions) -> Result<OlsFit> {
    let n = y.len();
    if names.len() != x.len() || x.iter().any(|c| c.len() != n) {
        return Err(Error::Argument("design columns and names/rows disagree".into()));
    }
    let kept: Vec<usize> = (0..x.len())
        .filter(|&j| {
            let post = norm(&x[j]);
            let pre = opts.pre_norms.map_or(0.0, |p| p[j]);
            post > DROP_TOL * pre && post > 0.0
        })
        .collect();
    let cols: Vec<&[f64]> = kept.iter().map(|&j| x[j].as_slice()).collect();
    let bad = collinear_columns(&cols);
    if !bad.is_empty() {
        return Err(Error::RankDeficient {
            columns: bad.iter().map(|&b| names[kept[b]].as_str().to_string()).collect(),
        });
    }
    let k = kept.len();
    let dof = n
        .checked_sub(k + opts.dof_absorbed)
        .filter(|&d| d > 0)
        .ok_or_else(|| {
            Error::Estimation(format!(
                "{n} observations cannot identify {k} slopes plus {} absorbed effects",
                opts.dof_absorbed
            ))
        })?;

    let tss: f64 = y.iter().map(|v| v * v).sum();
    let (beta, xtx_inv, residuals) = if k == 0 {
        (Vec::new(), DMatrix::zeros(0, 0), y.to_vec())
    } else {
        let xm = DMatrix::from_fn(n, k, |i, j| cols[j][i]);
        let qr = xm.qr();
        let r = qr.r();
        let q = qr.q();
        let qty = q.tr_mul(&nalgebra::DVector::from_column_slice(y));
        let beta = r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| Error::Estimation("singular triangular factor".into()))?;
        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .ok_or_else(|| Error::Estimation("singular triangular factor".into()))?;
        let xtx_inv = &r_inv * r_inv.transpose();
        let mut resid = y.to_vec();
        for (j, c) in cols.iter().enumerate() {
            let b = beta[j];
            resid.iter_mut().zip(c.iter()).for_each(|(e, x)| *e -= b * x);
        }
        (beta.iter().copied().collect::<Vec<_>>(), xtx_inv, resid)
    };
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let covariance = if k == 0 {
        DMatrix::zeros(0, 0)
    } else {
        se::covariance(&cols, &residuals, &xtx_inv, opts.se_mode, opts.clusters, dof)?
    };
    let df = se::inference_df(opts.se_mode, opts.clusters, dof);
    let mut coefficients: Vec<Coefficient> = names
        .iter()
        .map(|&regressor| Coefficient {
            regressor,
            estimate: 0.0,
            std_error: 0.0,
            t_stat: None,
            p_value: None,
            dropped: true,
        })
        .collect();
    for (slot, &j) in kept.iter().enumerate() {
        let se_j = covariance[(slot, slot)].max(0.0).sqrt();
        let t = (se_j > 0.0).then(|| beta[slot] / se_j);
        let c = &mut coefficients[j];
        c.estimate = beta[slot];
        c.std_error = se_j;
        c.t_stat = t;
        c.p_value = t.and_then(|t| se::two_sided_p(t, df));
        c.dropped = false;
    }
    let r_squared = if tss > 0.0 { (1.0 - ssr / tss).clamp(0.0, 1.0) } else { 0.0 };
    Ok(OlsFit {
        coefficients,
        kept,
        covariance,
        residuals,
        ssr,
        tss,
        r_squared,
        dof,
    })
}
