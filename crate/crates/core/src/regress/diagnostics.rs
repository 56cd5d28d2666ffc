//! Residual diagnostics: per-entity Durbin–Watson and Pearson correlation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Durbin–Watson statistic of one time-ordered residual series, or `None`
/// when it has fewer than 2 values or zero energy.
pub fn durbin_watson_series(e: &[f64]) -> Option<f64> {
    if e.len() < 2 {
        return None;
    }
    let num: f64 = e.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let den: f64 = e.iter().map(|v| v * v).sum();
    (den > 0.0).then(|| num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurbinWatson {
    pub per_entity: BTreeMap<u32, f64>,
    /// Entities skipped for having fewer than 2 residuals or all-zero ones.
    pub skipped: Vec<u32>,
    /// Unweighted mean of the per-entity statistics.
    pub mean: f64,
    /// Ratio of the summed numerators to the summed denominators.
    pub pooled: f64,
}

/// Per-entity Durbin–Watson. Residuals are ordered by `time` within each
/// entity.
pub fn durbin_watson(residuals: &[f64], entity: &[u32], time: &[i64]) -> Result<DurbinWatson> {
    if residuals.len() != entity.len() || residuals.len() != time.len() {
        return Err(Error::Argument("residual, entity and time lengths differ".into()));
    }
    let mut groups: BTreeMap<u32, Vec<(i64, f64)>> = BTreeMap::new();
    for ((&e, &g), &t) in residuals.iter().zip(entity).zip(time) {
        groups.entry(g).or_default().push((t, e));
    }
    let mut per_entity = BTreeMap::new();
    let mut skipped = Vec::new();
    let (mut num, mut den) = (0.0, 0.0);
    for (g, mut series) in groups {
        series.sort_by_key(|&(t, _)| t);
        let e: Vec<f64> = series.into_iter().map(|(_, e)| e).collect();
        match durbin_watson_series(&e) {
            Some(dw) => {
                num += e.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>();
                den += e.iter().map(|v| v * v).sum::<f64>();
                per_entity.insert(g, dw);
            }
            None => skipped.push(g),
        }
    }
    if per_entity.is_empty() {
        return Err(Error::Argument("no entity has at least 2 nonzero residuals".into()));
    }
    let mean = per_entity.values().sum::<f64>() / per_entity.len() as f64;
    Ok(DurbinWatson {
        per_entity,
        skipped,
        mean,
        pooled: num / den,
    })
}

/// Pearson product-moment correlation.
pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Argument("correlation needs two equal-length series of length >= 2".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("a series has zero variance".into()));
    }
    // sqrt(s·s) = |s| exactly, so y = ±x yields exactly ±1.
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dw_examples() {
        assert_eq!(durbin_watson_series(&[1.0, 1.0, 1.0]), Some(0.0));
        assert_eq!(durbin_watson_series(&[1.0, -1.0, 1.0, -1.0]), Some(3.0));
        assert_eq!(durbin_watson_series(&[1.0]), None);
    }

    #[test]
    fn dw_groups_and_orders() {
        // entity 0 given out of time order; entity 1 has a single residual
        let e = [-1.0, 1.0, 5.0, 1.0, -1.0];
        let g = [0, 0, 1, 0, 0];
        let t = [1, 0, 0, 2, 3];
        let dw = durbin_watson(&e, &g, &t).unwrap();
        assert_eq!(dw.per_entity[&0], 3.0);
        assert_eq!(dw.skipped, vec![1]);
        assert_eq!(dw.mean, 3.0);
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 10.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson_corr(&x, &x).unwrap(), 1.0);
        assert_eq!(pearson_corr(&x, &neg).unwrap(), -1.0);
        // hand: sxy = 1, sxx = syy = 2
        let a = [1.0, 2.0, 3.0];
        let b = [1.0, 3.0, 2.0];
        assert_relative_eq!(pearson_corr(&a, &b).unwrap(), 0.5, max_relative = 1e-15);
        assert!(matches!(pearson_corr(&a, &[2.0, 2.0, 2.0]), Err(Error::UndefinedCorrelation(_))));
    }
}
