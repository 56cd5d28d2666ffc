//! Least squares on the explicit dummy design matrix.
//!
//! Every fixed-effect level gets its own indicator column next to an
//! intercept. The column space of that dummy matrix is built explicitly, so
//! redundant indicators cost nothing, and the regressors are projected off
//! it directly. Nothing here goes through absorption.

use gridshift_core::domain::{Coefficient, FeTerm, FitResult, PanelDataset, Regressor, RegressionSpec, SeMode};
use gridshift_core::regress::se::{inference_df, two_sided_p};
use gridshift_core::regress::{transform, ModelFrame};
use gridshift_core::Error;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

use crate::{Result, SimError};

pub const MAX_DUMMIES: usize = 5000;
const DROP_TOL: f64 = 1e-12;
const COLLINEAR_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-9;

/// Indicator columns for one grouping key, in sorted key order.
fn dummies<K: Ord + Clone>(keys: &[K]) -> Vec<Vec<f64>> {
    let levels: BTreeMap<K, usize> = {
        let mut m = BTreeMap::new();
        for k in keys {
            let len = m.len();
            m.entry(k.clone()).or_insert(len);
        }
        m
    };
    let mut cols = vec![vec![0.0; keys.len()]; levels.len()];
    for (i, k) in keys.iter().enumerate() {
        cols[levels[k]][i] = 1.0;
    }
    cols
}

fn matrix(cols: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Orthonormal basis of the column space of a 0/1 dummy matrix. `DᵀD`
/// holds exact integer counts, so its eigenvectors with nonzero eigenvalue
/// pick out the identified directions; `D` times those has full column
/// rank and a thin QR orthonormalizes it.
fn column_basis(d: DMatrix<f64>) -> DMatrix<f64> {
    let eig = (d.transpose() * &d).symmetric_eigen();
    let cut = RANK_TOL * eig.eigenvalues.max();
    let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > cut).collect();
    (d * eig.eigenvectors.select_columns(&keep)).qr().q()
}

fn residualize(basis: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    v - basis * (basis.transpose() * v)
}

/// Fit `spec` on `panel` with an explicit dummy matrix. Refuses designs
/// with more than [`MAX_DUMMIES`] indicator columns.
pub fn brute_force_fit(panel: &PanelDataset, spec: &RegressionSpec) -> Result<FitResult> {
    spec.validate()?;
    let frame = ModelFrame::from_panel(panel, spec);
    if frame.is_empty() {
        return Err(Error::Argument("no rows survive filtering".into()).into());
    }
    let n = frame.len();
    let t = transform(&frame, spec)?;

    let month_key: Vec<i32> = if spec.month_of_sample {
        frame.month_of_sample.clone()
    } else {
        frame.month.iter().map(|&m| m as i32).collect()
    };
    let mut dummy_cols = vec![vec![1.0; n]];
    for term in &spec.fe_terms {
        match term {
            FeTerm::Entity => dummy_cols.extend(dummies(&frame.entity)),
            FeTerm::Month => dummy_cols.extend(dummies(&month_key)),
            FeTerm::Year => dummy_cols.extend(dummies(&frame.year)),
            FeTerm::EntityMonth => {
                let keys: Vec<(u32, i32)> = frame.entity.iter().copied().zip(month_key.iter().copied()).collect();
                dummy_cols.extend(dummies(&keys));
            }
        }
    }
    if dummy_cols.len() - 1 > MAX_DUMMIES {
        return Err(SimError::Argument(format!(
            "{} dummy columns exceed the cap of {MAX_DUMMIES}",
            dummy_cols.len() - 1
        )));
    }
    let basis = column_basis(matrix(&dummy_cols, n));
    let dummy_rank = basis.ncols();

    // Drop regressors the fixed effects explain; then check the rest for
    // collinearity among themselves.
    let y = DVector::from_column_slice(&t.y);
    let mut kept: Vec<(Regressor, DVector<f64>, DVector<f64>)> = Vec::new();
    let mut dropped: Vec<Regressor> = Vec::new();
    for (reg, col) in &t.x {
        let v = DVector::from_column_slice(col);
        let r = residualize(&basis, &v);
        if r.norm() <= DROP_TOL * v.norm() || v.norm() == 0.0 {
            dropped.push(*reg);
        } else {
            kept.push((*reg, v, r));
        }
    }
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    for (reg, _, r) in &kept {
        let mut q = r.clone();
        for b in &ortho {
            q -= b * b.dot(&q);
        }
        if q.norm() <= COLLINEAR_TOL * r.norm() {
            return Err(Error::RankDeficient {
                columns: vec![reg.as_str().to_string()],
            }
            .into());
        }
        ortho.push(q.normalize());
    }

    let k = kept.len();
    let dof = n as i64 - k as i64 - dummy_rank as i64;
    if dof <= 0 {
        return Err(Error::Estimation(format!("no residual degrees of freedom ({n} obs)")).into());
    }
    let dof = dof as usize;

    // Frisch–Waugh–Lovell: the slope block of the full dummy regression
    // equals least squares on the columns projected off the dummy space,
    // and so does the slope block of each sandwich.
    let rx = DMatrix::from_fn(n, k, |i, j| kept[j].2[i]);
    let ry = residualize(&basis, &y);
    let (beta, bread) = if k == 0 {
        (DVector::zeros(0), DMatrix::zeros(0, 0))
    } else {
        let svd = rx.clone().svd(true, true);
        let beta = svd.solve(&ry, 0.0).map_err(|e| Error::Estimation(e.to_string()))?;
        let v_t = svd.v_t.as_ref().expect("v was requested");
        let inv_sq = svd.singular_values.map(|s| 1.0 / (s * s));
        (beta, v_t.transpose() * DMatrix::from_diagonal(&inv_sq) * v_t)
    };
    let resid = &ry - &rx * &beta;
    let ssr = resid.norm_squared();

    let cov = match spec.se_mode {
        SeMode::Classical => &bread * (ssr / dof as f64),
        SeMode::Hc1Robust => {
            let mut meat = DMatrix::zeros(k, k);
            for i in 0..n {
                let row = rx.row(i).transpose();
                meat += &row * row.transpose() * resid[i].powi(2);
            }
            &bread * meat * &bread * (n as f64 / dof as f64)
        }
        SeMode::ClusterByEntity => {
            let mut scores: BTreeMap<u32, DVector<f64>> = BTreeMap::new();
            for i in 0..n {
                let s = scores.entry(frame.entity[i]).or_insert_with(|| DVector::zeros(k));
                *s += rx.row(i).transpose() * resid[i];
            }
            let g = scores.len();
            if g < 2 {
                return Err(Error::Estimation("cluster-robust errors need at least 2 clusters".into()).into());
            }
            let mut meat = DMatrix::zeros(k, k);
            for s in scores.values() {
                meat += s * s.transpose();
            }
            let c = g as f64 / (g as f64 - 1.0) * (n as f64 - 1.0) / (n as f64 - k as f64);
            &bread * meat * &bread * c
        }
    };

    let clusters = (spec.se_mode == SeMode::ClusterByEntity).then_some(frame.entity.as_slice());
    let df = inference_df(spec.se_mode, clusters, dof);
    let mut by_reg: BTreeMap<Regressor, Coefficient> = BTreeMap::new();
    for (j, (reg, _, _)) in kept.iter().enumerate() {
        let est = beta[j];
        let se = cov[(j, j)].max(0.0).sqrt();
        let t_stat = (se > 0.0).then(|| est / se);
        by_reg.insert(
            *reg,
            Coefficient {
                regressor: *reg,
                estimate: est,
                std_error: se,
                t_stat,
                p_value: t_stat.and_then(|t| two_sided_p(t, df)),
                dropped: false,
            },
        );
    }
    for reg in dropped {
        by_reg.insert(
            reg,
            Coefficient {
                regressor: reg,
                estimate: 0.0,
                std_error: 0.0,
                t_stat: None,
                p_value: None,
                dropped: true,
            },
        );
    }
    let coefficients = t.x.iter().map(|(r, _)| by_reg.remove(r).expect("every regressor classified")).collect();

    let mean_y = y.mean();
    let tss_total: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let tss_within = ry.norm_squared();
    let r2 = |tss: f64| if tss > 0.0 { (1.0 - ssr / tss).clamp(0.0, 1.0) } else { 0.0 };
    Ok(FitResult {
        dependent: spec.dependent,
        coefficients,
        r_squared: r2(tss_total),
        r_squared_within: r2(tss_within),
        n_obs: n,
        dof,
        dof_absorbed: dummy_rank,
        se_mode: spec.se_mode,
        sweeps: 0,
        residuals: resid.as_slice().to_vec(),
        residual_entity: frame.entity.clone(),
        residual_time: frame.time.clone(),
        entity_labels: frame.entity_labels.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use gridshift_core::domain::{DailyPanelRow, Dependent, ModelForm};
    use gridshift_core::regress::fit_panel;

    fn row(plant: &str, day: u32, gen: f64, demand: f64, wind: f64) -> DailyPanelRow {
        let date = chrono::NaiveDate::from_ymd_opt(2021, 1, day).unwrap();
        let mut r = DailyPanelRow {
            plant_id: plant.into(),
            ba_id: "X".into(),
            date,
            y_gen: gen,
            y_co2: Some(gen),
            y_so2: None,
            y_nox: None,
            y_ei_co2: None,
            y_ei_so2: None,
            y_ei_nox: None,
            demand,
            d_net_thermal: demand,
            solar: 1.0,
            wind,
            wind_ramp: 1.0,
            solar_ramp: 1.0,
            partner_wind: 1.0,
            partner_solar: 1.0,
            partner_demand: 1.0,
            hydro: 1.0,
            imports_pos: 1.0,
            exports_pos: 1.0,
            month_label: 1,
            year_label: 2021,
        };
        r.derive_intensities();
        r
    }

    fn spec(terms: &[FeTerm], regs: &[Regressor]) -> RegressionSpec {
        RegressionSpec::new(Dependent::Generation, ModelForm::CompactNetdemand)
            .with_regressors(regs.iter().copied())
            .with_fe_terms(terms.iter().copied())
            .with_se_mode(SeMode::Classical)
    }

    #[test]
    fn three_observation_hand_system() {
        // ln y = a + b ln w with points (0, 1), (ln 2, 2), (ln 4, 2.5):
        // b = Sxy / Sxx on the log scale.
        let ys = [1f64.exp(), 2f64.exp(), 2.5f64.exp()];
        let ws = [1.0, 2.0, 4.0];
        let panel = PanelDataset::new((0..3).map(|i| row("A", i as u32 + 1, ys[i], 5.0, ws[i])).collect());
        let fit = brute_force_fit(&panel, &spec(&[], &[Regressor::Wind])).unwrap();
        let lx: Vec<f64> = ws.iter().map(|w| w.ln()).collect();
        let ly = [1.0, 2.0, 2.5];
        let (mx, my) = (lx.iter().sum::<f64>() / 3.0, ly.iter().sum::<f64>() / 3.0);
        let sxy: f64 = (0..3).map(|i| (lx[i] - mx) * (ly[i] - my)).sum();
        let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
        assert!((fit.coefficients[0].estimate - sxy / sxx).abs() < 1e-12);
        assert_eq!(fit.dof, 1);
    }

    #[test]
    fn intercept_only_fits_mean() {
        let ys = [2.0, 4.0, 8.0];
        let panel = PanelDataset::new((0..3).map(|i| row("A", i as u32 + 1, ys[i], 5.0, 1.0)).collect());
        // wind is constant, so it is dropped and the fit is the mean
        let fit = brute_force_fit(&panel, &spec(&[FeTerm::Entity], &[Regressor::Wind])).unwrap();
        assert!(fit.coefficients[0].dropped);
        let mean = (2f64.ln() + 4f64.ln() + 8f64.ln()) / 3.0;
        assert!((fit.residuals[0] - (2f64.ln() - mean)).abs() < 1e-12);
    }

    #[test]
    fn collinear_pair_is_named_like_the_absorbed_path() {
        let panel = PanelDataset::new(
            (1..=6)
                .map(|d| row("A", d, d as f64 + 1.0, (d as f64).powi(2), d as f64))
                .collect(),
        );
        let s = spec(&[FeTerm::Entity], &[Regressor::NetThermalDemand, Regressor::Wind]);
        let a = brute_force_fit(&panel, &s).unwrap_err();
        let b = fit_panel(&panel, &s).unwrap_err();
        match (a, b) {
            (SimError::Core(Error::RankDeficient { columns: ca }), Error::RankDeficient { columns: cb }) => {
                assert_eq!(ca, cb)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cap_is_enforced() {
        let rows: Vec<_> = (0..5001).map(|i| row(&format!("P{i}"), 1, 1.0 + i as f64, 2.0, 3.0)).collect();
        let err = brute_force_fit(&PanelDataset::new(rows), &spec(&[FeTerm::Entity], &[Regressor::Wind]));
        assert!(matches!(err, Err(SimError::Argument(_))));
    }
}
