//! The fixed-effects panel estimator.
//!
//! Pipeline: row filtering ([`ModelFrame`]), Δ-offset log transforms,
//! absorption of the fixed effects by alternating projections, QR least
//! squares on the absorbed columns, then standard errors.

pub mod absorb;
pub mod diagnostics;
pub mod frame;
pub mod ols;
pub mod se;
pub mod sweep;
pub mod table;

pub use absorb::{absorb_fixed_effects, AbsorbPlan};
pub use diagnostics::{durbin_watson, durbin_watson_series, pearson_corr, DurbinWatson};
pub use frame::{fe_groupings, log_transform, transform, FeGrouping, ModelFrame, TransformedFrame};
pub use ols::{ols_fit, OlsFit, OlsOptions};
pub use se::robust_se;
pub use sweep::{delta_sweep, log_spaced, DeltaGrid, DeltaSweepRow, SweepConfig};
pub use table::{significance_stars, table1_csv, table1_json, format_cell};

use crate::domain::{FitResult, PanelDataset, RegressionSpec, SeMode};
use crate::error::{Error, Result};

fn sq_norm(c: &[f64]) -> f64 {
    c.iter().map(|v| v * v).sum()
}

/// Fit `spec` on an already filtered frame.
pub fn fit_frame(frame: &ModelFrame, spec: &RegressionSpec) -> Result<FitResult> {
    spec.validate()?;
    if frame.is_empty() {
        return Err(Error::Argument(format!(
            "no rows with a `{}` value survive filtering",
            spec.dependent
        )));
    }
    let t = transform(frame, spec)?;
    let plan = AbsorbPlan::new(fe_groupings(frame, spec), spec.absorb_tol, spec.max_sweeps)?;
    let dof_absorbed = plan.dof_absorbed();

    let n = t.y.len() as f64;
    let mean_y = t.y.iter().sum::<f64>() / n;
    let tss_total: f64 = t.y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let pre_norms: Vec<f64> = t.x.iter().map(|(_, c)| sq_norm(c).sqrt()).collect();

    let names: Vec<_> = t.x.iter().map(|(r, _)| *r).collect();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(names.len() + 1);
    columns.push(t.y);
    columns.extend(t.x.into_iter().map(|(_, c)| c));
    let sweeps = absorb_fixed_effects(&mut columns, &plan)?;
    let y = columns.remove(0);

    let clusters = (spec.se_mode == SeMode::ClusterByEntity).then_some(frame.entity.as_slice());
    let opts = OlsOptions {
        dof_absorbed,
        se_mode: spec.se_mode,
        clusters,
        pre_norms: Some(&pre_norms),
    };
    let fit = ols_fit(&names, &columns, &y, &opts)?;
    let r_squared = if tss_total > 0.0 {
        (1.0 - fit.ssr / tss_total).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(FitResult {
        dependent: spec.dependent,
        coefficients: fit.coefficients,
        r_squared,
        r_squared_within: fit.r_squared,
        n_obs: frame.len(),
        dof: fit.dof,
        dof_absorbed,
        se_mode: spec.se_mode,
        sweeps,
        residuals: fit.residuals,
        residual_entity: frame.entity.clone(),
        residual_time: frame.time.clone(),
        entity_labels: frame.entity_labels.clone(),
    })
}

/// Full pipeline on a daily panel.
pub fn fit_panel(panel: &PanelDataset, spec: &RegressionSpec) -> Result<FitResult> {
    spec.validate()?;
    fit_frame(&ModelFrame::from_panel(panel, spec), spec)
}
