//! Sensitivity of the slopes to the Δ offset, under both zero-row policies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_frame, ModelFrame};
use crate::domain::{DeltaSpec, PanelDataset, Regressor, RegressionSpec, ZeroRowPolicy};
use crate::error::{Error, Result};

/// How grid values map to offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "values")]
pub enum DeltaGrid {
    /// The same Δ on every targeted variable.
    Absolute(Vec<f64>),
    /// Δ = value × the variable's mean over the fitted rows.
    RelativeToMean(Vec<f64>),
}

impl DeltaGrid {
    pub fn values(&self) -> &[f64] {
        match self {
            DeltaGrid::Absolute(v) | DeltaGrid::RelativeToMean(v) => v,
        }
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub grid: DeltaGrid,
    /// Regressors that receive Δ. The dependent always does under
    /// [`ZeroRowPolicy::Offset`]; under `Drop` only if zeros remain.
    pub regressors: Vec<Regressor>,
    pub policies: Vec<ZeroRowPolicy>,
}

impl SweepConfig {
    /// Δ on every zero-prone regressor of `spec`, both policies.
    pub fn for_spec(spec: &RegressionSpec, grid: DeltaGrid) -> SweepConfig {
        use Regressor::*;
        let prone = [Solar, Wind, SolarRamp, WindRamp, PartnerSolar, PartnerWind, Hydro, Imports, Exports];
        SweepConfig {
            grid,
            regressors: spec.regressors.iter().copied().filter(|r| prone.contains(r)).collect(),
            policies: vec![ZeroRowPolicy::Offset, ZeroRowPolicy::Drop],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCoefficient {
    pub regressor: Regressor,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSweepRow {
    pub policy: ZeroRowPolicy,
    /// The grid value (absolute Δ or multiple of the mean).
    pub delta: f64,
    pub dependent_delta: Option<f64>,
    pub coefficients: Vec<SweepCoefficient>,
    pub r_squared: f64,
    pub r_squared_within: f64,
    pub n_obs: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn delta_for(frame: &ModelFrame, cfg: &SweepConfig, policy: ZeroRowPolicy, g: f64) -> DeltaSpec {
    let scale = |col: &[f64]| match cfg.grid {
        DeltaGrid::Absolute(_) => g,
        DeltaGrid::RelativeToMean(_) => g * mean(col),
    };
    let dep = scale(&frame.y);
    DeltaSpec {
        dependent: (policy == ZeroRowPolicy::Offset).then_some(dep),
        regressors: cfg
            .regressors
            .iter()
            .filter_map(|r| frame.column(*r).map(|c| (*r, scale(c))))
            .collect(),
        auto: Some(dep),
    }
}

/// One fit per (policy, grid value), in policy-major grid order.
pub fn delta_sweep(panel: &PanelDataset, spec: &RegressionSpec, cfg: &SweepConfig) -> Result<Vec<DeltaSweepRow>> {
    let grid = cfg.grid.values();
    if grid.is_empty() || grid.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::Argument("Δ grid must be nonempty and strictly positive".into()));
    }
    let frames: Vec<(ZeroRowPolicy, ModelFrame)> = cfg
        .policies
        .iter()
        .map(|&p| (p, ModelFrame::from_panel(panel, &spec.clone().with_zero_rows(p))))
        .collect();
    let jobs: Vec<(usize, f64)> = (0..frames.len())
        .flat_map(|f| grid.iter().map(move |&g| (f, g)))
        .collect();
    jobs.par_iter()
        .map(|&(f, g)| {
            let (policy, frame) = &frames[f];
            let delta = delta_for(frame, cfg, *policy, g);
            let dependent_delta = delta.dependent;
            let spec = spec.clone().with_zero_rows(*policy).with_delta(delta);
            let fit = fit_frame(frame, &spec)?;
            Ok(DeltaSweepRow {
                policy: *policy,
                delta: g,
                dependent_delta,
                coefficients: fit
                    .coefficients
                    .iter()
                    .map(|c| SweepCoefficient {
                        regressor: c.regressor,
                        estimate: c.estimate,
                        std_error: c.std_error,
                    })
                    .collect(),
                r_squared: fit.r_squared,
                r_squared_within: fit.r_squared_within,
                n_obs: fit.n_obs,
            })
        })
        .collect()
}
