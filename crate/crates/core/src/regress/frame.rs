//! Estimation frames: the rows, raw variables and group labels a fit needs,
//! independent of whether they came from the daily panel or from hourly
//! plant data.

use std::collections::BTreeMap;

use chrono::Datelike;

use crate::domain::{DailyPanelRow, Dependent, FeTerm, PanelDataset, Regressor, RegressionSpec, ZeroRowPolicy};
use crate::error::{Error, Result};

/// `ln(v + delta)`, defined only for `v + delta > 0`.
pub fn log_transform(v: f64, delta: f64) -> Result<f64> {
    let arg = v + delta;
    if !(arg > 0.0) || !arg.is_finite() {
        return Err(Error::LogDomain {
            variable: String::new(),
            value: v,
            delta,
        });
    }
    Ok(arg.ln())
}

/// Untransformed estimation data.
#[derive(Debug, Clone, Default)]
pub struct ModelFrame {
    pub dependent: Dependent,
    pub y: Vec<f64>,
    pub x: Vec<(Regressor, Vec<f64>)>,
    /// Dense entity index per row; labels in `entity_labels`.
    pub entity: Vec<u32>,
    pub entity_labels: Vec<String>,
    /// Calendar month 1..=12.
    pub month: Vec<u32>,
    pub year: Vec<i32>,
    /// Months since year 0, for month-of-sample effects.
    pub month_of_sample: Vec<i32>,
    /// Ordering key within an entity (days or hours since epoch).
    pub time: Vec<i64>,
}

impl ModelFrame {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn column(&self, reg: Regressor) -> Option<&[f64]> {
        self.x.iter().find(|(r, _)| *r == reg).map(|(_, c)| c.as_slice())
    }

    /// Build a frame from daily panel rows. Rows with a missing dependent are
    /// skipped; under [`ZeroRowPolicy::Drop`] so are zero-generation rows.
    pub fn from_panel(panel: &PanelDataset, spec: &RegressionSpec) -> ModelFrame {
        let keep = |r: &&DailyPanelRow| {
            r.dependent(spec.dependent).is_some()
                && !(spec.zero_rows == ZeroRowPolicy::Drop && r.y_gen == 0.0)
        };
        let rows: Vec<&DailyPanelRow> = panel.rows.iter().filter(keep).collect();
        let mut labels: BTreeMap<&str, u32> = BTreeMap::new();
        for r in &rows {
            labels.entry(r.plant_id.as_str()).or_insert(0);
        }
        for (i, v) in labels.values_mut().enumerate() {
            *v = i as u32;
        }
        let mut frame = ModelFrame {
            dependent: spec.dependent,
            entity_labels: labels.keys().map(|s| s.to_string()).collect(),
            ..ModelFrame::default()
        };
        frame.x = spec
            .regressors
            .iter()
            .map(|&reg| (reg, rows.iter().map(|r| r.regressor(reg)).collect()))
            .collect();
        for r in rows {
            frame.y.push(r.dependent(spec.dependent).expect("filtered"));
            frame.entity.push(labels[r.plant_id.as_str()]);
            frame.month.push(r.month_label);
            frame.year.push(r.year_label);
            frame.month_of_sample.push(r.month_of_sample());
            frame.time.push(r.date.num_days_from_ce() as i64);
        }
        frame
    }
}

/// Log-transformed frame ready for absorption.
#[derive(Debug, Clone)]
pub struct TransformedFrame {
    pub y: Vec<f64>,
    pub x: Vec<(Regressor, Vec<f64>)>,
    /// Δ actually applied to the dependent and to each regressor.
    pub dependent_delta: f64,
    pub regressor_delta: Vec<(Regressor, f64)>,
}

fn resolve_delta(explicit: Option<f64>, auto: Option<f64>, values: &[f64]) -> f64 {
    match explicit {
        Some(d) => d,
        None if values.iter().any(|&v| v == 0.0) => auto.unwrap_or(0.0),
        None => 0.0,
    }
}

fn transform_column(name: &str, values: &[f64], delta: f64) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&v| {
            log_transform(v, delta).map_err(|_| Error::LogDomain {
                variable: name.to_string(),
                value: v,
                delta,
            })
        })
        .collect()
}

/// Apply the configured Δ offsets and take logs of every column.
pub fn transform(frame: &ModelFrame, spec: &RegressionSpec) -> Result<TransformedFrame> {
    let dependent_delta = resolve_delta(spec.delta.dependent, spec.delta.auto, &frame.y);
    let y = transform_column(spec.dependent.as_str(), &frame.y, dependent_delta)?;
    let mut x = Vec::with_capacity(frame.x.len());
    let mut regressor_delta = Vec::with_capacity(frame.x.len());
    for (reg, col) in &frame.x {
        let d = resolve_delta(spec.delta.regressors.get(reg).copied(), spec.delta.auto, col);
        x.push((*reg, transform_column(reg.as_str(), col, d)?));
        regressor_delta.push((*reg, d));
    }
    Ok(TransformedFrame {
        y,
        x,
        dependent_delta,
        regressor_delta,
    })
}

/// Dense group labelling of every row for one fixed-effect term.
#[derive(Debug, Clone, PartialEq)]
pub struct FeGrouping {
    pub label: String,
    pub ids: Vec<u32>,
    pub n_groups: usize,
}

impl FeGrouping {
    pub fn from_keys<K: Ord + Clone>(label: impl Into<String>, keys: &[K]) -> FeGrouping {
        let mut map: BTreeMap<K, u32> = BTreeMap::new();
        for k in keys {
            map.entry(k.clone()).or_insert(0);
        }
        for (i, v) in map.values_mut().enumerate() {
            *v = i as u32;
        }
        FeGrouping {
            label: label.into(),
            ids: keys.iter().map(|k| map[k]).collect(),
            n_groups: map.len(),
        }
    }

    /// One group holding every row: the intercept.
    pub fn intercept(n: usize) -> FeGrouping {
        FeGrouping {
            label: "intercept".into(),
            ids: vec![0; n],
            n_groups: usize::from(n > 0),
        }
    }

    /// Every group of `other` lies inside a single group of `self`.
    pub fn is_coarsening_of(&self, other: &FeGrouping) -> bool {
        let mut map: Vec<Option<u32>> = vec![None; other.n_groups];
        for (&mine, &theirs) in self.ids.iter().zip(&other.ids) {
            match map[theirs as usize] {
                None => map[theirs as usize] = Some(mine),
                Some(m) if m != mine => return false,
                _ => {}
            }
        }
        true
    }
}

/// Group labellings for the requested fixed-effect terms. An empty term set
/// yields the intercept alone.
pub fn fe_groupings(frame: &ModelFrame, spec: &RegressionSpec) -> Vec<FeGrouping> {
    let month_key: Vec<i32> = if spec.month_of_sample {
        frame.month_of_sample.clone()
    } else {
        frame.month.iter().map(|&m| m as i32).collect()
    };
    let mut out = Vec::new();
    for term in &spec.fe_terms {
        let g = match term {
            FeTerm::Entity => FeGrouping::from_keys("entity", &frame.entity),
            FeTerm::Month => FeGrouping::from_keys("month", &month_key),
            FeTerm::Year => FeGrouping::from_keys("year", &frame.year),
            FeTerm::EntityMonth => {
                let keys: Vec<(u32, i32)> =
                    frame.entity.iter().copied().zip(month_key.iter().copied()).collect();
                FeGrouping::from_keys("entity_month", &keys)
            }
        };
        out.push(g);
    }
    if out.is_empty() {
        out.push(FeGrouping::intercept(frame.len()));
    }
    out
}
