//! Per-plant regressions with month and year effects, and fleet summaries
//! by region × fuel.
//!
//! Hourly fits use the region's hourly series directly; the wind and solar
//! ramp regressors become the absolute change from the previous hour.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, Duration, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    Dependent, FeTerm, FitResult, Fuel, HourlyBaObs, HourlyPlantObs, ModelForm, PanelDataset, PlantMeta,
    Regressor, RegressionSpec, ZeroRowPolicy,
};
use crate::error::{Error, Result};
use crate::ingest::{net_thermal_demand, PartnerConfig};
use crate::regress::{fit_frame, ModelFrame};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Hourly,
    Daily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub regression: RegressionSpec,
    pub granularity: Granularity,
}

impl PlantSpec {
    /// Month + year effects, zero-generation hours dropped.
    pub fn new(dependent: Dependent) -> PlantSpec {
        let regression = RegressionSpec::new(dependent, ModelForm::CompactNetdemand)
            .with_fe_terms([FeTerm::Month, FeTerm::Year])
            .with_zero_rows(ZeroRowPolicy::Drop);
        PlantSpec {
            regression,
            granularity: Granularity::Hourly,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.regression.validate()?;
        if self
            .regression
            .fe_terms
            .iter()
            .any(|t| matches!(t, FeTerm::Entity | FeTerm::EntityMonth))
        {
            return Err(Error::Argument("plant-level fits take only month and year effects".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantFit {
    pub plant_id: String,
    pub ba_id: String,
    pub fuel: Fuel,
    pub nameplate_mw: f64,
    pub dependent: Dependent,
    pub fit: FitResult,
    pub hours_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSkip {
    pub plant_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlantBatch {
    /// Sorted by plant id.
    pub fits: Vec<PlantFit>,
    pub skipped: Vec<PlantSkip>,
}

/// Hourly BA series indexed by region and timestamp.
#[derive(Debug, Clone, Default)]
pub struct BaIndex {
    by_ba: BTreeMap<String, BTreeMap<DateTime<Utc>, HourlyBaObs>>,
}

impl BaIndex {
    pub fn new(obs: &[HourlyBaObs]) -> BaIndex {
        let mut by_ba: BTreeMap<String, BTreeMap<DateTime<Utc>, HourlyBaObs>> = BTreeMap::new();
        for o in obs {
            by_ba.entry(o.ba_id.clone()).or_default().insert(o.timestamp, o.clone());
        }
        BaIndex { by_ba }
    }

    pub fn get(&self, ba: &str, t: DateTime<Utc>) -> Option<&HourlyBaObs> {
        self.by_ba.get(ba)?.get(&t)
    }
}

fn partner_sums(index: &BaIndex, partners: &[String], t: DateTime<Utc>) -> Option<(f64, f64, f64)> {
    partners.iter().try_fold((0.0, 0.0, 0.0), |(w, s, d), p| {
        let o = index.get(p, t)?;
        Some((w + o.wind_mwh, s + o.solar_mwh, d + o.demand_mwh))
    })
}

fn hourly_regressor(
    reg: Regressor,
    now: &HourlyBaObs,
    prev: Option<&HourlyBaObs>,
    partner: Option<(f64, f64, f64)>,
) -> Option<f64> {
    Some(match reg {
        Regressor::NetThermalDemand => net_thermal_demand(now.demand_mwh, now.hydro_mwh, now.net_imports_mwh),
        Regressor::Demand => now.demand_mwh,
        Regressor::Solar => now.solar_mwh,
        Regressor::Wind => now.wind_mwh,
        Regressor::SolarRamp => (now.solar_mwh - prev?.solar_mwh).abs(),
        Regressor::WindRamp => (now.wind_mwh - prev?.wind_mwh).abs(),
        Regressor::PartnerWind => partner?.0,
        Regressor::PartnerSolar => partner?.1,
        Regressor::PartnerDemand => partner?.2,
        Regressor::PartnerTotal => {
            let (w, s, d) = partner?;
            w + s + d
        }
        Regressor::Hydro => now.hydro_mwh,
        Regressor::Imports => now.net_imports_mwh.max(0.0),
        Regressor::Exports => (-now.net_imports_mwh).max(0.0),
    })
}

fn hourly_dependent(o: &HourlyPlantObs, dep: Dependent) -> Option<f64> {
    let gen = o.gen_mwh?;
    match dep.pollutant() {
        None => Some(gen),
        Some(p) if dep.is_intensity() => (gen > 0.0).then(|| o.mass(p).map(|m| m / gen)).flatten(),
        Some(p) => o.mass(p),
    }
}

/// Hourly estimation frame for one plant. Hours lacking the dependent or
/// any required BA value are left out.
pub fn hourly_frame(
    plant: &PlantMeta,
    obs: &[&HourlyPlantObs],
    index: &BaIndex,
    partners: &[String],
    spec: &RegressionSpec,
) -> ModelFrame {
    let needs_partner = spec.regressors.iter().any(|r| {
        matches!(
            r,
            Regressor::PartnerWind | Regressor::PartnerSolar | Regressor::PartnerDemand | Regressor::PartnerTotal
        )
    });
    let mut frame = ModelFrame {
        dependent: spec.dependent,
        x: spec.regressors.iter().map(|&r| (r, Vec::new())).collect(),
        entity_labels: vec![plant.plant_id.clone()],
        ..ModelFrame::default()
    };
    let mut xs = vec![0.0; spec.regressors.len()];
    for o in obs {
        let Some(y) = hourly_dependent(o, spec.dependent) else { continue };
        if spec.zero_rows == ZeroRowPolicy::Drop && o.gen_mwh == Some(0.0) {
            continue;
        }
        let t = o.timestamp;
        let Some(now) = index.get(&plant.ba_id, t) else { continue };
        let prev = index.get(&plant.ba_id, t - Duration::hours(1));
        let partner = if needs_partner { partner_sums(index, partners, t) } else { None };
        let complete = spec.regressors.iter().zip(xs.iter_mut()).all(|(&r, slot)| {
            hourly_regressor(r, now, prev, partner).map(|v| *slot = v).is_some()
        });
        if !complete {
            continue;
        }
        for ((_, col), &v) in frame.x.iter_mut().zip(&xs) {
            col.push(v);
        }
        let d = t.date_naive();
        frame.y.push(y);
        frame.entity.push(0);
        frame.month.push(d.month());
        frame.year.push(d.year());
        frame.month_of_sample.push(d.year() * 12 + d.month0() as i32);
        frame.time.push(t.timestamp() / 3600);
    }
    frame
}

fn finish(plant: &PlantMeta, spec: &RegressionSpec, frame: &ModelFrame) -> Result<PlantFit> {
    let fit = fit_frame(frame, spec)?.without_residuals();
    Ok(PlantFit {
        plant_id: plant.plant_id.clone(),
        ba_id: plant.ba_id.clone(),
        fuel: plant.fuel,
        nameplate_mw: plant.nameplate_mw,
        dependent: spec.dependent,
        hours_used: fit.n_obs,
        fit,
    })
}

/// Hourly fit of one plant. `obs` holds only this plant's hours.
pub fn fit_plant(
    plant: &PlantMeta,
    obs: &[&HourlyPlantObs],
    index: &BaIndex,
    partners: &[String],
    spec: &PlantSpec,
) -> Result<PlantFit> {
    spec.validate()?;
    let frame = hourly_frame(plant, obs, index, partners, &spec.regression);
    finish(plant, &spec.regression, &frame)
}

/// Daily fit of one plant from its panel rows.
pub fn fit_plant_daily(plant: &PlantMeta, panel: &PanelDataset, spec: &PlantSpec) -> Result<PlantFit> {
    spec.validate()?;
    let frame = ModelFrame::from_panel(&panel.for_plant(&plant.plant_id), &spec.regression);
    finish(plant, &spec.regression, &frame)
}

fn collect(plants: &[PlantMeta], run: impl Fn(&PlantMeta) -> Result<PlantFit> + Sync) -> PlantBatch {
    let mut sorted: Vec<&PlantMeta> = plants.iter().collect();
    sorted.sort_by(|a, b| a.plant_id.cmp(&b.plant_id));
    let results: Vec<(String, Result<PlantFit>)> =
        sorted.par_iter().map(|p| (p.plant_id.clone(), run(p))).collect();
    let mut batch = PlantBatch::default();
    for (plant_id, r) in results {
        match r {
            Ok(f) => batch.fits.push(f),
            Err(e) => batch.skipped.push(PlantSkip {
                plant_id,
                reason: e.to_string(),
            }),
        }
    }
    batch
}

/// Fit every plant in parallel; failures become skip notices.
pub fn fit_all_plants(
    plants: &[PlantMeta],
    obs: &[HourlyPlantObs],
    ba: &[HourlyBaObs],
    partners: &PartnerConfig,
    spec: &PlantSpec,
) -> Result<PlantBatch> {
    spec.validate()?;
    let index = BaIndex::new(ba);
    let mut by_plant: BTreeMap<&str, Vec<&HourlyPlantObs>> = BTreeMap::new();
    for o in obs {
        by_plant.entry(o.plant_id.as_str()).or_default().push(o);
    }
    for v in by_plant.values_mut() {
        v.sort_by_key(|o| o.timestamp);
    }
    let empty = Vec::new();
    Ok(collect(plants, |p| {
        let hours = by_plant.get(p.plant_id.as_str()).unwrap_or(&empty);
        fit_plant(p, hours, &index, partners.of(&p.ba_id), spec)
    }))
}

/// Daily-granularity counterpart of [`fit_all_plants`].
pub fn fit_all_plants_daily(plants: &[PlantMeta], panel: &PanelDataset, spec: &PlantSpec) -> Result<PlantBatch> {
    spec.validate()?;
    Ok(collect(plants, |p| fit_plant_daily(p, panel, spec)))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Unweighted,
    Capacity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub ba_id: String,
    pub fuel: Fuel,
    pub regressor: Regressor,
    pub mean: f64,
    /// Standard error of the mean; `None` for a single plant.
    pub std_error: Option<f64>,
    pub count: usize,
}

/// Mean and standard error of one coefficient over plants in each
/// (region, fuel) group. Rank-dropped coefficients are left out.
pub fn group_summary(fits: &[PlantFit], regressor: Regressor, weighting: Weighting) -> Vec<GroupSummary> {
    let mut groups: BTreeMap<(String, Fuel), Vec<(f64, f64)>> = BTreeMap::new();
    for f in fits {
        if let Some(c) = f.fit.coef(regressor).filter(|c| !c.dropped) {
            let w = match weighting {
                Weighting::Unweighted => 1.0,
                Weighting::Capacity => f.nameplate_mw,
            };
            groups.entry((f.ba_id.clone(), f.fuel)).or_default().push((c.estimate, w));
        }
    }
    groups
        .into_iter()
        .map(|((ba_id, fuel), v)| {
            let n = v.len();
            let sw: f64 = v.iter().map(|(_, w)| w).sum();
            let mean = v.iter().map(|(x, w)| x * w).sum::<f64>() / sw;
            let std_error = (n >= 2).then(|| {
                let s: f64 = v.iter().map(|(x, w)| (w * (x - mean)).powi(2)).sum();
                (s * n as f64 / (n - 1) as f64).sqrt() / sw
            });
            GroupSummary {
                ba_id,
                fuel,
                regressor,
                mean,
                std_error,
                count: n,
            }
        })
        .collect()
}

pub const PLANT_FITS_HEADER: [&str; 9] = ["plant_id", "ba", "fuel", "dependent", "regressor", "coef", "se", "p", "n_obs"];

/// One row per (plant, regressor).
pub fn plant_fits_csv(fits: &[PlantFit]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PLANT_FITS_HEADER).map_err(std::io::Error::from)?;
    for f in fits {
        for c in &f.fit.coefficients {
            w.write_record([
                f.plant_id.as_str(),
                f.ba_id.as_str(),
                f.fuel.as_str(),
                f.dependent.as_str(),
                c.regressor.as_str(),
                &c.estimate.to_string(),
                &c.std_error.to_string(),
                &c.p_value.map(|p| p.to_string()).unwrap_or_default(),
                &f.fit.n_obs.to_string(),
            ])
            .map_err(std::io::Error::from)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
