//! Plant outcomes drawn directly from the log-linear fixed-effects model.
//!
//! Daily panel: `ln gen = level + a_i + η_month + η_year + γ_{i,month} +
//! Σ β_r (ln x_r − mean ln x_r) + σ ε` with `x_r` the daily regional
//! regressors; centering only moves the intercept. Intensity
//! follows the same form with its own elasticities, and emissions are
//! generation × intensity. Hourly plant series split each day's totals by a
//! fixed diurnal profile, so daily truth is exactly the hourly sum.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use gridshift_core::domain::{
    DailyPanelRow, FeTerm, Fuel, HourlyBaObs, HourlyPlantObs, ModelForm, PanelDataset, PlantMeta, Regressor,
    RegressionSpec, SeMode,
};
use gridshift_core::regress::fit_panel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::weather::{generate_weather, HourlyWeather, WeatherParams};
use crate::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeScales {
    pub entity: f64,
    pub month: f64,
    pub year: f64,
    pub entity_month: f64,
}

impl Default for FeScales {
    fn default() -> Self {
        FeScales {
            entity: 0.5,
            month: 0.1,
            year: 0.05,
            entity_month: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticDgp {
    pub region: String,
    /// Partner region whose wind, solar and demand enter as controls.
    pub partner: Option<String>,
    pub start: NaiveDate,
    pub days: usize,
    pub n_entities: usize,
    /// Assigned to entities round-robin.
    pub fuels: Vec<Fuel>,
    pub nameplate_mw: f64,
    /// Generation elasticities; regressors absent here have elasticity 0.
    pub betas: BTreeMap<Regressor, f64>,
    /// Per-fuel replacements of entries in `betas`.
    pub fuel_betas: BTreeMap<Fuel, BTreeMap<Regressor, f64>>,
    /// CO₂-intensity elasticities.
    pub ei_alphas: BTreeMap<Regressor, f64>,
    /// CO₂ t/MWh by fuel.
    pub base_intensity: BTreeMap<Fuel, f64>,
    /// SO₂ and NOₓ kg per tonne of CO₂.
    pub so2_per_co2: f64,
    pub nox_per_co2: f64,
    /// ln of daily generation (MWh) at sample-mean regressors and zero
    /// effects; hourly series use `level − ln 24`.
    pub level: f64,
    pub noise_sigma: f64,
    pub ei_noise_sigma: f64,
    pub fe: FeScales,
    /// Probability that a plant-day (or plant-hour) produces nothing.
    pub zero_share: f64,
    pub weather: WeatherParams,
    pub partner_weather: WeatherParams,
}

impl Default for SyntheticDgp {
    fn default() -> Self {
        use Regressor::*;
        SyntheticDgp {
            region: "SIM".into(),
            partner: Some("SIMP".into()),
            start: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
            days: 730,
            n_entities: 50,
            fuels: vec![Fuel::Coal, Fuel::Ngcc, Fuel::Ngct],
            nameplate_mw: 600.0,
            betas: [
                (NetThermalDemand, 1.4),
                (Solar, -0.12),
                (Wind, -0.3),
                (SolarRamp, 0.05),
                (WindRamp, 0.08),
                (PartnerWind, 0.02),
                (PartnerSolar, -0.01),
                (PartnerDemand, 0.1),
            ]
            .into_iter()
            .collect(),
            fuel_betas: BTreeMap::new(),
            ei_alphas: [(NetThermalDemand, -0.04), (Solar, 0.01), (Wind, 0.015), (WindRamp, 0.005)]
                .into_iter()
                .collect(),
            base_intensity: [(Fuel::Coal, 1.0), (Fuel::Ngcc, 0.4), (Fuel::Ngct, 0.6), (Fuel::Other, 0.8)]
                .into_iter()
                .collect(),
            so2_per_co2: 1.5,
            nox_per_co2: 0.8,
            level: 8.85,
            noise_sigma: 0.2,
            ei_noise_sigma: 0.05,
            fe: FeScales::default(),
            zero_share: 0.0,
            weather: WeatherParams::default(),
            partner_weather: WeatherParams {
                demand_base_mw: 15_000.0,
                wind_capacity_mw: 5000.0,
                solar_capacity_mw: 1000.0,
                ..WeatherParams::default()
            },
        }
    }
}

impl SyntheticDgp {
    pub fn validate(&self) -> Result<()> {
        if self.days == 0 || self.n_entities == 0 || self.fuels.is_empty() {
            return Err(SimError::Argument("days, n_entities and fuels must be nonempty".into()));
        }
        if !(0.0..1.0).contains(&self.zero_share) {
            return Err(SimError::Argument(format!("zero_share must be in [0, 1), got {}", self.zero_share)));
        }
        if !(self.noise_sigma >= 0.0 && self.ei_noise_sigma >= 0.0 && self.nameplate_mw > 0.0) {
            return Err(SimError::Argument("noise scales must be >= 0 and nameplate > 0".into()));
        }
        if self.partner.as_deref() == Some(self.region.as_str()) {
            return Err(SimError::Argument("a region cannot be its own partner".into()));
        }
        if self.fuels.iter().any(|f| !self.base_intensity.contains_key(f)) {
            return Err(SimError::Argument("every fuel needs a base intensity".into()));
        }
        self.weather.validate()?;
        self.partner_weather.validate()
    }

    pub fn plant_ids(&self) -> Vec<String> {
        (0..self.n_entities).map(|i| format!("P{i:04}")).collect()
    }

    pub fn fuel_of(&self, entity: usize) -> Fuel {
        self.fuels[entity % self.fuels.len()]
    }

    /// Generation elasticity of `reg` for plants of `fuel`.
    pub fn beta(&self, fuel: Fuel, reg: Regressor) -> f64 {
        self.fuel_betas
            .get(&fuel)
            .and_then(|m| m.get(&reg))
            .or_else(|| self.betas.get(&reg))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn plants(&self) -> Vec<PlantMeta> {
        self.plant_ids()
            .into_iter()
            .enumerate()
            .map(|(i, plant_id)| PlantMeta {
                plant_id,
                ba_id: self.region.clone(),
                fuel: self.fuel_of(i),
                nameplate_mw: self.nameplate_mw,
                stack_height_m: None,
                in_service_year: None,
            })
            .collect()
    }

    /// Regressors with a nonzero elasticity somewhere, in model order.
    pub fn regressors(&self) -> Vec<Regressor> {
        let mut regs = gridshift_core::domain::default_regressors(
            ModelForm::CompactNetdemand,
            if self.partner.is_some() {
                gridshift_core::domain::PartnerMode::Separate
            } else {
                gridshift_core::domain::PartnerMode::None
            },
        );
        regs.retain(|r| {
            self.betas.contains_key(r)
                || self.ei_alphas.contains_key(r)
                || self.fuel_betas.values().any(|m| m.contains_key(r))
        });
        regs
    }

    /// Estimation spec matching the generator: all four fixed-effect terms
    /// and the generator's regressors.
    pub fn matching_spec(&self, dependent: gridshift_core::domain::Dependent, se: SeMode) -> RegressionSpec {
        RegressionSpec::new(dependent, ModelForm::CompactNetdemand)
            .with_regressors(self.regressors())
            .with_fe_terms([FeTerm::Entity, FeTerm::Month, FeTerm::Year, FeTerm::EntityMonth])
            .with_se_mode(se)
    }
}

/// Daily regional regressors computed from hourly weather.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DailyRegional {
    pub demand: f64,
    pub net_thermal: f64,
    pub solar: f64,
    pub wind: f64,
    pub solar_ramp: f64,
    pub wind_ramp: f64,
    pub hydro: f64,
    pub net_imports: f64,
}

pub fn daily_regional(hours: &[HourlyWeather]) -> DailyRegional {
    let mut d = DailyRegional::default();
    for (i, h) in hours.iter().enumerate() {
        d.demand += h.demand;
        d.solar += h.solar;
        d.wind += h.wind;
        d.hydro += h.hydro;
        d.net_imports += h.net_imports;
        d.net_thermal += h.demand - h.hydro - h.net_imports;
        if i > 0 {
            d.wind_ramp += (h.wind - hours[i - 1].wind).abs();
            d.solar_ramp += (h.solar - hours[i - 1].solar).abs();
        }
    }
    d
}

fn daily_x(reg: Regressor, own: &DailyRegional, partner: Option<&DailyRegional>) -> f64 {
    let p = partner.copied().unwrap_or_default();
    match reg {
        Regressor::NetThermalDemand => own.net_thermal,
        Regressor::Demand => own.demand,
        Regressor::Solar => own.solar,
        Regressor::Wind => own.wind,
        Regressor::SolarRamp => own.solar_ramp,
        Regressor::WindRamp => own.wind_ramp,
        Regressor::PartnerWind => p.wind,
        Regressor::PartnerSolar => p.solar,
        Regressor::PartnerDemand => p.demand,
        Regressor::PartnerTotal => p.wind + p.solar + p.demand,
        Regressor::Hydro => own.hydro,
        Regressor::Imports => own.net_imports.max(0.0),
        Regressor::Exports => (-own.net_imports).max(0.0),
    }
}

/// Hour-of-day shares of a plant's daily output; they sum to 1.
pub fn diurnal_profile() -> [f64; 24] {
    let mut p = [0.0; 24];
    let tau = std::f64::consts::TAU;
    for (h, v) in p.iter_mut().enumerate() {
        *v = 1.0 + 0.3 * (tau * (h as f64 - 10.0) / 24.0).sin();
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    /// Generation elasticities (fuel-independent part).
    pub generation: BTreeMap<Regressor, f64>,
    pub generation_by_fuel: BTreeMap<Fuel, BTreeMap<Regressor, f64>>,
    /// Intensity elasticities, shared by every pollutant.
    pub intensity: BTreeMap<Regressor, f64>,
    /// Emissions elasticities: generation + intensity.
    pub emissions: BTreeMap<Regressor, f64>,
    pub noise_sigma: f64,
}

impl Truth {
    fn of(dgp: &SyntheticDgp, seed: u64) -> Truth {
        let regs = dgp.regressors();
        let get = |m: &BTreeMap<Regressor, f64>, r: &Regressor| m.get(r).copied().unwrap_or(0.0);
        let generation: BTreeMap<Regressor, f64> = regs.iter().map(|r| (*r, get(&dgp.betas, r))).collect();
        let intensity: BTreeMap<Regressor, f64> = regs.iter().map(|r| (*r, get(&dgp.ei_alphas, r))).collect();
        let emissions = regs.iter().map(|r| (*r, generation[r] + intensity[r])).collect();
        let mut fuels = dgp.fuels.clone();
        fuels.sort();
        fuels.dedup();
        let generation_by_fuel = fuels
            .into_iter()
            .map(|f| (f, regs.iter().map(|r| (*r, dgp.beta(f, *r))).collect()))
            .collect();
        Truth {
            seed,
            generation,
            generation_by_fuel,
            intensity,
            emissions,
            noise_sigma: dgp.noise_sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoglinearOutput {
    pub panel: PanelDataset,
    pub plants: Vec<PlantMeta>,
    pub ba_hours: Vec<HourlyBaObs>,
    /// Empty unless hourly output was requested.
    pub plant_hours: Vec<HourlyPlantObs>,
    pub truth: Truth,
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn ba_hours(region: &str, weather: &[HourlyWeather]) -> Vec<HourlyBaObs> {
    weather
        .iter()
        .map(|w| HourlyBaObs {
            ba_id: region.to_string(),
            timestamp: w.timestamp,
            demand_mwh: w.demand,
            wind_mwh: w.wind,
            solar_mwh: w.solar,
            hydro_mwh: w.hydro,
            net_imports_mwh: w.net_imports,
        })
        .collect()
}

struct Draws {
    weather: Vec<HourlyWeather>,
    partner: Option<Vec<HourlyWeather>>,
    entity: Vec<f64>,
    entity_ei: Vec<f64>,
    month: [f64; 12],
    year: BTreeMap<i32, f64>,
    entity_month: Vec<[f64; 12]>,
}

fn draw_common(dgp: &SyntheticDgp, rng: &mut ChaCha8Rng) -> Result<Draws> {
    let weather = generate_weather(&dgp.weather, dgp.start, dgp.days, rng)?;
    let partner = match dgp.partner {
        Some(_) => Some(generate_weather(&dgp.partner_weather, dgp.start, dgp.days, rng)?),
        None => None,
    };
    let fe = dgp.fe;
    let entity = (0..dgp.n_entities).map(|_| fe.entity * normal(rng)).collect();
    let entity_ei = (0..dgp.n_entities).map(|_| 0.1 * normal(rng)).collect();
    let mut month = [0.0; 12];
    month.iter_mut().for_each(|m| *m = fe.month * normal(rng));
    let end = dgp.start + chrono::Days::new(dgp.days as u64);
    let year = (dgp.start.year()..=end.year()).map(|y| (y, fe.year * normal(rng))).collect();
    let entity_month = (0..dgp.n_entities)
        .map(|_| {
            let mut a = [0.0; 12];
            a.iter_mut().for_each(|v| *v = fe.entity_month * normal(rng));
            a
        })
        .collect();
    Ok(Draws {
        weather,
        partner,
        entity,
        entity_ei,
        month,
        year,
        entity_month,
    })
}

/// Daily panel (and optionally hourly plant files) from the daily model.
pub fn generate_panel(dgp: &SyntheticDgp, seed: u64, hourly: bool) -> Result<LoglinearOutput> {
    dgp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = draw_common(dgp, &mut rng)?;
    let regs = dgp.regressors();
    let plants = dgp.plants();
    let profile = diurnal_profile();
    let mut rows = Vec::with_capacity(dgp.days * dgp.n_entities);
    let mut plant_hours = Vec::new();

    let days: Vec<(NaiveDate, DailyRegional, Option<DailyRegional>)> = (0..dgp.days)
        .map(|d| {
            let own = daily_regional(&draws.weather[d * 24..(d + 1) * 24]);
            let partner = draws.partner.as_ref().map(|p| daily_regional(&p[d * 24..(d + 1) * 24]));
            (draws.weather[d * 24].timestamp.date_naive(), own, partner)
        })
        .collect();

    let centre: BTreeMap<Regressor, f64> = regs
        .iter()
        .map(|&r| {
            let s: f64 = days.iter().map(|(_, o, p)| daily_x(r, o, p.as_ref()).ln()).sum();
            (r, s / days.len() as f64)
        })
        .collect();

    for (i, plant) in plants.iter().enumerate() {
        let base_ei = dgp.base_intensity[&plant.fuel];
        for (d, (date, own, partner)) in days.iter().enumerate() {
            let (m, y) = (date.month(), date.year());
            let mi = (m - 1) as usize;
            let mut ln_gen = dgp.level + draws.entity[i] + draws.month[mi] + draws.year[&y] + draws.entity_month[i][mi];
            let mut ln_ei = base_ei.ln() + draws.entity_ei[i];
            for &r in &regs {
                let lx = daily_x(r, own, partner.as_ref()).ln() - centre[&r];
                ln_gen += dgp.beta(plant.fuel, r) * lx;
                ln_ei += dgp.ei_alphas.get(&r).copied().unwrap_or(0.0) * lx;
            }
            ln_gen += dgp.noise_sigma * normal(&mut rng);
            ln_ei += dgp.ei_noise_sigma * normal(&mut rng);
            let off = dgp.zero_share > 0.0 && rng.random::<f64>() < dgp.zero_share;
            let gen = if off { 0.0 } else { ln_gen.exp() };
            let co2 = gen * ln_ei.exp();
            let p = partner.unwrap_or_default();
            let mut row = DailyPanelRow {
                plant_id: plant.plant_id.clone(),
                ba_id: plant.ba_id.clone(),
                date: *date,
                y_gen: gen,
                y_co2: Some(co2),
                y_so2: Some(co2 * dgp.so2_per_co2),
                y_nox: Some(co2 * dgp.nox_per_co2),
                y_ei_co2: None,
                y_ei_so2: None,
                y_ei_nox: None,
                demand: own.demand,
                d_net_thermal: own.net_thermal,
                solar: own.solar,
                wind: own.wind,
                wind_ramp: own.wind_ramp,
                solar_ramp: own.solar_ramp,
                partner_wind: p.wind,
                partner_solar: p.solar,
                partner_demand: p.demand,
                hydro: own.hydro,
                imports_pos: own.net_imports.max(0.0),
                exports_pos: (-own.net_imports).max(0.0),
                month_label: m,
                year_label: y,
            };
            row.derive_intensities();
            if hourly {
                for (h, share) in profile.iter().enumerate() {
                    let g = gen * share;
                    let c = co2 * share;
                    plant_hours.push(HourlyPlantObs {
                        plant_id: plant.plant_id.clone(),
                        timestamp: draws.weather[d * 24 + h].timestamp,
                        gen_mwh: Some(g),
                        co2_tons: Some(c),
                        so2_kg: Some(c * dgp.so2_per_co2),
                        nox_kg: Some(c * dgp.nox_per_co2),
                    });
                }
            }
            rows.push(row);
        }
    }
    let mut ba = ba_hours(&dgp.region, &draws.weather);
    if let (Some(name), Some(p)) = (&dgp.partner, &draws.partner) {
        ba.extend(ba_hours(name, p));
    }
    Ok(LoglinearOutput {
        panel: PanelDataset::new(rows),
        plants,
        ba_hours: ba,
        plant_hours,
        truth: Truth::of(dgp, seed),
    })
}

/// Offset the hourly model applies before taking logs: 1 for series that
/// are zero at night, 0 otherwise. Matches the estimator's default.
pub fn hourly_delta(reg: Regressor) -> f64 {
    match reg {
        Regressor::Solar | Regressor::SolarRamp | Regressor::PartnerSolar => 1.0,
        _ => 0.0,
    }
}

/// Hourly plant series from the hourly single-plant model (month and year
/// effects, previous-hour ramps). The first hour has no ramp and is
/// skipped. `zero_share` applies per hour.
pub fn generate_plant_hours(dgp: &SyntheticDgp, seed: u64) -> Result<LoglinearOutput> {
    dgp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = draw_common(dgp, &mut rng)?;
    let regs = dgp.regressors();
    let plants = dgp.plants();
    let w = &draws.weather;
    // ln(x + Δ) per hour from the second one on, centred per regressor
    let mut lx: Vec<Vec<f64>> = (1..w.len())
        .map(|t| {
            let partner = draws.partner.as_ref().map(|p| p[t]);
            regs.iter()
                .map(|&r| {
                    let x = match r {
                        Regressor::NetThermalDemand => w[t].demand - w[t].hydro - w[t].net_imports,
                        Regressor::Demand => w[t].demand,
                        Regressor::Solar => w[t].solar,
                        Regressor::Wind => w[t].wind,
                        Regressor::SolarRamp => (w[t].solar - w[t - 1].solar).abs(),
                        Regressor::WindRamp => (w[t].wind - w[t - 1].wind).abs(),
                        Regressor::PartnerWind => partner.map_or(0.0, |p| p.wind),
                        Regressor::PartnerSolar => partner.map_or(0.0, |p| p.solar),
                        Regressor::PartnerDemand => partner.map_or(0.0, |p| p.demand),
                        Regressor::PartnerTotal => partner.map_or(0.0, |p| p.wind + p.solar + p.demand),
                        Regressor::Hydro => w[t].hydro,
                        Regressor::Imports => w[t].net_imports.max(0.0),
                        Regressor::Exports => (-w[t].net_imports).max(0.0),
                    };
                    (x + hourly_delta(r)).ln()
                })
                .collect()
        })
        .collect();
    for j in 0..regs.len() {
        let m = lx.iter().map(|row| row[j]).sum::<f64>() / lx.len().max(1) as f64;
        lx.iter_mut().for_each(|row| row[j] -= m);
    }
    let level = dgp.level - 24f64.ln();
    let mut plant_hours = Vec::with_capacity(w.len() * plants.len());
    for (i, plant) in plants.iter().enumerate() {
        let base_ei = dgp.base_intensity[&plant.fuel];
        for t in 1..w.len() {
            let date = w[t].timestamp.date_naive();
            let mi = (date.month() - 1) as usize;
            let mut ln_gen = level + draws.entity[i] + draws.month[mi] + draws.year[&date.year()];
            let mut ln_ei = base_ei.ln() + draws.entity_ei[i];
            for (j, &r) in regs.iter().enumerate() {
                ln_gen += dgp.beta(plant.fuel, r) * lx[t - 1][j];
                ln_ei += dgp.ei_alphas.get(&r).copied().unwrap_or(0.0) * lx[t - 1][j];
            }
            ln_gen += dgp.noise_sigma * normal(&mut rng);
            ln_ei += dgp.ei_noise_sigma * normal(&mut rng);
            let off = dgp.zero_share > 0.0 && rng.random::<f64>() < dgp.zero_share;
            let gen = if off { 0.0 } else { ln_gen.exp() };
            let co2 = gen * ln_ei.exp();
            plant_hours.push(HourlyPlantObs {
                plant_id: plant.plant_id.clone(),
                timestamp: w[t].timestamp,
                gen_mwh: Some(gen),
                co2_tons: Some(co2),
                so2_kg: Some(co2 * dgp.so2_per_co2),
                nox_kg: Some(co2 * dgp.nox_per_co2),
            });
        }
    }
    let mut ba = ba_hours(&dgp.region, w);
    if let (Some(name), Some(p)) = (&dgp.partner, &draws.partner) {
        ba.extend(ba_hours(name, p));
    }
    Ok(LoglinearOutput {
        panel: PanelDataset::default(),
        plants,
        ba_hours: ba,
        plant_hours,
        truth: Truth::of(dgp, seed),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTable {
    pub truth: Truth,
    /// Slopes of the matching fit on the same draws with all noise removed.
    pub realized: BTreeMap<Regressor, f64>,
}

/// Generative elasticities plus the noise-free regression targets.
pub fn true_elasticities(dgp: &SyntheticDgp, seed: u64) -> Result<TruthTable> {
    let quiet = SyntheticDgp {
        noise_sigma: 0.0,
        ei_noise_sigma: 0.0,
        ..dgp.clone()
    };
    let out = generate_panel(&quiet, seed, false)?;
    let spec = quiet.matching_spec(gridshift_core::domain::Dependent::Generation, SeMode::Classical);
    let fit = fit_panel(&out.panel, &spec)?;
    Ok(TruthTable {
        truth: Truth::of(dgp, seed),
        realized: fit.coefficients.iter().map(|c| (c.regressor, c.estimate)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use gridshift_core::domain::Dependent;

    fn small() -> SyntheticDgp {
        SyntheticDgp {
            n_entities: 4,
            days: 120,
            ..SyntheticDgp::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_panel(&small(), 9, true).unwrap();
        let b = generate_panel(&small(), 9, true).unwrap();
        assert_eq!(a, b);
        let c = generate_panel(&small(), 10, false).unwrap();
        assert_ne!(a.panel, c.panel);
    }

    #[test]
    fn hourly_sums_to_daily() {
        let out = generate_panel(&small(), 1, true).unwrap();
        let first = &out.panel.rows[0];
        let sum: f64 = out
            .plant_hours
            .iter()
            .filter(|o| o.plant_id == first.plant_id && o.timestamp.date_naive() == first.date)
            .map(|o| o.gen_mwh.unwrap())
            .sum();
        assert!((sum - first.y_gen).abs() <= 1e-9 * first.y_gen);
    }

    #[test]
    fn noiseless_truth_is_recovered() {
        let t = true_elasticities(&small(), 4).unwrap();
        for (r, b) in &t.truth.generation {
            assert!((t.realized[r] - b).abs() < 1e-8, "{r}: {} vs {b}", t.realized[r]);
        }
    }

    #[test]
    fn zero_share_produces_zero_days() {
        let dgp = SyntheticDgp {
            zero_share: 0.2,
            ..small()
        };
        let out = generate_panel(&dgp, 2, false).unwrap();
        let zeros = out.panel.rows.iter().filter(|r| r.y_gen == 0.0).count() as f64;
        let share = zeros / out.panel.len() as f64;
        assert!((0.15..0.25).contains(&share), "{share}");
        assert!(out.panel.rows.iter().filter(|r| r.y_gen == 0.0).all(|r| r.y_ei_co2.is_none()));
        let spec = dgp.matching_spec(Dependent::Generation, SeMode::Hc1Robust);
        assert!(fit_panel(&out.panel, &spec).is_ok());
    }
}
