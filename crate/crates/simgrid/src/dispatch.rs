//! Merit-order dispatch of a thermal fleet against hourly net load.
//!
//! Each hour the thermal requirement is demand − hydro − net imports − wind
//! − solar. Plants that cannot shut down this hour sit at their lower
//! bound; the remainder is filled in ascending marginal cost. Excess
//! must-run output is absorbed by curtailing renewables. A plant's
//! intensity rises linearly as its load fraction falls.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use gridshift_core::domain::{Fuel, HourlyBaObs, HourlyPlantObs, PanelDataset, PlantMeta};
use gridshift_core::ingest::{aggregate_daily, AggregateOptions, PartnerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::weather::{generate_weather, HourlyWeather, WeatherParams};
use crate::{Result, SimError};

const BALANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchPlant {
    pub plant_id: String,
    pub fuel: Fuel,
    pub nameplate_mw: f64,
    pub marginal_cost: f64,
    /// Full-load intensities.
    pub co2_t_per_mwh: f64,
    pub so2_kg_per_mwh: f64,
    pub nox_kg_per_mwh: f64,
    /// Relative intensity increase at zero load; intensity at load fraction
    /// `lf` is `base · (1 + penalty · (1 − lf))`.
    pub part_load_penalty: f64,
    /// Lowest nonzero output as a fraction of nameplate.
    pub min_stable_fraction: f64,
    /// Largest change in output between consecutive hours.
    pub ramp_mw_per_h: f64,
}

impl DispatchPlant {
    /// Multiplier on full-load intensity; nonincreasing in `load_fraction`.
    pub fn intensity_factor(&self, load_fraction: f64) -> f64 {
        1.0 + self.part_load_penalty * (1.0 - load_fraction.clamp(0.0, 1.0))
    }

    fn min_stable(&self) -> f64 {
        self.min_stable_fraction * self.nameplate_mw
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.nameplate_mw > 0.0
            && self.ramp_mw_per_h > 0.0
            && (0.0..=1.0).contains(&self.min_stable_fraction)
            && self.part_load_penalty >= 0.0
            && self.co2_t_per_mwh >= 0.0
            && self.so2_kg_per_mwh >= 0.0
            && self.nox_kg_per_mwh >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::Argument(format!("plant {} has invalid dispatch parameters", self.plant_id)))
        }
    }

    pub fn meta(&self, ba_id: &str) -> PlantMeta {
        PlantMeta {
            plant_id: self.plant_id.clone(),
            ba_id: ba_id.to_string(),
            fuel: self.fuel,
            nameplate_mw: self.nameplate_mw,
            stack_height_m: None,
            in_service_year: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchKernel {
    pub plants: Vec<DispatchPlant>,
    /// Whether renewables may be curtailed when must-run thermal output
    /// exceeds the requirement.
    pub allow_curtailment: bool,
}

impl DispatchKernel {
    pub fn validate(&self) -> Result<()> {
        if self.plants.is_empty() {
            return Err(SimError::Argument("dispatch kernel has no plants".into()));
        }
        let mut ids: Vec<&str> = self.plants.iter().map(|p| p.plant_id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(SimError::Argument("duplicate plant id in dispatch kernel".into()));
        }
        self.plants.iter().try_for_each(DispatchPlant::validate)
    }

    pub fn capacity(&self) -> f64 {
        self.plants.iter().map(|p| p.nameplate_mw).sum()
    }

    /// Plant indices in merit order; ties break on plant id.
    fn merit_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.plants.len()).collect();
        idx.sort_by(|&a, &b| {
            let (pa, pb) = (&self.plants[a], &self.plants[b]);
            pa.marginal_cost.total_cmp(&pb.marginal_cost).then_with(|| pa.plant_id.cmp(&pb.plant_id))
        });
        idx
    }

    /// A mixed fleet of `n` plants sized so that total capacity is
    /// `capacity_mw`. Coal is cheapest and dirtiest at full load; peakers are
    /// most expensive.
    pub fn synthetic_fleet(n: usize, capacity_mw: f64, part_load_penalty: f64, seed: u64) -> DispatchKernel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fuels = [Fuel::Coal, Fuel::Ngcc, Fuel::Ngct];
        let sizes: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        let scale = capacity_mw / sizes.iter().sum::<f64>();
        let plants = (0..n)
            .map(|i| {
                let fuel = fuels[i % fuels.len()];
                let (cost, co2, so2, nox, min_stable, ramp) = match fuel {
                    Fuel::Coal => (20.0, 1.0, 1.2, 0.9, 0.4, 0.3),
                    Fuel::Ngcc => (35.0, 0.4, 0.005, 0.1, 0.35, 0.6),
                    _ => (60.0, 0.6, 0.008, 0.3, 0.2, 1.0),
                };
                let jitter = rng.random_range(0.9..1.1);
                let nameplate = sizes[i] * scale;
                DispatchPlant {
                    plant_id: format!("D{i:04}"),
                    fuel,
                    nameplate_mw: nameplate,
                    marginal_cost: cost * rng.random_range(0.8..1.2),
                    co2_t_per_mwh: co2 * jitter,
                    so2_kg_per_mwh: so2 * jitter,
                    nox_kg_per_mwh: nox * jitter,
                    part_load_penalty,
                    min_stable_fraction: min_stable,
                    ramp_mw_per_h: ramp * nameplate,
                }
            })
            .collect();
        DispatchKernel {
            plants,
            allow_curtailment: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EmissionTotals {
    pub gen_mwh: f64,
    pub co2_t: f64,
    pub so2_kg: f64,
    pub nox_kg: f64,
}

impl EmissionTotals {
    fn add(&mut self, gen: f64, co2: f64, so2: f64, nox: f64) {
        self.gen_mwh += gen;
        self.co2_t += co2;
        self.so2_kg += so2;
        self.nox_kg += nox;
    }

    /// Fleet-average CO₂ intensity, t/MWh.
    pub fn co2_intensity(&self) -> f64 {
        self.co2_t / self.gen_mwh
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispatchHour {
    pub timestamp: chrono::DateTime<chrono::Utc>,
    pub thermal_mwh: f64,
    pub wind_used: f64,
    pub solar_used: f64,
    pub curtailed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchOutcome {
    pub hours: Vec<DispatchHour>,
    /// Hour-major, plants in kernel order; zero-output hours are included.
    pub plant_hours: Vec<HourlyPlantObs>,
    /// With renewables net of curtailment.
    pub ba_hours: Vec<HourlyBaObs>,
    pub totals: EmissionTotals,
    pub plant_totals: BTreeMap<String, EmissionTotals>,
    /// Renewable energy actually delivered.
    pub renewable_mwh: f64,
}

struct Bounds {
    lo: f64,
    hi: f64,
    /// The plant may produce nothing this hour.
    optional: bool,
}

fn bounds(p: &DispatchPlant, prev: Option<f64>) -> Bounds {
    let min = p.min_stable();
    match prev {
        None => Bounds {
            lo: min,
            hi: p.nameplate_mw,
            optional: true,
        },
        Some(q) if q > 0.0 => Bounds {
            lo: min.max(q - p.ramp_mw_per_h),
            hi: p.nameplate_mw.min(q + p.ramp_mw_per_h),
            optional: q - p.ramp_mw_per_h <= min,
        },
        Some(_) => Bounds {
            lo: min,
            hi: p.nameplate_mw.min(min.max(p.ramp_mw_per_h)),
            optional: true,
        },
    }
}

/// Thermal output per plant for one hour, plus renewable curtailment.
fn dispatch_hour(
    kernel: &DispatchKernel,
    order: &[usize],
    prev: Option<&[f64]>,
    requirement: f64,
    renewables: f64,
    hour: &str,
) -> Result<(Vec<f64>, f64)> {
    let b: Vec<Bounds> = kernel.plants.iter().enumerate().map(|(i, p)| bounds(p, prev.map(|v| v[i]))).collect();
    let mut out = vec![0.0; b.len()];
    let mut rem = requirement;
    for (i, bi) in b.iter().enumerate() {
        if !bi.optional {
            out[i] = bi.lo;
            rem -= bi.lo;
        }
    }
    let mut skipped = Vec::new();
    for &i in order {
        if rem <= 0.0 {
            break;
        }
        let bi = &b[i];
        if !bi.optional {
            let add = (bi.hi - bi.lo).min(rem);
            out[i] += add;
            rem -= add;
        } else if rem >= bi.lo {
            out[i] = bi.hi.min(rem);
            rem -= out[i];
        } else {
            skipped.push(i);
        }
    }
    if rem > BALANCE_TOL * requirement.abs().max(1.0) {
        // Commit the cheapest skipped plant at its floor and back others off.
        let Some(&c) = skipped.first() else {
            return Err(SimError::Generation {
                hour: hour.to_string(),
                message: format!("thermal requirement {requirement:.1} MWh exceeds available fleet output"),
            });
        };
        out[c] = b[c].lo;
        let mut excess = b[c].lo - rem;
        for &i in order.iter().rev() {
            if excess <= 0.0 {
                break;
            }
            if i == c || out[i] <= 0.0 {
                continue;
            }
            let give = (out[i] - b[i].lo).min(excess);
            out[i] -= give;
            excess -= give;
        }
        rem = -excess.max(0.0);
    }
    let mut curtailed = 0.0;
    if rem < 0.0 {
        let excess = -rem;
        if excess > BALANCE_TOL * requirement.abs().max(1.0) {
            if !kernel.allow_curtailment || excess > renewables * (1.0 + BALANCE_TOL) {
                return Err(SimError::Generation {
                    hour: hour.to_string(),
                    message: format!("minimum thermal output exceeds the requirement by {excess:.1} MWh"),
                });
            }
            curtailed = excess.min(renewables);
        }
    }
    Ok((out, curtailed))
}

/// Dispatch `kernel` against `weather` for region `ba_id`.
pub fn run_dispatch(kernel: &DispatchKernel, weather: &[HourlyWeather], ba_id: &str) -> Result<DispatchOutcome> {
    kernel.validate()?;
    let order = kernel.merit_order();
    let n = kernel.plants.len();
    let mut prev: Option<Vec<f64>> = None;
    let mut hours = Vec::with_capacity(weather.len());
    let mut plant_hours = Vec::with_capacity(weather.len() * n);
    let mut ba_hours = Vec::with_capacity(weather.len());
    let mut totals = EmissionTotals::default();
    let mut plant_totals: BTreeMap<String, EmissionTotals> = BTreeMap::new();
    let mut renewable_mwh = 0.0;
    for w in weather {
        let renewables = w.wind + w.solar;
        let requirement = w.demand - w.hydro - w.net_imports - renewables;
        let label = w.timestamp.to_rfc3339();
        let (out, curtailed) = dispatch_hour(kernel, &order, prev.as_deref(), requirement, renewables, &label)?;
        let share = if renewables > 0.0 { 1.0 - curtailed / renewables } else { 0.0 };
        let (wind_used, solar_used) = (w.wind * share, w.solar * share);
        renewable_mwh += wind_used + solar_used;
        let thermal: f64 = out.iter().sum();
        for (p, &g) in kernel.plants.iter().zip(&out) {
            let f = if g > 0.0 { p.intensity_factor(g / p.nameplate_mw) } else { 1.0 };
            let (co2, so2, nox) = (g * p.co2_t_per_mwh * f, g * p.so2_kg_per_mwh * f, g * p.nox_kg_per_mwh * f);
            totals.add(g, co2, so2, nox);
            plant_totals.entry(p.plant_id.clone()).or_default().add(g, co2, so2, nox);
            plant_hours.push(HourlyPlantObs {
                plant_id: p.plant_id.clone(),
                timestamp: w.timestamp,
                gen_mwh: Some(g),
                co2_tons: Some(co2),
                so2_kg: Some(so2),
                nox_kg: Some(nox),
            });
        }
        hours.push(DispatchHour {
            timestamp: w.timestamp,
            thermal_mwh: thermal,
            wind_used,
            solar_used,
            curtailed,
        });
        ba_hours.push(HourlyBaObs {
            ba_id: ba_id.to_string(),
            timestamp: w.timestamp,
            demand_mwh: w.demand,
            wind_mwh: wind_used,
            solar_mwh: solar_used,
            hydro_mwh: w.hydro,
            net_imports_mwh: w.net_imports,
        });
        prev = Some(out);
    }
    Ok(DispatchOutcome {
        hours,
        plant_hours,
        ba_hours,
        totals,
        plant_totals,
        renewable_mwh,
    })
}

/// The same weather with wind and solar removed.
pub fn without_renewables(weather: &[HourlyWeather]) -> Vec<HourlyWeather> {
    weather
        .iter()
        .map(|w| HourlyWeather {
            wind: 0.0,
            solar: 0.0,
            ..*w
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DispatchDgp {
    pub region: String,
    pub partner: Option<String>,
    pub start: NaiveDate,
    pub days: usize,
    pub weather: WeatherParams,
    pub partner_weather: WeatherParams,
    pub n_plants: usize,
    pub fleet_capacity_mw: f64,
    pub part_load_penalty: f64,
}

impl Default for DispatchDgp {
    fn default() -> Self {
        DispatchDgp {
            region: "SIM".into(),
            partner: Some("SIMP".into()),
            start: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
            days: 365,
            weather: WeatherParams::default(),
            partner_weather: WeatherParams {
                demand_base_mw: 15_000.0,
                wind_capacity_mw: 5000.0,
                solar_capacity_mw: 1000.0,
                ..WeatherParams::default()
            },
            n_plants: 24,
            fleet_capacity_mw: 16_000.0,
            part_load_penalty: 0.07,
        }
    }
}

/// Totals of the actual run and of the zero-renewables re-run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchTruth {
    pub seed: u64,
    pub actual: EmissionTotals,
    pub counterfactual: EmissionTotals,
    pub renewable_mwh: f64,
    /// Counterfactual minus actual CO₂ by plant, tonnes.
    pub displaced_co2_by_plant: BTreeMap<String, f64>,
}

impl DispatchTruth {
    /// Fleet CO₂ displaced per MWh of delivered renewables.
    pub fn displaced_co2_per_mwh(&self) -> f64 {
        (self.counterfactual.co2_t - self.actual.co2_t) / self.renewable_mwh
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchDataset {
    pub kernel: DispatchKernel,
    pub plants: Vec<PlantMeta>,
    pub plant_hours: Vec<HourlyPlantObs>,
    pub ba_hours: Vec<HourlyBaObs>,
    pub partners: PartnerConfig,
    pub panel: PanelDataset,
    pub truth: DispatchTruth,
}

/// Weather, a synthetic fleet, its dispatch, the zero-renewables
/// counterfactual and the daily panel the ingest path would build.
pub fn generate_dispatch(dgp: &DispatchDgp, seed: u64) -> Result<DispatchDataset> {
    if dgp.days == 0 || dgp.n_plants == 0 {
        return Err(SimError::Argument("days and n_plants must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weather = generate_weather(&dgp.weather, dgp.start, dgp.days, &mut rng)?;
    let partner_weather = match dgp.partner {
        Some(_) => Some(generate_weather(&dgp.partner_weather, dgp.start, dgp.days, &mut rng)?),
        None => None,
    };
    let kernel = DispatchKernel::synthetic_fleet(dgp.n_plants, dgp.fleet_capacity_mw, dgp.part_load_penalty, rng.random());
    let actual = run_dispatch(&kernel, &weather, &dgp.region)?;
    let cf = run_dispatch(&kernel, &without_renewables(&weather), &dgp.region)?;
    let plants: Vec<PlantMeta> = kernel.plants.iter().map(|p| p.meta(&dgp.region)).collect();
    let mut ba_hours = actual.ba_hours.clone();
    let mut partners = PartnerConfig::default();
    if let (Some(name), Some(pw)) = (&dgp.partner, &partner_weather) {
        ba_hours.extend(pw.iter().map(|w| HourlyBaObs {
            ba_id: name.clone(),
            timestamp: w.timestamp,
            demand_mwh: w.demand,
            wind_mwh: w.wind,
            solar_mwh: w.solar,
            hydro_mwh: w.hydro,
            net_imports_mwh: w.net_imports,
        }));
        partners.partners.insert(dgp.region.clone(), vec![name.clone()]);
    }
    let (panel, _) =
        aggregate_daily(&actual.plant_hours, &ba_hours, &plants, &partners, &AggregateOptions::default())?;
    let displaced_co2_by_plant = actual
        .plant_totals
        .iter()
        .map(|(id, t)| (id.clone(), cf.plant_totals[id].co2_t - t.co2_t))
        .collect();
    Ok(DispatchDataset {
        truth: DispatchTruth {
            seed,
            actual: actual.totals,
            counterfactual: cf.totals,
            renewable_mwh: actual.renewable_mwh,
            displaced_co2_by_plant,
        },
        kernel,
        plants,
        plant_hours: actual.plant_hours,
        ba_hours,
        partners,
        panel,
    })
}
