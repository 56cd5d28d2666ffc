//! Counterfactual emissions with each plant held at a fixed percentile of
//! its own hourly emissions intensity, generation frozen at observed values.
//!
//! Only hours with positive generation and a reported mass enter a plant's
//! observed total, its intensity distribution and its scenario totals, so a
//! constant-intensity plant gives identical observed, low and high totals.

use std::collections::BTreeMap;

use chrono::Datelike;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    BreakdownCell, CfBucket, Fuel, HourlyPlantObs, PlantMeta, Pollutant, ScenarioResult, ScenarioTotals,
};
use crate::error::{Error, Result};
use crate::ingest::{capacity_factor, DateRange};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub pollutant: Pollutant,
    pub p_low: f64,
    pub p_high: f64,
    pub cf_thresholds: (f64, f64),
    pub window: DateRange,
    /// Percentiles per calendar year inside the window instead of over the
    /// whole window.
    #[serde(default)]
    pub per_year: bool,
}

impl ScenarioSpec {
    /// 10th/90th percentiles.
    pub fn new(pollutant: Pollutant, window: DateRange) -> ScenarioSpec {
        ScenarioSpec {
            pollutant,
            p_low: 0.10,
            p_high: 0.90,
            cf_thresholds: (0.3, 0.6),
            window,
            per_year: false,
        }
    }

    /// 5th/95th percentiles.
    pub fn appendix(pollutant: Pollutant, window: DateRange) -> ScenarioSpec {
        ScenarioSpec {
            p_low: 0.05,
            p_high: 0.95,
            ..ScenarioSpec::new(pollutant, window)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.p_low && self.p_low <= self.p_high && self.p_high < 1.0) {
            return Err(Error::Argument(format!(
                "percentiles must satisfy 0 < p_low <= p_high < 1, got {} and {}",
                self.p_low, self.p_high
            )));
        }
        let (a, b) = self.cf_thresholds;
        if !(0.0 <= a && a <= b) {
            return Err(Error::Argument(format!("invalid capacity-factor thresholds ({a}, {b})")));
        }
        if self.window.days() <= 0 {
            return Err(Error::Argument("scenario window is empty".into()));
        }
        Ok(())
    }
}

/// Empirical percentile by linear interpolation between order statistics:
/// with sorted `v` and `h = (n − 1)·p`, returns `v[⌊h⌋] + (h − ⌊h⌋)·(v[⌊h⌋+1] − v[⌊h⌋])`.
pub fn intensity_percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Argument("no valid hours for a percentile".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Argument(format!("percentile must be in [0, 1], got {p}")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&v, p))
}

fn percentile_sorted(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Σ generation × fixed intensity.
pub fn scenario_emissions(gen_mwh: &[f64], intensity: f64) -> f64 {
    gen_mwh.iter().map(|g| g * intensity).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantScenario {
    pub plant_id: String,
    pub ba_id: String,
    pub fuel: Fuel,
    pub capacity_factor: f64,
    pub cf_bucket: CfBucket,
    pub low_intensity: f64,
    pub high_intensity: f64,
    /// Tonnes.
    pub totals: ScenarioTotals,
    pub valid_hours: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub plant_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    /// One per region, sorted by region.
    pub results: Vec<ScenarioResult>,
    /// Sorted by plant id.
    pub plants: Vec<PlantScenario>,
    pub excluded: Vec<Exclusion>,
}

/// Valid (generation, mass) hours of one plant inside the window, grouped
/// by calendar year when `per_year`.
fn valid_hours(obs: &[&HourlyPlantObs], spec: &ScenarioSpec) -> BTreeMap<i32, Vec<(f64, f64)>> {
    let mut out: BTreeMap<i32, Vec<(f64, f64)>> = BTreeMap::new();
    for o in obs {
        let d = o.timestamp.date_naive();
        if !spec.window.contains(d) {
            continue;
        }
        if let (Some(g), Some(m)) = (o.gen_mwh, o.mass(spec.pollutant)) {
            if g > 0.0 {
                let key = if spec.per_year { d.year() } else { 0 };
                out.entry(key).or_default().push((g, m));
            }
        }
    }
    out
}

/// Scenario totals of one plant in native mass units at percentiles
/// `(p_low, p_high)`; also returns the intensities of the last group.
pub fn plant_totals(groups: &BTreeMap<i32, Vec<(f64, f64)>>, p_low: f64, p_high: f64) -> (ScenarioTotals, f64, f64) {
    let mut t = ScenarioTotals::default();
    let (mut il, mut ih) = (f64::NAN, f64::NAN);
    for hours in groups.values() {
        let mut ei: Vec<f64> = hours.iter().map(|(g, m)| m / g).collect();
        ei.sort_by(f64::total_cmp);
        il = percentile_sorted(&ei, p_low);
        ih = percentile_sorted(&ei, p_high);
        let gens: Vec<f64> = hours.iter().map(|(g, _)| *g).collect();
        t.add(ScenarioTotals {
            observed: hours.iter().map(|(_, m)| m).sum(),
            low: scenario_emissions(&gens, il),
            high: scenario_emissions(&gens, ih),
        });
    }
    (t, il, ih)
}

fn plant_scenario(meta: &PlantMeta, obs: &[&HourlyPlantObs], spec: &ScenarioSpec) -> Result<PlantScenario> {
    let groups = valid_hours(obs, spec);
    let n: usize = groups.values().map(Vec::len).sum();
    if n == 0 {
        return Err(Error::Argument(format!(
            "no hours with positive generation and reported {} in the window",
            spec.pollutant
        )));
    }
    let window_gen: f64 = obs
        .iter()
        .filter(|o| spec.window.contains(o.timestamp.date_naive()))
        .filter_map(|o| o.gen_mwh)
        .sum();
    let cf = capacity_factor(window_gen, meta.nameplate_mw, spec.window.hours() as f64)?.value;
    let (native, il, ih) = plant_totals(&groups, spec.p_low, spec.p_high);
    let p = spec.pollutant;
    Ok(PlantScenario {
        plant_id: meta.plant_id.clone(),
        ba_id: meta.ba_id.clone(),
        fuel: meta.fuel,
        capacity_factor: cf,
        cf_bucket: CfBucket::classify(cf, spec.cf_thresholds),
        low_intensity: il,
        high_intensity: ih,
        totals: ScenarioTotals {
            observed: p.to_tonnes(native.observed),
            low: p.to_tonnes(native.low),
            high: p.to_tonnes(native.high),
        },
        valid_hours: n,
    })
}

/// Per-region totals and fuel × capacity-factor breakdown. Plants without
/// valid hours are listed in `excluded`.
pub fn scenario_report(plants: &[PlantMeta], obs: &[HourlyPlantObs], spec: &ScenarioSpec) -> Result<ScenarioReport> {
    spec.validate()?;
    let mut by_plant: BTreeMap<&str, Vec<&HourlyPlantObs>> = BTreeMap::new();
    for o in obs {
        by_plant.entry(o.plant_id.as_str()).or_default().push(o);
    }
    let mut sorted: Vec<&PlantMeta> = plants.iter().collect();
    sorted.sort_by(|a, b| a.plant_id.cmp(&b.plant_id));
    let empty = Vec::new();
    let per_plant: Vec<(String, Result<PlantScenario>)> = sorted
        .par_iter()
        .map(|m| {
            let hours = by_plant.get(m.plant_id.as_str()).unwrap_or(&empty);
            (m.plant_id.clone(), plant_scenario(m, hours, spec))
        })
        .collect();

    let mut report = ScenarioReport::default();
    let mut regions: BTreeMap<String, BTreeMap<(Fuel, CfBucket), ScenarioTotals>> = BTreeMap::new();
    for (plant_id, r) in per_plant {
        match r {
            Ok(ps) => {
                regions
                    .entry(ps.ba_id.clone())
                    .or_default()
                    .entry((ps.fuel, ps.cf_bucket))
                    .or_default()
                    .add(ps.totals);
                report.plants.push(ps);
            }
            Err(e) => report.excluded.push(Exclusion {
                plant_id,
                reason: e.to_string(),
            }),
        }
    }
    for (region, cells) in regions {
        let mut total = ScenarioTotals::default();
        cells.values().for_each(|t| total.add(*t));
        report.results.push(ScenarioResult {
            region,
            pollutant: spec.pollutant,
            percentile_low: spec.p_low,
            percentile_high: spec.p_high,
            observed_total: total.observed,
            low_total: total.low,
            high_total: total.high,
            breakdown: cells
                .into_iter()
                .map(|((fuel, cf_bucket), totals)| BreakdownCell { fuel, cf_bucket, totals })
                .collect(),
        });
    }
    Ok(report)
}

pub const SCENARIO_HEADER: [&str; 7] = ["region", "pollutant", "fuel", "cf_bucket", "observed_t", "low_t", "high_t"];

/// Breakdown rows for every region.
pub fn scenario_csv(results: &[ScenarioResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SCENARIO_HEADER).map_err(std::io::Error::from)?;
    for r in results {
        for c in &r.breakdown {
            w.write_record([
                r.region.as_str(),
                r.pollutant.as_str(),
                c.fuel.as_str(),
                c.cf_bucket.as_str(),
                &c.totals.observed.to_string(),
                &c.totals.low.to_string(),
                &c.totals.high.to_string(),
            ])
            .map_err(std::io::Error::from)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Region totals with percentage changes relative to observed.
pub fn scenario_totals_json(results: &[ScenarioResult]) -> serde_json::Value {
    let pct = |x: f64, base: f64| if base > 0.0 { Some(100.0 * (x - base) / base) } else { None };
    serde_json::Value::Array(
        results
            .iter()
            .map(|r| {
                serde_json::json!({
                    "region": r.region,
                    "pollutant": r.pollutant,
                    "percentile_low": r.percentile_low,
                    "percentile_high": r.percentile_high,
                    "observed_t": r.observed_total,
                    "low_t": r.low_total,
                    "high_t": r.high_total,
                    "low_change_pct": pct(r.low_total, r.observed_total),
                    "high_change_pct": pct(r.high_total, r.observed_total),
                })
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, NaiveDate, TimeZone, Utc};

    #[test]
    fn percentile_examples() {
        assert_eq!(intensity_percentile(&[5.0, 1.0, 4.0, 2.0, 3.0], 0.5).unwrap(), 3.0);
        for p in [0.05, 0.1, 0.5, 0.9, 0.95] {
            assert_eq!(intensity_percentile(&[0.7; 9], p).unwrap(), 0.7);
        }
        // h = 3 × 0.9 = 2.7 → 3 + 0.7 × (10 − 3)
        let v = intensity_percentile(&[1.0, 2.0, 3.0, 10.0], 0.9).unwrap();
        assert!((v - 7.9).abs() < 1e-12);
        assert!(intensity_percentile(&[], 0.5).is_err());
    }

    #[test]
    fn emissions_examples() {
        assert_eq!(scenario_emissions(&[0.0; 5], 0.8), 0.0);
        assert_eq!(scenario_emissions(&[100.0], 0.5), 50.0);
    }

    fn window() -> DateRange {
        DateRange::new(NaiveDate::from_ymd_opt(2022, 1, 1).unwrap(), NaiveDate::from_ymd_opt(2022, 1, 2).unwrap())
    }

    fn meta(id: &str, fuel: Fuel) -> PlantMeta {
        PlantMeta {
            plant_id: id.into(),
            ba_id: "BA".into(),
            fuel,
            nameplate_mw: 100.0,
            stack_height_m: None,
            in_service_year: None,
        }
    }

    fn hours(id: &str, gens: &[f64], ei: impl Fn(usize) -> f64) -> Vec<HourlyPlantObs> {
        let t0 = Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap();
        gens.iter()
            .enumerate()
            .map(|(h, &g)| HourlyPlantObs {
                plant_id: id.into(),
                timestamp: t0 + Duration::hours(h as i64),
                gen_mwh: Some(g),
                co2_tons: Some(g * ei(h)),
                so2_kg: None,
                nox_kg: None,
            })
            .collect()
    }

    #[test]
    fn constant_intensity_plant_is_flat() {
        let gens: Vec<f64> = (0..48).map(|h| ((h * 13) % 90) as f64).collect();
        let obs = hours("a", &gens, |_| 0.375);
        let r = scenario_report(&[meta("a", Fuel::Ngcc)], &obs, &ScenarioSpec::new(Pollutant::Co2, window())).unwrap();
        let res = &r.results[0];
        assert_eq!(res.low_total, res.observed_total);
        assert_eq!(res.high_total, res.observed_total);
    }

    #[test]
    fn breakdown_and_exclusions() {
        let mut obs = hours("a", &[90.0; 48], |h| 0.4 + 0.01 * (h % 5) as f64);
        obs.extend(hours("b", &[10.0; 48], |h| 0.9 + 0.05 * (h % 3) as f64));
        obs.extend(hours("c", &[0.0; 48], |_| 1.0));
        let plants = [meta("a", Fuel::Ngcc), meta("b", Fuel::Coal), meta("c", Fuel::Ngct)];
        let r = scenario_report(&plants, &obs, &ScenarioSpec::new(Pollutant::Co2, window())).unwrap();
        assert_eq!(r.excluded.len(), 1);
        assert_eq!(r.excluded[0].plant_id, "c");
        let res = &r.results[0];
        assert_eq!(res.breakdown.len(), 2);
        let sum: f64 = res.breakdown.iter().map(|c| c.totals.high).sum();
        assert!((sum - res.high_total).abs() <= 1e-12 * res.high_total);
        assert!(res.low_total < res.observed_total && res.observed_total < res.high_total);
        let b = res.breakdown.iter().find(|c| c.fuel == Fuel::Coal).unwrap();
        assert_eq!(b.cf_bucket, CfBucket::Low);
        let csv = scenario_csv(&r.results).unwrap();
        assert!(csv.starts_with("region,pollutant,fuel,cf_bucket,observed_t,low_t,high_t\nBA,co2,coal,low,"));
    }

    #[test]
    fn kilogram_pollutants_reported_in_tonnes() {
        let t0 = Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap();
        let obs = vec![HourlyPlantObs {
            plant_id: "a".into(),
            timestamp: t0,
            gen_mwh: Some(10.0),
            co2_tons: None,
            so2_kg: Some(2000.0),
            nox_kg: None,
        }];
        let r = scenario_report(&[meta("a", Fuel::Coal)], &obs, &ScenarioSpec::new(Pollutant::So2, window())).unwrap();
        assert_eq!(r.results[0].observed_total, 2.0);
    }

    #[test]
    fn spec_validation() {
        let mut s = ScenarioSpec::appendix(Pollutant::Co2, window());
        assert_eq!((s.p_low, s.p_high), (0.05, 0.95));
        s.p_low = 0.99;
        assert!(s.validate().is_err());
    }
}
