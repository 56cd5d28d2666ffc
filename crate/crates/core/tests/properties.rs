use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use gridshift_core::displacement::{concentration, effectiveness, DEGENERACY_FLOOR};
use gridshift_core::domain::{
    DailyPanelRow, Dependent, ElasticityPair, FeTerm, Fuel, HourlyBaObs, HourlyPlantObs, ModelForm, PanelDataset,
    PlantMeta, Pollutant, Regressor, RegressionSpec, Resource,
};
use gridshift_core::ingest::{aggregate_daily, DateRange, PartnerConfig};
use gridshift_core::regress::absorb::max_group_mean;
use gridshift_core::regress::{absorb_fixed_effects, fe_groupings, fit_panel, transform, AbsorbPlan, ModelFrame};
use gridshift_core::scenario::{scenario_report, ScenarioSpec};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ts(day: i64, hour: i64) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 3, 1, 0, 0, 0).unwrap() + Duration::hours(day * 24 + hour)
}

fn meta(id: &str, fuel: Fuel) -> PlantMeta {
    PlantMeta {
        plant_id: id.into(),
        ba_id: "BA".into(),
        fuel,
        nameplate_mw: 500.0,
        stack_height_m: None,
        in_service_year: None,
    }
}

fn plant_hour(id: &str, t: DateTime<Utc>, gen: f64, ei: f64) -> HourlyPlantObs {
    HourlyPlantObs {
        plant_id: id.into(),
        timestamp: t,
        gen_mwh: Some(gen),
        co2_tons: Some(gen * ei),
        so2_kg: Some(gen * ei * 2.0),
        nox_kg: Some(gen * ei * 0.5),
    }
}

/// Random panel: `n` plants × `days` days from 2021-01-01 with positive
/// outcomes and regressors.
fn random_panel(seed: u64, n: usize, days: i64) -> PanelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
    let regional: Vec<(f64, f64, f64)> = (0..days)
        .map(|_| (rng.random_range(5e3..9e3), rng.random_range(1.0..900.0), rng.random_range(10.0..4e3)))
        .collect();
    let mut rows = Vec::new();
    for p in 0..n {
        for (d, &(ntd, solar, wind)) in regional.iter().enumerate() {
            let date = start + Duration::days(d as i64);
            let gen = rng.random_range(50.0..5e3);
            let mut r = DailyPanelRow {
                plant_id: format!("P{p}"),
                ba_id: "BA".into(),
                date,
                y_gen: gen,
                y_co2: Some(gen * rng.random_range(0.3..1.1)),
                y_so2: None,
                y_nox: None,
                y_ei_co2: None,
                y_ei_so2: None,
                y_ei_nox: None,
                demand: ntd + solar + wind,
                d_net_thermal: ntd,
                solar,
                wind,
                wind_ramp: 1.0,
                solar_ramp: 1.0,
                partner_wind: 1.0,
                partner_solar: 1.0,
                partner_demand: 1.0,
                hydro: 1.0,
                imports_pos: 1.0,
                exports_pos: 1.0,
                month_label: chrono::Datelike::month(&date),
                year_label: chrono::Datelike::year(&date),
            };
            r.derive_intensities();
            rows.push(r);
        }
    }
    PanelDataset::new(rows)
}

fn small_spec() -> RegressionSpec {
    RegressionSpec::new(Dependent::Generation, ModelForm::CompactNetdemand)
        .with_regressors([Regressor::NetThermalDemand, Regressor::Solar, Regressor::Wind])
        .with_fe_terms([FeTerm::Entity, FeTerm::Month])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn daily_generation_conserves_hourly_totals(seed in any::<u64>(), days in 1i64..6, missing in 0usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plants = vec![meta("a", Fuel::Coal), meta("b", Fuel::Ngcc)];
        let mut ba: Vec<HourlyBaObs> = (0..days * 24)
            .map(|h| HourlyBaObs {
                ba_id: "BA".into(),
                timestamp: ts(0, h),
                demand_mwh: 2000.0,
                wind_mwh: rng.random_range(0.0..300.0),
                solar_mwh: rng.random_range(0.0..200.0),
                hydro_mwh: 5.0,
                net_imports_mwh: 0.0,
            })
            .collect();
        for _ in 0..missing {
            let i = rng.random_range(0..ba.len());
            ba.remove(i);
        }
        let complete: BTreeSet<i64> = (0..days)
            .filter(|d| ba.iter().filter(|o| (o.timestamp - ts(0, 0)).num_hours().div_euclid(24) == *d).count() == 24)
            .collect();
        let obs: Vec<HourlyPlantObs> = plants
            .iter()
            .flat_map(|p| (0..days * 24).map(move |h| (p.plant_id.clone(), h)))
            .map(|(id, h)| plant_hour(&id, ts(0, h), rng.random_range(0.0f64..400.0).round(), 0.5))
            .collect();
        let expected: f64 = obs
            .iter()
            .filter(|o| complete.contains(&(o.timestamp - ts(0, 0)).num_hours().div_euclid(24)))
            .map(|o| o.gen_mwh.unwrap())
            .sum();
        let (panel, report) = aggregate_daily(&obs, &ba, &plants, &PartnerConfig::default(), &Default::default()).unwrap();
        let got: f64 = panel.rows.iter().map(|r| r.y_gen).sum();
        prop_assert!((got - expected).abs() <= 1e-9 * expected.max(1.0));
        prop_assert!(report.reconciles());
        prop_assert_eq!(report.input_plant_hours, report.used_plant_hours + report.dropped_total());

        let mut shuffled_obs = obs.clone();
        let mut shuffled_ba = ba.clone();
        shuffled_obs.shuffle(&mut rng);
        shuffled_ba.shuffle(&mut rng);
        let (again, _) = aggregate_daily(&shuffled_obs, &shuffled_ba, &plants, &PartnerConfig::default(), &Default::default()).unwrap();
        prop_assert_eq!(panel, again);
    }

    #[test]
    fn absorbed_columns_have_zero_group_means(seed in any::<u64>(), n in 2usize..6, days in 40i64..120) {
        let panel = random_panel(seed, n, days);
        let spec = small_spec().with_fe_terms([FeTerm::Entity, FeTerm::Month, FeTerm::Year, FeTerm::EntityMonth]);
        let frame = ModelFrame::from_panel(&panel, &spec);
        let t = transform(&frame, &spec).unwrap();
        let plan = AbsorbPlan::new(fe_groupings(&frame, &spec), 1e-12, 10_000).unwrap();
        let mut cols: Vec<Vec<f64>> = t.x.iter().map(|(_, c)| c.clone()).collect();
        cols.push(t.y.clone());
        absorb_fixed_effects(&mut cols, &plan).unwrap();
        let all = AbsorbPlan { nested: Vec::new(), ..AbsorbPlan::new(fe_groupings(&frame, &small_spec()), 1e-12, 1).unwrap() };
        for c in &cols {
            prop_assert!(max_group_mean(c, &plan) <= 1e-10);
            prop_assert!(max_group_mean(c, &all) <= 1e-10);
        }
    }

    #[test]
    fn fit_invariants(seed in any::<u64>(), n in 2usize..5) {
        let panel = random_panel(seed, n, 90);
        let spec = small_spec();
        let fit = fit_panel(&panel, &spec).unwrap();
        prop_assert!((0.0..=1.0).contains(&fit.r_squared));
        prop_assert!((0.0..=1.0).contains(&fit.r_squared_within));

        let frame = ModelFrame::from_panel(&panel, &spec);
        let t = transform(&frame, &spec).unwrap();
        let nobs = fit.residuals.len() as f64;
        for (_, col) in &t.x {
            let dot: f64 = col.iter().zip(&fit.residuals).map(|(x, e)| x * e).sum();
            let scale = col.iter().map(|v| v.abs()).fold(0.0, f64::max);
            prop_assert!(dot.abs() / nobs / scale <= 1e-9);
        }
        prop_assert_eq!(&fit, &fit_panel(&panel, &spec).unwrap());

        // Relabelling plants reorders rows, and so every summation.
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut names: Vec<usize> = (0..n).collect();
        names.shuffle(&mut rng);
        let renamed = PanelDataset::new(
            panel
                .rows
                .iter()
                .map(|r| {
                    let p: usize = r.plant_id[1..].parse().unwrap();
                    DailyPanelRow { plant_id: format!("Q{}", names[p]), ..r.clone() }
                })
                .collect(),
        );
        let other = fit_panel(&renamed, &spec).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&other.coefficients) {
            prop_assert!((a.estimate - b.estimate).abs() <= 1e-9);
        }
    }

    #[test]
    fn effectiveness_is_scale_invariant(a in -1.0f64..1.0, b in -1.0f64..1.0, c in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0]) {
        prop_assume!((a - b).abs() > 1e-3 && (c * (a - b)).abs() > DEGENERACY_FLOOR);
        let pair = |x: f64, y: f64| ElasticityPair::new("R", Resource::Wind, Pollutant::Co2, x, y);
        let e1 = effectiveness(&pair(a, b)).unwrap();
        let e2 = effectiveness(&pair(c * a, c * b)).unwrap();
        prop_assert!((e1 - e2).abs() <= 1e-12 * e1.abs().max(1.0));
        let unit = effectiveness(&pair(a, 0.0));
        prop_assert!(a.abs() <= DEGENERACY_FLOOR || unit == Some(1.0));
    }

    #[test]
    fn concentration_is_monotone_in_k(masses in prop::collection::vec(0.0f64..1e4, 1..30)) {
        prop_assume!(masses.iter().sum::<f64>() > 0.0);
        let named: Vec<(String, f64)> = masses.iter().enumerate().map(|(i, m)| (format!("p{i}"), *m)).collect();
        let mut prev = 0.0;
        for k in 1..=named.len() {
            let share = concentration(&named, k).unwrap().share;
            prop_assert!(share + 1e-15 >= prev && share <= 1.0 + 1e-12);
            prev = share;
        }
        prop_assert!((prev - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn scenario_percentile_properties(seed in any::<u64>(), n in 1usize..6, p in 0.01f64..0.98, q in 0.01f64..0.98) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fuels = [Fuel::Coal, Fuel::Ngcc, Fuel::Ngct];
        let plants: Vec<PlantMeta> = (0..n).map(|i| meta(&format!("s{i}"), fuels[i % 3])).collect();
        let obs: Vec<HourlyPlantObs> = plants
            .iter()
            .flat_map(|m| (0..72).map(move |h| (m.plant_id.clone(), h)))
            .map(|(id, h)| plant_hour(&id, ts(0, h), rng.random_range(0.0..500.0), rng.random_range(0.3..1.2)))
            .collect();
        let window = DateRange::new(NaiveDate::from_ymd_opt(2021, 3, 1).unwrap(), NaiveDate::from_ymd_opt(2021, 3, 3).unwrap());
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let spec = ScenarioSpec { p_low: lo, p_high: hi, ..ScenarioSpec::new(Pollutant::Co2, window) };
        let rep = scenario_report(&plants, &obs, &spec).unwrap();
        for plant in &rep.plants {
            prop_assert!(plant.totals.low <= plant.totals.high);
        }
        let r = &rep.results[0];
        prop_assert!(r.low_total <= r.high_total);
        let cells: f64 = r.breakdown.iter().map(|c| c.totals.high).sum();
        prop_assert!((cells - r.high_total).abs() <= 1e-6 * r.high_total.abs().max(1.0));

        let flat = ScenarioSpec { p_low: lo, p_high: lo, ..spec.clone() };
        let flat = &scenario_report(&plants, &obs, &flat).unwrap().results[0];
        prop_assert_eq!(flat.low_total, flat.high_total);

        let mut rev_plants = plants.clone();
        rev_plants.reverse();
        let rev_obs: Vec<HourlyPlantObs> = obs.chunks(72).rev().flatten().cloned().collect();
        let again = scenario_report(&rev_plants, &rev_obs, &spec).unwrap();
        prop_assert_eq!(&rep.results, &again.results);
    }
}

#[test]
fn scenario_totals_track_percentile_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let plants: Vec<PlantMeta> = (0..4).map(|i| meta(&format!("m{i}"), Fuel::Ngcc)).collect();
    let obs: Vec<HourlyPlantObs> = plants
        .iter()
        .flat_map(|m| (0..96).map(move |h| (m.plant_id.clone(), h)))
        .map(|(id, h)| plant_hour(&id, ts(0, h), rng.random_range(1.0..500.0), rng.random_range(0.3..1.2)))
        .collect();
    let window = DateRange::new(NaiveDate::from_ymd_opt(2021, 3, 1).unwrap(), NaiveDate::from_ymd_opt(2021, 3, 4).unwrap());
    let mut per_plant: BTreeMap<String, f64> = BTreeMap::new();
    let mut prev = f64::NEG_INFINITY;
    for p in [0.05, 0.2, 0.4, 0.6, 0.8, 0.95] {
        let spec = ScenarioSpec { p_low: p, p_high: p, ..ScenarioSpec::new(Pollutant::Co2, window) };
        let rep = scenario_report(&plants, &obs, &spec).unwrap();
        assert!(rep.results[0].low_total >= prev);
        prev = rep.results[0].low_total;
        for plant in &rep.plants {
            let last = per_plant.entry(plant.plant_id.clone()).or_insert(f64::NEG_INFINITY);
            assert!(plant.totals.low >= *last);
            *last = plant.totals.low;
        }
    }
}
