//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; run with
//! `cargo test -p gridshift-cli --test acceptance -- --nocapture` to see them.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::{NaiveDate, TimeZone, Utc};
use gridshift_core::displacement::{effectiveness_table, secondary_effect, FitMap};
use gridshift_core::domain::{
    Coefficient, DeltaSpec, Dependent, FeTerm, FitResult, Fuel, HourlyPlantObs, PlantMeta, Pollutant, Regressor,
    Resource, SeMode, ZeroRowPolicy,
};
use gridshift_core::ingest::DateRange;
use gridshift_core::regress::{
    delta_sweep, durbin_watson, durbin_watson_series, fit_panel, log_spaced, pearson_corr, DeltaGrid, SweepConfig,
};
use gridshift_core::scenario::{scenario_report, ScenarioSpec};
use gridshift_simgrid::dispatch::{generate_dispatch, DispatchDgp};
use gridshift_simgrid::loglinear::{generate_panel, SyntheticDgp};
use gridshift_simgrid::weather::HourlyWeather;
use gridshift_simgrid::{brute_force_fit, run_dispatch, DispatchKernel, DispatchPlant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!("{what} took {elapsed:.2?}, limit {limit:?}"))
    }
}

// ---------------------------------------------------------------- 1 ----

const REGIONS: [&str; 7] = ["CAISO", "PJM", "ISONE", "MISO", "SWPP", "ERCOT", "NYISO"];

/// (resource, pollutant, emissions elasticities, intensity elasticities,
/// published effectiveness) by region in [`REGIONS`] order.
#[allow(clippy::type_complexity)]
const PUBLISHED: [(Resource, Pollutant, [f64; 7], [f64; 7], [Option<f64>; 7]); 6] = [
    (
        Resource::Solar,
        Pollutant::Co2,
        [-0.262, 0.079, -0.000, -0.024, 0.036, 0.006, 0.000],
        [0.005, 0.002, 0.001, 0.008, -0.003, -0.013, 0.000],
        [Some(0.98), Some(1.02), Some(0.17), Some(0.76), Some(0.92), Some(0.33), Some(0.86)],
    ),
    (
        Resource::Solar,
        Pollutant::So2,
        [-0.263, 0.090, -0.031, -0.037, 0.013, 0.015, 0.000],
        [0.005, 0.019, -0.001, -0.001, -0.017, -0.021, 0.000],
        [Some(0.98), Some(1.26), Some(1.05), Some(1.03), Some(0.44), Some(0.41), Some(0.93)],
    ),
    (
        Resource::Solar,
        Pollutant::Nox,
        [-0.143, 0.100, 0.060, -0.005, 0.048, 0.007, 0.000],
        [0.121, 0.034, 0.078, 0.018, 0.009, -0.003, 0.000],
        [Some(0.54), Some(1.52), None, Some(0.21), Some(1.23), Some(0.68), Some(0.26)],
    ),
    (
        Resource::Wind,
        Pollutant::Co2,
        [-0.241, -0.071, -0.030, -0.178, -0.489, -0.351, -0.078],
        [-0.004, 0.004, 0.003, 0.014, 0.022, 0.014, -0.002],
        [Some(1.02), Some(0.95), Some(0.90), Some(0.93), Some(0.96), Some(0.96), Some(1.03)],
    ),
    (
        Resource::Wind,
        Pollutant::So2,
        [-0.240, -0.072, -0.030, -0.193, -0.558, -0.358, -0.065],
        [-0.004, 0.005, 0.017, -0.000, -0.048, 0.004, 0.013],
        [Some(1.02), Some(0.94), Some(0.64), Some(1.00), Some(1.09), Some(0.99), Some(0.84)],
    ),
    (
        Resource::Wind,
        Pollutant::Nox,
        [-0.171, -0.057, -0.009, -0.162, -0.495, -0.330, -0.062],
        [0.057, 0.013, 0.017, 0.026, 0.020, 0.045, 0.010],
        [Some(0.75), Some(0.81), Some(0.36), Some(0.86), Some(0.96), Some(0.88), Some(0.87)],
    ),
];

fn coefficient(reg: Regressor, estimate: f64) -> Coefficient {
    Coefficient {
        regressor: reg,
        estimate,
        std_error: 0.0,
        t_stat: None,
        p_value: None,
        dropped: false,
    }
}

fn stub_fit(dependent: Dependent, coefs: Vec<Coefficient>) -> FitResult {
    FitResult {
        dependent,
        coefficients: coefs,
        r_squared: 0.0,
        r_squared_within: 0.0,
        n_obs: 0,
        dof: 0,
        dof_absorbed: 0,
        se_mode: SeMode::Hc1Robust,
        sweeps: 0,
        residuals: Vec::new(),
        residual_entity: Vec::new(),
        residual_time: Vec::new(),
        entity_labels: Vec::new(),
    }
}

/// Range of `a/(a−b)` over the box of values that round to (a, b) at three
/// decimals; unbounded when the box touches `a = b`.
fn rounding_interval(a: f64, b: f64) -> (f64, f64) {
    let h = 0.0005;
    if (a - b).abs() <= 2.0 * h {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..=20 {
        for j in 0..=20 {
            let (x, y) = (a - h + 2.0 * h * i as f64 / 20.0, b - h + 2.0 * h * j as f64 / 20.0);
            let e = x / (x - y);
            lo = lo.min(e);
            hi = hi.max(e);
        }
    }
    (lo, hi)
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let mut fits: FitMap = BTreeMap::new();
    for (resource, pollutant, em, ei, _) in &PUBLISHED {
        for (r, region) in REGIONS.iter().enumerate() {
            for (dep, v) in [(pollutant.emissions(), em[r]), (pollutant.intensity(), ei[r])] {
                fits.entry((region.to_string(), dep))
                    .or_insert_with(|| stub_fit(dep, Vec::new()))
                    .coefficients
                    .push(coefficient(resource.regressor(), v));
            }
        }
    }
    let cells = effectiveness_table(&fits);
    let lookup = |region: &str, res: Resource, pol: Pollutant| {
        cells
            .iter()
            .find(|c| c.region == region && c.resource == res && c.pollutant == pol)
            .expect("cell present")
    };

    let (mut matched, mut limited, mut not_comparable) = (0, Vec::new(), Vec::new());
    for (resource, pollutant, em, ei, published) in &PUBLISHED {
        for (r, region) in REGIONS.iter().enumerate() {
            let name = format!("{region} {resource} {pollutant}");
            let cell = lookup(region, *resource, *pollutant);
            // 0.000 (0.000) on both sides is a rank-dropped placeholder.
            let inputs_published = !(em[r] == 0.0 && ei[r] == 0.0);
            let (Some(want), true) = (published[r], inputs_published) else {
                not_comparable.push(format!("{name} (computed {})", cell.render()));
                continue;
            };
            let got = cell.effectiveness.ok_or_else(|| format!("{name}: undefined, published {want}"))?;
            if (got - want).abs() <= 0.02 {
                matched += 1;
                continue;
            }
            let (lo, hi) = rounding_interval(em[r], ei[r]);
            ensure!(
                hi - lo > 0.04 && (lo..=hi).contains(&want),
                "{name}: computed {got:.4}, published {want}, rounding interval [{lo:.3}, {hi:.3}]"
            );
            limited.push(format!("{name} computed {got:.2} vs {want}"));
        }
    }
    for (region, res, pol, want) in [
        ("CAISO", Resource::Solar, Pollutant::Co2, 0.98),
        ("CAISO", Resource::Wind, Pollutant::Co2, 1.02),
        ("MISO", Resource::Wind, Pollutant::Co2, 0.93),
        ("SWPP", Resource::Wind, Pollutant::Co2, 0.96),
        ("CAISO", Resource::Solar, Pollutant::Nox, 0.54),
        ("CAISO", Resource::Wind, Pollutant::Nox, 0.75),
        ("ERCOT", Resource::Solar, Pollutant::Co2, 0.33),
    ] {
        let got = lookup(region, res, pol).effectiveness.unwrap_or(f64::NAN);
        ensure!((got - want).abs() <= 0.02, "spot check {region} {res} {pol}: {got:.4} vs {want}");
    }
    within(t0.elapsed(), Duration::from_secs(1), "table")?;
    Ok(format!(
        "{matched} cells within ±0.02, 7 spot checks hold; ROUNDING-LIMITED: [{}]; not comparable: [{}]",
        limited.join("; "),
        not_comparable.join("; ")
    ))
}

// ---------------------------------------------------------------- 2 ----

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let dgp = SyntheticDgp::default();
    let spec = dgp.matching_spec(Dependent::Generation, SeMode::Hc1Robust);
    let seeds: Vec<u64> = (0..100).collect();
    let hits: Vec<(bool, bool)> = seeds
        .par_iter()
        .map(|&seed| {
            let out = generate_panel(&dgp, seed, false).map_err(|e| e.to_string())?;
            let fit = fit_panel(&out.panel, &spec).map_err(|e| e.to_string())?;
            let covered = |reg: Regressor| {
                let c = fit.coef(reg).expect("fitted");
                (c.estimate - out.truth.generation[&reg]).abs() <= 3.0 * c.std_error
            };
            Ok((covered(Regressor::Solar), covered(Regressor::Wind)))
        })
        .collect::<Result<_, String>>()?;
    let solar = hits.iter().filter(|h| h.0).count();
    let wind = hits.iter().filter(|h| h.1).count();
    ensure!(solar >= 95 && wind >= 95, "coverage within 3 SE: solar {solar}/100, wind {wind}/100");

    let quiet = SyntheticDgp {
        noise_sigma: 0.0,
        ..dgp.clone()
    };
    let out = generate_panel(&quiet, 1, false).map_err(|e| e.to_string())?;
    let fit = fit_panel(&out.panel, &spec).map_err(|e| e.to_string())?;
    let worst = fit
        .coefficients
        .iter()
        .map(|c| (c.estimate - out.truth.generation[&c.regressor]).abs())
        .fold(0.0, f64::max);
    ensure!(worst <= 1e-8, "noiseless recovery error {worst:e}");
    within(t0.elapsed(), Duration::from_secs(300), "recovery suite")?;
    Ok(format!(
        "within 3 SE: solar {solar}/100, wind {wind}/100; noiseless max error {worst:.1e}; {:.1?}",
        t0.elapsed()
    ))
}

// ---------------------------------------------------------------- 3 ----

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let all_terms = [FeTerm::Entity, FeTerm::Month, FeTerm::Year, FeTerm::EntityMonth];
    let se_modes = [SeMode::Classical, SeMode::Hc1Robust, SeMode::ClusterByEntity];
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let mut betas = BTreeMap::new();
        betas.insert(Regressor::NetThermalDemand, rng.random_range(0.5..2.0));
        betas.insert(Regressor::Solar, rng.random_range(-0.3..0.1));
        betas.insert(Regressor::Wind, rng.random_range(-0.5..0.0));
        let dgp = SyntheticDgp {
            partner: None,
            days: 730,
            n_entities: rng.random_range(2..=5),
            betas,
            ei_alphas: BTreeMap::new(),
            noise_sigma: rng.random_range(0.05..0.4),
            ..SyntheticDgp::default()
        };
        let terms: Vec<FeTerm> = loop {
            let t: Vec<FeTerm> = all_terms.iter().copied().filter(|_| rng.random_bool(0.6)).collect();
            if !t.is_empty() {
                break t;
            }
        };
        let mut spec = dgp
            .matching_spec(Dependent::Generation, se_modes[case % 3])
            .with_fe_terms(terms.clone());
        spec.month_of_sample = rng.random_bool(0.3);
        let out = generate_panel(&dgp, 100 + case as u64, false).map_err(|e| e.to_string())?;
        let fast = fit_panel(&out.panel, &spec).map_err(|e| e.to_string())?;
        let slow = brute_force_fit(&out.panel, &spec).map_err(|e| e.to_string())?;
        for c in &fast.coefficients {
            let d = (c.estimate - slow.estimate(c.regressor).unwrap_or(f64::NAN)).abs();
            ensure!(d <= 1e-8, "case {case} ({terms:?}) {}: |Δ| = {d:e}", c.regressor.as_str());
            worst = worst.max(d);
        }
    }
    within(t0.elapsed(), Duration::from_secs(10), "oracle comparison")?;
    Ok(format!("20 instances, max slope difference {worst:.1e}; {:.1?}", t0.elapsed()))
}

// ---------------------------------------------------------------- 4 ----

fn max_gap(a: &[(Regressor, f64)], b: &BTreeMap<Regressor, f64>) -> f64 {
    a.iter().map(|(r, v)| (v - b[r]).abs()).fold(0.0, f64::max)
}

fn criterion_4() -> Outcome {
    let dgp = SyntheticDgp::default();
    let out = generate_panel(&dgp, 4, false).map_err(|e| e.to_string())?;
    let spec = dgp.matching_spec(Dependent::Generation, SeMode::Hc1Robust);
    let plain = fit_panel(&out.panel, &spec.clone().with_delta(DeltaSpec::none())).map_err(|e| e.to_string())?;
    let base: BTreeMap<Regressor, f64> = plain.coefficients.iter().map(|c| (c.regressor, c.estimate)).collect();
    let cfg = SweepConfig::for_spec(&spec, DeltaGrid::RelativeToMean(vec![1e-6]));
    let rows = delta_sweep(&out.panel, &spec, &cfg).map_err(|e| e.to_string())?;
    let mut positive_gap: f64 = 0.0;
    for row in &rows {
        let coefs: Vec<(Regressor, f64)> = row.coefficients.iter().map(|c| (c.regressor, c.estimate)).collect();
        positive_gap = positive_gap.max(max_gap(&coefs, &base));
    }
    ensure!(positive_gap < 1e-4, "Δ = 1e-6 × mean moved a slope by {positive_gap:e}");

    let zeros = SyntheticDgp {
        zero_share: 0.2,
        ..dgp
    };
    let out = generate_panel(&zeros, 4, false).map_err(|e| e.to_string())?;
    let cfg = SweepConfig::for_spec(&spec, DeltaGrid::RelativeToMean(log_spaced(1e-6, 1.0, 7)));
    let rows = delta_sweep(&out.panel, &spec, &cfg).map_err(|e| e.to_string())?;
    let solar = |policy: ZeroRowPolicy, delta: f64| {
        rows.iter()
            .find(|r| r.policy == policy && r.delta == delta)
            .and_then(|r| r.coefficients.iter().find(|c| c.regressor == Regressor::Solar))
            .map(|c| c.estimate)
            .expect("sweep row")
    };
    let grid = cfg.grid.values();
    let divergence: Vec<f64> = grid
        .iter()
        .map(|&d| solar(ZeroRowPolicy::Offset, d) - solar(ZeroRowPolicy::Drop, d))
        .collect();
    ensure!(divergence.iter().all(|d| d.is_finite()), "non-finite divergence {divergence:?}");
    let largest = divergence.iter().map(|d| d.abs()).fold(0.0, f64::max);
    ensure!(largest > 1e-3, "policies agree to {largest:e} with 20% zero days");
    let drift = solar(ZeroRowPolicy::Offset, grid[0]) - solar(ZeroRowPolicy::Offset, grid[grid.len() - 1]);
    Ok(format!(
        "positive data: max |Δβ| {positive_gap:.1e} at 1e-6×mean; 20% zeros: solar offset−drop from {:+.4} (Δ=1e-6×mean) to {:+.4} (Δ=mean), offset-policy solar moves {drift:+.4} across the grid",
        divergence[0],
        divergence[divergence.len() - 1]
    ))
}

// ---------------------------------------------------------------- 5 ----

fn ts(day: i64, hour: u32) -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 1, 1, hour, 0, 0).unwrap() + chrono::Duration::days(day)
}

fn window(days: i64) -> DateRange {
    let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
    DateRange::new(start, start + chrono::Duration::days(days - 1))
}

fn meta(id: &str, fuel: Fuel, nameplate: f64) -> PlantMeta {
    PlantMeta {
        plant_id: id.to_string(),
        ba_id: "R".into(),
        fuel,
        nameplate_mw: nameplate,
        stack_height_m: None,
        in_service_year: None,
    }
}

fn obs(id: &str, day: i64, hour: u32, gen: f64, co2: f64) -> HourlyPlantObs {
    HourlyPlantObs {
        plant_id: id.to_string(),
        timestamp: ts(day, hour),
        gen_mwh: Some(gen),
        co2_tons: Some(co2),
        so2_kg: None,
        nox_kg: None,
    }
}

/// Per-plant totals recomputed from scratch: sorted intensities,
/// interpolated order statistic, Σ gen × percentile intensity.
fn recompute(hours: &[(f64, f64)], p: f64) -> f64 {
    let mut ei: Vec<f64> = hours.iter().map(|(g, m)| m / g).collect();
    ei.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (ei.len() - 1) as f64 * p;
    let k = h.floor() as usize;
    let q = if k + 1 < ei.len() { ei[k] + (h - k as f64) * (ei[k + 1] - ei[k]) } else { ei[k] };
    hours.iter().map(|(g, _)| g * q).sum()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let days = 30;

    // Integer generation, dyadic intensities: every product and sum is exact.
    let fuels = [Fuel::Coal, Fuel::Ngcc, Fuel::Ngct];
    let plants: Vec<PlantMeta> = (0..6).map(|i| meta(&format!("C{i}"), fuels[i % 3], 600.0)).collect();
    let mut hours = Vec::new();
    for (i, p) in plants.iter().enumerate() {
        let ei = (3 + i) as f64 / 8.0;
        for d in 0..days {
            for h in 0..24 {
                let g = rng.random_range(0..=600) as f64;
                hours.push(obs(&p.plant_id, d, h, g, g * ei));
            }
        }
    }
    let rep = scenario_report(&plants, &hours, &ScenarioSpec::new(Pollutant::Co2, window(days)))
        .map_err(|e| e.to_string())?;
    for r in &rep.results {
        ensure!(
            r.low_total == r.observed_total && r.high_total == r.observed_total,
            "constant fleet: low {} observed {} high {}",
            r.low_total,
            r.observed_total,
            r.high_total
        );
    }

    let grid = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95];
    let mut worst_add: f64 = 0.0;
    for fleet in 0..50 {
        let n = rng.random_range(3..=10);
        let plants: Vec<PlantMeta> = (0..n)
            .map(|i| meta(&format!("F{i}"), fuels[i % 3], rng.random_range(100.0..800.0)))
            .collect();
        let mut hours = Vec::new();
        for p in &plants {
            let center = LogNormal::new(rng.random_range(-1.0..0.3), 0.3).unwrap();
            let level = center.sample(&mut rng);
            let spread = LogNormal::new(0.0, rng.random_range(0.02..0.4)).unwrap();
            for d in 0..10 {
                for h in 0..24 {
                    let g = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..p.nameplate_mw) };
                    hours.push(obs(&p.plant_id, d, h, g, g * level * spread.sample(&mut rng)));
                }
            }
        }
        let mut prev = f64::NEG_INFINITY;
        for w in grid.windows(2) {
            let spec = ScenarioSpec {
                p_low: w[0],
                p_high: w[1],
                ..ScenarioSpec::new(Pollutant::Co2, window(10))
            };
            let rep = scenario_report(&plants, &hours, &spec).map_err(|e| e.to_string())?;
            let r = &rep.results[0];
            ensure!(r.low_total <= r.high_total, "fleet {fleet}: low > high at {w:?}");
            ensure!(prev <= r.low_total, "fleet {fleet}: totals not monotone in the percentile at {}", w[0]);
            prev = r.high_total;
            let sum = |f: &dyn Fn(&gridshift_core::domain::ScenarioTotals) -> f64| -> f64 {
                r.breakdown.iter().map(|c| f(&c.totals)).sum()
            };
            for (part, whole) in [
                (sum(&|t| t.observed), r.observed_total),
                (sum(&|t| t.low), r.low_total),
                (sum(&|t| t.high), r.high_total),
                (rep.plants.iter().map(|p| p.totals.low).sum(), r.low_total),
            ] {
                worst_add = worst_add.max((part - whole).abs() / whole.abs().max(1.0));
            }
        }
    }
    ensure!(worst_add <= 1e-6, "breakdown additivity error {worst_add:e}");

    // Part-load dispatch: direct per-plant recomputation agrees.
    let data = generate_dispatch(
        &DispatchDgp {
            days: 60,
            n_plants: 12,
            ..DispatchDgp::default()
        },
        9,
    )
    .map_err(|e| e.to_string())?;
    let rep = scenario_report(&data.plants, &data.plant_hours, &ScenarioSpec::new(Pollutant::Co2, window(60)))
        .map_err(|e| e.to_string())?;
    let mut by_plant: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for o in &data.plant_hours {
        if let (Some(g), Some(m)) = (o.gen_mwh, o.co2_tons) {
            if g > 0.0 {
                by_plant.entry(o.plant_id.as_str()).or_default().push((g, m));
            }
        }
    }
    let (low, high): (f64, f64) = by_plant
        .values()
        .map(|h| (recompute(h, 0.1), recompute(h, 0.9)))
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let r = &rep.results[0];
    let rel = ((r.low_total - low) / low).abs().max(((r.high_total - high) / high).abs());
    ensure!(rel <= 1e-9, "dispatch scenario vs recomputation: relative gap {rel:e}");
    ensure!(
        r.low_total < r.observed_total && r.observed_total < r.high_total,
        "dispatch scenario ordering low {} observed {} high {}",
        r.low_total,
        r.observed_total,
        r.high_total
    );
    Ok(format!(
        "constant fleet exact; 50 fleets monotone, additivity {worst_add:.1e}; dispatch gaps {:+.2}% / {:+.2}% match recomputation to {rel:.1e}",
        100.0 * (r.low_total / r.observed_total - 1.0),
        100.0 * (r.high_total / r.observed_total - 1.0)
    ))
}

// ---------------------------------------------------------------- 6 ----

fn flat_plant(id: &str, fuel: Fuel, cost: f64, co2: f64) -> DispatchPlant {
    DispatchPlant {
        plant_id: id.into(),
        fuel,
        nameplate_mw: 1000.0,
        marginal_cost: cost,
        co2_t_per_mwh: co2,
        so2_kg_per_mwh: 0.0,
        nox_kg_per_mwh: 0.0,
        part_load_penalty: 0.0,
        min_stable_fraction: 0.0,
        ramp_mw_per_h: 1000.0,
    }
}

fn criterion_6() -> Outcome {
    let (e_clean, e_dirty) = (0.4, 1.0);
    let kernel = DispatchKernel {
        plants: vec![flat_plant("clean", Fuel::Ngcc, 10.0, e_clean), flat_plant("dirty", Fuel::Coal, 30.0, e_dirty)],
        allow_curtailment: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let weather: Vec<HourlyWeather> = (0..96)
        .map(|i| HourlyWeather {
            timestamp: ts(0, 0) + chrono::Duration::hours(i),
            demand: rng.random_range(1500.0..1900.0),
            wind: rng.random_range(0.0..450.0),
            solar: 0.0,
            hydro: 0.0,
            net_imports: 0.0,
        })
        .collect();
    let actual = run_dispatch(&kernel, &weather, "R").map_err(|e| e.to_string())?;
    let cf = run_dispatch(&kernel, &gridshift_simgrid::dispatch::without_renewables(&weather), "R")
        .map_err(|e| e.to_string())?;
    let g_r = actual.renewable_mwh;
    let ei_thermal = actual.totals.co2_t / actual.totals.gen_mwh;
    let observed = cf.totals.co2_t - actual.totals.co2_t;
    let split = secondary_effect(observed, g_r, ei_thermal).map_err(|e| e.to_string())?;
    // Every renewable MWh backs down the dirty unit.
    let closed: f64 = weather.iter().map(|w| w.wind * (e_dirty - ei_thermal)).sum();
    let rel = (split.f - closed).abs() / closed.abs();
    ensure!(split.effectiveness > 1.0, "E = {}", split.effectiveness);
    ensure!(rel <= 1e-9, "F simulated {} vs closed form {closed}: relative {rel:e}", split.f);
    Ok(format!(
        "E = {:.4} > 1, F = {:.3} t (closed form {closed:.3}, relative gap {rel:.1e})",
        split.effectiveness, split.f
    ))
}

// ---------------------------------------------------------------- 7 ----

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = 10_000;
    let e: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let entity = vec![0u32; n];
    let time: Vec<i64> = (0..n as i64).collect();
    let dw = durbin_watson(&e, &entity, &time).map_err(|e| e.to_string())?.pooled;
    ensure!((1.9..=2.1).contains(&dw), "iid DW {dw}");
    let flat = durbin_watson_series(&vec![0.3; 500]).unwrap_or(f64::NAN);
    ensure!(flat == 0.0, "persistent DW {flat}");
    let x: Vec<f64> = (0..200).map(|_| normal.sample(&mut rng)).collect();
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    let (p, q) = (pearson_corr(&x, &x).map_err(|e| e.to_string())?, pearson_corr(&x, &neg).map_err(|e| e.to_string())?);
    ensure!(p == 1.0 && q == -1.0, "pearson {p}, {q}");
    Ok(format!("iid DW {dw:.4}; constant residuals DW 0; pearson ±1 exact"))
}

// ---------------------------------------------------------------- 8 ----

fn run_cli(config: &Path, args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_gridshift"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env_remove("GRIDSHIFT_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        status.status.success(),
        "gridshift {args:?} failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    Ok(())
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let cfg = dir.join("gridshift.toml");
        std::fs::write(
            &cfg,
            "output_dir = \"out\"\nseed = 11\n\n[simulate.loglinear]\ndays = 365\nn_entities = 12\n",
        )
        .map_err(|e| e.to_string())?;
        run_cli(&cfg, &["report", "--delta-sweep"])?;
        trees.push(tree(&dir.join("out")));
    }
    ensure!(trees[0].len() > 10, "only {} output files", trees[0].len());
    ensure!(
        trees[0].keys().eq(trees[1].keys()),
        "file sets differ: {:?} vs {:?}",
        trees[0].keys().collect::<Vec<_>>(),
        trees[1].keys().collect::<Vec<_>>()
    );
    let differing: Vec<&String> = trees[0].iter().filter(|(k, v)| trees[1][*k] != **v).map(|(k, _)| k).collect();
    ensure!(differing.is_empty(), "outputs differ between runs: {differing:?}");

    let dgp = SyntheticDgp {
        days: 2000,
        n_entities: 100,
        ..SyntheticDgp::default()
    };
    let out = generate_panel(&dgp, 8, false).map_err(|e| e.to_string())?;
    let spec = dgp.matching_spec(Dependent::Generation, SeMode::Hc1Robust);
    let t0 = Instant::now();
    let fit = fit_panel(&out.panel, &spec).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    ensure!(fit.n_obs == 200_000, "{} observations", fit.n_obs);
    within(elapsed, Duration::from_secs(60), "200k-row fit")?;
    Ok(format!(
        "{} files byte-identical across two runs; 200k obs × 1200 entity-month groups fit in {elapsed:.2?}",
        trees[0].len()
    ))
}

// -------------------------------------------------------------- suite ----

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 effectiveness table", criterion_1),
        ("2 estimator recovery", criterion_2),
        ("3 absorbed vs dummy OLS", criterion_3),
        ("4 offset sensitivity", criterion_4),
        ("5 scenario accounting", criterion_5),
        ("6 secondary effect", criterion_6),
        ("7 residual diagnostics", criterion_7),
        ("8 determinism and scale", criterion_8),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                println!("FAIL  {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
