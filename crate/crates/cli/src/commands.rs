//! Pipeline stages. Each stage reads what it needs, writes its tables into
//! the output directory and reports failure through [`Failure`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use gridshift_core::displacement::{concentration, displaced_mass, effectiveness_csv, effectiveness_table, FitMap};
use gridshift_core::domain::{
    Coefficient, Dependent, FitResult, HourlyBaObs, HourlyPlantObs, PanelDataset, PlantMeta, Regressor, Resource,
    SeMode,
};
use gridshift_core::ingest::{
    aggregate_daily, coverage_filter, load_ba_hours, load_plant_hours, load_plants, AggregateOptions, DateRange,
    IngestReport, PartnerConfig,
};
use gridshift_core::plantols::{
    fit_all_plants, fit_all_plants_daily, group_summary, plant_fits_csv, Granularity, PlantBatch, PlantFit,
};
use gridshift_core::regress::{delta_sweep, durbin_watson, fit_panel, pearson_corr, table1_csv, table1_json, SweepConfig};
use gridshift_core::scenario::{scenario_csv, scenario_report, scenario_totals_json, ScenarioSpec};
use gridshift_simgrid::dispatch::generate_dispatch;
use gridshift_simgrid::emit::{write_dataset, Dataset};
use gridshift_simgrid::generate_panel;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{Generator, InputPaths, RunConfig};
use crate::manifest::Manifest;
use crate::Failure;

pub const FITS_FILE: &str = "fits.json";
pub const PLANT_FITS_JSON: &str = "plant_fits.json";
pub const DATA_DIR: &str = "data";

/// Command-line switches that modify a stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub delta_sweep: bool,
    pub appendix: bool,
    pub drop_zero_rows: bool,
    pub plants: bool,
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    std::fs::write(dir.join(name), contents).map_err(|e| Failure::data(format!("writing {name}: {e}")))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), Failure> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    write(dir, name, s)
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::data(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

// ---------------------------------------------------------------------------
// Data loading

pub struct LoadedData {
    pub paths: InputPaths,
    pub plants: Vec<PlantMeta>,
    pub plant_hours: Vec<HourlyPlantObs>,
    pub ba_hours: Vec<HourlyBaObs>,
    pub partners: PartnerConfig,
    pub window: DateRange,
    /// Plants passing the coverage filter.
    pub retained: BTreeSet<String>,
    pub panel: PanelDataset,
    pub report: IngestReport,
}

impl LoadedData {
    pub fn retained_plants(&self) -> Vec<PlantMeta> {
        self.plants.iter().filter(|p| self.retained.contains(&p.plant_id)).cloned().collect()
    }

    pub fn add_inputs(&self, m: &mut Manifest) -> Result<(), Failure> {
        m.add_input("plants", &self.paths.plants)?;
        m.add_input("plant_hours", &self.paths.plant_hours)?;
        m.add_input("ba_hours", &self.paths.ba_hours)?;
        if let Some(p) = &self.paths.partners {
            m.add_input("partners", p)?;
        }
        Ok(())
    }
}

fn data_span(obs: &[HourlyPlantObs]) -> Option<DateRange> {
    let dates = obs.iter().map(|o| o.timestamp.date_naive());
    let (lo, hi) = dates.fold((NaiveDate::MAX, NaiveDate::MIN), |(lo, hi), d| (lo.min(d), hi.max(d)));
    (lo <= hi).then(|| DateRange::new(lo, hi))
}

pub fn load_data(cfg: &RunConfig) -> Result<LoadedData, Failure> {
    let paths = cfg.inputs.resolve()?;
    let plants = load_plants(&paths.plants).map_err(Failure::from_ingest)?;
    let plant_hours = load_plant_hours(&paths.plant_hours, &plants).map_err(Failure::from_ingest)?;
    let ba_hours = load_ba_hours(&paths.ba_hours).map_err(Failure::from_ingest)?;
    let partners = match &paths.partners {
        Some(p) => PartnerConfig::load(p).map_err(|e| Failure::config(format!("inputs.partners: {e}")))?,
        None => PartnerConfig::default(),
    };
    let window = match cfg.ingest.window {
        Some(w) => w,
        None => data_span(&plant_hours).ok_or_else(|| Failure::data("plant_hours: no observations"))?,
    };
    let retained =
        coverage_filter(&plant_hours, window, cfg.ingest.coverage_threshold).map_err(Failure::from_ingest)?;
    let opts = AggregateOptions {
        ramp_mode: cfg.ingest.ramp_mode,
        utc_offset_hours: cfg.ingest.utc_offset_hours.clone(),
        retained: Some(retained.clone()),
        window: Some(window),
    };
    let (panel, report) =
        aggregate_daily(&plant_hours, &ba_hours, &plants, &partners, &opts).map_err(Failure::from_ingest)?;
    Ok(LoadedData {
        paths,
        plants,
        plant_hours,
        ba_hours,
        partners,
        window,
        retained,
        panel,
        report,
    })
}

// ---------------------------------------------------------------------------
// simulate

/// Generate a dataset into `dir` and return the directory.
pub fn simulate_into(cfg: &RunConfig, dir: &Path) -> Result<PathBuf, Failure> {
    let seed = cfg.seed;
    match cfg.simulate.generator {
        Generator::Loglinear => {
            let dgp = &cfg.simulate.loglinear;
            let out = generate_panel(dgp, seed, true)?;
            let mut partners = PartnerConfig::default();
            if let Some(p) = &dgp.partner {
                partners.partners.insert(dgp.region.clone(), vec![p.clone()]);
            }
            let truth = json!({
                "generator": "loglinear",
                "seed": seed,
                "elasticities": out.truth,
                "dgp": dgp,
            });
            let data = Dataset {
                plants: &out.plants,
                plant_hours: &out.plant_hours,
                ba_hours: &out.ba_hours,
                partners: &partners,
            };
            write_dataset(dir, data, &truth)?;
        }
        Generator::Dispatch => {
            let dgp = &cfg.simulate.dispatch;
            let out = generate_dispatch(dgp, seed)?;
            let truth = json!({
                "generator": "dispatch",
                "seed": seed,
                "counterfactual": out.truth,
                "displaced_co2_t_per_mwh": out.truth.displaced_co2_per_mwh(),
                "dgp": dgp,
                "kernel": out.kernel,
            });
            let data = Dataset {
                plants: &out.plants,
                plant_hours: &out.plant_hours,
                ba_hours: &out.ba_hours,
                partners: &out.partners,
            };
            write_dataset(dir, data, &truth)?;
        }
    }
    Ok(dir.to_path_buf())
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), Failure> {
    let out = cfg.prepare_output()?;
    simulate_into(cfg, &out.join(DATA_DIR))?;
    Manifest::new("simulate", cfg).write(&out)
}

// ---------------------------------------------------------------------------
// fit

/// One panel fit as stored in `fits.json`; also the input format of the
/// displacement stage, where only region, dependent and coefficient
/// estimates are required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub region: String,
    pub dependent: Dependent,
    pub coefficients: Vec<CoefRecord>,
    #[serde(default)]
    pub r_squared: f64,
    #[serde(default)]
    pub r_squared_within: f64,
    #[serde(default)]
    pub n_obs: usize,
    #[serde(default)]
    pub dof: usize,
    #[serde(default)]
    pub dof_absorbed: usize,
    #[serde(default)]
    pub se_mode: SeMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefRecord {
    pub regressor: Regressor,
    pub estimate: f64,
    #[serde(default)]
    pub std_error: f64,
    #[serde(default)]
    pub t_stat: Option<f64>,
    #[serde(default)]
    pub p_value: Option<f64>,
    #[serde(default)]
    pub dropped: bool,
}

impl FitRecord {
    pub fn from_fit(region: &str, fit: &FitResult) -> FitRecord {
        FitRecord {
            region: region.to_string(),
            dependent: fit.dependent,
            coefficients: fit
                .coefficients
                .iter()
                .map(|c| CoefRecord {
                    regressor: c.regressor,
                    estimate: c.estimate,
                    std_error: c.std_error,
                    t_stat: c.t_stat,
                    p_value: c.p_value,
                    dropped: c.dropped,
                })
                .collect(),
            r_squared: fit.r_squared,
            r_squared_within: fit.r_squared_within,
            n_obs: fit.n_obs,
            dof: fit.dof,
            dof_absorbed: fit.dof_absorbed,
            se_mode: fit.se_mode,
        }
    }

    pub fn to_fit(&self) -> FitResult {
        FitResult {
            dependent: self.dependent,
            coefficients: self
                .coefficients
                .iter()
                .map(|c| Coefficient {
                    regressor: c.regressor,
                    estimate: c.estimate,
                    std_error: c.std_error,
                    t_stat: c.t_stat,
                    p_value: c.p_value,
                    dropped: c.dropped,
                })
                .collect(),
            r_squared: self.r_squared,
            r_squared_within: self.r_squared_within,
            n_obs: self.n_obs,
            dof: self.dof,
            dof_absorbed: self.dof_absorbed,
            se_mode: self.se_mode,
            sweeps: 0,
            residuals: Vec::new(),
            residual_entity: Vec::new(),
            residual_time: Vec::new(),
            entity_labels: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    pub region: String,
    pub dependent: Dependent,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FitDiagnostics {
    region: String,
    dependent: Dependent,
    durbin_watson_mean: Option<f64>,
    durbin_watson_pooled: Option<f64>,
    entities: usize,
}

fn regions_of(cfg: &RunConfig, panel: &PanelDataset) -> Vec<String> {
    match &cfg.fit.regions {
        Some(r) => r.clone(),
        None => panel.regions().into_iter().collect(),
    }
}

/// Pairwise Pearson correlations of the regressors' daily values.
fn regressor_correlations(panel: &PanelDataset, regs: &[Regressor]) -> Vec<Vec<String>> {
    let cols: Vec<Vec<f64>> = regs.iter().map(|r| panel.rows.iter().map(|row| row.regressor(*r)).collect()).collect();
    let mut out = Vec::new();
    for i in 0..regs.len() {
        for j in i + 1..regs.len() {
            let v = pearson_corr(&cols[i], &cols[j]).map(|c| format!("{c:.6}")).unwrap_or_else(|_| "-".into());
            out.push(vec![regs[i].to_string(), regs[j].to_string(), v]);
        }
    }
    out
}

pub fn run_fit(cfg: &RunConfig, data: &LoadedData, out: &Path, flags: Flags) -> Result<Vec<FitFailure>, Failure> {
    let mut fit_cfg = cfg.fit.clone();
    if flags.drop_zero_rows {
        fit_cfg.zero_rows = gridshift_core::domain::ZeroRowPolicy::Drop;
    }
    let regions = regions_of(cfg, &data.panel);
    let panels: BTreeMap<&str, PanelDataset> =
        regions.iter().map(|r| (r.as_str(), data.panel.for_region(r))).collect();
    let jobs: Vec<(&str, Dependent)> = fit_cfg
        .dependents
        .iter()
        .flat_map(|d| regions.iter().map(move |r| (r.as_str(), *d)))
        .collect();
    let results: Vec<(&str, Dependent, gridshift_core::Result<FitResult>)> = jobs
        .par_iter()
        .map(|&(r, d)| (r, d, fit_panel(&panels[r], &fit_cfg.spec(d))))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut diagnostics = Vec::new();
    let mut by_dep: BTreeMap<Dependent, Vec<(&str, FitResult)>> = BTreeMap::new();
    for (region, dep, res) in results {
        match res {
            Ok(fit) => {
                let dw = durbin_watson(&fit.residuals, &fit.residual_entity, &fit.residual_time).ok();
                diagnostics.push(FitDiagnostics {
                    region: region.to_string(),
                    dependent: dep,
                    durbin_watson_mean: dw.as_ref().map(|d| d.mean),
                    durbin_watson_pooled: dw.as_ref().map(|d| d.pooled),
                    entities: dw.as_ref().map_or(0, |d| d.per_entity.len()),
                });
                records.push(FitRecord::from_fit(region, &fit));
                by_dep.entry(dep).or_default().push((region, fit.without_residuals()));
            }
            Err(e) => failures.push(FitFailure {
                region: region.to_string(),
                dependent: dep,
                error: e.to_string(),
            }),
        }
    }
    write_json(out, FITS_FILE, &records)?;
    write_json(out, "fit_diagnostics.json", &diagnostics)?;
    let mut tables = serde_json::Map::new();
    for (dep, fits) in &by_dep {
        let refs: Vec<(&str, &FitResult)> = fits.iter().map(|(r, f)| (*r, f)).collect();
        write(out, &format!("table1_{dep}.csv"), table1_csv(&refs).map_err(Failure::from_estimation)?)?;
        tables.insert(dep.to_string(), table1_json(&refs));
    }
    write_json(out, "table1.json", &tables)?;
    if !failures.is_empty() {
        write_json(out, "fit_errors.json", &failures)?;
    }

    let spec0 = fit_cfg.spec(Dependent::Generation);
    let mut corr_rows = Vec::new();
    for r in &regions {
        for mut row in regressor_correlations(&panels[r.as_str()], &spec0.regressors) {
            row.insert(0, r.clone());
            corr_rows.push(row);
        }
    }
    write(out, "regressor_correlations.csv", csv_string(&["region", "a", "b", "pearson"], &corr_rows)?)?;

    if flags.delta_sweep {
        let spec = fit_cfg.spec(cfg.sweep.dependent);
        let sweep_cfg = SweepConfig::for_spec(&spec, cfg.sweep.grid.clone());
        let mut all = serde_json::Map::new();
        let mut rows = Vec::new();
        for r in &regions {
            let res = delta_sweep(&panels[r.as_str()], &spec, &sweep_cfg).map_err(Failure::from_estimation)?;
            for row in &res {
                for c in &row.coefficients {
                    rows.push(vec![
                        r.clone(),
                        serde_json::to_value(row.policy).expect("enum").as_str().unwrap_or_default().to_string(),
                        format!("{:e}", row.delta),
                        c.regressor.to_string(),
                        format!("{:.6}", c.estimate),
                        format!("{:.6}", c.std_error),
                        row.n_obs.to_string(),
                    ]);
                }
            }
            all.insert(r.clone(), serde_json::to_value(&res).expect("serializable"));
        }
        write_json(out, "delta_sweep.json", &all)?;
        let header = ["region", "policy", "delta", "regressor", "coef", "se", "n_obs"];
        write(out, "delta_sweep.csv", csv_string(&header, &rows)?)?;
    }
    write_json(out, "ingest_report.json", &data.report)?;
    Ok(failures)
}

fn fit_outcome(failures: &[FitFailure]) -> Result<(), Failure> {
    match failures {
        [] => Ok(()),
        [first, ..] => Err(Failure::estimation(format!(
            "{} fit(s) failed; first: {} {}: {}",
            failures.len(),
            first.region,
            first.dependent,
            first.error
        ))),
    }
}

pub fn cmd_fit(cfg: &RunConfig, flags: Flags) -> Result<(), Failure> {
    let data = load_data(cfg)?;
    let out = cfg.prepare_output()?;
    let failures = run_fit(cfg, &data, &out, flags)?;
    let plants = if flags.plants { run_plants(cfg, &data, &out).map(|_| ()) } else { Ok(()) };
    let mut m = Manifest::new("fit", cfg);
    data.add_inputs(&mut m)?;
    m.write(&out)?;
    fit_outcome(&failures)?;
    plants
}

// ---------------------------------------------------------------------------
// plants

pub fn run_plants(cfg: &RunConfig, data: &LoadedData, out: &Path) -> Result<PlantBatch, Failure> {
    let plants = data.retained_plants();
    let mut batch = PlantBatch::default();
    for dep in &cfg.plants.dependents {
        let spec = cfg.plants.spec(*dep, cfg.fit.partner_mode);
        let b = match spec.granularity {
            Granularity::Hourly => fit_all_plants(&plants, &data.plant_hours, &data.ba_hours, &data.partners, &spec),
            Granularity::Daily => fit_all_plants_daily(&plants, &data.panel, &spec),
        }
        .map_err(|e| Failure::config(format!("plants: {e}")))?;
        batch.fits.extend(b.fits);
        batch.skipped.extend(b.skipped.into_iter().map(|mut s| {
            s.reason = format!("{dep}: {}", s.reason);
            s
        }));
    }
    let stripped: Vec<PlantFit> = batch
        .fits
        .iter()
        .map(|f| PlantFit {
            fit: f.fit.without_residuals(),
            ..f.clone()
        })
        .collect();
    write(out, "plant_fits.csv", plant_fits_csv(&batch.fits).map_err(Failure::from_estimation)?)?;
    write_json(out, PLANT_FITS_JSON, &stripped)?;
    write_json(out, "plant_skips.json", &batch.skipped)?;

    let mut rows = Vec::new();
    for dep in &cfg.plants.dependents {
        let fits: Vec<PlantFit> = batch.fits.iter().filter(|f| f.dependent == *dep).cloned().collect();
        for res in Resource::ALL {
            for g in group_summary(&fits, res.regressor(), cfg.plants.weighting) {
                rows.push(vec![
                    dep.to_string(),
                    g.ba_id,
                    g.fuel.to_string(),
                    g.regressor.to_string(),
                    format!("{:.6}", g.mean),
                    g.std_error.map(|s| format!("{s:.6}")).unwrap_or_else(|| "-".into()),
                    g.count.to_string(),
                ]);
            }
        }
    }
    let header = ["dependent", "ba", "fuel", "regressor", "mean", "se", "plants"];
    write(out, "plant_groups.csv", csv_string(&header, &rows)?)?;
    Ok(batch)
}

pub fn cmd_plants(cfg: &RunConfig) -> Result<(), Failure> {
    let data = load_data(cfg)?;
    let out = cfg.prepare_output()?;
    run_plants(cfg, &data, &out)?;
    let mut m = Manifest::new("plants", cfg);
    data.add_inputs(&mut m)?;
    m.write(&out)
}

// ---------------------------------------------------------------------------
// displacement

pub fn read_fit_records(path: &Path) -> Result<Vec<FitRecord>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("displacement.fits: {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

pub fn fit_map(records: &[FitRecord]) -> FitMap {
    records.iter().map(|r| ((r.region.clone(), r.dependent), r.to_fit())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacedMassRow {
    pub plant_id: String,
    pub ba_id: String,
    pub resource: String,
    pub beta: f64,
    /// Plant emissions over the window, tonnes.
    pub emissions_t: f64,
    pub renewable_mwh: f64,
    /// Tonnes displaced per MWh of renewable output.
    pub displaced_t_per_mwh: f64,
}

/// Per-plant displaced mass from plant-level emissions fits: one row per
/// (plant, resource) plus a `renewables` row normalized by wind + solar.
pub fn displaced_mass_rows(data: &LoadedData, plant_fits: &[PlantFit], cfg: &RunConfig) -> Vec<DisplacedMassRow> {
    let pollutant = cfg.displacement.pollutant;
    let w = data.window;
    let mut emissions: BTreeMap<&str, f64> = BTreeMap::new();
    for o in &data.plant_hours {
        if w.contains(o.timestamp.date_naive()) && o.gen_mwh.is_some() {
            if let Some(m) = o.mass(pollutant) {
                *emissions.entry(o.plant_id.as_str()).or_default() += pollutant.to_tonnes(m);
            }
        }
    }
    let mut renew: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for b in &data.ba_hours {
        if w.contains(b.timestamp.date_naive()) {
            let e = renew.entry(b.ba_id.as_str()).or_default();
            e.0 += b.solar_mwh;
            e.1 += b.wind_mwh;
        }
    }
    let mut rows = Vec::new();
    for f in plant_fits.iter().filter(|f| f.dependent == pollutant.emissions()) {
        let e = emissions.get(f.plant_id.as_str()).copied().unwrap_or(0.0);
        let (solar, wind) = renew.get(f.ba_id.as_str()).copied().unwrap_or((0.0, 0.0));
        let mut combined = 0.0;
        for (res, total) in [(Resource::Solar, solar), (Resource::Wind, wind)] {
            let Some(c) = f.fit.coef(res.regressor()).filter(|c| !c.dropped) else { continue };
            if let Ok(d) = displaced_mass(c.estimate, e, total) {
                rows.push(DisplacedMassRow {
                    plant_id: f.plant_id.clone(),
                    ba_id: f.ba_id.clone(),
                    resource: res.to_string(),
                    beta: c.estimate,
                    emissions_t: e,
                    renewable_mwh: total,
                    displaced_t_per_mwh: d,
                });
            }
            if let Ok(d) = displaced_mass(c.estimate, e, solar + wind) {
                combined += d;
            }
        }
        rows.push(DisplacedMassRow {
            plant_id: f.plant_id.clone(),
            ba_id: f.ba_id.clone(),
            resource: "renewables".into(),
            beta: f64::NAN,
            emissions_t: e,
            renewable_mwh: solar + wind,
            displaced_t_per_mwh: combined,
        });
    }
    rows
}

pub fn run_displacement(cfg: &RunConfig, data: Option<&LoadedData>, out: &Path) -> Result<(), Failure> {
    let fits_path = cfg.displacement.fits.clone().unwrap_or_else(|| out.join(FITS_FILE));
    let records = read_fit_records(&fits_path)?;
    let cells = effectiveness_table(&fit_map(&records));
    write(out, "effectiveness.csv", effectiveness_csv(&cells).map_err(Failure::from_estimation)?)?;
    write_json(out, "effectiveness.json", &cells)?;

    let plant_path = out.join(PLANT_FITS_JSON);
    let (Some(data), true) = (data, plant_path.is_file()) else {
        return Ok(());
    };
    let text = std::fs::read_to_string(&plant_path)?;
    let plant_fits: Vec<PlantFit> =
        serde_json::from_str(&text).map_err(|e| Failure::data(format!("{PLANT_FITS_JSON}: {e}")))?;
    let rows = displaced_mass_rows(data, &plant_fits, cfg);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.plant_id.clone(),
                r.ba_id.clone(),
                r.resource.clone(),
                if r.beta.is_nan() { "-".into() } else { format!("{:.6}", r.beta) },
                format!("{:.3}", r.emissions_t),
                format!("{:.3}", r.renewable_mwh),
                format!("{:.9}", r.displaced_t_per_mwh),
            ]
        })
        .collect();
    let header = ["plant_id", "ba", "resource", "beta", "emissions_t", "renewable_mwh", "displaced_t_per_mwh"];
    write(out, "displaced_mass.csv", csv_string(&header, &table)?)?;

    let mut groups: BTreeMap<(&str, &str), Vec<(String, f64)>> = BTreeMap::new();
    for r in &rows {
        groups
            .entry((r.ba_id.as_str(), r.resource.as_str()))
            .or_default()
            .push((r.plant_id.clone(), r.displaced_t_per_mwh));
    }
    let mut conc = Vec::new();
    for ((ba, res), v) in groups {
        let total: f64 = v.iter().map(|(_, d)| d).sum();
        let c = concentration(&v, cfg.displacement.top_k.min(v.len())).ok();
        conc.push(json!({
            "region": ba,
            "resource": res,
            "total_displaced_t_per_mwh": total,
            "concentration": c,
        }));
    }
    write_json(out, "concentration.json", &conc)
}

pub fn cmd_displacement(cfg: &RunConfig) -> Result<(), Failure> {
    let data = if cfg.inputs.is_set() { Some(load_data(cfg)?) } else { None };
    let out = cfg.prepare_output()?;
    run_displacement(cfg, data.as_ref(), &out)?;
    let mut m = Manifest::new("displacement", cfg);
    if let Some(d) = &data {
        d.add_inputs(&mut m)?;
    }
    if let Some(f) = &cfg.displacement.fits {
        m.add_input("fits", f)?;
    }
    m.write(&out)
}

// ---------------------------------------------------------------------------
// scenario

pub fn scenario_specs(cfg: &RunConfig, window: DateRange, appendix: bool) -> Vec<ScenarioSpec> {
    let s = &cfg.scenario;
    s.pollutants
        .iter()
        .map(|p| {
            let base = if appendix {
                ScenarioSpec::appendix(*p, window)
            } else {
                ScenarioSpec {
                    p_low: s.p_low,
                    p_high: s.p_high,
                    ..ScenarioSpec::new(*p, window)
                }
            };
            ScenarioSpec {
                cf_thresholds: s.cf_thresholds,
                per_year: s.per_year,
                ..base
            }
        })
        .collect()
}

pub fn run_scenario(cfg: &RunConfig, data: &LoadedData, out: &Path, appendix: bool) -> Result<(), Failure> {
    let plants = data.retained_plants();
    let mut summary = serde_json::Map::new();
    for spec in scenario_specs(cfg, data.window, appendix) {
        let report = scenario_report(&plants, &data.plant_hours, &spec).map_err(Failure::from_estimation)?;
        if report.plants.is_empty() {
            return Err(Failure::estimation(format!("scenario {}: no eligible plants", spec.pollutant)));
        }
        let p = spec.pollutant.to_string();
        write(out, &format!("scenario_{p}.csv"), scenario_csv(&report.results).map_err(Failure::from_estimation)?)?;
        let rows: Vec<Vec<String>> = report
            .plants
            .iter()
            .map(|ps| {
                vec![
                    ps.plant_id.clone(),
                    ps.ba_id.clone(),
                    ps.fuel.to_string(),
                    format!("{:.6}", ps.capacity_factor),
                    ps.cf_bucket.as_str().to_string(),
                    format!("{:.9}", ps.low_intensity),
                    format!("{:.9}", ps.high_intensity),
                    format!("{:.6}", ps.totals.observed),
                    format!("{:.6}", ps.totals.low),
                    format!("{:.6}", ps.totals.high),
                    ps.valid_hours.to_string(),
                ]
            })
            .collect();
        let header = [
            "plant_id", "ba", "fuel", "capacity_factor", "cf_bucket", "low_intensity", "high_intensity", "observed_t",
            "low_t", "high_t", "valid_hours",
        ];
        write(out, &format!("scenario_{p}_plants.csv"), csv_string(&header, &rows)?)?;
        summary.insert(
            p,
            json!({
                "totals": scenario_totals_json(&report.results),
                "breakdown": report.results,
                "excluded": report.excluded,
            }),
        );
    }
    write_json(out, "scenario.json", &summary)
}

pub fn cmd_scenario(cfg: &RunConfig, appendix: bool) -> Result<(), Failure> {
    let data = load_data(cfg)?;
    let out = cfg.prepare_output()?;
    run_scenario(cfg, &data, &out, appendix)?;
    let mut m = Manifest::new("scenario", cfg);
    data.add_inputs(&mut m)?;
    m.write(&out)
}

// ---------------------------------------------------------------------------
// report

/// The whole pipeline. Without configured inputs the dataset is simulated
/// first into `<output_dir>/data`.
pub fn cmd_report(cfg: &RunConfig, flags: Flags) -> Result<(), Failure> {
    let out = cfg.prepare_output()?;
    let mut cfg = cfg.clone();
    if !cfg.inputs.is_set() {
        let dir = simulate_into(&cfg, &out.join(DATA_DIR))?;
        cfg.inputs.dir = Some(dir);
    }
    let data = load_data(&cfg)?;
    let failures = run_fit(&cfg, &data, &out, flags)?;
    run_plants(&cfg, &data, &out)?;
    run_displacement(&cfg, Some(&data), &out)?;
    let scenario = run_scenario(&cfg, &data, &out, flags.appendix);
    let mut m = Manifest::new("report", &cfg);
    data.add_inputs(&mut m)?;
    m.write(&out)?;
    fit_outcome(&failures)?;
    scenario
}
