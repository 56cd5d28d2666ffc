//! Run configuration: one TOML file, overridable per key from the
//! environment.
//!
//! `GRIDSHIFT_<SECTION>__<KEY>=value` sets `section.key`; `__` separates
//! nesting levels and names are lowercased. Values are read as TOML
//! literals when they parse, as strings otherwise.

use std::path::{Path, PathBuf};

use gridshift_core::domain::{
    DeltaSpec, Dependent, FeTerm, ModelForm, PartnerMode, Pollutant, Regressor, RegressionSpec, SeMode, ZeroRowPolicy,
};
use gridshift_core::ingest::{DateRange, RampMode};
use gridshift_core::plantols::{Granularity, PlantSpec, Weighting};
use gridshift_core::regress::{log_spaced, DeltaGrid};
use gridshift_simgrid::dispatch::DispatchDgp;
use gridshift_simgrid::SyntheticDgp;
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const ENV_PREFIX: &str = "GRIDSHIFT_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: Option<PathBuf>,
    /// Worker threads; 0 lets the pool choose.
    pub workers: usize,
    pub seed: u64,
    pub inputs: Inputs,
    pub ingest: IngestSection,
    pub fit: FitSection,
    pub sweep: SweepSection,
    pub plants: PlantsSection,
    pub displacement: DisplacementSection,
    pub scenario: ScenarioSection,
    pub simulate: SimulateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: None,
            workers: 0,
            seed: 0,
            inputs: Inputs::default(),
            ingest: IngestSection::default(),
            fit: FitSection::default(),
            sweep: SweepSection::default(),
            plants: PlantsSection::default(),
            displacement: DisplacementSection::default(),
            scenario: ScenarioSection::default(),
            simulate: SimulateSection::default(),
        }
    }
}

/// Input files. Any file left unset defaults to its standard name inside
/// `dir`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub dir: Option<PathBuf>,
    pub plants: Option<PathBuf>,
    pub plant_hours: Option<PathBuf>,
    pub ba_hours: Option<PathBuf>,
    pub partners: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputPaths {
    pub plants: PathBuf,
    pub plant_hours: PathBuf,
    pub ba_hours: PathBuf,
    /// Absent means no partner regions.
    pub partners: Option<PathBuf>,
}

impl Inputs {
    pub fn is_set(&self) -> bool {
        self.dir.is_some() || self.plants.is_some() || self.plant_hours.is_some() || self.ba_hours.is_some()
    }

    /// Concrete paths; a missing required file is a config error naming its
    /// field.
    pub fn resolve(&self) -> Result<InputPaths, Failure> {
        use gridshift_simgrid::emit::{BA_HOURS_FILE, PARTNERS_FILE, PLANTS_FILE, PLANT_HOURS_FILE};
        let pick = |field: &str, explicit: &Option<PathBuf>, name: &str| -> Result<PathBuf, Failure> {
            let p = match (explicit, &self.dir) {
                (Some(p), _) => p.clone(),
                (None, Some(d)) => d.join(name),
                (None, None) => return Err(Failure::config(format!("inputs.{field}: not set and inputs.dir is empty"))),
            };
            if p.is_file() {
                Ok(p)
            } else {
                Err(Failure::config(format!("inputs.{field}: {} does not exist", p.display())))
            }
        };
        let partners = match (&self.partners, &self.dir) {
            (Some(p), _) if !p.is_file() => {
                return Err(Failure::config(format!("inputs.partners: {} does not exist", p.display())))
            }
            (Some(p), _) => Some(p.clone()),
            (None, Some(d)) => Some(d.join(PARTNERS_FILE)).filter(|p| p.is_file()),
            (None, None) => None,
        };
        Ok(InputPaths {
            plants: pick("plants", &self.plants, PLANTS_FILE)?,
            plant_hours: pick("plant_hours", &self.plant_hours, PLANT_HOURS_FILE)?,
            ba_hours: pick("ba_hours", &self.ba_hours, BA_HOURS_FILE)?,
            partners,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    /// Minimum share of window hours with generation and CO₂ present.
    pub coverage_threshold: f64,
    /// Study window; defaults to the span of the plant-hour data.
    pub window: Option<DateRange>,
    pub ramp_mode: RampMode,
    pub utc_offset_hours: std::collections::BTreeMap<String, i32>,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            coverage_threshold: 0.1,
            window: None,
            ramp_mode: RampMode::WithinDay,
            utc_offset_hours: Default::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub dependents: Vec<Dependent>,
    /// Regions to fit; all regions in the panel when unset.
    pub regions: Option<Vec<String>>,
    pub form: ModelForm,
    pub partner_mode: PartnerMode,
    /// Overrides the form's default regressor list.
    pub regressors: Option<Vec<Regressor>>,
    pub fe_terms: Vec<FeTerm>,
    pub se_mode: SeMode,
    pub zero_rows: ZeroRowPolicy,
    pub delta: DeltaSpec,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            dependents: Dependent::ALL.to_vec(),
            regions: None,
            form: ModelForm::CompactNetdemand,
            partner_mode: PartnerMode::Separate,
            regressors: None,
            fe_terms: vec![FeTerm::Entity, FeTerm::Month, FeTerm::Year, FeTerm::EntityMonth],
            se_mode: SeMode::Hc1Robust,
            zero_rows: ZeroRowPolicy::Offset,
            delta: DeltaSpec::default(),
        }
    }
}

impl FitSection {
    pub fn spec(&self, dependent: Dependent) -> RegressionSpec {
        let mut spec = RegressionSpec::new(dependent, self.form)
            .with_partner_mode(self.partner_mode)
            .with_fe_terms(self.fe_terms.iter().copied())
            .with_se_mode(self.se_mode)
            .with_zero_rows(self.zero_rows)
            .with_delta(self.delta.clone());
        if let Some(regs) = &self.regressors {
            spec = spec.with_regressors(regs.iter().copied());
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub dependent: Dependent,
    pub grid: DeltaGrid,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            dependent: Dependent::Generation,
            grid: DeltaGrid::RelativeToMean(log_spaced(1e-6, 1.0, 13)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantsSection {
    pub dependents: Vec<Dependent>,
    pub granularity: Granularity,
    pub weighting: Weighting,
    pub fe_terms: Vec<FeTerm>,
    pub se_mode: SeMode,
    pub zero_rows: ZeroRowPolicy,
}

impl Default for PlantsSection {
    fn default() -> Self {
        PlantsSection {
            dependents: vec![Dependent::Generation, Dependent::Co2],
            granularity: Granularity::Hourly,
            weighting: Weighting::Unweighted,
            fe_terms: vec![FeTerm::Month, FeTerm::Year],
            se_mode: SeMode::Hc1Robust,
            zero_rows: ZeroRowPolicy::Drop,
        }
    }
}

impl PlantsSection {
    pub fn spec(&self, dependent: Dependent, partner_mode: PartnerMode) -> PlantSpec {
        let mut s = PlantSpec::new(dependent);
        s.granularity = self.granularity;
        s.regression = s
            .regression
            .with_partner_mode(partner_mode)
            .with_fe_terms(self.fe_terms.iter().copied())
            .with_se_mode(self.se_mode)
            .with_zero_rows(self.zero_rows);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisplacementSection {
    /// Fits to read; defaults to `fits.json` in the output directory.
    pub fits: Option<PathBuf>,
    pub top_k: usize,
    /// Pollutant for per-plant displaced mass.
    pub pollutant: Pollutant,
}

impl Default for DisplacementSection {
    fn default() -> Self {
        DisplacementSection {
            fits: None,
            top_k: 10,
            pollutant: Pollutant::Co2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub pollutants: Vec<Pollutant>,
    pub p_low: f64,
    pub p_high: f64,
    pub cf_thresholds: (f64, f64),
    pub per_year: bool,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            pollutants: vec![Pollutant::Co2, Pollutant::So2, Pollutant::Nox],
            p_low: 0.10,
            p_high: 0.90,
            cf_thresholds: (0.3, 0.6),
            per_year: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    #[default]
    Loglinear,
    Dispatch,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub generator: Generator,
    pub loglinear: SyntheticDgp,
    pub dispatch: DispatchDgp,
}

impl RunConfig {
    /// Read `path`, apply `env` overrides, resolve relative paths against
    /// the file's directory and validate.
    pub fn load(path: &Path, env: impl IntoIterator<Item = (String, String)>) -> Result<RunConfig, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::parse(&text, env, base)
    }

    pub fn parse(
        text: &str,
        env: impl IntoIterator<Item = (String, String)>,
        base: &Path,
    ) -> Result<RunConfig, Failure> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Failure::config(format!("config: {e}")))?;
        apply_env(&mut table, env)?;
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Failure::config(format!("config: {e}")))?;
        cfg.rebase(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(v) = p {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.inputs.dir);
        fix(&mut self.inputs.plants);
        fix(&mut self.inputs.plant_hours);
        fix(&mut self.inputs.ba_hours);
        fix(&mut self.inputs.partners);
        fix(&mut self.displacement.fits);
    }

    /// Field-level checks that need no input data.
    pub fn validate(&self) -> Result<(), Failure> {
        if self.output_dir.is_none() {
            return Err(Failure::config("output_dir: missing"));
        }
        if !(0.0..=1.0).contains(&self.ingest.coverage_threshold) {
            return Err(Failure::config("ingest.coverage_threshold: must be in [0, 1]"));
        }
        if self.fit.dependents.is_empty() {
            return Err(Failure::config("fit.dependents: empty"));
        }
        if self.plants.dependents.is_empty() {
            return Err(Failure::config("plants.dependents: empty"));
        }
        let s = &self.scenario;
        if !(0.0 < s.p_low && s.p_low <= s.p_high && s.p_high < 1.0) {
            return Err(Failure::config("scenario.p_low/p_high: need 0 < p_low <= p_high < 1"));
        }
        if self.displacement.top_k == 0 {
            return Err(Failure::config("displacement.top_k: must be positive"));
        }
        for d in &self.fit.dependents {
            self.fit.spec(*d).validate().map_err(|e| Failure::config(format!("fit: {e}")))?;
        }
        Ok(())
    }

    pub fn output_dir(&self) -> &Path {
        self.output_dir.as_deref().expect("validated")
    }

    /// Create the output directory and check it is writable.
    pub fn prepare_output(&self) -> Result<PathBuf, Failure> {
        let dir = self.output_dir().to_path_buf();
        let probe = dir.join(".write-probe");
        std::fs::create_dir_all(&dir)
            .and_then(|_| std::fs::write(&probe, b""))
            .and_then(|_| std::fs::remove_file(&probe))
            .map_err(|e| Failure::config(format!("output_dir: {} is not writable: {e}", dir.display())))?;
        Ok(dir)
    }
}

/// Environment variables under [`ENV_PREFIX`] as `(path, value)` pairs.
pub fn env_overrides() -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    v.sort();
    v
}

fn literal(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => match t.remove("v") {
            Some(toml::Value::Datetime(_)) | None => toml::Value::String(raw.to_string()),
            Some(v) => v,
        },
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_env(table: &mut toml::Table, env: impl IntoIterator<Item = (String, String)>) -> Result<(), Failure> {
    for (key, raw) in env {
        let Some(rest) = key.strip_prefix(ENV_PREFIX) else { continue };
        let path: Vec<String> = rest.split("__").map(str::to_lowercase).collect();
        if path.iter().any(String::is_empty) {
            return Err(Failure::config(format!("{key}: empty path segment")));
        }
        let (last, parents) = path.split_last().expect("nonempty");
        let mut cur = &mut *table;
        for seg in parents {
            let entry = cur.entry(seg.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = entry
                .as_table_mut()
                .ok_or_else(|| Failure::config(format!("{key}: `{seg}` is not a table")))?;
        }
        cur.insert(last.clone(), literal(&raw));
    }
    Ok(())
}
