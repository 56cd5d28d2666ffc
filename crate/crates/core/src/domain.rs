//! Core value types.
//!
//! Units are carried in field names: energy in MWh, CO₂ in tonnes, SO₂ and
//! NOₓ in kilograms. [`Pollutant::to_tonnes`] is the only place a kg/t
//! conversion happens.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fuel {
    Coal,
    Ngcc,
    Ngct,
    Other,
}

impl Fuel {
    pub const ALL: [Fuel; 4] = [Fuel::Coal, Fuel::Ngcc, Fuel::Ngct, Fuel::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Fuel::Coal => "coal",
            Fuel::Ngcc => "ngcc",
            Fuel::Ngct => "ngct",
            Fuel::Other => "other",
        }
    }
}

impl fmt::Display for Fuel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Fuel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "coal" => Ok(Fuel::Coal),
            "ngcc" => Ok(Fuel::Ngcc),
            "ngct" => Ok(Fuel::Ngct),
            "other" => Ok(Fuel::Other),
            other => Err(Error::Argument(format!("unknown fuel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pollutant {
    Co2,
    So2,
    Nox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassUnit {
    Tonnes,
    Kilograms,
}

impl Pollutant {
    pub const ALL: [Pollutant; 3] = [Pollutant::Co2, Pollutant::So2, Pollutant::Nox];

    pub fn unit(self) -> MassUnit {
        match self {
            Pollutant::Co2 => MassUnit::Tonnes,
            Pollutant::So2 | Pollutant::Nox => MassUnit::Kilograms,
        }
    }

    /// Convert a mass in this pollutant's native unit to tonnes.
    pub fn to_tonnes(self, native: f64) -> f64 {
        match self.unit() {
            MassUnit::Tonnes => native,
            MassUnit::Kilograms => native / 1000.0,
        }
    }

    pub fn emissions(self) -> Dependent {
        match self {
            Pollutant::Co2 => Dependent::Co2,
            Pollutant::So2 => Dependent::So2,
            Pollutant::Nox => Dependent::Nox,
        }
    }

    pub fn intensity(self) -> Dependent {
        match self {
            Pollutant::Co2 => Dependent::EiCo2,
            Pollutant::So2 => Dependent::EiSo2,
            Pollutant::Nox => Dependent::EiNox,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Pollutant::Co2 => "co2",
            Pollutant::So2 => "so2",
            Pollutant::Nox => "nox",
        }
    }
}

impl fmt::Display for Pollutant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resource {
    Solar,
    Wind,
}

impl Resource {
    pub const ALL: [Resource; 2] = [Resource::Solar, Resource::Wind];

    pub fn regressor(self) -> Regressor {
        match self {
            Resource::Solar => Regressor::Solar,
            Resource::Wind => Regressor::Wind,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Resource::Solar => "solar",
            Resource::Wind => "wind",
        }
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantMeta {
    pub plant_id: String,
    pub ba_id: String,
    pub fuel: Fuel,
    pub nameplate_mw: f64,
    #[serde(default)]
    pub stack_height_m: Option<f64>,
    #[serde(default)]
    pub in_service_year: Option<i32>,
}

impl PlantMeta {
    pub fn validate(&self) -> Result<()> {
        if self.plant_id.is_empty() {
            return Err(Error::Argument("empty plant_id".into()));
        }
        if !(self.nameplate_mw > 0.0) {
            return Err(Error::Argument(format!(
                "plant {}: nameplate_mw must be > 0, got {}",
                self.plant_id, self.nameplate_mw
            )));
        }
        if let Some(h) = self.stack_height_m {
            if h < 0.0 {
                return Err(Error::Argument(format!(
                    "plant {}: negative stack height",
                    self.plant_id
                )));
            }
        }
        Ok(())
    }
}

/// One plant-hour as reported by emissions monitoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyPlantObs {
    pub plant_id: String,
    pub timestamp: DateTime<Utc>,
    pub gen_mwh: Option<f64>,
    pub co2_tons: Option<f64>,
    pub so2_kg: Option<f64>,
    pub nox_kg: Option<f64>,
}

impl HourlyPlantObs {
    pub fn mass(&self, pollutant: Pollutant) -> Option<f64> {
        match pollutant {
            Pollutant::Co2 => self.co2_tons,
            Pollutant::So2 => self.so2_kg,
            Pollutant::Nox => self.nox_kg,
        }
    }

    pub fn has_any_emissions(&self) -> bool {
        self.co2_tons.is_some() || self.so2_kg.is_some() || self.nox_kg.is_some()
    }
}

/// One balancing-authority hour. `net_imports_mwh` is signed (negative = net export).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyBaObs {
    pub ba_id: String,
    pub timestamp: DateTime<Utc>,
    pub demand_mwh: f64,
    pub wind_mwh: f64,
    pub solar_mwh: f64,
    pub hydro_mwh: f64,
    pub net_imports_mwh: f64,
}

impl HourlyBaObs {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("demand_mwh", self.demand_mwh),
            ("wind_mwh", self.wind_mwh),
            ("solar_mwh", self.solar_mwh),
            ("hydro_mwh", self.hydro_mwh),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Argument(format!(
                    "{} {}: {name} must be >= 0, got {v}",
                    self.ba_id, self.timestamp
                )));
            }
        }
        if !self.net_imports_mwh.is_finite() {
            return Err(Error::Argument(format!(
                "{} {}: net_imports_mwh not finite",
                self.ba_id, self.timestamp
            )));
        }
        Ok(())
    }
}

/// Dependent variable of a regression.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependent {
    #[default]
    Generation,
    Co2,
    So2,
    Nox,
    EiCo2,
    EiSo2,
    EiNox,
}

impl Dependent {
    pub const ALL: [Dependent; 7] = [
        Dependent::Generation,
        Dependent::Co2,
        Dependent::So2,
        Dependent::Nox,
        Dependent::EiCo2,
        Dependent::EiSo2,
        Dependent::EiNox,
    ];

    pub fn pollutant(self) -> Option<Pollutant> {
        match self {
            Dependent::Generation => None,
            Dependent::Co2 | Dependent::EiCo2 => Some(Pollutant::Co2),
            Dependent::So2 | Dependent::EiSo2 => Some(Pollutant::So2),
            Dependent::Nox | Dependent::EiNox => Some(Pollutant::Nox),
        }
    }

    pub fn is_intensity(self) -> bool {
        matches!(self, Dependent::EiCo2 | Dependent::EiSo2 | Dependent::EiNox)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dependent::Generation => "generation",
            Dependent::Co2 => "co2",
            Dependent::So2 => "so2",
            Dependent::Nox => "nox",
            Dependent::EiCo2 => "ei_co2",
            Dependent::EiSo2 => "ei_so2",
            Dependent::EiNox => "ei_nox",
        }
    }
}

impl fmt::Display for Dependent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dependent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dependent::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown dependent `{s}`")))
    }
}

/// Right-hand-side variables available on a [`DailyPanelRow`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regressor {
    /// D′ = demand − hydro − net imports.
    NetThermalDemand,
    /// Gross BA demand, used by the expanded form in place of D′.
    Demand,
    Solar,
    Wind,
    SolarRamp,
    WindRamp,
    PartnerWind,
    PartnerSolar,
    PartnerDemand,
    /// Partner wind + solar + demand as one control.
    PartnerTotal,
    Hydro,
    Imports,
    Exports,
}

impl Regressor {
    pub const ALL: [Regressor; 13] = [
        Regressor::NetThermalDemand,
        Regressor::Demand,
        Regressor::Solar,
        Regressor::Wind,
        Regressor::SolarRamp,
        Regressor::WindRamp,
        Regressor::PartnerWind,
        Regressor::PartnerSolar,
        Regressor::PartnerDemand,
        Regressor::PartnerTotal,
        Regressor::Hydro,
        Regressor::Imports,
        Regressor::Exports,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Regressor::NetThermalDemand => "net_thermal_demand",
            Regressor::Demand => "demand",
            Regressor::Solar => "solar",
            Regressor::Wind => "wind",
            Regressor::SolarRamp => "solar_ramp",
            Regressor::WindRamp => "wind_ramp",
            Regressor::PartnerWind => "partner_wind",
            Regressor::PartnerSolar => "partner_solar",
            Regressor::PartnerDemand => "partner_demand",
            Regressor::PartnerTotal => "partner_total",
            Regressor::Hydro => "hydro",
            Regressor::Imports => "imports",
            Regressor::Exports => "exports",
        }
    }

    /// Row label used in the region-by-regressor coefficient table.
    pub fn table_label(self) -> &'static str {
        match self {
            Regressor::NetThermalDemand => "Thermal Generation",
            Regressor::Demand => "Demand",
            Regressor::Solar => "Solar",
            Regressor::Wind => "Wind",
            Regressor::SolarRamp => "Solar Ramp",
            Regressor::WindRamp => "Wind Ramp",
            Regressor::PartnerWind => "Partner Wind",
            Regressor::PartnerSolar => "Partner Solar",
            Regressor::PartnerDemand => "Partner Demand",
            Regressor::PartnerTotal => "Partner Total",
            Regressor::Hydro => "Hydro",
            Regressor::Imports => "Imports",
            Regressor::Exports => "Exports",
        }
    }
}

impl fmt::Display for Regressor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regressor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regressor::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown regressor `{s}`")))
    }
}

/// One plant-day of the estimation panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyPanelRow {
    pub plant_id: String,
    pub ba_id: String,
    pub date: NaiveDate,
    pub y_gen: f64,
    pub y_co2: Option<f64>,
    pub y_so2: Option<f64>,
    pub y_nox: Option<f64>,
    pub y_ei_co2: Option<f64>,
    pub y_ei_so2: Option<f64>,
    pub y_ei_nox: Option<f64>,
    pub demand: f64,
    pub d_net_thermal: f64,
    pub solar: f64,
    pub wind: f64,
    pub wind_ramp: f64,
    pub solar_ramp: f64,
    pub partner_wind: f64,
    pub partner_solar: f64,
    pub partner_demand: f64,
    pub hydro: f64,
    pub imports_pos: f64,
    pub exports_pos: f64,
    pub month_label: u32,
    pub year_label: i32,
}

impl DailyPanelRow {
    pub fn dependent(&self, dep: Dependent) -> Option<f64> {
        match dep {
            Dependent::Generation => Some(self.y_gen),
            Dependent::Co2 => self.y_co2,
            Dependent::So2 => self.y_so2,
            Dependent::Nox => self.y_nox,
            Dependent::EiCo2 => self.y_ei_co2,
            Dependent::EiSo2 => self.y_ei_so2,
            Dependent::EiNox => self.y_ei_nox,
        }
    }

    pub fn regressor(&self, reg: Regressor) -> f64 {
        match reg {
            Regressor::NetThermalDemand => self.d_net_thermal,
            Regressor::Demand => self.demand,
            Regressor::Solar => self.solar,
            Regressor::Wind => self.wind,
            Regressor::SolarRamp => self.solar_ramp,
            Regressor::WindRamp => self.wind_ramp,
            Regressor::PartnerWind => self.partner_wind,
            Regressor::PartnerSolar => self.partner_solar,
            Regressor::PartnerDemand => self.partner_demand,
            Regressor::PartnerTotal => self.partner_wind + self.partner_solar + self.partner_demand,
            Regressor::Hydro => self.hydro,
            Regressor::Imports => self.imports_pos,
            Regressor::Exports => self.exports_pos,
        }
    }

    /// Fill the intensity columns from the mass and generation columns.
    /// Intensity is missing whenever generation is zero.
    pub fn derive_intensities(&mut self) {
        let ei = |mass: Option<f64>| mass.filter(|_| self.y_gen > 0.0).map(|m| m / self.y_gen);
        self.y_ei_co2 = ei(self.y_co2);
        self.y_ei_so2 = ei(self.y_so2);
        self.y_ei_nox = ei(self.y_nox);
    }

    pub fn month_of_sample(&self) -> i32 {
        self.year_label * 12 + self.month_label as i32 - 1
    }
}

/// Daily panel: rows sorted by `(ba_id, plant_id, date)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    pub rows: Vec<DailyPanelRow>,
}

impl PanelDataset {
    pub fn new(mut rows: Vec<DailyPanelRow>) -> Self {
        rows.sort_by(|a, b| {
            (&a.ba_id, &a.plant_id, a.date).cmp(&(&b.ba_id, &b.plant_id, b.date))
        });
        PanelDataset { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn regions(&self) -> BTreeSet<String> {
        self.rows.iter().map(|r| r.ba_id.clone()).collect()
    }

    pub fn for_region(&self, ba_id: &str) -> PanelDataset {
        PanelDataset {
            rows: self.rows.iter().filter(|r| r.ba_id == ba_id).cloned().collect(),
        }
    }

    pub fn for_plant(&self, plant_id: &str) -> PanelDataset {
        PanelDataset {
            rows: self.rows.iter().filter(|r| r.plant_id == plant_id).cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeTerm {
    Entity,
    Month,
    Year,
    EntityMonth,
}

impl FeTerm {
    pub fn as_str(self) -> &'static str {
        match self {
            FeTerm::Entity => "entity",
            FeTerm::Month => "month",
            FeTerm::Year => "year",
            FeTerm::EntityMonth => "entity_month",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeMode {
    Classical,
    #[default]
    Hc1Robust,
    ClusterByEntity,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelForm {
    /// Net thermal demand plus renewables, ramps and partner controls.
    #[default]
    CompactNetdemand,
    /// Gross demand with hydro, imports and exports entered separately.
    ExpandedHie,
}

/// How partner-region controls enter the model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartnerMode {
    #[default]
    Separate,
    Summed,
    None,
}

/// What to do with rows whose plant generation is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroRowPolicy {
    /// Keep them; the dependent is offset by its Δ.
    #[default]
    Offset,
    /// Drop them before any transform.
    Drop,
}

/// Per-variable Δ offsets applied before taking logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSpec {
    /// Offset on the dependent variable.
    #[serde(default)]
    pub dependent: Option<f64>,
    /// Offsets on individual regressors.
    #[serde(default)]
    pub regressors: std::collections::BTreeMap<Regressor, f64>,
    /// Offset applied to any variable that contains zeros and has no
    /// explicit entry. `None` makes zeros an error.
    #[serde(default)]
    pub auto: Option<f64>,
}

impl Default for DeltaSpec {
    fn default() -> Self {
        DeltaSpec {
            dependent: None,
            regressors: Default::default(),
            auto: Some(1.0),
        }
    }
}

impl DeltaSpec {
    /// No offsets at all; zeros are a fit-time error.
    pub fn none() -> Self {
        DeltaSpec {
            dependent: None,
            regressors: Default::default(),
            auto: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub dependent: Dependent,
    pub regressors: Vec<Regressor>,
    pub fe_terms: BTreeSet<FeTerm>,
    pub delta: DeltaSpec,
    pub se_mode: SeMode,
    pub form: ModelForm,
    pub zero_rows: ZeroRowPolicy,
    /// Month fixed effects count months of sample instead of calendar months.
    pub month_of_sample: bool,
    pub absorb_tol: f64,
    pub max_sweeps: usize,
}

impl RegressionSpec {
    /// Default specification for `form`: all four fixed-effect terms, hc1
    /// errors, three separate partner controls and Δ = 1 on zero-containing
    /// variables.
    pub fn new(dependent: Dependent, form: ModelForm) -> Self {
        RegressionSpec {
            dependent,
            regressors: default_regressors(form, PartnerMode::Separate),
            fe_terms: [FeTerm::Entity, FeTerm::Month, FeTerm::Year, FeTerm::EntityMonth]
                .into_iter()
                .collect(),
            delta: DeltaSpec::default(),
            se_mode: SeMode::default(),
            form,
            zero_rows: ZeroRowPolicy::default(),
            month_of_sample: false,
            absorb_tol: 1e-10,
            max_sweeps: 10_000,
        }
    }

    pub fn with_partner_mode(mut self, mode: PartnerMode) -> Self {
        self.regressors = default_regressors(self.form, mode);
        self
    }

    pub fn with_fe_terms(mut self, terms: impl IntoIterator<Item = FeTerm>) -> Self {
        self.fe_terms = terms.into_iter().collect();
        self
    }

    pub fn with_regressors(mut self, regs: impl IntoIterator<Item = Regressor>) -> Self {
        self.regressors = regs.into_iter().collect();
        self
    }

    pub fn with_se_mode(mut self, mode: SeMode) -> Self {
        self.se_mode = mode;
        self
    }

    pub fn with_delta(mut self, delta: DeltaSpec) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_zero_rows(mut self, policy: ZeroRowPolicy) -> Self {
        self.zero_rows = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.regressors.is_empty() {
            return Err(Error::Argument("regression needs at least one regressor".into()));
        }
        let unique: BTreeSet<_> = self.regressors.iter().collect();
        if unique.len() != self.regressors.len() {
            return Err(Error::Argument("duplicate regressor in spec".into()));
        }
        let bad_delta = |d: f64| !(d.is_finite() && d >= 0.0);
        if self.delta.dependent.is_some_and(bad_delta)
            || self.delta.auto.is_some_and(bad_delta)
            || self.delta.regressors.values().any(|&d| bad_delta(d))
        {
            return Err(Error::Argument("Δ offsets must be finite and >= 0".into()));
        }
        if !(self.absorb_tol > 0.0) || self.max_sweeps == 0 {
            return Err(Error::Argument("absorb_tol must be > 0 and max_sweeps >= 1".into()));
        }
        Ok(())
    }
}

pub fn default_regressors(form: ModelForm, partners: PartnerMode) -> Vec<Regressor> {
    let mut regs = match form {
        ModelForm::CompactNetdemand => vec![Regressor::NetThermalDemand],
        ModelForm::ExpandedHie => vec![Regressor::Demand],
    };
    regs.extend([
        Regressor::Solar,
        Regressor::Wind,
        Regressor::SolarRamp,
        Regressor::WindRamp,
    ]);
    match partners {
        PartnerMode::Separate => regs.extend([
            Regressor::PartnerWind,
            Regressor::PartnerSolar,
            Regressor::PartnerDemand,
        ]),
        PartnerMode::Summed => regs.push(Regressor::PartnerTotal),
        PartnerMode::None => {}
    }
    if form == ModelForm::ExpandedHie {
        regs.extend([Regressor::Hydro, Regressor::Imports, Regressor::Exports]);
    }
    regs
}

/// One estimated slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub regressor: Regressor,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
    /// The column vanished after absorption and was reported as 0 (0).
    pub dropped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub dependent: Dependent,
    pub coefficients: Vec<Coefficient>,
    /// R² of the full model including the fixed effects.
    pub r_squared: f64,
    /// R² of the slopes on the absorbed (within) data.
    pub r_squared_within: f64,
    pub n_obs: usize,
    pub dof: usize,
    pub dof_absorbed: usize,
    pub se_mode: SeMode,
    pub sweeps: usize,
    /// Per-observation residuals, aligned with `residual_entity`/`residual_time`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residuals: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residual_entity: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residual_time: Vec<i64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entity_labels: Vec<String>,
}

impl FitResult {
    pub fn coef(&self, reg: Regressor) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.regressor == reg)
    }

    /// Estimate for `reg`, or `None` if the regressor was not in the model.
    pub fn estimate(&self, reg: Regressor) -> Option<f64> {
        self.coef(reg).map(|c| c.estimate)
    }

    pub fn without_residuals(&self) -> FitResult {
        FitResult {
            residuals: Vec::new(),
            residual_entity: Vec::new(),
            residual_time: Vec::new(),
            entity_labels: Vec::new(),
            ..self.clone()
        }
    }
}

/// Emissions and intensity elasticities of one (region, resource, pollutant) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticityPair {
    pub region: String,
    pub resource: Resource,
    pub pollutant: Pollutant,
    /// α′: elasticity of emissions mass.
    pub alpha_em: f64,
    /// α: elasticity of emissions intensity.
    pub alpha_ei: f64,
    pub se_em: f64,
    pub se_ei: f64,
}

impl ElasticityPair {
    pub fn new(
        region: impl Into<String>,
        resource: Resource,
        pollutant: Pollutant,
        alpha_em: f64,
        alpha_ei: f64,
    ) -> Self {
        ElasticityPair {
            region: region.into(),
            resource,
            pollutant,
            alpha_em,
            alpha_ei,
            se_em: 0.0,
            se_ei: 0.0,
        }
    }

    pub fn with_se(mut self, se_em: f64, se_ei: f64) -> Self {
        self.se_em = se_em;
        self.se_ei = se_ei;
        self
    }

    pub fn gen_elasticity(&self) -> f64 {
        gen_elasticity(self)
    }
}

/// Implied thermal-generation elasticity ∂ln G/∂ln R = α′ − α.
///
/// ln EI = ln E − ln G, so the intensity elasticity equals the emissions
/// elasticity minus the generation elasticity.
pub fn gen_elasticity(pair: &ElasticityPair) -> f64 {
    pair.alpha_em - pair.alpha_ei
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CfBucket {
    Low,
    Mid,
    High,
}

impl CfBucket {
    /// `low < t_low <= mid <= t_high < high`.
    pub fn classify(cf: f64, thresholds: (f64, f64)) -> CfBucket {
        if cf < thresholds.0 {
            CfBucket::Low
        } else if cf <= thresholds.1 {
            CfBucket::Mid
        } else {
            CfBucket::High
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CfBucket::Low => "low",
            CfBucket::Mid => "mid",
            CfBucket::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTotals {
    pub observed: f64,
    pub low: f64,
    pub high: f64,
}

impl ScenarioTotals {
    pub fn add(&mut self, other: ScenarioTotals) {
        self.observed += other.observed;
        self.low += other.low;
        self.high += other.high;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownCell {
    pub fuel: Fuel,
    pub cf_bucket: CfBucket,
    #[serde(flatten)]
    pub totals: ScenarioTotals,
}

/// Observed versus percentile-intensity emissions for one region, in tonnes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub region: String,
    pub pollutant: Pollutant,
    pub percentile_low: f64,
    pub percentile_high: f64,
    pub observed_total: f64,
    pub low_total: f64,
    pub high_total: f64,
    pub breakdown: Vec<BreakdownCell>,
}

pub fn month_year(date: NaiveDate) -> (u32, i32) {
    (date.month(), date.year())
}
