//! Reading, validating and aggregating plant-hour and BA-hour data into the
//! daily estimation panel.
//!
//! File formats (all UTF-8 CSV with a header row, empty field = missing):
//!
//! ```text
//! plants.csv      plant_id,ba_id,fuel,nameplate_mw[,stack_height_m,in_service_year]
//! plant_hours.csv plant_id,timestamp,gen_mwh,co2_tons,so2_kg,nox_kg
//! ba_hours.csv    ba_id,timestamp,demand_mwh,wind_mwh,solar_mwh,hydro_mwh,net_imports_mwh
//! ```
//!
//! Timestamps are RFC 3339 hour beginnings. `partners.cfg` is TOML with a
//! `[partners]` table mapping each BA to a list of partner BA ids.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, Timelike, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::{
    month_year, DailyPanelRow, HourlyBaObs, HourlyPlantObs, PanelDataset, PlantMeta, Pollutant,
};
use crate::error::{Error, Result};

pub const PLANT_HOURS_HEADER: [&str; 6] =
    ["plant_id", "timestamp", "gen_mwh", "co2_tons", "so2_kg", "nox_kg"];
pub const BA_HOURS_HEADER: [&str; 7] = [
    "ba_id",
    "timestamp",
    "demand_mwh",
    "wind_mwh",
    "solar_mwh",
    "hydro_mwh",
    "net_imports_mwh",
];
pub const PLANTS_HEADER: [&str; 4] = ["plant_id", "ba_id", "fuel", "nameplate_mw"];

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        DateRange { start, end }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        d >= self.start && d <= self.end
    }

    pub fn days(&self) -> i64 {
        if self.end < self.start {
            0
        } else {
            (self.end - self.start).num_days() + 1
        }
    }

    pub fn hours(&self) -> i64 {
        self.days() * 24
    }
}

/// BA → partner regions whose wind, solar and demand form the external controls.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PartnerConfig {
    #[serde(default)]
    pub partners: BTreeMap<String, Vec<String>>,
}

impl PartnerConfig {
    pub fn validate(&self) -> Result<()> {
        for (ba, list) in &self.partners {
            if list.iter().any(|p| p == ba) {
                return Err(Error::Argument(format!("region {ba} lists itself as a partner")));
            }
        }
        Ok(())
    }

    pub fn of(&self, ba: &str) -> &[String] {
        self.partners.get(ba).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: PartnerConfig = toml::from_str(text).map_err(|e| Error::Parse {
            source_name: "partners.cfg".into(),
            line: 0,
            column: String::new(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("partner config serializes")
    }
}

// ---------------------------------------------------------------------------
// CSV plumbing

fn source_name(path: &Path) -> String {
    path.display().to_string()
}

fn check_header(source: &str, headers: &csv::StringRecord, required: &[&str]) -> Result<()> {
    for (i, name) in required.iter().enumerate() {
        match headers.get(i) {
            Some(h) if h.trim() == *name => {}
            other => {
                return Err(Error::Parse {
                    source_name: source.to_string(),
                    line: 1,
                    column: name.to_string(),
                    message: format!("expected header `{name}` at position {}, found {:?}", i + 1, other),
                })
            }
        }
    }
    Ok(())
}

/// Deserialize every record, mapping failures to line/column parse errors.
fn read_records<T, R>(reader: R, source: &str, required: &[&str]) -> Result<Vec<(u64, T)>>
where
    T: DeserializeOwned,
    R: Read,
{
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            source_name: source.to_string(),
            line: 1,
            column: String::new(),
            message: e.to_string(),
        })?
        .clone();
    check_header(source, &headers, required)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Parse {
                source_name: source.to_string(),
                line,
                column: String::new(),
                message: e.to_string(),
            }
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let value: T = rec.deserialize(Some(&headers)).map_err(|e| {
            let column = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err
                    .field()
                    .and_then(|i| headers.get(i as usize))
                    .unwrap_or("")
                    .to_string(),
                _ => String::new(),
            };
            let message = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.kind().to_string(),
                _ => e.to_string(),
            };
            Error::Parse {
                source_name: source.to_string(),
                line,
                column,
                message,
            }
        })?;
        out.push((line, value));
    }
    Ok(out)
}

fn nonneg(source: &str, line: u64, column: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x >= 0.0 && x.is_finite()) => Err(Error::Parse {
            source_name: source.to_string(),
            line,
            column: column.to_string(),
            message: format!("value must be a finite number >= 0, got {x}"),
        }),
        _ => Ok(()),
    }
}

pub fn read_plants<R: Read>(reader: R, source: &str) -> Result<Vec<PlantMeta>> {
    let rows: Vec<(u64, PlantMeta)> = read_records(reader, source, &PLANTS_HEADER)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, meta) in rows {
        meta.validate().map_err(|e| Error::Parse {
            source_name: source.to_string(),
            line,
            column: "nameplate_mw".into(),
            message: e.to_string(),
        })?;
        if !seen.insert(meta.plant_id.clone()) {
            return Err(Error::Integrity(format!(
                "{source}: line {line}: duplicate plant_id {}",
                meta.plant_id
            )));
        }
        out.push(meta);
    }
    out.sort_by(|a, b| a.plant_id.cmp(&b.plant_id));
    Ok(out)
}

pub fn load_plants(path: &Path) -> Result<Vec<PlantMeta>> {
    read_plants(File::open(path)?, &source_name(path))
}

/// Parse plant hours; rows come back sorted by `(plant_id, timestamp)`.
pub fn read_plant_hours<R: Read>(
    reader: R,
    source: &str,
    meta: &[PlantMeta],
) -> Result<Vec<HourlyPlantObs>> {
    let known: BTreeSet<&str> = meta.iter().map(|m| m.plant_id.as_str()).collect();
    let rows: Vec<(u64, HourlyPlantObs)> = read_records(reader, source, &PLANT_HOURS_HEADER)?;
    let mut keyed = Vec::with_capacity(rows.len());
    for (line, obs) in rows {
        if !known.contains(obs.plant_id.as_str()) {
            return Err(Error::Integrity(format!(
                "{source}: line {line}: unknown plant_id {}",
                obs.plant_id
            )));
        }
        nonneg(source, line, "gen_mwh", obs.gen_mwh)?;
        nonneg(source, line, "co2_tons", obs.co2_tons)?;
        nonneg(source, line, "so2_kg", obs.so2_kg)?;
        nonneg(source, line, "nox_kg", obs.nox_kg)?;
        if obs.timestamp.minute() != 0 || obs.timestamp.second() != 0 {
            return Err(Error::Parse {
                source_name: source.to_string(),
                line,
                column: "timestamp".into(),
                message: "timestamp must be an hour beginning".into(),
            });
        }
        keyed.push((line, obs));
    }
    keyed.sort_by(|a, b| (&a.1.plant_id, a.1.timestamp).cmp(&(&b.1.plant_id, b.1.timestamp)));
    for w in keyed.windows(2) {
        if w[0].1.plant_id == w[1].1.plant_id && w[0].1.timestamp == w[1].1.timestamp {
            return Err(Error::Integrity(format!(
                "{source}: duplicate (plant, hour) ({}, {}) on lines {} and {}",
                w[1].1.plant_id, w[1].1.timestamp, w[0].0, w[1].0
            )));
        }
    }
    Ok(keyed.into_iter().map(|(_, o)| o).collect())
}

pub fn load_plant_hours(path: &Path, meta: &[PlantMeta]) -> Result<Vec<HourlyPlantObs>> {
    read_plant_hours(File::open(path)?, &source_name(path), meta)
}

/// Parse BA hours; rows come back sorted by `(ba_id, timestamp)`.
pub fn read_ba_hours<R: Read>(reader: R, source: &str) -> Result<Vec<HourlyBaObs>> {
    let rows: Vec<(u64, HourlyBaObs)> = read_records(reader, source, &BA_HOURS_HEADER)?;
    let mut keyed = Vec::with_capacity(rows.len());
    for (line, obs) in rows {
        obs.validate().map_err(|e| Error::Parse {
            source_name: source.to_string(),
            line,
            column: String::new(),
            message: e.to_string(),
        })?;
        keyed.push((line, obs));
    }
    keyed.sort_by(|a, b| (&a.1.ba_id, a.1.timestamp).cmp(&(&b.1.ba_id, b.1.timestamp)));
    for w in keyed.windows(2) {
        if w[0].1.ba_id == w[1].1.ba_id && w[0].1.timestamp == w[1].1.timestamp {
            return Err(Error::Integrity(format!(
                "{source}: duplicate (ba, hour) ({}, {}) on lines {} and {}",
                w[1].1.ba_id, w[1].1.timestamp, w[0].0, w[1].0
            )));
        }
    }
    Ok(keyed.into_iter().map(|(_, o)| o).collect())
}

pub fn load_ba_hours(path: &Path) -> Result<Vec<HourlyBaObs>> {
    read_ba_hours(File::open(path)?, &source_name(path))
}

fn write_csv<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_plants<W: Write>(writer: W, plants: &[PlantMeta]) -> Result<()> {
    write_csv(writer, plants)
}

pub fn write_plant_hours<W: Write>(writer: W, obs: &[HourlyPlantObs]) -> Result<()> {
    if obs.is_empty() {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(PLANT_HOURS_HEADER).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        w.flush()?;
        return Ok(());
    }
    write_csv(writer, obs)
}

pub fn write_ba_hours<W: Write>(writer: W, obs: &[HourlyBaObs]) -> Result<()> {
    if obs.is_empty() {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(BA_HOURS_HEADER).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        w.flush()?;
        return Ok(());
    }
    write_csv(writer, obs)
}

// ---------------------------------------------------------------------------
// Filters and daily regressors

/// Plants whose share of window hours carrying both generation and CO₂ is at
/// least `threshold`.
pub fn coverage_filter(
    obs: &[HourlyPlantObs],
    window: DateRange,
    threshold: f64,
) -> Result<BTreeSet<String>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Argument(format!("coverage threshold must be in (0, 1], got {threshold}")));
    }
    let total = window.hours();
    if total <= 0 {
        return Err(Error::Argument("coverage window is empty".into()));
    }
    let mut counts: BTreeMap<&str, i64> = BTreeMap::new();
    for o in obs {
        let entry = counts.entry(o.plant_id.as_str()).or_insert(0);
        if window.contains(o.timestamp.date_naive()) && o.gen_mwh.is_some() && o.co2_tons.is_some() {
            *entry += 1;
        }
    }
    Ok(counts
        .into_iter()
        .filter(|&(_, n)| n as f64 / total as f64 >= threshold)
        .map(|(p, _)| p.to_string())
        .collect())
}

/// Daily intermittency: Σ |v[h+1] − v[h]| over the 23 within-day differences.
pub fn intermittency(hourly: &[f64]) -> Result<f64> {
    if hourly.len() != 24 {
        return Err(Error::Argument(format!(
            "intermittency needs 24 hourly values, got {}",
            hourly.len()
        )));
    }
    Ok(hourly.windows(2).map(|w| (w[1] - w[0]).abs()).sum())
}

/// Variant that also counts the step into the next day's first hour
/// (24 differences).
pub fn intermittency_wrapped(hourly: &[f64], next_day_first: f64) -> Result<f64> {
    Ok(intermittency(hourly)? + (next_day_first - hourly[23]).abs())
}

/// D′ = D − H − I (net imports signed).
pub fn net_thermal_demand(demand: f64, hydro: f64, net_imports: f64) -> f64 {
    demand - hydro - net_imports
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityFactor {
    /// Clipped to `[0, 1.05]`.
    pub value: f64,
    /// The raw ratio exceeded 1.05.
    pub flagged: bool,
}

pub fn capacity_factor(gen_mwh: f64, nameplate_mw: f64, hours: f64) -> Result<CapacityFactor> {
    if !(nameplate_mw > 0.0) {
        return Err(Error::Argument(format!("nameplate must be > 0, got {nameplate_mw}")));
    }
    if !(hours > 0.0) {
        return Err(Error::Argument(format!("hours must be > 0, got {hours}")));
    }
    let raw = gen_mwh / (nameplate_mw * hours);
    Ok(CapacityFactor {
        value: raw.clamp(0.0, 1.05),
        flagged: raw > 1.05,
    })
}

// ---------------------------------------------------------------------------
// Daily aggregation

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampMode {
    /// 23 differences inside the day.
    #[default]
    WithinDay,
    /// Also the step into the next day's first hour; needs that hour.
    WrapNextDay,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateOptions {
    #[serde(default)]
    pub ramp_mode: RampMode,
    /// Fixed local-time offset (hours east of UTC) defining each BA's day.
    #[serde(default)]
    pub utc_offset_hours: BTreeMap<String, i32>,
    /// Plants kept after coverage filtering; `None` keeps all.
    #[serde(default)]
    pub retained: Option<BTreeSet<String>>,
    #[serde(default)]
    pub window: Option<DateRange>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    NotRetained,
    OutsideWindow,
    MissingGeneration,
    EmissionsWithoutGeneration,
    IncompleteBaDay,
    IncompletePartnerDay,
}

/// Accounting of every plant-hour that went into [`aggregate_daily`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub input_plant_hours: usize,
    pub used_plant_hours: usize,
    pub dropped_plant_hours: BTreeMap<DropReason, usize>,
    pub panel_rows: usize,
    pub ba_days_total: usize,
    pub ba_days_incomplete: usize,
    pub capacity_factor_flags: Vec<String>,
}

impl IngestReport {
    pub fn dropped_total(&self) -> usize {
        self.dropped_plant_hours.values().sum()
    }

    /// input = used + dropped.
    pub fn reconciles(&self) -> bool {
        self.input_plant_hours == self.used_plant_hours + self.dropped_total()
    }

    fn drop(&mut self, reason: DropReason) {
        *self.dropped_plant_hours.entry(reason).or_insert(0) += 1;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct BaDay {
    demand: f64,
    wind: f64,
    solar: f64,
    hydro: f64,
    net_imports: f64,
    wind_ramp: f64,
    solar_ramp: f64,
}

fn local_date(ts: DateTime<Utc>, offset_hours: i32) -> (NaiveDate, usize) {
    let local = ts + Duration::hours(offset_hours as i64);
    (local.date_naive(), local.hour() as usize)
}

/// Complete BA days keyed by (ba, local date). A day is complete when all 24
/// local hours are present (and, in wrap mode, the next day's first hour).
fn ba_days(
    ba: &[HourlyBaObs],
    opts: &AggregateOptions,
    report: &mut IngestReport,
) -> Result<BTreeMap<(String, NaiveDate), BaDay>> {
    let mut hours: BTreeMap<(String, NaiveDate), [Option<&HourlyBaObs>; 24]> = BTreeMap::new();
    let mut sorted: Vec<&HourlyBaObs> = ba.iter().collect();
    sorted.sort_by(|a, b| (&a.ba_id, a.timestamp).cmp(&(&b.ba_id, b.timestamp)));
    for o in sorted {
        let offset = opts.utc_offset_hours.get(&o.ba_id).copied().unwrap_or(0);
        let (date, hour) = local_date(o.timestamp, offset);
        let slot = &mut hours.entry((o.ba_id.clone(), date)).or_insert([None; 24])[hour];
        if slot.is_some() {
            return Err(Error::Integrity(format!(
                "duplicate BA hour {} {}",
                o.ba_id, o.timestamp
            )));
        }
        *slot = Some(o);
    }
    report.ba_days_total = hours.len();
    let mut out = BTreeMap::new();
    for ((ba_id, date), slots) in &hours {
        if slots.iter().any(Option::is_none) {
            report.ba_days_incomplete += 1;
            continue;
        }
        let obs: Vec<&HourlyBaObs> = slots.iter().map(|s| s.expect("checked")).collect();
        let wind: Vec<f64> = obs.iter().map(|o| o.wind_mwh).collect();
        let solar: Vec<f64> = obs.iter().map(|o| o.solar_mwh).collect();
        let (wind_ramp, solar_ramp) = match opts.ramp_mode {
            RampMode::WithinDay => (intermittency(&wind)?, intermittency(&solar)?),
            RampMode::WrapNextDay => {
                let next = date.succ_opt().and_then(|d| hours.get(&(ba_id.clone(), d)));
                match next.and_then(|n| n[0]) {
                    Some(first) => (
                        intermittency_wrapped(&wind, first.wind_mwh)?,
                        intermittency_wrapped(&solar, first.solar_mwh)?,
                    ),
                    None => {
                        report.ba_days_incomplete += 1;
                        continue;
                    }
                }
            }
        };
        let mut day = BaDay {
            wind_ramp,
            solar_ramp,
            ..BaDay::default()
        };
        for o in &obs {
            day.demand += o.demand_mwh;
            day.wind += o.wind_mwh;
            day.solar += o.solar_mwh;
            day.hydro += o.hydro_mwh;
            day.net_imports += o.net_imports_mwh;
        }
        out.insert((ba_id.clone(), *date), day);
    }
    Ok(out)
}

#[derive(Default)]
struct PlantDayAcc {
    gen: f64,
    mass: [f64; 3],
    mass_missing: [bool; 3],
    hours: usize,
}

/// Aggregate plant hours and BA hours into one [`DailyPanelRow`] per
/// (plant, day) with at least one valid hour.
///
/// A plant-hour is valid when its generation is present. Daily mass sums are
/// missing if any valid hour of the day lacks that pollutant.
pub fn aggregate_daily(
    plant_obs: &[HourlyPlantObs],
    ba: &[HourlyBaObs],
    plants: &[PlantMeta],
    partners: &PartnerConfig,
    opts: &AggregateOptions,
) -> Result<(PanelDataset, IngestReport)> {
    partners.validate()?;
    let mut report = IngestReport {
        input_plant_hours: plant_obs.len(),
        ..IngestReport::default()
    };
    let meta: BTreeMap<&str, &PlantMeta> = plants.iter().map(|m| (m.plant_id.as_str(), m)).collect();
    let ba_ids: BTreeSet<&str> = ba.iter().map(|o| o.ba_id.as_str()).collect();
    let observed: BTreeSet<&str> = plant_obs.iter().map(|o| o.plant_id.as_str()).collect();
    for m in plants {
        if observed.contains(m.plant_id.as_str()) && !ba_ids.contains(m.ba_id.as_str()) {
            return Err(Error::Integrity(format!(
                "plant {} references BA {} absent from BA series",
                m.plant_id, m.ba_id
            )));
        }
        for p in partners.of(&m.ba_id) {
            if !ba_ids.contains(p.as_str()) {
                return Err(Error::Integrity(format!(
                    "partner region {p} of {} absent from BA series",
                    m.ba_id
                )));
            }
        }
    }
    let days = ba_days(ba, opts, &mut report)?;

    let mut sorted: Vec<&HourlyPlantObs> = plant_obs.iter().collect();
    sorted.sort_by(|a, b| (&a.plant_id, a.timestamp).cmp(&(&b.plant_id, b.timestamp)));

    let mut acc: BTreeMap<(&str, NaiveDate), PlantDayAcc> = BTreeMap::new();
    for o in sorted {
        let m = meta.get(o.plant_id.as_str()).ok_or_else(|| {
            Error::Integrity(format!("unknown plant_id {}", o.plant_id))
        })?;
        if let Some(retained) = &opts.retained {
            if !retained.contains(&o.plant_id) {
                report.drop(DropReason::NotRetained);
                continue;
            }
        }
        let offset = opts.utc_offset_hours.get(&m.ba_id).copied().unwrap_or(0);
        let (date, _) = local_date(o.timestamp, offset);
        if let Some(w) = &opts.window {
            if !w.contains(date) {
                report.drop(DropReason::OutsideWindow);
                continue;
            }
        }
        let Some(gen) = o.gen_mwh else {
            report.drop(if o.has_any_emissions() {
                DropReason::EmissionsWithoutGeneration
            } else {
                DropReason::MissingGeneration
            });
            continue;
        };
        if !days.contains_key(&(m.ba_id.clone(), date)) {
            report.drop(DropReason::IncompleteBaDay);
            continue;
        }
        if partners
            .of(&m.ba_id)
            .iter()
            .any(|p| !days.contains_key(&(p.clone(), date)))
        {
            report.drop(DropReason::IncompletePartnerDay);
            continue;
        }
        report.used_plant_hours += 1;
        let a = acc.entry((m.plant_id.as_str(), date)).or_default();
        a.gen += gen;
        a.hours += 1;
        for (i, p) in Pollutant::ALL.into_iter().enumerate() {
            match o.mass(p) {
                Some(v) => a.mass[i] += v,
                None => a.mass_missing[i] = true,
            }
        }
    }

    let mut rows = Vec::with_capacity(acc.len());
    for ((plant_id, date), a) in acc {
        let m = meta[plant_id];
        let day = &days[&(m.ba_id.clone(), date)];
        let mut partner = (0.0, 0.0, 0.0);
        for p in partners.of(&m.ba_id) {
            let pd = &days[&(p.clone(), date)];
            partner.0 += pd.wind;
            partner.1 += pd.solar;
            partner.2 += pd.demand;
        }
        let mass = |i: usize| (!a.mass_missing[i]).then_some(a.mass[i]);
        let (month, year) = month_year(date);
        let mut row = DailyPanelRow {
            plant_id: plant_id.to_string(),
            ba_id: m.ba_id.clone(),
            date,
            y_gen: a.gen,
            y_co2: mass(0),
            y_so2: mass(1),
            y_nox: mass(2),
            y_ei_co2: None,
            y_ei_so2: None,
            y_ei_nox: None,
            demand: day.demand,
            d_net_thermal: net_thermal_demand(day.demand, day.hydro, day.net_imports),
            solar: day.solar,
            wind: day.wind,
            wind_ramp: day.wind_ramp,
            solar_ramp: day.solar_ramp,
            partner_wind: partner.0,
            partner_solar: partner.1,
            partner_demand: partner.2,
            hydro: day.hydro,
            imports_pos: day.net_imports.max(0.0),
            exports_pos: (-day.net_imports).max(0.0),
            month_label: month,
            year_label: year,
        };
        row.derive_intensities();
        rows.push(row);
    }
    report.panel_rows = rows.len();
    Ok((PanelDataset::new(rows), report))
}

/// Capacity factor of every plant over `window`, from hourly generation.
pub fn window_capacity_factors(
    obs: &[HourlyPlantObs],
    plants: &[PlantMeta],
    window: DateRange,
) -> Result<BTreeMap<String, CapacityFactor>> {
    let mut gen: BTreeMap<&str, f64> = BTreeMap::new();
    for o in obs {
        if window.contains(o.timestamp.date_naive()) {
            *gen.entry(o.plant_id.as_str()).or_insert(0.0) += o.gen_mwh.unwrap_or(0.0);
        }
    }
    plants
        .iter()
        .map(|m| {
            let g = gen.get(m.plant_id.as_str()).copied().unwrap_or(0.0);
            Ok((m.plant_id.clone(), capacity_factor(g, m.nameplate_mw, window.hours() as f64)?))
        })
        .collect()
}
