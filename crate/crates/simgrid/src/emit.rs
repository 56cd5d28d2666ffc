//! Writes a generated dataset in the ingest file layout.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use gridshift_core::domain::{HourlyBaObs, HourlyPlantObs, PlantMeta};
use gridshift_core::ingest::{write_ba_hours, write_plant_hours, write_plants, PartnerConfig};
use serde::Serialize;

use crate::Result;

pub const PLANTS_FILE: &str = "plants.csv";
pub const PLANT_HOURS_FILE: &str = "plant_hours.csv";
pub const BA_HOURS_FILE: &str = "ba_hours.csv";
pub const PARTNERS_FILE: &str = "partners.toml";
pub const TRUTH_FILE: &str = "truth.json";

#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a> {
    pub plants: &'a [PlantMeta],
    pub plant_hours: &'a [HourlyPlantObs],
    pub ba_hours: &'a [HourlyBaObs],
    pub partners: &'a PartnerConfig,
}

/// Write all files into `dir`, creating it if needed. Returns the paths in
/// a fixed order.
pub fn write_dataset(dir: &Path, data: Dataset<'_>, truth: &impl Serialize) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let path = |name: &str| dir.join(name);
    write_plants(BufWriter::new(File::create(path(PLANTS_FILE))?), data.plants)?;
    write_plant_hours(BufWriter::new(File::create(path(PLANT_HOURS_FILE))?), data.plant_hours)?;
    write_ba_hours(BufWriter::new(File::create(path(BA_HOURS_FILE))?), data.ba_hours)?;
    fs::write(path(PARTNERS_FILE), data.partners.to_toml())?;
    let mut json = serde_json::to_string_pretty(truth)?;
    json.push('\n');
    fs::write(path(TRUTH_FILE), json)?;
    Ok([PLANTS_FILE, PLANT_HOURS_FILE, BA_HOURS_FILE, PARTNERS_FILE, TRUTH_FILE]
        .into_iter()
        .map(path)
        .collect())
}
