//! Displacement effectiveness `E = α′/(α′ − α)` from paired emissions and
//! intensity elasticities, displaced mass per plant, top-k concentration,
//! and the observed-versus-expected secondary-effect split.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Dependent, ElasticityPair, FitResult, Pollutant, Resource};
use crate::error::{Error, Result};

/// `|α′ − α|` at or below this makes E undefined.
pub const DEGENERACY_FLOOR: f64 = 1e-6;

pub fn effectiveness_with_floor(alpha_em: f64, alpha_ei: f64, floor: f64) -> Option<f64> {
    let den = alpha_em - alpha_ei;
    (den.abs() > floor).then(|| alpha_em / den)
}

/// `None` marks an undefined cell (rendered `-`).
pub fn effectiveness(pair: &ElasticityPair) -> Option<f64> {
    effectiveness_with_floor(pair.alpha_em, pair.alpha_ei, DEGENERACY_FLOOR)
}

/// First-order standard error of E treating the two estimates as
/// independent.
pub fn effectiveness_se(pair: &ElasticityPair) -> Option<f64> {
    let (a, b) = (pair.alpha_em, pair.alpha_ei);
    let den = a - b;
    (den.abs() > DEGENERACY_FLOOR)
        .then(|| ((b * pair.se_em).powi(2) + (a * pair.se_ei).powi(2)).sqrt() / (den * den))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementCell {
    pub region: String,
    pub resource: Resource,
    pub pollutant: Pollutant,
    /// `None` when undefined or when a member fit is missing.
    pub effectiveness: Option<f64>,
    pub std_error: Option<f64>,
    pub gen_elasticity: Option<f64>,
    pub alpha_em: Option<f64>,
    pub alpha_ei: Option<f64>,
    /// Renewables raise emissions (α′ > 0).
    pub perverse: bool,
    /// Both member fits were present.
    pub available: bool,
}

impl DisplacementCell {
    pub fn from_pair(pair: &ElasticityPair) -> DisplacementCell {
        DisplacementCell {
            region: pair.region.clone(),
            resource: pair.resource,
            pollutant: pair.pollutant,
            effectiveness: effectiveness(pair),
            std_error: effectiveness_se(pair),
            gen_elasticity: Some(pair.gen_elasticity()),
            alpha_em: Some(pair.alpha_em),
            alpha_ei: Some(pair.alpha_ei),
            perverse: pair.alpha_em > 0.0,
            available: true,
        }
    }

    fn unavailable(region: &str, resource: Resource, pollutant: Pollutant) -> DisplacementCell {
        DisplacementCell {
            region: region.to_string(),
            resource,
            pollutant,
            effectiveness: None,
            std_error: None,
            gen_elasticity: None,
            alpha_em: None,
            alpha_ei: None,
            perverse: false,
            available: false,
        }
    }

    /// Two decimals, or `-`.
    pub fn render(&self) -> String {
        self.effectiveness.map_or_else(|| "-".to_string(), |e| format!("{e:.2}"))
    }
}

/// Fits keyed by region and dependent (emissions or intensity of a
/// pollutant).
pub type FitMap = BTreeMap<(String, Dependent), FitResult>;

/// Grid over regions × {solar, wind} × {CO₂, SO₂, NOₓ}, ordered by
/// resource, pollutant, region.
pub fn effectiveness_table(fits: &FitMap) -> Vec<DisplacementCell> {
    let regions: Vec<&String> = {
        let mut r: Vec<&String> = fits.keys().map(|(r, _)| r).collect();
        r.dedup();
        r
    };
    let mut out = Vec::new();
    for resource in [Resource::Solar, Resource::Wind] {
        for pollutant in [Pollutant::Co2, Pollutant::So2, Pollutant::Nox] {
            for region in &regions {
                let reg = resource.regressor();
                let em = fits.get(&((*region).clone(), pollutant.emissions())).and_then(|f| f.coef(reg));
                let ei = fits.get(&((*region).clone(), pollutant.intensity())).and_then(|f| f.coef(reg));
                out.push(match (em, ei) {
                    (Some(a), Some(b)) => DisplacementCell::from_pair(&ElasticityPair::new(
                        region.as_str(),
                        resource,
                        pollutant,
                        a.estimate,
                        b.estimate,
                    )
                    .with_se(a.std_error, b.std_error)),
                    _ => DisplacementCell::unavailable(region, resource, pollutant),
                });
            }
        }
    }
    out
}

/// Wide CSV: `resource,pollutant,<region>...` with `-` for
/// undefined or unavailable cells.
pub fn effectiveness_csv(cells: &[DisplacementCell]) -> Result<String> {
    let mut regions: Vec<&str> = cells.iter().map(|c| c.region.as_str()).collect();
    regions.sort_unstable();
    regions.dedup();
    let mut rows: BTreeMap<(Resource, Pollutant), BTreeMap<&str, String>> = BTreeMap::new();
    for c in cells {
        rows.entry((c.resource, c.pollutant)).or_default().insert(c.region.as_str(), c.render());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["resource", "pollutant"];
    header.extend(&regions);
    w.write_record(&header).map_err(std::io::Error::from)?;
    for ((res, pol), cells) in rows {
        let mut rec = vec![res.as_str().to_string(), pol.as_str().to_string()];
        rec.extend(regions.iter().map(|r| cells.get(r).cloned().unwrap_or_else(|| "-".into())));
        w.write_record(&rec).map_err(std::io::Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondaryEffect {
    pub expected: f64,
    /// Reduction beyond (or short of) 1:1 displacement at `ei_thermal`.
    pub f: f64,
    pub effectiveness: f64,
}

/// Split an observed reduction into the 1:1 part `G_r · EI` and the
/// remainder `F`; `E = observed / expected = 1 + F / expected`.
pub fn secondary_effect(observed_reduction: f64, renewable_gen: f64, ei_thermal: f64) -> Result<SecondaryEffect> {
    let expected = renewable_gen * ei_thermal;
    if !(expected > 0.0) || !expected.is_finite() {
        return Err(Error::Argument(format!(
            "expected reduction must be positive, got {renewable_gen} MWh × {ei_thermal}"
        )));
    }
    Ok(SecondaryEffect {
        expected,
        f: observed_reduction - expected,
        effectiveness: observed_reduction / expected,
    })
}

/// `−β · E_plant / R_total`: mass displaced per MWh of renewable output;
/// positive means displaced.
pub fn displaced_mass(beta: f64, plant_emissions: f64, renewable_total: f64) -> Result<f64> {
    if !(renewable_total > 0.0) {
        return Err(Error::Argument(format!("renewable total must be > 0, got {renewable_total}")));
    }
    Ok(-beta * plant_emissions / renewable_total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub k: usize,
    pub share: f64,
    /// The top-k plants, largest first.
    pub top: Vec<(String, f64)>,
}

/// Share of total displaced mass held by the `k` largest plants. Ties break
/// on plant id.
pub fn concentration(displaced: &[(String, f64)], k: usize) -> Result<Concentration> {
    if k == 0 {
        return Err(Error::Argument("k must be >= 1".into()));
    }
    let total: f64 = displaced.iter().map(|(_, v)| v).sum();
    if !(total > 0.0) {
        return Err(Error::Argument(format!("total displaced mass must be > 0, got {total}")));
    }
    let mut sorted = displaced.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    sorted.truncate(k);
    let top_sum: f64 = sorted.iter().map(|(_, v)| v).sum();
    Ok(Concentration {
        k,
        share: top_sum / total,
        top: sorted,
    })
}
