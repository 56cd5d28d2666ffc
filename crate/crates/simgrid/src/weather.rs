//! Hourly demand, wind, solar, hydro and net-import series.
//!
//! Wind is capacity × logistic of an AR(1) process; solar is capacity ×
//! a seasonal clear-sky shape × logistic clearness from a second AR(1);
//! demand is a seasonal and diurnal sinusoid times lognormal AR(1) noise.

use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1 {
    pub phi: f64,
    pub sigma: f64,
}

impl Ar1 {
    fn step(&self, prev: f64, rng: &mut impl Rng) -> f64 {
        let e: f64 = rng.sample(StandardNormal);
        self.phi * prev + self.sigma * e
    }

    fn stationary_sd(&self) -> f64 {
        self.sigma / (1.0 - self.phi * self.phi).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherParams {
    pub wind_capacity_mw: f64,
    /// Logit of the median wind capacity factor.
    pub wind_level: f64,
    pub wind: Ar1,
    pub solar_capacity_mw: f64,
    /// Logit of the median clearness.
    pub cloud_level: f64,
    pub cloud: Ar1,
    pub demand_base_mw: f64,
    pub demand_daily_amp: f64,
    pub demand_seasonal_amp: f64,
    pub demand_noise: Ar1,
    pub hydro_mw: f64,
    /// Relative sd of hourly hydro around `hydro_mw`.
    pub hydro_rel_sd: f64,
    pub net_imports_mw: f64,
    pub net_imports_sd: f64,
}

impl Default for WeatherParams {
    fn default() -> Self {
        WeatherParams {
            wind_capacity_mw: 3000.0,
            wind_level: -0.8,
            wind: Ar1 { phi: 0.97, sigma: 0.25 },
            solar_capacity_mw: 2000.0,
            cloud_level: 1.2,
            cloud: Ar1 { phi: 0.95, sigma: 0.3 },
            demand_base_mw: 9000.0,
            demand_daily_amp: 0.15,
            demand_seasonal_amp: 0.12,
            demand_noise: Ar1 { phi: 0.9, sigma: 0.02 },
            hydro_mw: 400.0,
            hydro_rel_sd: 0.1,
            net_imports_mw: 300.0,
            net_imports_sd: 150.0,
        }
    }
}

impl WeatherParams {
    pub fn validate(&self) -> Result<()> {
        let ar_ok = |a: &Ar1| a.phi.abs() < 1.0 && a.sigma >= 0.0;
        if !(ar_ok(&self.wind) && ar_ok(&self.cloud) && ar_ok(&self.demand_noise)) {
            return Err(SimError::Argument("AR(1) processes need |phi| < 1 and sigma >= 0".into()));
        }
        if !(self.demand_base_mw > 0.0 && self.wind_capacity_mw >= 0.0 && self.solar_capacity_mw >= 0.0) {
            return Err(SimError::Argument("capacities must be >= 0 and base demand > 0".into()));
        }
        if !(self.demand_daily_amp.abs() < 1.0 && self.demand_seasonal_amp.abs() < 1.0) {
            return Err(SimError::Argument("demand amplitudes must be below 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourlyWeather {
    pub timestamp: DateTime<Utc>,
    pub demand: f64,
    pub wind: f64,
    pub solar: f64,
    pub hydro: f64,
    pub net_imports: f64,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Clear-sky output shape in [0, 1] for the hour starting at `hour`.
pub fn clear_sky(day_of_year: u32, hour: u32) -> f64 {
    let tau = std::f64::consts::TAU;
    let day_length = 12.0 + 3.0 * (tau * (day_of_year as f64 - 172.0) / 365.0).cos();
    let sunrise = 12.0 - day_length / 2.0;
    let x = (hour as f64 + 0.5 - sunrise) / day_length;
    if (0.0..=1.0).contains(&x) {
        (std::f64::consts::PI * x).sin()
    } else {
        0.0
    }
}

/// `days × 24` hours starting at midnight UTC of `start`.
pub fn generate_weather(
    params: &WeatherParams,
    start: NaiveDate,
    days: usize,
    rng: &mut impl Rng,
) -> Result<Vec<HourlyWeather>> {
    params.validate()?;
    let tau = std::f64::consts::TAU;
    let t0 = start.and_hms_opt(0, 0, 0).expect("midnight").and_utc();
    let draw = |a: &Ar1, rng: &mut dyn rand::RngCore| {
        let e: f64 = rng.sample(StandardNormal);
        a.stationary_sd() * e
    };
    let mut xw = draw(&params.wind, rng);
    let mut xc = draw(&params.cloud, rng);
    let mut xd = draw(&params.demand_noise, rng);
    let mut out = Vec::with_capacity(days * 24);
    for h in 0..days * 24 {
        let ts = t0 + Duration::hours(h as i64);
        let date = ts.date_naive();
        let hour = (h % 24) as u32;
        let doy = date.ordinal();
        xw = params.wind.step(xw, rng);
        xc = params.cloud.step(xc, rng);
        xd = params.demand_noise.step(xd, rng);
        let seasonal = 1.0 + params.demand_seasonal_amp * (tau * (doy as f64 - 200.0) / 365.0).cos();
        let diurnal = 1.0 + params.demand_daily_amp * (tau * (hour as f64 - 9.0) / 24.0).sin();
        let hn: f64 = rng.sample(StandardNormal);
        let imn: f64 = rng.sample(StandardNormal);
        out.push(HourlyWeather {
            timestamp: ts,
            demand: params.demand_base_mw * seasonal * diurnal * xd.exp(),
            wind: params.wind_capacity_mw * logistic(params.wind_level + xw),
            solar: params.solar_capacity_mw * clear_sky(doy, hour) * logistic(params.cloud_level + xc),
            hydro: (params.hydro_mw * (1.0 + params.hydro_rel_sd * hn)).max(0.05 * params.hydro_mw),
            net_imports: params.net_imports_mw + params.net_imports_sd * imn,
        });
    }
    Ok(out)
}
