//! Time-varying water usage effectiveness of evaporative cooling, driven by
//! the outside wet-bulb temperature.
//!
//! Wet-bulb temperature is estimated from dry-bulb temperature and dew point:
//! the dew point gives relative humidity through the Magnus formula, then
//! Stull's closed-form fit maps (T, RH) to the wet-bulb temperature.

use alloc::vec::Vec;

use libm::{atan, exp, pow, sqrt};
use serde::{Deserialize, Serialize};

pub const MAGNUS_A: f64 = 17.625;
pub const MAGNUS_B_C: f64 = 243.04;

/// Cycles of concentration used when none is configured.
pub const DEFAULT_CYCLES: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WueError {
    #[error("dew point {dewpoint_c} °C exceeds temperature {temp_c} °C")]
    DewpointAboveTemperature { temp_c: f64, dewpoint_c: f64 },
    #[error("cycles of concentration must be > 1, got {0}")]
    InvalidCycles(f64),
    #[error("weather samples must be strictly increasing in time: sample {index} at {timestamp} follows {previous}")]
    Unordered {
        index: usize,
        timestamp: i64,
        previous: i64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WueModelConfig {
    s: f64,
    pub clamp_negative: bool,
}

impl WueModelConfig {
    pub fn new(s: f64) -> Result<Self, WueError> {
        if !(s.is_finite() && s > 1.0) {
            return Err(WueError::InvalidCycles(s));
        }
        Ok(Self {
            s,
            clamp_negative: true,
        })
    }

    pub fn cycles(&self) -> f64 {
        self.s
    }
}

impl Default for WueModelConfig {
    fn default() -> Self {
        Self {
            s: DEFAULT_CYCLES,
            clamp_negative: true,
        }
    }
}

/// One hourly weather observation. `timestamp` is Unix seconds, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherSample {
    pub timestamp: i64,
    pub temp_c: f64,
    pub dewpoint_c: f64,
}

/// Relative humidity in percent from temperature and dew point (Magnus).
pub fn relative_humidity(temp_c: f64, dewpoint_c: f64) -> Result<f64, WueError> {
    if dewpoint_c > temp_c {
        return Err(WueError::DewpointAboveTemperature { temp_c, dewpoint_c });
    }
    let gamma = |t: f64| MAGNUS_A * t / (MAGNUS_B_C + t);
    Ok(100.0 * exp(gamma(dewpoint_c) - gamma(temp_c)))
}

/// Stull's wet-bulb approximation, °C. Fitted for RH 5–99 % and
/// T −20..50 °C.
pub fn stull_wet_bulb_c(temp_c: f64, rh_percent: f64) -> f64 {
    let rh = rh_percent;
    temp_c * atan(0.151977 * sqrt(rh + 8.313659)) + atan(temp_c + rh) - atan(rh - 1.676331)
        + 0.00391838 * pow(rh, 1.5) * atan(0.023101 * rh)
        - 4.686035
}

pub fn celsius_to_fahrenheit(c: f64) -> f64 {
    c * 1.8 + 32.0
}

/// Wet-bulb temperature of a weather sample, °F.
pub fn wet_bulb_f(sample: &WeatherSample) -> Result<f64, WueError> {
    let rh = relative_humidity(sample.temp_c, sample.dewpoint_c)?;
    if !(5.0..=99.0).contains(&rh) || !(-20.0..=50.0).contains(&sample.temp_c) {
        log::warn!(
            "wet-bulb estimate outside fitted range at t={} (T={} °C, RH={:.1} %)",
            sample.timestamp,
            sample.temp_c,
            rh
        );
    }
    Ok(celsius_to_fahrenheit(stull_wet_bulb_c(sample.temp_c, rh)))
}

/// The fitted cubic in the wet-bulb temperature (°F), before the
/// cycles-of-concentration prefactor.
pub fn wue_polynomial(t_w_f: f64) -> f64 {
    6e-5 * t_w_f * t_w_f * t_w_f - 0.01 * t_w_f * t_w_f + 0.61 * t_w_f - 10.40
}

/// Estimated WUE in l/kWh for a wet-bulb temperature in °F.
pub fn wue_estimate(t_w_f: f64, cfg: &WueModelConfig) -> f64 {
    let inner = wue_polynomial(t_w_f);
    if cfg.clamp_negative && inner < 0.0 {
        return 0.0;
    }
    cfg.s / (cfg.s - 1.0) * inner
}

/// Hourly WUE estimates, one `(timestamp, l/kWh)` per sample.
pub fn hourly_wue_series(
    samples: &[WeatherSample],
    cfg: &WueModelConfig,
) -> Result<Vec<(i64, f64)>, WueError> {
    for (index, pair) in samples.windows(2).enumerate() {
        if pair[1].timestamp <= pair[0].timestamp {
            return Err(WueError::Unordered {
                index: index + 1,
                timestamp: pair[1].timestamp,
                previous: pair[0].timestamp,
            });
        }
    }
    samples
        .iter()
        .map(|s| Ok((s.timestamp, wue_estimate(wet_bulb_f(s)?, cfg))))
        .collect()
}
