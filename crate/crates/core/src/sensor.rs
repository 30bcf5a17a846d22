//! Fast-neutron counting sensor model.
//!
//! The detector reports a count every 10 s tick. Raw counts are scaled by
//! cosmic-intensity, pressure and humidity correction factors; the relative
//! uncertainty of a measurement is that of a Poisson count, `1/√N`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RateField;
use crate::sample::Sample;

/// Sensor update period in seconds.
pub const TICK_SECONDS: f64 = 10.0;

/// Humidity correction slope, per g/m³.
const HUMIDITY_COEFF: f64 = 0.00054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConditions {
    /// Monitor count rate `C` and its calibration value `C0`.
    pub cosmic_rate: f64,
    pub cosmic_rate_ref: f64,
    /// Barometric pressure `P` and reference `P0`, hPa.
    pub pressure: f64,
    pub pressure_ref: f64,
    /// Barometric coefficient, 1/hPa.
    pub beta: f64,
    /// Absolute humidity `Q` and reference `Q0`, g/m³.
    pub humidity: f64,
    pub humidity_ref: f64,
}

impl Default for EnvConditions {
    /// Reference conditions: every correction factor is exactly 1.
    fn default() -> Self {
        Self {
            cosmic_rate: 1.0,
            cosmic_rate_ref: 1.0,
            pressure: 1013.25,
            pressure_ref: 1013.25,
            beta: 0.0076,
            humidity: 0.0,
            humidity_ref: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionFactors {
    pub cosmic: f64,
    pub pressure: f64,
    pub humidity: f64,
}

impl CorrectionFactors {
    pub const NEUTRAL: Self = Self { cosmic: 1.0, pressure: 1.0, humidity: 1.0 };

    pub fn product(&self) -> f64 {
        self.pressure * self.humidity * self.cosmic
    }

    pub fn apply(&self, n_raw: u64) -> f64 {
        n_raw as f64 * self.pressure * self.humidity * self.cosmic
    }
}

pub fn correction_factors(env: &EnvConditions) -> Result<CorrectionFactors> {
    if env.cosmic_rate == 0.0 {
        return Err(Error::Domain("cosmic-ray monitor rate C is zero".into()));
    }
    for (name, v) in [
        ("cosmic_rate", env.cosmic_rate),
        ("cosmic_rate_ref", env.cosmic_rate_ref),
        ("pressure", env.pressure),
        ("pressure_ref", env.pressure_ref),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Validation(format!("{name} = {v} must be > 0")));
        }
    }
    let humidity = 1.0 + HUMIDITY_COEFF * (env.humidity - env.humidity_ref);
    if !(humidity > 0.0) {
        return Err(Error::Validation(format!("humidity correction factor {humidity} is not positive")));
    }
    Ok(CorrectionFactors {
        cosmic: env.cosmic_rate_ref / env.cosmic_rate,
        pressure: (env.beta * (env.pressure - env.pressure_ref)).exp(),
        humidity,
    })
}

pub fn correct_counts(n_raw: u64, env: &EnvConditions) -> Result<f64> {
    Ok(correction_factors(env)?.apply(n_raw))
}

/// Absolute uncertainty of a rate estimate backed by `n_crr` counts: `λ/√N`.
pub fn measurement_sigma(lambda_hat: f64, n_crr: f64) -> Result<f64> {
    if !(n_crr > 0.0) {
        return Err(Error::Domain(format!("corrected count {n_crr} must be > 0")));
    }
    Ok(lambda_hat * n_crr.sqrt() / n_crr)
}

/// Rule deciding when a measurement ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplingRegime {
    /// Fixed measurement interval.
    Fmi { duration_s: f64 },
    /// Adaptive measurement interval: stop once `1/√N ≤ threshold`.
    Ami {
        threshold: f64,
        #[serde(default = "default_max_duration")]
        max_duration_s: f64,
    },
}

fn default_max_duration() -> f64 {
    1800.0
}

impl SamplingRegime {
    pub fn fmi(duration_s: f64) -> Self {
        Self::Fmi { duration_s }
    }

    pub fn ami(threshold: f64) -> Self {
        Self::Ami { threshold, max_duration_s: default_max_duration() }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Fmi { duration_s } => {
                let ticks = duration_s / TICK_SECONDS;
                if !(duration_s > 0.0) || ticks.fract() != 0.0 {
                    return Err(Error::Validation(format!(
                        "FMI duration {duration_s} s must be a positive multiple of {TICK_SECONDS} s"
                    )));
                }
            }
            Self::Ami { threshold, max_duration_s } => {
                if !(threshold > 0.0 && threshold < 1.0) {
                    return Err(Error::Validation(format!("AMI threshold {threshold} must lie in (0, 1)")));
                }
                if !(max_duration_s >= TICK_SECONDS) || !max_duration_s.is_finite() {
                    return Err(Error::Validation(format!(
                        "AMI max duration {max_duration_s} s must be >= {TICK_SECONDS} s"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Tick budget of one measurement.
    pub fn max_ticks(&self) -> u64 {
        match *self {
            Self::Fmi { duration_s } => (duration_s / TICK_SECONDS).round() as u64,
            Self::Ami { max_duration_s, .. } => (max_duration_s / TICK_SECONDS).floor() as u64,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Self::Fmi { duration_s } => format!("fmi-{duration_s}s"),
            Self::Ami { threshold, .. } => format!("ami-{}pct", threshold * 100.0),
        }
    }
}

/// Smallest corrected count `N` with `1/√N ≤ threshold`.
pub fn ami_count_target(threshold: f64) -> f64 {
    // the epsilon absorbs representation error, e.g. 1/0.025² = 1600.0000000000002
    (1.0 / (threshold * threshold) - 1e-9).ceil()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub x: f64,
    pub y: f64,
    pub ticks: u64,
    pub raw_counts: u64,
    pub corrected_counts: f64,
    /// `10 * ticks` seconds.
    pub duration: f64,
    /// Estimated rate `N_crr / duration`, counts/s.
    pub rate: f64,
    /// Absolute rate uncertainty; `None` when no counts were observed.
    pub sigma: Option<f64>,
    /// Relative uncertainty `1/√N_crr`; `None` when no counts were observed.
    pub sigma_rel: Option<f64>,
    /// AMI cut off by its maximum duration before reaching the threshold.
    pub hit_max_duration: bool,
    /// Ended early because the mission ran out of time.
    pub truncated: bool,
}

impl Measurement {
    pub fn sample(&self) -> Sample {
        Sample::new(self.x, self.y, self.duration, self.corrected_counts)
    }
}

/// Poisson counts accumulated over one tick at rate `lambda`.
pub fn draw_tick<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    let mean = lambda * TICK_SECONDS;
    if mean <= 0.0 {
        return 0;
    }
    // Poisson::new only rejects non-positive or non-finite means, handled above
    let d = Poisson::new(mean).expect("positive finite Poisson mean");
    d.sample(rng) as u64
}

pub fn simulate_measurement<R: Rng + ?Sized>(
    field: &RateField,
    x: f64,
    y: f64,
    regime: &SamplingRegime,
    env: &EnvConditions,
    rng: &mut R,
) -> Result<Measurement> {
    simulate_measurement_within(field, x, y, regime, env, None, rng)
}

/// As [`simulate_measurement`], but never runs for more than `tick_budget`
/// ticks (the measurement is then marked truncated).
pub fn simulate_measurement_within<R: Rng + ?Sized>(
    field: &RateField,
    x: f64,
    y: f64,
    regime: &SamplingRegime,
    env: &EnvConditions,
    tick_budget: Option<u64>,
    rng: &mut R,
) -> Result<Measurement> {
    regime.validate()?;
    let factors = correction_factors(env)?;
    let lambda = field.rate_at(x, y)?;

    let regime_ticks = regime.max_ticks();
    let limit = tick_budget.map_or(regime_ticks, |b| b.min(regime_ticks));
    if limit == 0 {
        return Err(Error::Validation("measurement has no tick budget".into()));
    }
    let target = match *regime {
        SamplingRegime::Ami { threshold, .. } => Some(ami_count_target(threshold)),
        SamplingRegime::Fmi { .. } => None,
    };

    let mut raw = 0u64;
    let mut ticks = 0u64;
    let mut reached = false;
    while ticks < limit {
        raw += draw_tick(rng, lambda);
        ticks += 1;
        if let Some(t) = target {
            if factors.apply(raw) >= t {
                reached = true;
                break;
            }
        }
    }

    let corrected = factors.apply(raw);
    let duration = ticks as f64 * TICK_SECONDS;
    let rate = corrected / duration;
    let (sigma, sigma_rel) = if corrected > 0.0 {
        (Some(measurement_sigma(rate, corrected)?), Some(1.0 / corrected.sqrt()))
    } else {
        (None, None)
    };
    let truncated = limit < regime_ticks && ticks == limit && !reached;
    Ok(Measurement {
        x,
        y,
        ticks,
        raw_counts: raw,
        corrected_counts: corrected,
        duration,
        rate,
        sigma,
        sigma_rel,
        hit_max_duration: target.is_some() && !reached && !truncated,
        truncated,
    })
}
