//! Kriging-variance-driven exploration.
//!
//! Next-best-view strategies ([`Strategy::Greedy`], [`Strategy::MonteCarlo`])
//! pick one target after every model update. [`Strategy::AdaptiveSampling`]
//! keeps a multi-target plan that is pruned, topped up and re-routed after
//! every update.

mod adaptive;
mod mission;
mod select;
mod tsp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridSpec;
use crate::kriging::VarianceForm;
use crate::sensor::{EnvConditions, SamplingRegime};
use crate::variography::VariogramModel;

pub use adaptive::{adaptive_replan, expected_measurement_duration, minimum_measurements, ReplanInput};
pub use mission::{
    run_mission, ExplorationState, LogLine, MapSummary, MeasurementRecord, RunFooter, RunHeader, RunLog,
    StopReason,
};
pub use select::{candidate_kv, select_greedy, select_monte_carlo};
pub use tsp::{plan_tsp_route, route_length};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Greedy,
    MonteCarlo,
    AdaptiveSampling,
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::Greedy => "greedy",
            Strategy::MonteCarlo => "monte_carlo",
            Strategy::AdaptiveSampling => "adaptive_sampling",
        }
    }
}

/// Where Monte-Carlo selection draws its candidates from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CandidateMode {
    /// The fixed waypoint lattice minus visited points.
    #[default]
    Lattice,
    /// A fresh set of uniformly drawn locations at every step.
    Random { count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionConfig {
    pub strategy: Strategy,
    pub regime: SamplingRegime,
    pub horizon_s: f64,
    #[serde(default = "defaults::robot_speed")]
    pub robot_speed: f64,
    #[serde(default = "defaults::waypoint_spacing")]
    pub waypoint_spacing: f64,
    /// Prior used until enough measurements exist to fit one; derived from
    /// the field size when absent.
    #[serde(default)]
    pub bootstrap_variogram: Option<VariogramModel>,
    #[serde(default = "defaults::min_fit_measurements")]
    pub min_fit_measurements: usize,
    #[serde(default = "defaults::bin_width")]
    pub variogram_bin_width: f64,
    /// Half the field diagonal when absent.
    #[serde(default)]
    pub variogram_max_lag: Option<f64>,
    #[serde(default = "defaults::loss_scale")]
    pub loss_scale: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub env: EnvConditions,
    /// Field corner (the grid origin) when absent.
    #[serde(default)]
    pub start: Option<Point>,
    /// First target of next-best-view strategies; field center when absent.
    #[serde(default)]
    pub first_target: Option<Point>,
    #[serde(default)]
    pub candidate_mode: CandidateMode,
    #[serde(default)]
    pub variance_form: VarianceForm,
}

mod defaults {
    pub fn robot_speed() -> f64 {
        1.0
    }
    pub fn waypoint_spacing() -> f64 {
        10.0
    }
    pub fn min_fit_measurements() -> usize {
        5
    }
    pub fn bin_width() -> f64 {
        10.0
    }
    pub fn loss_scale() -> f64 {
        1.0
    }
}

impl MissionConfig {
    pub fn new(strategy: Strategy, regime: SamplingRegime, horizon_s: f64, seed: u64) -> Self {
        Self {
            strategy,
            regime,
            horizon_s,
            robot_speed: defaults::robot_speed(),
            waypoint_spacing: defaults::waypoint_spacing(),
            bootstrap_variogram: None,
            min_fit_measurements: defaults::min_fit_measurements(),
            variogram_bin_width: defaults::bin_width(),
            variogram_max_lag: None,
            loss_scale: defaults::loss_scale(),
            seed,
            env: EnvConditions::default(),
            start: None,
            first_target: None,
            candidate_mode: CandidateMode::default(),
            variance_form: VarianceForm::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.regime.validate()?;
        let positive = [
            ("robot_speed", self.robot_speed),
            ("waypoint_spacing", self.waypoint_spacing),
            ("variogram_bin_width", self.variogram_bin_width),
            ("loss_scale", self.loss_scale),
        ];
        // a zero horizon is accepted and yields an empty run
        if !(self.horizon_s >= 0.0) || !self.horizon_s.is_finite() {
            return Err(Error::Validation(format!("horizon_s = {} must be >= 0", self.horizon_s)));
        }
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!("{name} = {v} must be > 0")));
            }
        }
        if let Some(l) = self.variogram_max_lag {
            if !(l > 0.0) {
                return Err(Error::Validation(format!("variogram_max_lag = {l} must be > 0")));
            }
        }
        if let Some(m) = &self.bootstrap_variogram {
            m.validate()?;
        }
        if let CandidateMode::Random { count } = self.candidate_mode {
            if count == 0 {
                return Err(Error::Validation("candidate_mode.count must be >= 1".into()));
            }
        }
        crate::sensor::correction_factors(&self.env)?;
        Ok(())
    }

    /// Prior variogram: zero nugget, unit sill, range a quarter of the field diagonal.
    pub fn bootstrap_for(&self, spec: &GridSpec) -> VariogramModel {
        self.bootstrap_variogram
            .unwrap_or(VariogramModel { nugget: 0.0, range: 0.25 * spec.diagonal(), sill: 1.0 })
    }

    pub fn max_lag_for(&self, spec: &GridSpec) -> f64 {
        self.variogram_max_lag.unwrap_or(0.5 * spec.diagonal())
    }
}

/// Regular lattice of waypoints with the given spacing, anchored at the
/// field corner, in row-major order. An axis shorter than `spacing` gets a
/// single waypoint at its midpoint.
pub fn candidate_waypoints(spec: &GridSpec, spacing: f64) -> Result<Vec<Point>> {
    if !(spacing > 0.0) {
        return Err(Error::Validation(format!("waypoint spacing {spacing} must be > 0")));
    }
    let axis = |origin: f64, extent: f64| -> Vec<f64> {
        if spacing > extent {
            return vec![origin + 0.5 * extent];
        }
        let n = (extent / spacing + 1e-9).floor() as usize + 1;
        (0..n).map(|k| origin + k as f64 * spacing).collect()
    };
    let xs = axis(spec.origin_x, spec.width());
    let ys = axis(spec.origin_y, spec.height());
    Ok(ys.iter().flat_map(|&y| xs.iter().map(move |&x| Point::new(x, y))).collect())
}
