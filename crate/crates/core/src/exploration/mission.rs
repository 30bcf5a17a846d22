//! The simulated mission loop and its log.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adaptive::{adaptive_replan, expected_measurement_duration, minimum_measurements, ReplanInput};
use super::select::{candidate_kv, select_greedy, select_monte_carlo};
use super::tsp::plan_tsp_route;
use super::{candidate_waypoints, CandidateMode, MissionConfig, Point, Strategy};
use crate::error::Result;
use crate::evaluation::{mse, CurvePoint};
use crate::field::{GridSpec, RateField};
use crate::kriging::{krige_grid_with, KrigingMap, KrigingMethod, KrigingOptions};
use crate::rng::{measurement_rng, stream_rng, CANDIDATE_STREAM, PLANNER_STREAM};
use crate::sample::Sample;
use crate::sensor::{simulate_measurement_within, Measurement, TICK_SECONDS};
use crate::variography::{empirical_variogram, fit_gaussian_model, weighted_mean_rate, FitOptions, VariogramModel};

/// Floor for the mean rate handed to Poisson kriging when nothing was counted.
const MIN_MEAN_RATE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub tool_version: String,
    pub seed: u64,
    pub config: MissionConfig,
    pub field: GridSpec,
    pub candidates: usize,
    pub bootstrap_variogram: VariogramModel,
    pub variogram_max_lag: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub mean_estimate: f64,
    pub mean_variance: f64,
    pub max_variance: f64,
}

impl MapSummary {
    fn of(map: &KrigingMap) -> Self {
        Self {
            mean_estimate: map.estimate.mean(),
            mean_variance: map.variance.mean(),
            max_variance: map.variance.max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub index: usize,
    pub target: Point,
    pub leg_distance: f64,
    pub travel_time: f64,
    pub measurement: Measurement,
    pub variogram: VariogramModel,
    /// False while the bootstrap prior (or the fallback) is in use.
    pub variogram_fitted: bool,
    pub mean_rate: f64,
    pub elapsed_s: f64,
    pub distance_m: f64,
    pub mse: f64,
    pub map: MapSummary,
    /// Remaining plan length after replanning (adaptive sampling only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_len: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Horizon,
    CandidatesExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFooter {
    pub measurements: usize,
    pub elapsed_s: f64,
    pub distance_m: f64,
    pub travel_time_s: f64,
    pub measuring_time_s: f64,
    pub final_mse: Option<f64>,
    pub stop_reason: StopReason,
}

/// One line of the JSON-lines run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogLine {
    Header(RunHeader),
    Measurement(MeasurementRecord),
    Footer(RunFooter),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub header: RunHeader,
    pub records: Vec<MeasurementRecord>,
    pub footer: RunFooter,
    /// Model after the last update; not part of the serialized log.
    pub final_map: Option<KrigingMap>,
}

impl RunLog {
    pub fn curve(&self) -> Vec<CurvePoint> {
        self.records
            .iter()
            .map(|r| CurvePoint { time_s: r.elapsed_s, distance_m: r.distance_m, mse: r.mse })
            .collect()
    }

    /// Robot positions: start, then every measurement target.
    pub fn trajectory(&self) -> Vec<Point> {
        let start = self
            .header
            .config
            .start
            .unwrap_or(Point::new(self.header.field.origin_x, self.header.field.origin_y));
        std::iter::once(start).chain(self.records.iter().map(|r| r.target)).collect()
    }

    pub fn lines(&self) -> Vec<LogLine> {
        std::iter::once(LogLine::Header(self.header.clone()))
            .chain(self.records.iter().cloned().map(LogLine::Measurement))
            .chain(std::iter::once(LogLine::Footer(self.footer.clone())))
            .collect()
    }
}

/// Mutable state of a running mission.
#[derive(Debug, Clone)]
pub struct ExplorationState {
    pub measurements: Vec<Measurement>,
    pub position: Point,
    pub elapsed_s: f64,
    pub distance_m: f64,
    pub travel_time_s: f64,
    pub measuring_time_s: f64,
    pub map: Option<KrigingMap>,
    pub variogram: VariogramModel,
    pub variogram_fitted: bool,
    pub mean_rate: f64,
    /// Candidate indices still to visit (adaptive sampling only).
    pub plan: VecDeque<usize>,
    pub visited: Vec<bool>,
}

impl ExplorationState {
    fn mean_leg_m(&self, fallback: f64) -> f64 {
        if self.measurements.is_empty() {
            fallback
        } else {
            self.distance_m / self.measurements.len() as f64
        }
    }
}

/// Runs one simulated exploration mission against `truth`.
///
/// The robot starts at the field corner. Each iteration picks a target,
/// drives there in a straight line, measures under the configured regime,
/// refits the variogram, re-kriges the grid with Poisson kriging and scores
/// it against the truth. A leg is only started if at least one sensor tick
/// fits in the remaining time, and the last measurement is cut short at the
/// horizon, so the elapsed time never exceeds it.
pub fn run_mission(config: &MissionConfig, truth: &RateField) -> Result<RunLog> {
    config.validate()?;
    let spec = *truth.spec();
    let candidates: Vec<Point> = candidate_waypoints(&spec, config.waypoint_spacing)?;
    let bootstrap = config.bootstrap_for(&spec);
    let max_lag = config.max_lag_for(&spec);
    let fit_opts = FitOptions { loss_scale: config.loss_scale, fallback: bootstrap, min_bins: 3 };
    let kriging_opts = KrigingOptions { variance_form: config.variance_form };
    let mut planner_rng = stream_rng(config.seed, PLANNER_STREAM);
    let mut candidate_rng = stream_rng(config.seed, CANDIDATE_STREAM);

    let start = config.start.unwrap_or(Point::new(spec.origin_x, spec.origin_y));
    let mut state = ExplorationState {
        measurements: Vec::new(),
        position: start,
        elapsed_s: 0.0,
        distance_m: 0.0,
        travel_time_s: 0.0,
        measuring_time_s: 0.0,
        map: None,
        variogram: bootstrap,
        variogram_fitted: false,
        mean_rate: 0.0,
        plan: VecDeque::new(),
        visited: vec![false; candidates.len()],
    };

    if config.strategy == Strategy::AdaptiveSampling {
        // initial plan: a random, KV-agnostic tour sized to the horizon
        let n_min = minimum_measurements(
            config.horizon_s,
            expected_measurement_duration(&config.regime, 0.0),
            config.waypoint_spacing / config.robot_speed,
        )
        .max(1)
        .min(candidates.len());
        let mut pool: Vec<usize> = (0..candidates.len()).collect();
        let mut picks = Vec::with_capacity(n_min);
        for _ in 0..n_min {
            let slot = planner_rng.random_range(0..pool.len());
            picks.push(pool.swap_remove(slot));
        }
        let pts: Vec<Point> = picks.iter().map(|&i| candidates[i]).collect();
        state.plan = plan_tsp_route(&pts, start).into_iter().map(|k| picks[k]).collect();
    }

    let mut records = Vec::new();
    let stop_reason = loop {
        let Some(target) = next_target(config, &spec, &candidates, &mut state, &mut planner_rng, &mut candidate_rng)
        else {
            break StopReason::CandidatesExhausted;
        };

        let leg = state.position.distance(&target);
        let travel = leg / config.robot_speed;
        if state.elapsed_s + travel + TICK_SECONDS > config.horizon_s {
            break StopReason::Horizon;
        }
        state.elapsed_s += travel;
        state.travel_time_s += travel;
        state.distance_m += leg;
        state.position = target;
        if let Some(i) = candidates.iter().position(|c| c.distance(&target) < 1e-9) {
            state.visited[i] = true;
        }

        let tick_budget = ((config.horizon_s - state.elapsed_s) / TICK_SECONDS + 1e-9).floor() as u64;
        let index = state.measurements.len();
        let m = simulate_measurement_within(
            truth,
            target.x,
            target.y,
            &config.regime,
            &config.env,
            Some(tick_budget),
            &mut measurement_rng(config.seed, index),
        )?;
        state.elapsed_s += m.duration;
        state.measuring_time_s += m.duration;
        state.measurements.push(m.clone());

        update_model(config, &spec, &fit_opts, kriging_opts, bootstrap, max_lag, &mut state)?;
        let map = state.map.as_ref().expect("model updated");
        let err = mse(&map.estimate, truth.grid())?;

        let plan_len = if config.strategy == Strategy::AdaptiveSampling {
            replan(config, &candidates, &mut state, &mut planner_rng);
            Some(state.plan.len())
        } else {
            None
        };

        let map = state.map.as_ref().expect("model updated");
        records.push(MeasurementRecord {
            index,
            target,
            leg_distance: leg,
            travel_time: travel,
            measurement: m,
            variogram: state.variogram,
            variogram_fitted: state.variogram_fitted,
            mean_rate: state.mean_rate,
            elapsed_s: state.elapsed_s,
            distance_m: state.distance_m,
            mse: err,
            map: MapSummary::of(map),
            plan_len,
        });

        if state.elapsed_s >= config.horizon_s {
            break StopReason::Horizon;
        }
    };

    if state.map.as_ref().is_some_and(|m| m.estimate.max() == m.estimate.min()) {
        log::info!("mission ended with a flat estimate map");
    }
    let footer = RunFooter {
        measurements: records.len(),
        elapsed_s: state.elapsed_s,
        distance_m: state.distance_m,
        travel_time_s: state.travel_time_s,
        measuring_time_s: state.measuring_time_s,
        final_mse: records.last().map(|r| r.mse),
        stop_reason,
    };
    let header = RunHeader {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        config: config.clone(),
        field: spec,
        candidates: candidates.len(),
        bootstrap_variogram: bootstrap,
        variogram_max_lag: max_lag,
    };
    Ok(RunLog { header, records, footer, final_map: state.map })
}

fn next_target<R: Rng>(
    config: &MissionConfig,
    spec: &GridSpec,
    candidates: &[Point],
    state: &mut ExplorationState,
    planner_rng: &mut R,
    candidate_rng: &mut R,
) -> Option<Point> {
    if config.strategy == Strategy::AdaptiveSampling {
        return state.plan.pop_front().map(|i| candidates[i]);
    }
    let Some(map) = state.map.as_ref() else {
        let (cx, cy) = spec.center();
        return Some(config.first_target.unwrap_or(Point::new(cx, cy)));
    };
    match (config.strategy, config.candidate_mode) {
        (Strategy::Greedy, _) => {
            let kv = candidate_kv(map, candidates);
            select_greedy(&kv, candidates, &state.visited, state.position).map(|i| candidates[i])
        }
        (Strategy::MonteCarlo, CandidateMode::Lattice) => {
            let kv = candidate_kv(map, candidates);
            select_monte_carlo(&kv, &state.visited, planner_rng).map(|i| candidates[i])
        }
        (Strategy::MonteCarlo, CandidateMode::Random { count }) => {
            let fresh: Vec<Point> = (0..count)
                .map(|_| {
                    Point::new(
                        spec.origin_x + candidate_rng.random::<f64>() * spec.width(),
                        spec.origin_y + candidate_rng.random::<f64>() * spec.height(),
                    )
                })
                .collect();
            let kv = candidate_kv(map, &fresh);
            select_monte_carlo(&kv, &vec![false; fresh.len()], planner_rng).map(|i| fresh[i])
        }
        (Strategy::AdaptiveSampling, _) => unreachable!("handled above"),
    }
}

fn update_model(
    config: &MissionConfig,
    spec: &GridSpec,
    fit_opts: &FitOptions,
    kriging_opts: KrigingOptions,
    bootstrap: VariogramModel,
    max_lag: f64,
    state: &mut ExplorationState,
) -> Result<()> {
    let samples: Vec<Sample> = state.measurements.iter().map(Measurement::sample).collect();
    state.mean_rate = weighted_mean_rate(&samples)?;

    (state.variogram, state.variogram_fitted) = if samples.len() >= config.min_fit_measurements {
        match empirical_variogram(&samples, config.variogram_bin_width, max_lag) {
            Ok(emp) => {
                let fit = fit_gaussian_model(&emp, fit_opts);
                (fit.model, fit.fitted)
            }
            Err(e) => {
                log::debug!("no empirical variogram yet: {e}");
                (bootstrap, false)
            }
        }
    } else {
        (bootstrap, false)
    };

    let m_hat = if state.mean_rate > 0.0 {
        state.mean_rate
    } else {
        log::warn!("no counts observed yet; using a vanishing mean rate");
        MIN_MEAN_RATE
    };
    state.map = Some(krige_grid_with(&samples, &state.variogram, m_hat, spec, KrigingMethod::Poisson, kriging_opts)?);
    Ok(())
}

fn replan<R: Rng>(config: &MissionConfig, candidates: &[Point], state: &mut ExplorationState, rng: &mut R) {
    let map = state.map.as_ref().expect("model updated");
    let kv = candidate_kv(map, candidates);
    let remaining = config.horizon_s - state.elapsed_s;
    let leg_s = state.mean_leg_m(config.waypoint_spacing) / config.robot_speed;
    // keep one target while time is left; the horizon check ends the run
    let n_min = minimum_measurements(remaining, expected_measurement_duration(&config.regime, state.mean_rate), leg_s)
        .max(usize::from(remaining > 0.0));
    let plan: Vec<usize> = state.plan.iter().copied().collect();
    let input = ReplanInput {
        plan: &plan,
        candidates,
        visited: &state.visited,
        kv: &kv,
        mean_kv: map.variance.mean(),
        n_min,
        current: state.position,
    };
    state.plan = adaptive_replan(&input, rng).into();
}
