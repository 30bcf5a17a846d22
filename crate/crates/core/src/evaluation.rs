//! Scoring missions against the truth and aggregating repeated runs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exploration::{run_mission, MissionConfig, RunLog, Strategy};
use crate::field::{Grid, RateField};
use crate::sensor::SamplingRegime;

/// Mean squared difference between two grids on the same spec.
pub fn mse(a: &Grid, b: &Grid) -> Result<f64> {
    if a.spec != b.spec {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} grid at ({}, {}) step {} vs {}x{} grid at ({}, {}) step {}",
            a.spec.nx,
            a.spec.ny,
            a.spec.origin_x,
            a.spec.origin_y,
            a.spec.cell_size,
            b.spec.nx,
            b.spec.ny,
            b.spec.origin_x,
            b.spec.origin_y,
            b.spec.cell_size
        )));
    }
    let sum: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.values.len() as f64)
}

/// One snapshot of a run: where it stands after a model update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub time_s: f64,
    pub distance_m: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abscissa {
    Time,
    Distance,
}

impl Abscissa {
    fn of(&self, p: &CurvePoint) -> f64 {
        match self {
            Abscissa::Time => p.time_s,
            Abscissa::Distance => p.distance_m,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Abscissa::Time => "time_s",
            Abscissa::Distance => "distance_m",
        }
    }
}

/// Pointwise mean and population standard deviation of MSE over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub abscissa: Abscissa,
    pub grid_step: f64,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Runs contributing at each point (those with a snapshot at or before it).
    pub support: Vec<usize>,
    pub runs: usize,
}

impl AggregateCurve {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Samples every run's step curve on `0, step, 2·step, ...` by carrying the
/// last snapshot forward, and averages pointwise.
///
/// The grid runs to `extent` if given, else to the furthest snapshot of any
/// run. An `extent` past every run is cut back with a warning. Leading grid
/// points before the first snapshot of any run are dropped.
pub fn aggregate_runs(logs: &[RunLog], abscissa: Abscissa, step: f64, extent: Option<f64>) -> Result<AggregateCurve> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Validation(format!("grid step {step} must be > 0")));
    }
    if logs.is_empty() {
        return Err(Error::Empty("no runs to aggregate".into()));
    }
    let curves: Vec<Vec<CurvePoint>> = logs.iter().map(RunLog::curve).collect();
    if let Some(k) = curves.iter().position(Vec::is_empty) {
        return Err(Error::Empty(format!("run {k} has no measurements")));
    }
    let support_end = curves
        .iter()
        .map(|c| abscissa.of(c.last().expect("nonempty")))
        .fold(f64::NEG_INFINITY, f64::max);
    let end = match extent {
        Some(e) if e > support_end => {
            log::warn!("aggregation grid cut back from {e} to {support_end} ({})", abscissa.label());
            support_end
        }
        Some(e) => e,
        None => support_end,
    };

    let n = (end / step + 1e-9).floor() as usize + 1;
    let mut out = AggregateCurve {
        abscissa,
        grid_step: step,
        x: Vec::new(),
        mean: Vec::new(),
        std: Vec::new(),
        support: Vec::new(),
        runs: logs.len(),
    };
    let mut cursor = vec![0usize; curves.len()];
    for k in 0..n {
        let x = k as f64 * step;
        let mut vals = Vec::with_capacity(curves.len());
        for (c, pos) in curves.iter().zip(cursor.iter_mut()) {
            while *pos < c.len() && abscissa.of(&c[*pos]) <= x {
                *pos += 1;
            }
            if *pos > 0 {
                vals.push(c[*pos - 1].mse);
            }
        }
        if vals.is_empty() {
            continue;
        }
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
        out.x.push(x);
        out.mean.push(m);
        out.std.push(var.sqrt());
        out.support.push(vals.len());
    }
    Ok(out)
}

/// A truth field with a name to refer to it from a matrix.
#[derive(Debug, Clone)]
pub struct NamedField {
    pub name: String,
    pub field: RateField,
}

/// Strategies × regimes × fields, each run once per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentMatrix {
    pub strategies: Vec<Strategy>,
    pub regimes: Vec<SamplingRegime>,
    /// Names of entries in the field list passed alongside the matrix.
    pub fields: Vec<String>,
    pub seeds: Vec<u64>,
    pub horizon_s: f64,
    #[serde(default = "default_time_step")]
    pub time_step_s: f64,
    #[serde(default = "default_distance_step")]
    pub distance_step_m: f64,
}

fn default_time_step() -> f64 {
    60.0
}

fn default_distance_step() -> f64 {
    10.0
}

impl ExperimentMatrix {
    pub fn cells(&self) -> Vec<Condition> {
        let mut out = Vec::new();
        for field in &self.fields {
            for &strategy in &self.strategies {
                for &regime in &self.regimes {
                    out.push(Condition { strategy, regime, field: field.clone() });
                }
            }
        }
        out
    }

    pub fn validate(&self, fields: &[NamedField]) -> Result<()> {
        if self.cells().is_empty() {
            return Err(Error::Validation("experiment matrix has no cells".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Validation("experiment matrix has no seeds".into()));
        }
        for name in &self.fields {
            if !fields.iter().any(|f| &f.name == name) {
                return Err(Error::Validation(format!("unknown field `{name}` in matrix")));
            }
        }
        for r in &self.regimes {
            r.validate()?;
        }
        for (name, v) in [("time_step_s", self.time_step_s), ("distance_step_m", self.distance_step_m)] {
            if !(v > 0.0) {
                return Err(Error::Validation(format!("{name} = {v} must be > 0")));
            }
        }
        if !(self.horizon_s >= 0.0) {
            return Err(Error::Validation(format!("horizon_s = {} must be >= 0", self.horizon_s)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub strategy: Strategy,
    pub regime: SamplingRegime,
    pub field: String,
}

impl Condition {
    pub fn label(&self) -> String {
        format!("{}_{}_{}", self.field, self.strategy.label(), self.regime.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub measurements: usize,
    pub final_mse: Option<f64>,
    pub distance_m: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    /// Runs with at least one measurement.
    pub runs: usize,
    pub final_mse_mean: f64,
    pub final_mse_std: f64,
    pub distance_mean: f64,
    pub measurements_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub condition: Condition,
    pub label: String,
    pub runs: Vec<RunSummary>,
    pub failures: Vec<RunFailure>,
    pub summary: Option<CellSummary>,
    pub time_curve: Option<AggregateCurve>,
    pub distance_curve: Option<AggregateCurve>,
    #[serde(skip)]
    pub logs: Vec<RunLog>,
}

/// `a − b` for two cells' summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseDifference {
    pub a: String,
    pub b: String,
    pub final_mse_mean: f64,
    pub distance_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub matrix: ExperimentMatrix,
    /// Always "population": the spread over runs, not an estimate of it.
    pub std_kind: String,
    pub cells: Vec<CellReport>,
    pub pairwise: Vec<PairwiseDifference>,
}

impl ComparisonReport {
    pub fn failed_runs(&self) -> usize {
        self.cells.iter().map(|c| c.failures.len()).sum()
    }

    pub fn cell(&self, label: &str) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.label == label)
    }
}

/// Runs every cell of `matrix` for every seed and summarizes each cell.
///
/// `base` supplies everything that is not varied by the matrix; its
/// strategy, regime, horizon and seed are overwritten per run. Runs execute
/// in parallel on the current rayon pool; results do not depend on the pool
/// size. A failing run is recorded in its cell and does not stop the others.
pub fn compare_conditions(matrix: &ExperimentMatrix, fields: &[NamedField], base: &MissionConfig) -> Result<ComparisonReport> {
    matrix.validate(fields)?;
    let cells = matrix.cells();
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| matrix.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results: Vec<Result<RunLog>> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let cond = &cells[c];
            let truth = &fields.iter().find(|f| f.name == cond.field).expect("validated").field;
            let config = MissionConfig {
                strategy: cond.strategy,
                regime: cond.regime,
                horizon_s: matrix.horizon_s,
                seed,
                ..base.clone()
            };
            run_mission(&config, truth)
        })
        .collect();

    let mut reports: Vec<CellReport> = cells
        .into_iter()
        .map(|condition| CellReport {
            label: condition.label(),
            condition,
            runs: Vec::new(),
            failures: Vec::new(),
            summary: None,
            time_curve: None,
            distance_curve: None,
            logs: Vec::new(),
        })
        .collect();
    for (&(c, seed), result) in jobs.iter().zip(results) {
        let cell = &mut reports[c];
        match result {
            Ok(log) => {
                cell.runs.push(RunSummary {
                    seed,
                    measurements: log.footer.measurements,
                    final_mse: log.footer.final_mse,
                    distance_m: log.footer.distance_m,
                    elapsed_s: log.footer.elapsed_s,
                });
                cell.logs.push(log);
            }
            Err(e) => {
                log::error!("{} seed {seed}: {e}", cell.label);
                cell.failures.push(RunFailure { seed, message: e.to_string() });
            }
        }
    }

    for cell in &mut reports {
        let scored: Vec<RunLog> = cell.logs.iter().filter(|l| !l.records.is_empty()).cloned().collect();
        if scored.is_empty() {
            continue;
        }
        let finals: Vec<f64> = scored.iter().filter_map(|l| l.footer.final_mse).collect();
        let (m, s) = mean_std(&finals);
        cell.summary = Some(CellSummary {
            runs: scored.len(),
            final_mse_mean: m,
            final_mse_std: s,
            distance_mean: mean_std(&scored.iter().map(|l| l.footer.distance_m).collect::<Vec<_>>()).0,
            measurements_mean: mean_std(&scored.iter().map(|l| l.footer.measurements as f64).collect::<Vec<_>>()).0,
        });
        cell.time_curve = Some(aggregate_runs(&scored, Abscissa::Time, matrix.time_step_s, None)?);
        cell.distance_curve = Some(aggregate_runs(&scored, Abscissa::Distance, matrix.distance_step_m, None)?);
    }

    let mut pairwise = Vec::new();
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            if let (Some(a), Some(b)) = (reports[i].summary, reports[j].summary) {
                pairwise.push(PairwiseDifference {
                    a: reports[i].label.clone(),
                    b: reports[j].label.clone(),
                    final_mse_mean: a.final_mse_mean - b.final_mse_mean,
                    distance_mean: a.distance_mean - b.distance_mean,
                });
            }
        }
    }

    Ok(ComparisonReport { matrix: matrix.clone(), std_kind: "population".into(), cells: reports, pairwise })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exploration::{MapSummary, MeasurementRecord, Point, RunFooter, RunHeader, StopReason};
    use crate::field::GridSpec;
    use crate::sensor::Measurement;
    use crate::variography::VariogramModel;

    fn grid(values: Vec<f64>) -> Grid {
        let n = values.len();
        Grid::new(GridSpec::new(0.0, 0.0, 1.0, n, 1).unwrap(), values).unwrap()
    }

    #[test]
    fn mse_values() {
        let a = grid(vec![1.0, 2.0]);
        let b = grid(vec![2.0, 4.0]);
        assert_eq!(mse(&a, &b).unwrap(), 2.5);
        assert_eq!(mse(&b, &a).unwrap(), 2.5);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert!(matches!(mse(&a, &grid(vec![1.0; 3])), Err(Error::ShapeMismatch(_))));
    }

    /// A log whose curve is exactly `points` (time, distance, mse).
    fn log_with(points: &[(f64, f64, f64)]) -> RunLog {
        let spec = GridSpec::new(0.0, 0.0, 1.0, 1, 1).unwrap();
        let vg = VariogramModel { nugget: 0.0, range: 1.0, sill: 1.0 };
        let config = MissionConfig::new(Strategy::Greedy, SamplingRegime::fmi(10.0), 1e9, 0);
        let records = points
            .iter()
            .enumerate()
            .map(|(index, &(t, d, e))| MeasurementRecord {
                index,
                target: Point::new(0.0, 0.0),
                leg_distance: 0.0,
                travel_time: 0.0,
                measurement: Measurement {
                    x: 0.0,
                    y: 0.0,
                    ticks: 1,
                    raw_counts: 1,
                    corrected_counts: 1.0,
                    duration: 10.0,
                    rate: 0.1,
                    sigma: None,
                    sigma_rel: None,
                    hit_max_duration: false,
                    truncated: false,
                },
                variogram: vg,
                variogram_fitted: false,
                mean_rate: 0.1,
                elapsed_s: t,
                distance_m: d,
                mse: e,
                map: MapSummary { mean_estimate: 0.0, mean_variance: 0.0, max_variance: 0.0 },
                plan_len: None,
            })
            .collect();
        RunLog {
            header: RunHeader {
                tool_version: "test".into(),
                seed: 0,
                config,
                field: spec,
                candidates: 1,
                bootstrap_variogram: vg,
                variogram_max_lag: 1.0,
            },
            records,
            footer: RunFooter {
                measurements: points.len(),
                elapsed_s: 0.0,
                distance_m: 0.0,
                travel_time_s: 0.0,
                measuring_time_s: 0.0,
                final_mse: points.last().map(|p| p.2),
                stop_reason: StopReason::Horizon,
            },
            final_map: None,
        }
    }

    #[test]
    fn single_run_is_its_own_mean() {
        let log = log_with(&[(0.0, 0.0, 5.0), (60.0, 10.0, 3.0), (120.0, 20.0, 1.0)]);
        let agg = aggregate_runs(&[log], Abscissa::Time, 60.0, None).unwrap();
        assert_eq!(agg.x, vec![0.0, 60.0, 120.0]);
        assert_eq!(agg.mean, vec![5.0, 3.0, 1.0]);
        assert_eq!(agg.std, vec![0.0; 3]);
    }

    #[test]
    fn constant_curves_one_and_three() {
        let a = log_with(&[(0.0, 0.0, 1.0), (100.0, 10.0, 1.0)]);
        let b = log_with(&[(0.0, 0.0, 3.0), (100.0, 10.0, 3.0)]);
        let agg = aggregate_runs(&[a, b], Abscissa::Distance, 5.0, None).unwrap();
        assert_eq!(agg.len(), 3);
        assert!(agg.mean.iter().all(|&m| m == 2.0));
        assert!(agg.std.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn short_run_is_carried_forward_and_extent_is_truncated() {
        let long = log_with(&[(10.0, 0.0, 4.0), (300.0, 0.0, 2.0)]);
        let short = log_with(&[(10.0, 0.0, 6.0), (50.0, 0.0, 5.0)]);
        let agg = aggregate_runs(&[long, short], Abscissa::Time, 60.0, Some(1000.0)).unwrap();
        // leading x = 0 has no data yet; grid stops at 300
        assert_eq!(agg.x, vec![60.0, 120.0, 180.0, 240.0, 300.0]);
        assert_eq!(agg.mean[0], 4.5);
        assert_eq!(agg.mean[4], 3.5);
        assert_eq!(agg.support, vec![2; 5]);
    }

    #[test]
    fn aggregate_rejects_empty() {
        assert!(aggregate_runs(&[], Abscissa::Time, 60.0, None).is_err());
        assert!(aggregate_runs(&[log_with(&[])], Abscissa::Time, 60.0, None).is_err());
        assert!(aggregate_runs(&[log_with(&[(0.0, 0.0, 1.0)])], Abscissa::Time, 0.0, None).is_err());
    }

    #[test]
    fn empty_matrix_is_invalid() {
        let m = ExperimentMatrix {
            strategies: vec![],
            regimes: vec![SamplingRegime::fmi(600.0)],
            fields: vec!["f".into()],
            seeds: vec![0],
            horizon_s: 100.0,
            time_step_s: 60.0,
            distance_step_m: 10.0,
        };
        assert!(m.validate(&[]).is_err());
    }
}
