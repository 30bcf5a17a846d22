//! File formats for grids, kriging maps, run logs and exported curves.
//!
//! Grid text format: the first line is the [`GridSpec`] as JSON, followed by
//! `ny` lines of `nx` comma-separated values, row `j = 0` (smallest y) first.
//! Values are written with 17 significant digits so a file reads back to
//! the identical `f64`s.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::AggregateCurve;
use crate::exploration::{LogLine, RunLog};
use crate::field::{Grid, GridSpec, RateField};
use crate::kriging::{KrigingMap, KrigingMethod};
use crate::variography::{EmpiricalVariogram, VariogramModel};

pub fn write_grid<W: Write>(grid: &Grid, mut w: W) -> Result<()> {
    serde_json::to_writer(&mut w, &grid.spec)?;
    writeln!(w)?;
    for row in grid.values.chunks(grid.spec.nx) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_grid<R: Read>(r: R) -> Result<Grid> {
    let mut lines = BufReader::new(r).lines();
    let head = lines.next().ok_or_else(|| Error::Empty("grid file has no header".into()))??;
    let spec: GridSpec = serde_json::from_str(&head).map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    spec.validate()?;
    let mut values = Vec::with_capacity(spec.len());
    let mut rows = 0;
    for (k, line) in lines.enumerate() {
        let line = line?;
        let lineno = k as u64 + 2;
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|e| Error::Parse { line: lineno, message: format!("`{}`: {e}", tok.trim()) })?;
            values.push(v);
        }
        if values.len() - before != spec.nx {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {} values, found {}", spec.nx, values.len() - before),
            });
        }
        rows += 1;
    }
    if rows != spec.ny {
        return Err(Error::ShapeMismatch(format!("expected {} rows, found {rows}", spec.ny)));
    }
    Grid::new(spec, values)
}

pub fn save_grid(grid: &Grid, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_grid(grid, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<Grid> {
    read_grid(File::open(path)?)
}

pub fn load_rate_field(path: impl AsRef<Path>) -> Result<RateField> {
    RateField::from_grid(load_grid(path)?)
}

/// Metadata written next to the two grids of a [`KrigingMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigingSidecar {
    pub method: KrigingMethod,
    pub variogram: VariogramModel,
    pub mean_rate: f64,
    pub observations: usize,
    pub clamped_estimates: usize,
    pub jittered: bool,
    pub estimate_file: String,
    pub variance_file: String,
}

/// Writes `<stem>_estimate.grid`, `<stem>_variance.grid` and `<stem>.json`
/// into `dir` and returns the three paths.
pub fn save_kriging_map(map: &KrigingMap, dir: impl AsRef<Path>, stem: &str) -> Result<[PathBuf; 3]> {
    let dir = dir.as_ref();
    let est_name = format!("{stem}_estimate.grid");
    let var_name = format!("{stem}_variance.grid");
    let est = dir.join(&est_name);
    let var = dir.join(&var_name);
    let side = dir.join(format!("{stem}.json"));
    save_grid(&map.estimate, &est)?;
    save_grid(&map.variance, &var)?;
    let meta = KrigingSidecar {
        method: map.method,
        variogram: map.model,
        mean_rate: map.mean_rate,
        observations: map.observations,
        clamped_estimates: map.clamped_estimates,
        jittered: map.jittered,
        estimate_file: est_name,
        variance_file: var_name,
    };
    write_json_pretty(&meta, &side)?;
    Ok([est, var, side])
}

pub fn load_kriging_map(dir: impl AsRef<Path>, stem: &str) -> Result<KrigingMap> {
    let dir = dir.as_ref();
    let meta: KrigingSidecar = serde_json::from_reader(BufReader::new(File::open(dir.join(format!("{stem}.json")))?))?;
    let estimate = load_grid(dir.join(&meta.estimate_file))?;
    let variance = load_grid(dir.join(&meta.variance_file))?;
    if estimate.spec != variance.spec {
        return Err(Error::ShapeMismatch("estimate and variance grids differ".into()));
    }
    Ok(KrigingMap {
        estimate,
        variance,
        method: meta.method,
        model: meta.variogram,
        mean_rate: meta.mean_rate,
        observations: meta.observations,
        clamped_estimates: meta.clamped_estimates,
        jittered: meta.jittered,
    })
}

pub fn write_json_pretty<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_run_log<W: Write>(log: &RunLog, mut w: W) -> Result<()> {
    for line in log.lines() {
        serde_json::to_writer(&mut w, &line)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_run_log<R: Read>(r: R) -> Result<RunLog> {
    let mut header = None;
    let mut footer = None;
    let mut records = Vec::new();
    for (k, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let lineno = k as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        if footer.is_some() {
            return Err(Error::Parse { line: lineno, message: "content after footer".into() });
        }
        let parsed: LogLine =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
        match parsed {
            LogLine::Header(h) if header.is_none() && lineno == 1 => header = Some(h),
            LogLine::Header(_) => {
                return Err(Error::Parse { line: lineno, message: "header must be the first line".into() })
            }
            LogLine::Measurement(_) | LogLine::Footer(_) if header.is_none() => {
                return Err(Error::Parse { line: lineno, message: "missing header".into() })
            }
            LogLine::Measurement(m) => records.push(m),
            LogLine::Footer(f) => footer = Some(f),
        }
    }
    let header = header.ok_or_else(|| Error::Empty("run log has no header".into()))?;
    let footer = footer.ok_or_else(|| Error::Empty("run log has no footer".into()))?;
    Ok(RunLog { header, records, footer, final_map: None })
}

pub fn save_run_log(log: &RunLog, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_run_log(log, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_run_log(path: impl AsRef<Path>) -> Result<RunLog> {
    read_run_log(File::open(path)?)
}

/// Robot polyline: the start position, then one row per measurement.
pub fn write_trajectory_csv<W: Write>(log: &RunLog, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["index", "x", "y", "elapsed_s", "distance_m"])?;
    let start = log.trajectory()[0];
    out.write_record(["start".to_string(), start.x.to_string(), start.y.to_string(), "0".into(), "0".into()])?;
    for r in &log.records {
        out.write_record([
            r.index.to_string(),
            r.target.x.to_string(),
            r.target.y.to_string(),
            r.elapsed_s.to_string(),
            r.distance_m.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Empirical bins next to the fitted model evaluated at the bin centers.
pub fn write_variogram_csv<W: Write>(emp: &EmpiricalVariogram, model: &VariogramModel, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["h", "gamma_hat", "weight", "pairs", "gamma_fit"])?;
    for b in &emp.bins {
        out.write_record([
            b.center.to_string(),
            b.gamma.to_string(),
            b.weight.to_string(),
            b.pairs.to_string(),
            model.gamma(b.center).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_curve_csv<W: Write>(curve: &AggregateCurve, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([curve.abscissa.label(), "mse_mean", "mse_std", "runs"])?;
    for k in 0..curve.len() {
        out.write_record([
            curve.x[k].to_string(),
            curve.mean[k].to_string(),
            curve.std[k].to_string(),
            curve.support[k].to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_round_trip_is_exact() {
        let spec = GridSpec::new(-3.0, 2.5, 0.7, 3, 2).unwrap();
        let values = vec![0.1, 1.0 / 3.0, f64::MIN_POSITIVE, 2.5e10, -0.0, std::f64::consts::PI];
        let g = Grid::new(spec, values).unwrap();
        let mut buf = Vec::new();
        write_grid(&g, &mut buf).unwrap();
        let back = read_grid(&buf[..]).unwrap();
        assert_eq!(back.spec, g.spec);
        for (a, b) in back.values.iter().zip(&g.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn grid_parse_errors_carry_line_numbers() {
        let text = "{\"origin_x\":0,\"origin_y\":0,\"cell_size\":1,\"nx\":2,\"ny\":2}\n1,2\n3,x\n";
        match read_grid(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let short = "{\"origin_x\":0,\"origin_y\":0,\"cell_size\":1,\"nx\":2,\"ny\":2}\n1,2\n";
        assert!(matches!(read_grid(short.as_bytes()), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn run_log_requires_header_and_footer() {
        assert!(read_run_log("".as_bytes()).is_err());
        assert!(read_run_log("{\"type\":\"footer\"}\n".as_bytes()).is_err());
    }
}
