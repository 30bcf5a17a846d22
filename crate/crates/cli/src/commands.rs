use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crns_core::evaluation::compare_conditions;
use crns_core::exploration::run_mission;
use crns_core::field::load_observations_csv;
use crns_core::io::{
    load_run_log, save_grid, save_kriging_map, save_run_log, write_curve_csv, write_json_pretty,
    write_trajectory_csv, write_variogram_csv,
};
use crns_core::variography::{empirical_variogram, fit_gaussian_model, FitOptions};
use crns_core::Sample;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{fit_observations, FieldSource, LoadedConfig, RunConfigFile};
use crate::CliError;

const DEFAULT_OUT: &str = "out";

/// Written into every artifact directory.
#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    tool_version: &'static str,
    command: &'static str,
    /// SHA-256 of `config.json`, the effective configuration after flag overrides.
    config_sha256: String,
    seeds: Vec<u64>,
    artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
}

struct ArtifactDir {
    root: PathBuf,
    written: Vec<String>,
}

impl ArtifactDir {
    fn create(root: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&root)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self { root, written: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        let p = self.root.join(name);
        if let Some(parent) = p.parent() {
            let _ = fs::create_dir_all(parent);
        }
        p
    }

    fn csv<F>(&mut self, name: &str, write: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> crns_core::Result<()>,
    {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Writes `config.json` and `manifest.json`.
    fn finish(mut self, command: &'static str, config: &RunConfigFile, seeds: Vec<u64>, note: Option<&str>) -> Result<(), CliError> {
        let bytes = serde_json::to_vec_pretty(config).map_err(|e| CliError::Runtime(e.to_string()))?;
        fs::write(self.root.join("config.json"), [&bytes[..], b"\n"].concat())?;
        self.written.push("config.json".into());
        self.written.sort();
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: hex::encode(Sha256::digest([&bytes[..], b"\n"].concat())),
            seeds,
            artifacts: self.written,
            note,
        };
        write_json_pretty(&manifest, self.root.join("manifest.json"))?;
        Ok(())
    }
}

fn out_dir(flag: Option<PathBuf>, cfg: &LoadedConfig) -> PathBuf {
    flag.or_else(|| cfg.file.out.as_ref().map(|p| cfg.resolve(p))).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

#[derive(Debug, Serialize)]
struct SurrogateInfo<'a> {
    source: &'a FieldSource,
    grid_file: &'a str,
    min_rate: f64,
    max_rate: f64,
    mean_rate: f64,
    distinct_values: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    variogram: Option<crns_core::VariogramModel>,
    variogram_fitted: bool,
    observations: usize,
    clamped_nodes: usize,
}

pub fn surrogate(config: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = LoadedConfig::load(config)?;
    let source = cfg.field_source()?.clone();
    let built = cfg.build_field(&source, "field")?;
    let mut dir = ArtifactDir::create(out_dir(out, &cfg))?;

    let grid = built.field.grid();
    save_grid(grid, dir.path("surrogate.grid"))?;
    let mut distinct = grid.values.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let info = SurrogateInfo {
        source: &source,
        grid_file: "surrogate.grid",
        min_rate: grid.min(),
        max_rate: grid.max(),
        mean_rate: grid.mean(),
        distinct_values: distinct.len(),
        variogram: built.variogram,
        variogram_fitted: built.variogram_fitted,
        observations: built.observations,
        clamped_nodes: built.clamped_nodes,
    };
    write_json_pretty(&info, dir.path("surrogate.json"))?;
    let mut effective = cfg.file.clone();
    effective.out = None;
    dir.finish("surrogate", &effective, Vec::new(), None)
}

pub fn explore(config: &Path, seed: Option<u64>, horizon: Option<f64>, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = LoadedConfig::load(config)?;
    let mut mission = cfg.file.mission.clone().ok_or_else(|| CliError::Validation("missing key `mission`".into()))?;
    if let Some(s) = seed {
        mission.seed = s;
    }
    if let Some(h) = horizon {
        mission.horizon_s = h;
    }
    mission.validate().map_err(|e| CliError::Validation(format!("key `mission`: {e}")))?;
    let source = cfg.field_source()?.clone();
    let truth = cfg.build_field(&source, "field")?.field;

    let log = run_mission(&mission, &truth)?;
    let mut dir = ArtifactDir::create(out_dir(out, &cfg))?;
    let s = mission.seed;
    save_run_log(&log, dir.path(&format!("run_seed{s}.jsonl")))?;
    dir.csv(&format!("trajectory_seed{s}.csv"), |w| write_trajectory_csv(&log, w))?;
    if let Some(map) = &log.final_map {
        let stem = format!("map_seed{s}");
        for name in ["_estimate.grid", "_variance.grid", ".json"] {
            dir.written.push(format!("{stem}{name}"));
        }
        save_kriging_map(map, &dir.root, &stem)?;
    }
    eprintln!(
        "{} measurements, {:.0} s, {:.1} m, final MSE {}",
        log.footer.measurements,
        log.footer.elapsed_s,
        log.footer.distance_m,
        log.footer.final_mse.map_or("n/a".into(), |m| format!("{m:.5}"))
    );

    let mut effective = cfg.file.clone();
    effective.mission = Some(mission);
    effective.out = None;
    dir.finish("explore", &effective, vec![s], None)
}

pub fn compare(
    config: &Path,
    horizon: Option<f64>,
    seeds: Option<Vec<u64>>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let cfg = LoadedConfig::load(config)?;
    let mut matrix = cfg.file.matrix.clone().ok_or_else(|| CliError::Validation("missing key `matrix`".into()))?;
    if let Some(h) = horizon {
        matrix.horizon_s = h;
    }
    if let Some(s) = seeds {
        matrix.seeds = s;
    }
    let base = cfg.mission()?;
    let fields = cfg.named_fields()?;
    matrix.validate(&fields).map_err(|e| CliError::Validation(format!("key `matrix`: {e}")))?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Validation("--jobs must be >= 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::Runtime(e.to_string()))?;
    let report = pool.install(|| compare_conditions(&matrix, &fields, &base))?;

    let mut dir = ArtifactDir::create(out_dir(out, &cfg))?;
    write_json_pretty(&report, dir.path("report.json"))?;
    for cell in &report.cells {
        if let Some(c) = &cell.time_curve {
            dir.csv(&format!("curves/{}_time.csv", cell.label), |w| write_curve_csv(c, w))?;
        }
        if let Some(c) = &cell.distance_curve {
            dir.csv(&format!("curves/{}_distance.csv", cell.label), |w| write_curve_csv(c, w))?;
        }
        for log in &cell.logs {
            save_run_log(log, dir.path(&format!("runs/{}_seed{}.jsonl", cell.label, log.header.seed)))?;
        }
    }
    for cell in &report.cells {
        match cell.summary {
            Some(s) => eprintln!(
                "{:<48} MSE {:.5} ± {:.5}  distance {:7.1} m  measurements {:5.1}",
                cell.label, s.final_mse_mean, s.final_mse_std, s.distance_mean, s.measurements_mean
            ),
            None => eprintln!("{:<48} no completed runs", cell.label),
        }
    }

    let failed = report.failed_runs();
    let mut effective = cfg.file.clone();
    effective.matrix = Some(matrix.clone());
    effective.out = None;
    let note = (failed > 0).then_some("some runs failed; see report.json");
    dir.finish("compare", &effective, matrix.seeds.clone(), note)?;
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} run(s) failed")));
    }
    Ok(())
}

pub fn export_variogram(
    log: Option<PathBuf>,
    config: Option<PathBuf>,
    bin_width: Option<f64>,
    max_lag: Option<f64>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let (emp, model) = if let Some(path) = log {
        let log = load_run_log(&path)?;
        let samples: Vec<Sample> = log.records.iter().map(|r| r.measurement.sample()).collect();
        let bw = bin_width.unwrap_or(log.header.config.variogram_bin_width);
        let lag = max_lag.unwrap_or(log.header.variogram_max_lag);
        let emp = empirical_variogram(&samples, bw, lag)?;
        let opts = FitOptions {
            loss_scale: log.header.config.loss_scale,
            fallback: log.header.bootstrap_variogram,
            ..FitOptions::default()
        };
        let model = fit_gaussian_model(&emp, &opts).model;
        (emp, model)
    } else {
        let cfg = LoadedConfig::load(config.as_deref().expect("clap requires one source"))?;
        let FieldSource::Observations { path, bin_width: bw, replicate, .. } = cfg.field_source()? else {
            return Err(CliError::Validation("key `field` must be an observations source".into()));
        };
        let spec = cfg.file.grid.ok_or_else(|| CliError::Validation("missing key `grid`".into()))?;
        let mut obs = load_observations_csv(cfg.resolve(path))?;
        if let Some(r) = replicate {
            obs = crns_core::field::replicate_transect(&obs, r.copies, r.spacing);
        }
        let (emp, model, _) =
            fit_observations(&obs, &spec, bin_width.unwrap_or(*bw), max_lag.unwrap_or(0.5 * spec.diagonal()))?;
        (emp, model)
    };
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(&p)?);
            write_variogram_csv(&emp, &model, &mut w)?;
            w.flush()?;
        }
        None => write_variogram_csv(&emp, &model, std::io::stdout().lock())?,
    }
    eprintln!("fitted nugget {:.6}, range {:.4} m, sill {:.6}", model.nugget, model.range, model.sill);
    Ok(())
}
