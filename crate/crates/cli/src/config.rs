use std::path::{Path, PathBuf};

use crns_core::evaluation::{ExperimentMatrix, NamedField};
use crns_core::exploration::MissionConfig;
use crns_core::field::{
    build_surrogate_from_observations, load_observations_csv, make_step_field, replicate_transect, GridSpec,
    ObservationRecord, RateField,
};
use crns_core::io::load_rate_field;
use crns_core::variography::{empirical_variogram, EmpiricalVariogram, fit_gaussian_model, FitOptions, VariogramModel};
use crns_core::Sample;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// The single JSON document every subcommand reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    /// Required for synthetic and observation sources.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub field: Option<FieldSource>,
    /// Named truth fields for `compare`.
    #[serde(default)]
    pub fields: Vec<NamedFieldSource>,
    #[serde(default)]
    pub mission: Option<MissionConfig>,
    #[serde(default)]
    pub matrix: Option<ExperimentMatrix>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSource {
    Step {
        border_x: f64,
        rate_wet: f64,
        rate_dry: f64,
    },
    Observations {
        path: PathBuf,
        /// Fitted to the observations when absent.
        #[serde(default)]
        variogram: Option<VariogramModel>,
        #[serde(default)]
        replicate: Option<Replicate>,
        #[serde(default = "default_bin_width")]
        bin_width: f64,
    },
    GridFile {
        path: PathBuf,
    },
}

fn default_bin_width() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Replicate {
    pub copies: usize,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedFieldSource {
    pub name: String,
    pub source: FieldSource,
}

/// A config together with the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub file: RunConfigFile,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let file: RunConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let at = e.path().to_string();
            let inner = e.into_inner();
            if at == "." {
                CliError::Validation(format!("{}: {inner}", path.display()))
            } else {
                CliError::Validation(format!("{}: key `{at}`: {inner}", path.display()))
            }
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { file, base_dir })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn mission(&self) -> Result<MissionConfig, CliError> {
        let m = self.file.mission.clone().ok_or_else(|| CliError::Validation("missing key `mission`".into()))?;
        m.validate().map_err(|e| CliError::Validation(format!("key `mission`: {e}")))?;
        Ok(m)
    }

    pub fn field_source(&self) -> Result<&FieldSource, CliError> {
        self.file.field.as_ref().ok_or_else(|| CliError::Validation("missing key `field`".into()))
    }

    pub fn build_field(&self, source: &FieldSource, key: &str) -> Result<BuiltField, CliError> {
        build_field(self, source, key)
    }

    pub fn named_fields(&self) -> Result<Vec<NamedField>, CliError> {
        let mut out: Vec<NamedField> = Vec::new();
        for (k, f) in self.file.fields.iter().enumerate() {
            if out.iter().any(|o| o.name == f.name) {
                return Err(CliError::Validation(format!("key `fields[{k}].name`: duplicate name `{}`", f.name)));
            }
            let built = self.build_field(&f.source, &format!("fields[{k}].source"))?;
            out.push(NamedField { name: f.name.clone(), field: built.field });
        }
        Ok(out)
    }
}

/// A truth field plus what went into it.
#[derive(Debug, Clone)]
pub struct BuiltField {
    pub field: RateField,
    pub variogram: Option<VariogramModel>,
    pub variogram_fitted: bool,
    pub clamped_nodes: usize,
    pub observations: usize,
}

fn grid_for(cfg: &LoadedConfig, key: &str) -> Result<GridSpec, CliError> {
    let spec = cfg.file.grid.ok_or_else(|| CliError::Validation(format!("key `{key}` needs key `grid`")))?;
    spec.validate().map_err(|e| CliError::Validation(format!("key `grid`: {e}")))?;
    Ok(spec)
}

fn build_field(cfg: &LoadedConfig, source: &FieldSource, key: &str) -> Result<BuiltField, CliError> {
    let invalid = |e: crns_core::Error| CliError::Validation(format!("key `{key}`: {e}"));
    match source {
        FieldSource::Step { border_x, rate_wet, rate_dry } => {
            let field = make_step_field(grid_for(cfg, key)?, *border_x, *rate_wet, *rate_dry).map_err(invalid)?;
            Ok(BuiltField { field, variogram: None, variogram_fitted: false, clamped_nodes: 0, observations: 0 })
        }
        FieldSource::GridFile { path } => {
            let field = load_rate_field(cfg.resolve(path)).map_err(invalid)?;
            Ok(BuiltField { field, variogram: None, variogram_fitted: false, clamped_nodes: 0, observations: 0 })
        }
        FieldSource::Observations { path, variogram, replicate, bin_width } => {
            let spec = grid_for(cfg, key)?;
            let mut obs = load_observations_csv(cfg.resolve(path)).map_err(invalid)?;
            if let Some(r) = replicate {
                if r.copies == 0 || !(r.spacing > 0.0) {
                    return Err(CliError::Validation(format!(
                        "key `{key}.replicate`: copies must be >= 1 and spacing > 0"
                    )));
                }
                obs = replicate_transect(&obs, r.copies, r.spacing);
            }
            let (model, fitted) = match variogram {
                Some(v) => {
                    v.validate().map_err(invalid)?;
                    (*v, false)
                }
                None => {
                    let (_, model, fitted) =
                        fit_observations(&obs, &spec, *bin_width, 0.5 * spec.diagonal()).map_err(invalid)?;
                    (model, fitted)
                }
            };
            let surrogate = build_surrogate_from_observations(&obs, spec, &model)
                .map_err(|e| CliError::Runtime(format!("key `{key}`: {e}")))?;
            if surrogate.clamped_nodes > 0 {
                log::warn!("{} surrogate nodes clamped to zero", surrogate.clamped_nodes);
            }
            Ok(BuiltField {
                field: surrogate.field,
                variogram: Some(model),
                variogram_fitted: fitted,
                clamped_nodes: surrogate.clamped_nodes,
                observations: obs.len(),
            })
        }
    }
}

/// Gaussian model fitted to the observations; the usual prior if that fails.
pub fn fit_observations(
    obs: &[ObservationRecord],
    spec: &GridSpec,
    bin_width: f64,
    max_lag: f64,
) -> crns_core::Result<(EmpiricalVariogram, VariogramModel, bool)> {
    let samples: Vec<Sample> = obs.iter().map(Sample::from).collect();
    let emp = empirical_variogram(&samples, bin_width, max_lag)?;
    let opts = FitOptions {
        fallback: VariogramModel { nugget: 0.0, range: 0.25 * spec.diagonal(), sill: emp.rate_variance.max(1e-6) },
        ..FitOptions::default()
    };
    let fit = fit_gaussian_model(&emp, &opts);
    Ok((emp, fit.model, fit.fitted))
}
