//! Ordinary and Poisson kriging.
//!
//! Both estimators solve the bordered covariance system
//!
//! ```text
//! | C + D   1 | | w |   | c0 |
//! | 1ᵀ      0 | | μ | = | 1  |
//! ```
//!
//! where `C_ij = C(|x_i - x_j|)`, `c0_i = C(|x_i - x0|)` and `D` is zero for
//! ordinary kriging and `diag(m / t_i)` for Poisson kriging. The latter
//! accounts for the counting noise of each observation, which shrinks as the
//! observation time `t_i` grows.

use nalgebra::{DMatrix, DVector, LU};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, GridSpec};
use crate::sample::Sample;
use crate::variography::VariogramModel;

/// Diagonal jitter added once when the system turns out singular.
pub const SINGULAR_JITTER: f64 = 1e-10;
/// Pivot ratio below which a factorization is treated as singular.
const PIVOT_RATIO: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KrigingMethod {
    Ordinary,
    Poisson,
}

/// Which expression is reported as the kriging variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceForm {
    /// Minimized estimation variance `C(0) - Σ w_i C_i0 - μ`.
    #[default]
    Full,
    /// `Σ w_i C_i0` alone.
    WeightedCovariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrigingOptions {
    #[serde(default)]
    pub variance_form: VarianceForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigingWeights {
    pub weights: Vec<f64>,
    pub lagrange: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    /// Clamped at zero.
    pub estimate: f64,
    /// Clamped at zero.
    pub variance: f64,
    pub weights: KrigingWeights,
    pub raw_estimate: f64,
    pub raw_variance: f64,
}

/// Estimate and variance grids from one kriging solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigingMap {
    pub estimate: Grid,
    pub variance: Grid,
    pub method: KrigingMethod,
    pub model: VariogramModel,
    pub mean_rate: f64,
    pub observations: usize,
    pub clamped_estimates: usize,
    /// True if the diagonal jitter had to be applied.
    pub jittered: bool,
}

impl KrigingMap {
    pub fn spec(&self) -> &GridSpec {
        &self.estimate.spec
    }
}

/// `C(h) = sill - γ(h)`, so `C(0) = sill - nugget` and `C(∞) = 0`.
pub fn covariance_from_variogram(model: &VariogramModel, h: f64) -> f64 {
    model.sill - model.gamma(h)
}

/// A factorized kriging system for a fixed set of observations, reusable
/// for any number of query points.
pub struct KrigingSystem<'a> {
    samples: &'a [Sample],
    model: VariogramModel,
    options: KrigingOptions,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// First diagonal entry of the system matrix.
    lu_diag0: f64,
    jittered: bool,
}

impl<'a> KrigingSystem<'a> {
    pub fn new(
        samples: &'a [Sample],
        model: &VariogramModel,
        method: KrigingMethod,
        m_hat: f64,
        options: KrigingOptions,
    ) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::Empty("kriging needs at least one observation".into()));
        }
        model.validate()?;
        if method == KrigingMethod::Poisson && !(m_hat > 0.0 && m_hat.is_finite()) {
            return Err(Error::Domain(format!("Poisson kriging needs a positive mean rate, got {m_hat}")));
        }
        if let Some(s) = samples.iter().find(|s| !(s.duration > 0.0)) {
            return Err(Error::Domain(format!("observation at ({}, {}) has duration {}", s.x, s.y, s.duration)));
        }

        let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = covariance_from_variogram(model, samples[i].distance(&samples[j]));
            }
            if method == KrigingMethod::Poisson {
                a[(i, i)] += m_hat / samples[i].duration;
            }
            a[(i, n)] = 1.0;
            a[(n, i)] = 1.0;
        }

        let lu = a.clone().lu();
        if n == 1 || !is_singular(&lu) {
            return Ok(Self { samples, model: *model, options, lu, lu_diag0: a[(0, 0)], jittered: false });
        }
        log::debug!("kriging system with {n} observations is singular; retrying with jitter");
        for i in 0..n {
            a[(i, i)] += SINGULAR_JITTER;
        }
        let diag0 = a[(0, 0)];
        let lu = a.lu();
        if is_singular(&lu) {
            return Err(Error::Singular(format!("{n} observations, still singular after diagonal jitter")));
        }
        Ok(Self { samples, model: *model, options, lu, lu_diag0: diag0, jittered: true })
    }

    pub fn jittered(&self) -> bool {
        self.jittered
    }

    pub fn solve_at(&self, x0: f64, y0: f64) -> Result<PointEstimate> {
        let n = self.samples.len();
        let mut rhs = DVector::<f64>::zeros(n + 1);
        for (i, s) in self.samples.iter().enumerate() {
            rhs[i] = covariance_from_variogram(&self.model, s.distance_to(x0, y0));
        }
        rhs[n] = 1.0;
        let (weights, lagrange) = if n == 1 {
            // unbiasedness alone fixes the single weight
            let diag = self.lu_diag0;
            (vec![1.0], rhs[0] - diag)
        } else {
            let sol = self
                .lu
                .solve(&rhs)
                .ok_or_else(|| Error::Singular(format!("solve failed at ({x0}, {y0})")))?;
            (sol.iter().take(n).copied().collect::<Vec<f64>>(), sol[n])
        };
        let raw_estimate: f64 = weights.iter().zip(self.samples).map(|(w, s)| w * s.rate()).sum();
        let weighted_cov: f64 = weights.iter().zip(rhs.iter()).map(|(w, c)| w * c).sum();
        let raw_variance = match self.options.variance_form {
            VarianceForm::Full => covariance_from_variogram(&self.model, 0.0) - weighted_cov - lagrange,
            VarianceForm::WeightedCovariance => weighted_cov,
        };
        Ok(PointEstimate {
            estimate: raw_estimate.max(0.0),
            variance: raw_variance.max(0.0),
            weights: KrigingWeights { weights, lagrange },
            raw_estimate,
            raw_variance,
        })
    }
}

fn is_singular(lu: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> bool {
    let u = lu.u();
    let diag = u.diagonal();
    let max = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let min = diag.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
    !(max > 0.0) || !min.is_finite() || min <= PIVOT_RATIO * max
}

pub fn solve_poisson_kriging(
    samples: &[Sample],
    model: &VariogramModel,
    m_hat: f64,
    x0: f64,
    y0: f64,
) -> Result<PointEstimate> {
    KrigingSystem::new(samples, model, KrigingMethod::Poisson, m_hat, KrigingOptions::default())?.solve_at(x0, y0)
}

pub fn solve_ordinary_kriging(samples: &[Sample], model: &VariogramModel, x0: f64, y0: f64) -> Result<PointEstimate> {
    KrigingSystem::new(samples, model, KrigingMethod::Ordinary, 0.0, KrigingOptions::default())?.solve_at(x0, y0)
}

pub fn krige_grid(
    samples: &[Sample],
    model: &VariogramModel,
    m_hat: f64,
    spec: &GridSpec,
    method: KrigingMethod,
) -> Result<KrigingMap> {
    krige_grid_with(samples, model, m_hat, spec, method, KrigingOptions::default())
}

/// Solves the chosen estimator at every node of `spec`. The system is
/// factorized once; nodes are solved in parallel.
pub fn krige_grid_with(
    samples: &[Sample],
    model: &VariogramModel,
    m_hat: f64,
    spec: &GridSpec,
    method: KrigingMethod,
    options: KrigingOptions,
) -> Result<KrigingMap> {
    spec.validate()?;
    let system = KrigingSystem::new(samples, model, method, m_hat, options)?;
    let nodes: Vec<(f64, f64)> = spec.nodes().collect();
    let solved: Vec<(f64, f64, bool)> = nodes
        .par_iter()
        .map(|&(x, y)| {
            system
                .solve_at(x, y)
                .map(|p| (p.estimate, p.variance, p.raw_estimate < 0.0))
                .map_err(|e| Error::AtNode { x, y, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;

    let clamped_estimates = solved.iter().filter(|s| s.2).count();
    let estimate = Grid::new(*spec, solved.iter().map(|s| s.0).collect())?;
    let variance = Grid::new(*spec, solved.iter().map(|s| s.1).collect())?;
    Ok(KrigingMap {
        estimate,
        variance,
        method,
        model: *model,
        mean_rate: m_hat,
        observations: samples.len(),
        clamped_estimates,
        jittered: system.jittered(),
    })
}
