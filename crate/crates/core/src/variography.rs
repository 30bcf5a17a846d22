//! Time-weighted empirical semivariogram and Gaussian model fitting.
//!
//! Counts observed for a longer time carry more weight: every station pair
//! `(i, j)` contributes with weight `t_i t_j / (t_i + t_j)`, and the Poisson
//! noise floor `m` (the duration-weighted mean rate) is subtracted from each
//! pair term before normalizing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::NelderMead;
use crate::sample::Sample;

/// Gaussian semivariogram `γ(h) = nugget + (sill - nugget)(1 - exp(-h²/range²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariogramModel {
    pub nugget: f64,
    pub range: f64,
    pub sill: f64,
}

impl VariogramModel {
    pub fn new(nugget: f64, range: f64, sill: f64) -> Result<Self> {
        let m = Self { nugget, range, sill };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nugget >= 0.0) || !self.nugget.is_finite() {
            return Err(Error::Validation(format!("nugget {} must be >= 0", self.nugget)));
        }
        if !(self.range > 0.0) || !self.range.is_finite() {
            return Err(Error::Validation(format!("range {} must be > 0", self.range)));
        }
        if !(self.sill >= self.nugget) || !self.sill.is_finite() {
            return Err(Error::Validation(format!(
                "sill {} must be >= nugget {}",
                self.sill, self.nugget
            )));
        }
        Ok(())
    }

    pub fn gamma(&self, h: f64) -> f64 {
        model_gamma(self, h)
    }
}

pub fn model_gamma(model: &VariogramModel, h: f64) -> f64 {
    let r = h / model.range;
    model.nugget + (model.sill - model.nugget) * (1.0 - (-r * r).exp())
}

/// Duration-weighted mean rate `Σ z_i / Σ t_i`.
pub fn weighted_mean_rate(samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("weighted mean rate of zero measurements".into()));
    }
    let counts: f64 = samples.iter().map(|s| s.counts).sum();
    let time: f64 = samples.iter().map(|s| s.duration).sum();
    if !(time > 0.0) {
        return Err(Error::Domain(format!("total duration {time} must be > 0")));
    }
    Ok(counts / time)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariogramBin {
    pub center: f64,
    /// Estimate floored at zero; this is what gets fitted.
    pub gamma: f64,
    /// Estimate before flooring, may be negative for small samples.
    pub raw_gamma: f64,
    /// Normalizer `N(h)`, seconds.
    pub weight: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVariogram {
    pub bins: Vec<VariogramBin>,
    pub bin_width: f64,
    pub max_lag: f64,
    /// Duration-weighted mean rate used in the bias correction.
    pub mean_rate: f64,
    /// Population variance of the observed rates; seeds the sill when fitting.
    pub rate_variance: f64,
}

/// Bins with centers `(k + 1/2) * bin_width`; a pair at distance `d < max_lag`
/// falls into bin `floor(d / bin_width)`. Empty bins are dropped.
pub fn empirical_variogram(samples: &[Sample], bin_width: f64, max_lag: f64) -> Result<EmpiricalVariogram> {
    if !(bin_width > 0.0) || !(max_lag > 0.0) {
        return Err(Error::Validation(format!(
            "bin_width {bin_width} and max_lag {max_lag} must be > 0"
        )));
    }
    if samples.len() < 2 {
        return Err(Error::Empty(format!("variogram needs >= 2 measurements, got {}", samples.len())));
    }
    if samples.iter().all(|s| s.x == samples[0].x && s.y == samples[0].y) {
        return Err(Error::Empty("variogram needs >= 2 distinct locations".into()));
    }
    let mean_rate = weighted_mean_rate(samples)?;
    let nbins = (max_lag / bin_width).ceil() as usize;
    let mut sums = vec![0.0; nbins];
    let mut weights = vec![0.0; nbins];
    let mut pairs = vec![0usize; nbins];

    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            let d = a.distance(b);
            if d >= max_lag {
                continue;
            }
            let k = ((d / bin_width).floor() as usize).min(nbins - 1);
            let w = a.duration * b.duration / (a.duration + b.duration);
            let diff = a.rate() - b.rate();
            sums[k] += w * diff * diff - mean_rate;
            weights[k] += w;
            pairs[k] += 1;
        }
    }

    let bins: Vec<VariogramBin> = (0..nbins)
        .filter(|&k| pairs[k] > 0)
        .map(|k| {
            let raw = sums[k] / (2.0 * weights[k]);
            VariogramBin {
                center: (k as f64 + 0.5) * bin_width,
                gamma: raw.max(0.0),
                raw_gamma: raw,
                weight: weights[k],
                pairs: pairs[k],
            }
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::EmptyVariogram { max_lag });
    }

    let n = samples.len() as f64;
    let mean = samples.iter().map(Sample::rate).sum::<f64>() / n;
    let rate_variance = samples.iter().map(|s| (s.rate() - mean).powi(2)).sum::<f64>() / n;

    Ok(EmpiricalVariogram { bins, bin_width, max_lag, mean_rate, rate_variance })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    /// Residual scale `c` of the soft-L1 loss `c²(√(1 + (r/c)²) - 1)`.
    pub loss_scale: f64,
    /// Returned when fitting is impossible.
    pub fallback: VariogramModel,
    pub min_bins: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            loss_scale: 1.0,
            fallback: VariogramModel { nugget: 0.0, range: 10.0, sill: 1.0 },
            min_bins: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: VariogramModel,
    pub loss: f64,
    /// False when `model` is the fallback.
    pub fitted: bool,
}

pub fn soft_l1_loss(model: &VariogramModel, emp: &EmpiricalVariogram, scale: f64) -> f64 {
    let c2 = scale * scale;
    emp.bins
        .iter()
        .map(|b| {
            let r = model.gamma(b.center) - b.gamma;
            c2 * ((1.0 + r * r / c2).sqrt() - 1.0)
        })
        .sum()
}

/// Fits the Gaussian model by soft-L1 minimization with a bound-enforcing
/// reparametrization: `nugget = a²`, `range = exp(b)`, `sill = nugget + c²`.
///
/// The range has no upper bound. When the binned values are still rising at
/// the last bin the fit may return a range far beyond the field together
/// with a large sill; such models are valid but make dense kriging systems
/// badly conditioned.
pub fn fit_gaussian_model(emp: &EmpiricalVariogram, opts: &FitOptions) -> FitResult {
    let fallback = FitResult { model: opts.fallback, loss: f64::NAN, fitted: false };
    if emp.bins.len() < opts.min_bins.max(3) {
        log::debug!("variogram fit skipped: only {} bins", emp.bins.len());
        return fallback;
    }

    let max_gamma = emp.bins.iter().map(|b| b.gamma).fold(0.0, f64::max);
    // parameters are optimized in units of `scale` so the simplex steps are O(1)
    let scale = if max_gamma > 0.0 { max_gamma } else { 1.0 };
    let sill0 = if emp.rate_variance > 0.0 { emp.rate_variance } else { scale };

    let decode = |u: &[f64]| -> VariogramModel {
        let nugget = u[0] * u[0] * scale;
        VariogramModel { nugget, range: u[1].exp(), sill: nugget + u[2] * u[2] * scale }
    };
    let objective = |u: &[f64]| {
        let m = decode(u);
        if !m.range.is_finite() || m.range <= 0.0 {
            return f64::INFINITY;
        }
        soft_l1_loss(&m, emp, opts.loss_scale)
    };

    let nm = NelderMead::default();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for range0 in [emp.max_lag / 3.0, emp.max_lag / 10.0, emp.max_lag] {
        let mut x = vec![0.0, range0.ln(), (sill0 / scale).sqrt()];
        let mut steps = vec![0.3, 0.5, 0.3];
        let mut f_prev = f64::INFINITY;
        // restart from the incumbent until it stops improving
        for _ in 0..8 {
            let m = nm.minimize(objective, &x, &steps);
            log::trace!("simplex run: f = {:e} after {} evals (converged: {})", m.f, m.evals, m.converged);
            x = m.x;
            let done = m.f >= f_prev - 1e-15 * (1.0 + f_prev.abs());
            f_prev = m.f;
            steps = vec![0.05, 0.1, 0.05];
            if done {
                break;
            }
        }
        if f_prev.is_finite() && best.as_ref().is_none_or(|(_, f)| f_prev < *f) {
            best = Some((x, f_prev));
        }
    }

    match best {
        Some((u, loss)) => {
            let model = decode(&u);
            if model.validate().is_ok() {
                FitResult { model, loss, fitted: true }
            } else {
                log::warn!("variogram fit produced invalid parameters {model:?}; using fallback");
                fallback
            }
        }
        None => {
            log::warn!("variogram fit failed; using fallback");
            fallback
        }
    }
}
