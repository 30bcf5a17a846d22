//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls into the solver code under test.

#![allow(dead_code)]

use crns_core::exploration::Point;
use crns_core::field::{make_step_field, GridSpec, RateField};
use crns_core::Sample;
use rand::Rng;

/// Gaussian elimination with partial pivoting on a dense copy of `a`.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &r)| {
        let mut row = row.clone();
        row.push(r);
        row
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

pub fn gaussian_gamma(nugget: f64, range: f64, sill: f64, h: f64) -> f64 {
    nugget + (sill - nugget) * (1.0 - (-(h * h) / (range * range)).exp())
}

pub struct OracleSolution {
    pub weights: Vec<f64>,
    pub mu: f64,
    pub estimate: f64,
    pub variance: f64,
}

/// Kriging by the textbook bordered system. `m_hat = None` gives ordinary
/// kriging, `Some(m)` adds the Poisson `m / t_i` diagonal.
pub fn kriging_oracle(
    pts: &[(f64, f64, f64, f64)],
    (nugget, range, sill): (f64, f64, f64),
    m_hat: Option<f64>,
    x0: f64,
    y0: f64,
) -> OracleSolution {
    let n = pts.len();
    let cov = |h: f64| sill - gaussian_gamma(nugget, range, sill, h);
    let dist = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    let mut b = vec![0.0; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = cov(dist((pts[i].0, pts[i].1), (pts[j].0, pts[j].1)));
        }
        if let Some(m) = m_hat {
            a[i][i] += m / pts[i].2;
        }
        a[i][n] = 1.0;
        a[n][i] = 1.0;
        b[i] = cov(dist((pts[i].0, pts[i].1), (x0, y0)));
    }
    b[n] = 1.0;
    let sol = gauss_solve(&a, &b);
    let weights = sol[..n].to_vec();
    let mu = sol[n];
    let estimate = (0..n).map(|i| weights[i] * pts[i].3 / pts[i].2).sum();
    let variance = cov(0.0) - (0..n).map(|i| weights[i] * b[i]).sum::<f64>() - mu;
    OracleSolution { weights, mu, estimate, variance }
}

/// (x, y, duration, counts) tuples as samples.
pub fn to_samples(pts: &[(f64, f64, f64, f64)]) -> Vec<Sample> {
    pts.iter().map(|&(x, y, t, z)| Sample::new(x, y, t, z)).collect()
}

/// Random observations in a 100 m square with at least `min_sep` between
/// any two of them.
pub fn random_observations<R: Rng>(rng: &mut R, n: usize, min_sep: f64) -> Vec<(f64, f64, f64, f64)> {
    let mut out: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(n);
    while out.len() < n {
        let (x, y) = (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0));
        if out.iter().any(|p| ((p.0 - x).powi(2) + (p.1 - y).powi(2)).sqrt() < min_sep) {
            continue;
        }
        let t = 10.0 * rng.random_range(6..120) as f64;
        let rate: f64 = rng.random_range(1.0..6.0);
        out.push((x, y, t, (rate * t).round()));
    }
    out
}

/// Empirical variogram by looping bins outermost and scanning every pair
/// for each bin. Returns (center, gamma_floored, weight, pairs).
pub fn variogram_oracle(samples: &[Sample], bin_width: f64, max_lag: f64) -> Vec<(f64, f64, f64, usize)> {
    let total_counts: f64 = samples.iter().map(|s| s.counts).sum();
    let total_time: f64 = samples.iter().map(|s| s.duration).sum();
    let m = total_counts / total_time;
    let nbins = (max_lag / bin_width).ceil() as usize;
    let mut out = Vec::new();
    for k in 0..nbins {
        let (mut sum, mut weight, mut pairs) = (0.0, 0.0, 0usize);
        for i in 0..samples.len() {
            for j in i + 1..samples.len() {
                let (a, b) = (&samples[i], &samples[j]);
                let d = (a.x - b.x).hypot(a.y - b.y);
                if d >= max_lag || (d / bin_width).floor() as usize != k {
                    continue;
                }
                let w = a.duration * b.duration / (a.duration + b.duration);
                let diff = a.counts / a.duration - b.counts / b.duration;
                sum += w * diff * diff - m;
                weight += w;
                pairs += 1;
            }
        }
        if pairs > 0 {
            out.push(((k as f64 + 0.5) * bin_width, (sum / (2.0 * weight)).max(0.0), weight, pairs));
        }
    }
    out
}

/// Shortest open path from `start` through all points, by enumerating
/// every permutation.
pub fn brute_force_tsp(points: &[Point], start: Point) -> f64 {
    fn go(points: &[Point], pos: Point, used: &mut [bool], acc: f64, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if used.iter().all(|&u| u) {
            *best = acc;
            return;
        }
        for k in 0..points.len() {
            if !used[k] {
                used[k] = true;
                go(points, points[k], used, acc + pos.distance(&points[k]), best);
                used[k] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(points, start, &mut vec![false; points.len()], 0.0, &mut best);
    if points.is_empty() {
        0.0
    } else {
        best
    }
}

/// The 0.3 ha synthetic test field: 60 m x 50 m, wet half for x < 30 m.
pub fn field_spec() -> GridSpec {
    GridSpec::covering(60.0, 50.0, 5.0).unwrap()
}

pub fn high_gradient() -> RateField {
    make_step_field(field_spec(), 30.0, 2.5, 5.0).unwrap()
}

pub fn low_gradient() -> RateField {
    make_step_field(field_spec(), 30.0, 3.0, 4.0).unwrap()
}
