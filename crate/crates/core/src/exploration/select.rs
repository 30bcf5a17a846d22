use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::Point;
use crate::kriging::KrigingMap;

/// Kriging variance at each candidate, interpolated from the variance grid.
/// Candidates outside the grid get zero.
pub fn candidate_kv(map: &KrigingMap, candidates: &[Point]) -> Vec<f64> {
    candidates
        .iter()
        .map(|c| map.variance.interpolate(c.x, c.y).map_or(0.0, |v| v.max(0.0)))
        .collect()
}

/// Index of the unvisited candidate with the largest KV. Ties go to the
/// candidate nearest `current`, then to the lowest index. `None` once every
/// candidate has been visited.
pub fn select_greedy(kv: &[f64], candidates: &[Point], visited: &[bool], current: Point) -> Option<usize> {
    let best_kv = (0..candidates.len())
        .filter(|&i| !visited[i])
        .map(|i| kv[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if best_kv == f64::NEG_INFINITY {
        return None;
    }
    let tol = 1e-12 * best_kv.abs();
    (0..candidates.len())
        .filter(|&i| !visited[i] && kv[i] >= best_kv - tol)
        .min_by(|&a, &b| {
            current
                .distance(&candidates[a])
                .total_cmp(&current.distance(&candidates[b]))
                .then(a.cmp(&b))
        })
}

/// Draws an unvisited candidate with probability proportional to its KV
/// (uniformly when every KV is zero).
pub fn select_monte_carlo<R: Rng + ?Sized>(kv: &[f64], visited: &[bool], rng: &mut R) -> Option<usize> {
    let open: Vec<usize> = (0..kv.len()).filter(|&i| !visited[i]).collect();
    draw_weighted(&open, kv, rng)
}

/// KV-weighted draw from `pool`; uniform when the weights are all zero.
pub(super) fn draw_weighted<R: Rng + ?Sized>(pool: &[usize], kv: &[f64], rng: &mut R) -> Option<usize> {
    if pool.is_empty() {
        return None;
    }
    let weights: Vec<f64> = pool.iter().map(|&i| kv[i].max(0.0)).collect();
    let slot = match WeightedIndex::new(&weights) {
        Ok(dist) => dist.sample(rng),
        Err(_) => rng.random_range(0..pool.len()),
    };
    Some(pool[slot])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn pts() -> Vec<Point> {
        vec![Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(20.0, 0.0)]
    }

    #[test]
    fn greedy_argmax() {
        let v = [false; 3];
        assert_eq!(select_greedy(&[0.2, 0.9, 0.4], &pts(), &v, Point::new(0.0, 0.0)), Some(1));
        assert_eq!(select_greedy(&[0.2, 0.5, 0.9], &pts(), &v, Point::new(0.0, 0.0)), Some(2));
    }

    #[test]
    fn greedy_ties_prefer_nearest_then_lowest_index() {
        let v = [false; 3];
        assert_eq!(select_greedy(&[1.0; 3], &pts(), &v, Point::new(19.0, 0.0)), Some(2));
        assert_eq!(select_greedy(&[1.0; 3], &pts(), &v, Point::new(5.0, 0.0)), Some(0));
    }

    #[test]
    fn greedy_skips_visited() {
        assert_eq!(select_greedy(&[0.2, 0.9, 0.4], &pts(), &[false, true, false], Point::new(0.0, 0.0)), Some(2));
        assert_eq!(select_greedy(&[0.2, 0.9, 0.4], &pts(), &[true; 3], Point::new(0.0, 0.0)), None);
    }

    #[test]
    fn monte_carlo_single_and_zero_weights() {
        let mut rng = stream_rng(3, 0);
        assert_eq!(select_monte_carlo(&[0.7], &[false], &mut rng), Some(0));
        assert_eq!(select_monte_carlo(&[0.7, 0.1], &[true, true], &mut rng), None);
        let mut seen = [0usize; 3];
        for _ in 0..300 {
            seen[select_monte_carlo(&[0.0; 3], &[false; 3], &mut rng).unwrap()] += 1;
        }
        assert!(seen.iter().all(|&c| c > 50));
    }
}
