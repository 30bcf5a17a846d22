use rand::Rng;

use super::select::draw_weighted;
use super::tsp::plan_tsp_route;
use super::Point;
use crate::sensor::{ami_count_target, SamplingRegime, TICK_SECONDS};

/// Inputs of one adaptive-sampling replanning step. `plan` and the returned
/// plan hold candidate indices.
#[derive(Debug, Clone, Copy)]
pub struct ReplanInput<'a> {
    pub plan: &'a [usize],
    pub candidates: &'a [Point],
    pub visited: &'a [bool],
    /// KV at each candidate.
    pub kv: &'a [f64],
    /// Mean KV over the whole variance grid.
    pub mean_kv: f64,
    pub n_min: usize,
    pub current: Point,
}

/// Drops planned targets whose KV is below the grid mean, tops the plan up
/// to `n_min` targets with KV-weighted draws from the remaining unvisited
/// candidates, and re-routes it from the current position.
pub fn adaptive_replan<R: Rng + ?Sized>(input: &ReplanInput<'_>, rng: &mut R) -> Vec<usize> {
    let mut plan: Vec<usize> = input
        .plan
        .iter()
        .copied()
        .filter(|&i| !input.visited[i] && input.kv[i] >= input.mean_kv)
        .collect();

    let mut in_plan = vec![false; input.candidates.len()];
    for &i in &plan {
        in_plan[i] = true;
    }
    while plan.len() < input.n_min {
        let pool: Vec<usize> = (0..input.candidates.len())
            .filter(|&i| !input.visited[i] && !in_plan[i])
            .collect();
        let Some(pick) = draw_weighted(&pool, input.kv, rng) else {
            break;
        };
        in_plan[pick] = true;
        plan.push(pick);
    }

    let points: Vec<Point> = plan.iter().map(|&i| input.candidates[i]).collect();
    plan_tsp_route(&points, input.current).into_iter().map(|k| plan[k]).collect()
}

/// Expected length of the next measurement. Under AMI this is the time to
/// collect the target count at `mean_rate`, rounded up to whole ticks and
/// capped at the regime's maximum duration.
pub fn expected_measurement_duration(regime: &SamplingRegime, mean_rate: f64) -> f64 {
    match *regime {
        SamplingRegime::Fmi { duration_s } => duration_s,
        SamplingRegime::Ami { threshold, max_duration_s } => {
            let rate = mean_rate.max(1e-9);
            let ticks = (ami_count_target(threshold) / rate / TICK_SECONDS).ceil();
            (ticks * TICK_SECONDS).min(max_duration_s)
        }
    }
}

/// Number of measurements expected to fit in the remaining mission time.
pub fn minimum_measurements(remaining_s: f64, measurement_s: f64, leg_travel_s: f64) -> usize {
    let per = measurement_s + leg_travel_s;
    if !(remaining_s > 0.0) || !(per > 0.0) {
        return 0;
    }
    (remaining_s / per).floor() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn line(n: usize) -> Vec<Point> {
        (0..n).map(|k| Point::new(10.0 * k as f64, 0.0)).collect()
    }

    #[test]
    fn above_mean_plan_is_only_reordered() {
        let c = line(5);
        let kv = [1.0, 2.0, 3.0, 4.0, 5.0];
        let input = ReplanInput {
            plan: &[4, 2, 3],
            candidates: &c,
            visited: &[false; 5],
            kv: &kv,
            mean_kv: 3.0,
            n_min: 3,
            current: Point::new(0.0, 0.0),
        };
        assert_eq!(adaptive_replan(&input, &mut stream_rng(0, 0)), vec![2, 3, 4]);
    }

    #[test]
    fn removes_exactly_the_below_mean_targets() {
        let c = line(5);
        let kv = [0.5, 2.5, 0.9, 3.0, 4.0];
        let mean = kv.iter().sum::<f64>() / 5.0; // 2.18
        let input = ReplanInput {
            plan: &[0, 1, 2, 3, 4],
            candidates: &c,
            visited: &[false; 5],
            kv: &kv,
            mean_kv: mean,
            n_min: 0,
            current: Point::new(0.0, 0.0),
        };
        let plan = adaptive_replan(&input, &mut stream_rng(0, 0));
        let mut kept = plan.clone();
        kept.sort_unstable();
        assert_eq!(kept, vec![1, 3, 4]);
    }

    #[test]
    fn below_mean_plan_is_regenerated() {
        let c = line(6);
        let kv = [0.1, 0.1, 5.0, 5.0, 5.0, 5.0];
        let input = ReplanInput {
            plan: &[0, 1],
            candidates: &c,
            visited: &[false; 6],
            kv: &kv,
            mean_kv: 3.0,
            n_min: 2,
            current: Point::new(0.0, 0.0),
        };
        let plan = adaptive_replan(&input, &mut stream_rng(1, 0));
        assert_eq!(plan.len(), 2);
        assert!(plan.iter().all(|&i| i >= 2), "{plan:?}");
    }

    #[test]
    fn plan_never_contains_duplicates_or_visited() {
        let c = line(8);
        let kv = [1.0; 8];
        let mut visited = [false; 8];
        visited[3] = true;
        let input = ReplanInput {
            plan: &[1],
            candidates: &c,
            visited: &visited,
            kv: &kv,
            mean_kv: 1.0,
            n_min: 20,
            current: Point::new(0.0, 0.0),
        };
        let mut plan = adaptive_replan(&input, &mut stream_rng(2, 0));
        plan.sort_unstable();
        assert_eq!(plan, vec![0, 1, 2, 4, 5, 6, 7]);
    }

    #[test]
    fn expected_durations() {
        assert_eq!(expected_measurement_duration(&SamplingRegime::fmi(300.0), 4.0), 300.0);
        assert_eq!(expected_measurement_duration(&SamplingRegime::ami(0.025), 4.0), 400.0);
        assert_eq!(expected_measurement_duration(&SamplingRegime::ami(0.025), 3.0), 540.0);
        assert_eq!(expected_measurement_duration(&SamplingRegime::ami(0.025), 0.0), 1800.0);
        assert_eq!(minimum_measurements(7200.0, 400.0, 20.0), 17);
        assert_eq!(minimum_measurements(0.0, 400.0, 20.0), 0);
    }
}
