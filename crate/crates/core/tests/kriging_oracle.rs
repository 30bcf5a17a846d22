mod common;

use common::{kriging_oracle, random_observations, to_samples};
use crns_core::kriging::{solve_ordinary_kriging, solve_poisson_kriging, KrigingMethod, KrigingOptions, KrigingSystem};
use crns_core::rng::stream_rng;
use crns_core::variography::VariogramModel;
use crns_core::Sample;
use proptest::prelude::*;
use rand::Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn matches_elimination_oracle() {
    let mut rng = stream_rng(11, 0);
    for case in 0..60 {
        let n = rng.random_range(1..=10);
        let pts = random_observations(&mut rng, n, 5.0);
        let nugget = rng.random_range(0.0..0.5);
        let range = rng.random_range(10.0..60.0);
        let sill = nugget + rng.random_range(0.5..3.0);
        let model = VariogramModel::new(nugget, range, sill).unwrap();
        let m_hat = rng.random_range(1.0..6.0);
        let (x0, y0) = (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0));
        let samples = to_samples(&pts);

        let pk = solve_poisson_kriging(&samples, &model, m_hat, x0, y0).unwrap();
        let oracle = kriging_oracle(&pts, (nugget, range, sill), Some(m_hat), x0, y0);
        for (a, b) in pk.weights.weights.iter().zip(&oracle.weights) {
            assert!(close(*a, *b, 1e-9), "case {case}: PK weight {a} vs {b}");
        }
        assert!(close(pk.raw_estimate, oracle.estimate, 1e-9), "case {case}");
        assert!(close(pk.raw_variance, oracle.variance, 1e-9), "case {case}");

        let ok = solve_ordinary_kriging(&samples, &model, x0, y0).unwrap();
        let oracle = kriging_oracle(&pts, (nugget, range, sill), None, x0, y0);
        for (a, b) in ok.weights.weights.iter().zip(&oracle.weights) {
            assert!(close(*a, *b, 1e-9), "case {case}: OK weight {a} vs {b}");
        }
        assert!(close(ok.raw_estimate, oracle.estimate, 1e-9), "case {case}");
    }
}

#[test]
fn single_observation_returns_its_rate() {
    let s = [Sample::new(3.0, 4.0, 600.0, 1234.0)];
    let model = VariogramModel::new(0.1, 20.0, 1.5).unwrap();
    let pk = solve_poisson_kriging(&s, &model, 2.0, 50.0, 50.0).unwrap();
    assert_eq!(pk.weights.weights, vec![1.0]);
    assert_eq!(pk.estimate, 1234.0 / 600.0);
}

#[test]
fn colocated_variance_below_far_variance() {
    let pts = [(10.0, 10.0, 600.0, 2400.0), (30.0, 15.0, 600.0, 1800.0), (20.0, 30.0, 300.0, 1500.0)];
    let model = VariogramModel::new(0.0, 10.0, 1.0).unwrap();
    let samples = to_samples(&pts);
    let sys = KrigingSystem::new(&samples, &model, KrigingMethod::Poisson, 4.0, KrigingOptions::default())
        .unwrap();
    let at = sys.solve_at(10.0, 10.0).unwrap().variance;
    let far = sys.solve_at(200.0, 200.0).unwrap().variance;
    assert!(at < far, "{at} vs {far}");
}

fn model_strategy() -> impl Strategy<Value = VariogramModel> {
    (0.0..0.5f64, 5.0..60.0f64, 0.2..3.0f64).prop_map(|(n, r, d)| VariogramModel { nugget: n, range: r, sill: n + d })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_sum_to_one(seed in any::<u64>(), n in 1usize..10, model in model_strategy(), m_hat in 0.5..6.0f64) {
        let mut rng = stream_rng(seed, 0);
        let pts = random_observations(&mut rng, n, 4.0);
        let samples = to_samples(&pts);
        for method in [KrigingMethod::Poisson, KrigingMethod::Ordinary] {
            let sys = KrigingSystem::new(&samples, &model, method, m_hat, KrigingOptions::default()).unwrap();
            let est = sys.solve_at(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)).unwrap();
            let sum: f64 = est.weights.weights.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9, "sum {}", sum);
        }
    }

    #[test]
    fn longer_observation_never_raises_variance(
        seed in any::<u64>(),
        n in 2usize..8,
        model in model_strategy(),
        factor in 1.0..20.0f64,
    ) {
        let mut rng = stream_rng(seed, 1);
        let pts = random_observations(&mut rng, n, 4.0);
        let k = rng.random_range(0..n);
        let mut longer = pts.clone();
        longer[k].2 *= factor;
        longer[k].3 *= factor;
        let m_hat = 3.0;
        let (x0, y0) = (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0));
        let before = solve_poisson_kriging(&to_samples(&pts), &model, m_hat, x0, y0).unwrap();
        let after = solve_poisson_kriging(&to_samples(&longer), &model, m_hat, x0, y0).unwrap();
        prop_assert!(after.raw_variance <= before.raw_variance + 1e-9 * before.raw_variance.abs().max(1.0),
            "{} -> {}", before.raw_variance, after.raw_variance);
    }

    // The gap scales with the condition number of the OK system times
    // m/(t * partial sill), so instances are kept reasonably conditioned.
    #[test]
    fn pk_tends_to_ok_for_long_observations(
        seed in any::<u64>(),
        n in 2usize..10,
        range in 5.0..25.0f64,
        psill in 0.5..3.0f64,
    ) {
        let model = VariogramModel { nugget: 0.1, range, sill: 0.1 + psill };
        let mut rng = stream_rng(seed, 2);
        let mut pts = random_observations(&mut rng, n, 8.0);
        for p in &mut pts {
            let rate = p.3 / p.2;
            p.2 = 1e9;
            p.3 = rate * 1e9;
        }
        let samples = to_samples(&pts);
        let (x0, y0) = (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0));
        let pk = solve_poisson_kriging(&samples, &model, 4.0, x0, y0).unwrap();
        let ok = solve_ordinary_kriging(&samples, &model, x0, y0).unwrap();
        for (a, b) in pk.weights.weights.iter().zip(&ok.weights.weights) {
            prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
        }
    }
}
