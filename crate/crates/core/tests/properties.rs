use gaussdkw::complexity::{build_admissible_sequence, complexity_report, covering_number};
use gaussdkw::empirical_process::{
    envelope_ratio, ks_statistic, mean_integral_identity, scale_sensitive_statistic,
    ProjectionSample,
};
use gaussdkw::gaussian::{cdf, quantile, sigma2, ProbabilityGrid, QuantileGrid};
use gaussdkw::point_sets::{make_sphere_grid, UnitPointSet};
use gaussdkw::transport::w2_empirical_gaussian;
use proptest::prelude::*;

fn sample_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-6.0f64..6.0, 1..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantile_inverts_cdf(u in 1e-12f64..(1.0 - 1e-12)) {
        prop_assert!((cdf(quantile(u)) - u).abs() <= 1e-10 * u.min(1.0 - u).max(1e-6));
    }

    #[test]
    fn sigma2_is_even_and_bounded(t in -30.0f64..30.0) {
        let s = sigma2(t).unwrap();
        prop_assert!(s >= 0.0 && s <= 0.25);
        prop_assert_eq!(s, sigma2(-t).unwrap());
    }

    #[test]
    fn probability_grid_is_sorted(delta in 1e-4f64..0.25) {
        let g = ProbabilityGrid::new(delta).unwrap();
        prop_assert!(g.u_values.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(g.t_values.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(g.u_values.iter().all(|&u| u >= delta * (1.0 - 1e-12) && u < 1.0));
    }

    #[test]
    fn quantile_grid_is_monotone(m in 2usize..2000) {
        let q = QuantileGrid::new(m).unwrap();
        prop_assert!(q.lambdas.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(q.etas.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(q.etas.iter().sum::<f64>().abs() <= 1e-9 * m as f64);
    }

    #[test]
    fn statistics_are_bounded_and_mirror_symmetric(values in sample_strategy(), delta in 0.001f64..0.25) {
        let p = ProjectionSample::from_values(values.clone(), 0);
        let mirrored = ProjectionSample::from_values(values.iter().map(|v| -v).collect(), 0);
        let (ks, _) = ks_statistic(&p);
        prop_assert!((0.0..=1.0).contains(&ks));
        prop_assert!((ks - ks_statistic(&mirrored).0).abs() <= 1e-12);
        let ss = scale_sensitive_statistic(&p, delta).unwrap();
        prop_assert!(ss.sup >= ss.grid_sup);
        let ss_m = scale_sensitive_statistic(&mirrored, delta).unwrap();
        prop_assert!((ss.sup - ss_m.sup).abs() <= 1e-9 * ss.sup.abs().max(1.0));
        let (ratio, _) = envelope_ratio(&p, delta);
        prop_assert!(ratio >= 0.0 && ratio <= ks / delta + 1e-12);
    }

    #[test]
    fn w2_report_is_consistent(values in sample_strategy()) {
        let p = ProjectionSample::from_values(values, 0);
        let r = w2_empirical_gaussian(&p).unwrap();
        let total: f64 = r.per_cell_contributions.iter().sum();
        prop_assert!((r.w2 * r.w2 - total).abs() <= 1e-9 * total.max(1.0));
        prop_assert!(r.per_cell_contributions.iter().all(|&c| c >= 0.0));
        let (lhs, rhs) = mean_integral_identity(&p);
        prop_assert!((lhs - rhs).abs() <= 1e-6 * lhs.abs().max(1.0));
    }

    #[test]
    fn covering_and_admissible_invariants(d in 2usize..8, n in 1usize..40, seed in 0u64..1000) {
        let a = make_sphere_grid(d, n, seed).unwrap();
        let seq = build_admissible_sequence(&a).unwrap();
        prop_assert_eq!(seq.levels[0].len(), 1);
        for (s, level) in seq.levels.iter().enumerate().skip(1) {
            prop_assert!((level.len() as f64) <= 2f64.powf(2f64.powi(s as i32)));
            prop_assert!(level.iter().all(|&i| i < a.len()));
        }
        let mut last = usize::MAX;
        for delta in [0.05, 0.1, 0.2, 0.5, 1.0, 2.0] {
            let c = covering_number(&a, delta).unwrap();
            prop_assert!(c >= 1 && c <= last);
            last = c;
        }
        let r = complexity_report(&a).unwrap();
        prop_assert!(r.gamma1_upper >= 1.0);
        prop_assert!(r.sudakov_lower >= 0.0 && r.sudakov_lower <= r.gamma1_upper);
        prop_assert!(r.gamma2_upper >= 0.0 && r.dudley_upper >= 0.0);
    }

    #[test]
    fn point_set_csv_round_trips(d in 2usize..6, n in 1usize..10, seed in 0u64..100) {
        let a = make_sphere_grid(d, n, seed).unwrap();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let b = UnitPointSet::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for i in 0..a.len() {
            prop_assert!((b.dot(i, i) - 1.0).abs() <= 1e-12);
            prop_assert!((a.dot(0, i) - b.dot(0, i)).abs() <= 1e-12);
        }
    }
}
