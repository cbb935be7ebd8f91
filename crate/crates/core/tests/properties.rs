use hjb_planner_core::math::{norm, uniform_grid};
use hjb_planner_core::oracles::check_bounds;
use hjb_planner_core::{ModelParams, RateSeries, SeriesKernel, DEFAULT_TERM_TOL, DEFAULT_X_SWITCH};
use proptest::prelude::*;

fn build(n: usize, sigma: f64, radius: f64) -> (SeriesKernel, RateSeries) {
    let params = ModelParams::new(n, sigma, radius).unwrap();
    let kernel = SeriesKernel::build(params, DEFAULT_TERM_TOL, radius).unwrap();
    let rate = RateSeries::build(&kernel, DEFAULT_X_SWITCH).unwrap();
    (kernel, rate)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_is_increasing_and_convex(n in 1usize..=100, sigma in 0.3f64..5.0, radius in 0.2f64..3.0) {
        let (kernel, _) = build(n, sigma, radius);
        let grid = uniform_grid(0.0, radius, 101);
        let log_u: Vec<f64> = grid.iter().map(|&r| kernel.eval_log_u(r).unwrap()).collect();
        prop_assert!(log_u.windows(2).all(|w| w[1] >= w[0]));
        // convexity of u, checked on u / u(R) to stay in range
        let top = log_u[log_u.len() - 1];
        let u: Vec<f64> = log_u.iter().map(|l| (l - top).exp()).collect();
        for w in u.windows(3) {
            prop_assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-14, "{:?}", w);
        }
        let du: Vec<f64> = grid.iter().map(|&r| kernel.eval_u_prime(r).unwrap()).collect();
        prop_assert_eq!(du[0], 0.0);
        prop_assert!(du.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn bounds_hold(n in 1usize..=100, sigma in 0.3f64..5.0, radius in 0.2f64..3.0) {
        let (kernel, _) = build(n, sigma, radius);
        let report = check_bounds(&kernel, &uniform_grid(0.0, radius, 64)).unwrap();
        prop_assert!(report.ensure().is_ok(), "{}", report.summary());
    }

    #[test]
    fn rate_is_increasing_and_below_one(n in 1usize..=100, sigma in 0.3f64..5.0, radius in 0.2f64..4.0) {
        let (_, rate) = build(n, sigma, radius);
        let rho: Vec<f64> = uniform_grid(0.0, radius, 200)
            .iter()
            .map(|&r| rate.rate_coeff(r).unwrap())
            .collect();
        prop_assert_eq!(rho[0], 0.0);
        prop_assert!(rho.windows(2).all(|w| w[1] - w[0] >= -1e-12));
        prop_assert!(rho.iter().all(|&v| v <= 1.0 + 1e-12));
    }

    #[test]
    fn feedback_is_rate_times_state(
        y in proptest::collection::vec(-0.7f64..0.7, 1..8),
        sigma in 0.3f64..3.0,
        scale in 0.1f64..1.0,
    ) {
        let n = y.len();
        let (_, rate) = build(n, sigma, 2.0);
        let r = norm(&y);
        let rho = rate.rate_coeff(r).unwrap();
        let p = rate.feedback(&y).unwrap().p;
        for (pi, yi) in p.iter().zip(&y) {
            prop_assert_eq!(*pi, rho * yi);
        }
        let y2: Vec<f64> = y.iter().map(|v| v * scale).collect();
        let rho2 = rate.rate_coeff(norm(&y2)).unwrap();
        let p2 = rate.feedback(&y2).unwrap().p;
        for (pi, yi) in p2.iter().zip(&y2) {
            prop_assert_eq!(*pi, rho2 * yi);
        }
        let dot: f64 = p.iter().zip(&y).map(|(a, b)| a * b).sum();
        prop_assert!(dot >= 0.0);
    }

    #[test]
    fn log_and_direct_forms_agree(n in 1usize..=100, sigma in 0.3f64..5.0, frac in 0.0f64..=1.0) {
        let radius = 2.0;
        let (kernel, _) = build(n, sigma, radius);
        let r = frac * radius;
        let u = kernel.eval_u(r).unwrap();
        let log_u = kernel.eval_log_u(r).unwrap();
        prop_assert!((log_u.exp() - u).abs() <= 1e-13 * u);
    }

    #[test]
    fn optimal_cost_decreases_in_start_radius(n in 1usize..=20, sigma in 0.3f64..3.0, radius in 0.2f64..2.0) {
        let (kernel, _) = build(n, sigma, radius);
        let costs: Vec<f64> = uniform_grid(0.0, radius, 50)
            .iter()
            .map(|&r| kernel.expected_optimal_cost(r).unwrap())
            .collect();
        prop_assert!(costs.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(costs[costs.len() - 1], 0.0);
        let bound = radius.powi(4) / (2.0 * sigma * sigma * (n as f64 + 2.0));
        prop_assert!(costs[0] <= bound * (1.0 + 1e-12));
    }
}

#[test]
fn zero_state_gives_zero_control() {
    let (_, rate) = build(5, 1.0, 1.0);
    assert_eq!(rate.feedback(&[0.0; 5]).unwrap().p, vec![0.0; 5]);
}

#[test]
fn non_finite_state_is_rejected() {
    let (_, rate) = build(2, 1.0, 1.0);
    let err = rate.feedback(&[f64::NAN, 0.0]).unwrap_err();
    assert!(err.to_string().contains("invalid inventory state"));
}
