//! Monte Carlo properties of full benchmark campaigns.

use pertdesign::harness::{run_monte_carlo, Campaign, ExperimentConfig};

fn campaign(yd_max: f64) -> Campaign {
    run_monte_carlo(&ExperimentConfig::default().with_yd_max(yd_max)).unwrap()
}

/// Mean of a metric over consecutive windows after warm-up.
fn window_means(c: &Campaign, width: usize, f: impl Fn(&pertdesign::harness::MetricsRow) -> f64) -> Vec<f64> {
    let rows = &c.metrics.rows[c.metrics.warm_up..];
    rows.chunks(width)
        .filter(|w| w.len() == width)
        .map(|w| w.iter().map(&f).sum::<f64>() / width as f64)
        .collect()
}

#[test]
fn parameter_error_decays_after_warm_up() {
    let c = campaign(f64::INFINITY);
    let means = window_means(&c, 400, |r| r.mse);
    for (i, w) in means.windows(2).enumerate() {
        assert!(w[1] < w[0], "window {i}: {} -> {}", w[0], w[1]);
    }
    assert!(c.metrics.final_mse() < c.metrics.mse_at_warm_up() / 5.0);
}

#[test]
fn loose_output_limit_is_rarely_binding() {
    for yd_max in [0.20, f64::INFINITY] {
        let c = campaign(yd_max);
        let active = c.metrics.output_active_fraction();
        assert!(active < 0.10, "yd_max {yd_max}: output limit binding on {active:.3} of steps");
    }
}

#[test]
fn all_runs_stay_bounded() {
    for yd_max in [0.04, 0.10] {
        let c = campaign(yd_max);
        assert_eq!(c.diverged_runs(), 0);
        assert!(c.metrics.rows.iter().all(|r| r.mse.is_finite()));
    }
}
