use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;
use std::process::Command;

use pertdesign::harness::output::{read_csv_column, write_metrics, write_trajectory, METRICS_HEADER};
use pertdesign::harness::prbs::prbs;
use pertdesign::harness::runner::{normalized_error, run_seed};
use pertdesign::harness::{
    run_monte_carlo, run_single, welch, ExperimentConfig, MetricsRecord, Policy,
};

fn short(policy: Policy, yd_max: f64, steps: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default().with_yd_max(yd_max).with_policy(policy);
    cfg.steps = steps;
    cfg.runs = 4;
    cfg
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pertdesign-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn same_seed_same_run() {
    let cfg = short(Policy::Designed, 0.1, 800);
    let a = run_single(&cfg, 17).unwrap();
    let b = run_single(&cfg, 17).unwrap();
    assert_eq!(a.steps, b.steps);
    assert_eq!(a.final_theta, b.final_theta);
    let c = run_single(&cfg, 18).unwrap();
    assert_ne!(a.steps, c.steps);
}

#[test]
fn zero_policy_has_no_output_perturbation() {
    let run = run_single(&short(Policy::Zero, f64::INFINITY, 1000), 2).unwrap();
    assert!(run.steps.iter().all(|s| s.d == 0.0 && s.delta_next == 0.0));
}

#[test]
fn warm_up_is_unperturbed() {
    for policy in [Policy::Designed, Policy::Prbs] {
        let run = run_single(&short(policy, 0.1, 400), 3).unwrap();
        assert!(run.steps[..200].iter().all(|s| s.d == 0.0));
        assert!(run.steps[200..].iter().any(|s| s.d != 0.0));
    }
}

#[test]
fn policies_share_noise() {
    let a = run_single(&short(Policy::Designed, 0.1, 500), 9).unwrap();
    let b = run_single(&short(Policy::Prbs, 0.1, 500), 9).unwrap();
    let ea: Vec<f64> = a.steps.iter().map(|s| s.e).collect();
    let eb: Vec<f64> = b.steps.iter().map(|s| s.e).collect();
    assert_eq!(ea, eb);
}

#[test]
fn prbs_is_binary_and_balanced() {
    let n = 100_000;
    let x: Vec<f64> = (0..n).map(|t| prbs(0.3, 1, 5, t)).collect();
    assert!(x.iter().all(|v| *v == 0.3 || *v == -0.3));
    let mean = x.iter().sum::<f64>() / n as f64;
    assert!(mean.abs() < 0.02);
    let var = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    for lag in 1..20 {
        let r = x.iter().zip(&x[lag..]).map(|(a, b)| a * b).sum::<f64>() / (n - lag) as f64;
        assert!((r / var).abs() < 0.05, "lag {lag}");
    }
}

#[test]
fn single_run_aggregate_is_the_run() {
    let mut cfg = short(Policy::Designed, 0.1, 600);
    cfg.runs = 1;
    let campaign = run_monte_carlo(&cfg).unwrap();
    let run = run_single(&cfg, run_seed(&cfg, 0)).unwrap();
    assert_eq!(campaign.runs[0].steps, run.steps);
    for (row, s) in campaign.metrics.rows.iter().zip(&run.steps) {
        assert_eq!(row.mean_abs_delta, s.delta_next.abs());
        assert_eq!(row.mse, s.mse_next);
        assert_eq!(row.mean_d, s.d);
        assert_eq!(row.var_d, 0.0);
    }
}

#[test]
fn campaign_is_independent_of_scheduling() {
    let cfg = short(Policy::Designed, 0.2, 500);
    let a = run_monte_carlo(&cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| run_monte_carlo(&cfg).unwrap());
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn mse_of_zero_estimate_is_one() {
    let theta = [0.57, -0.38, 0.118, -0.9062, 0.4344, -0.1829, 0.2];
    let norm: f64 = theta.iter().map(|x| x * x).sum();
    assert_eq!(normalized_error(&theta, &[0.0; 7], norm), 1.0);
}

#[test]
fn unconstrained_single_run_plateau() {
    let cfg = ExperimentConfig::default();
    let run = run_single(&cfg, 1).unwrap();
    let half = &run.steps[cfg.steps / 2..];
    let mean = half.iter().map(|s| s.delta_next.abs()).sum::<f64>() / half.len() as f64;
    assert!((0.10..=0.22).contains(&mean), "mean |delta| {mean}");
}

#[test]
fn metrics_csv_round_trip() {
    let cfg = short(Policy::Designed, 0.1, 400);
    let campaign = run_monte_carlo(&cfg).unwrap();
    let dir = scratch("metrics");
    let path = dir.join("metrics.csv");
    write_metrics(&path, &campaign.metrics).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), METRICS_HEADER);
    let mse = read_csv_column(&path, "mse").unwrap();
    let want: Vec<f64> = campaign.metrics.rows.iter().map(|r| r.mse).collect();
    assert_eq!(mse, want);
    write_trajectory(&dir.join("trajectory_0.csv"), &campaign.runs[0]).unwrap();
    let d = read_csv_column(&dir.join("trajectory_0.csv"), "d").unwrap();
    assert_eq!(d.len(), 400);
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn sinusoid_spectrum_peaks_at_its_frequency() {
    let x: Vec<f64> = (0..4096).map(|t| (2.0 * PI * 10.0 * t as f64 * 0.01).sin()).collect();
    let s = welch(&[&x], 512, 0.01).unwrap();
    let peak = (0..s.power.len()).max_by(|a, b| s.power[*a].total_cmp(&s.power[*b])).unwrap();
    assert_eq!(peak, s.nearest_bin(10.0));
    let mut sorted = s.power.clone();
    sorted.sort_by(f64::total_cmp);
    assert!(s.power[peak] >= 100.0 * sorted[sorted.len() / 2]);
    assert!(welch(&[&x[..300]], 512, 0.01).is_err());
}

#[test]
fn white_binary_spectrum_is_flat() {
    let x: Vec<f64> = (0..50_000).map(|t| prbs(0.3, 1, 1, t)).collect();
    let s = welch(&[&x], 512, 0.01).unwrap();
    let bands: Vec<f64> = (1..8)
        .map(|i| {
            let lo = 1.0 + 39.0 * (i - 1) as f64 / 7.0;
            s.band_power(lo, lo + 39.0 / 7.0)
        })
        .collect();
    let max = bands.iter().cloned().fold(0.0, f64::max);
    let min = bands.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max / min < 3.0);
}

#[test]
fn diverged_runs_are_counted_not_aggregated() {
    // a wildly unstable plant with no perturbation blows up quickly
    let text = "a = [1.0, -2.5]\nb = [0.0, 1.0]\nc = [1.0]\nl = [0.0]\nm = [1.0]\n\
                steps = 300\nwarm_up = 10\nruns = 3\npolicy = \"zero\"\n";
    let cfg = ExperimentConfig::from_toml_str(text).unwrap();
    let campaign = run_monte_carlo(&cfg).unwrap();
    assert_eq!(campaign.diverged_runs(), 3);
    assert_eq!(campaign.metrics.runs_diverged, 3);
    assert!(campaign.metrics.rows[0].mse.is_nan());
    let m = MetricsRecord::aggregate(&cfg, &campaign.runs);
    assert_eq!(m.runs_used, 0);
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pertdesign"))
}

#[test]
fn cli_run_writes_outputs() {
    let dir = scratch("cli-run");
    let status = cli()
        .args(["run", "--runs", "2", "--steps", "800", "--yd-max", "0.1", "--trajectories", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["metrics.csv", "summary.txt", "spectrum.csv", "trajectory_0.csv", "trajectory_1.csv"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("settled_violation_rate"));
    let spec = cli()
        .args(["spectrum", "--skip", "200", "--input"])
        .arg(dir.join("trajectory_0.csv"))
        .output()
        .unwrap();
    assert!(spec.status.success());
    assert!(String::from_utf8_lossy(&spec.stdout).starts_with("freq_hz,power"));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn cli_exit_codes() {
    let dir = scratch("cli-codes");
    let bad = dir.join("bad.toml");
    fs::write(&bad, "warm_up = 500\nsteps = 100\n").unwrap();
    let code = cli().args(["run", "--config"]).arg(&bad).status().unwrap().code();
    assert_eq!(code, Some(2));

    let unstable = dir.join("unstable.toml");
    fs::write(
        &unstable,
        "a = [1.0, -2.5]\nb = [0.0, 1.0]\nc = [1.0]\nl = [0.0]\nm = [1.0]\n\
         steps = 300\nwarm_up = 10\nruns = 3\npolicy = \"zero\"\n",
    )
    .unwrap();
    let code = cli()
        .args(["run", "--config"])
        .arg(&unstable)
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(3));

    let validate = cli().arg("validate").output().unwrap();
    assert!(validate.status.success());
    assert!(!String::from_utf8_lossy(&validate.stdout).contains("FAIL"));

    let sens = cli().args(["sensitivity", "--horizon", "10"]).output().unwrap();
    assert!(sens.status.success());
    let text = String::from_utf8_lossy(&sens.stdout);
    assert!(text.contains("g,1,5.6999999999999995e-1") || text.contains("g,1,5.7"));
    fs::remove_dir_all(dir).unwrap();
}
