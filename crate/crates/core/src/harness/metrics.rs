//! Per-step aggregates over Monte Carlo runs and campaign summaries.

use crate::harness::config::ExperimentConfig;
use crate::harness::runner::{projected_fraction, RunOutcome};

/// Number of final samples treated as steady state.
pub const STEADY_WINDOW: usize = 1000;
/// Samples after warm-up before constraint violations are counted.
pub const SETTLE_STEPS: usize = 100;

/// Aggregates at time `t`, i.e. after `t` samples have been observed.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub t: usize,
    /// Mean of `|delta_t|` over runs.
    pub mean_abs_delta: f64,
    /// Mean normalised squared parameter error of `theta_hat_t`.
    pub mse: f64,
    /// Share of runs with `delta_t` outside `[yd_min, yd_max]`.
    pub violation_rate: f64,
    /// Mean and variance over runs of the perturbation `d_{t-1}` that was
    /// applied last.
    pub mean_d: f64,
    pub var_d: f64,
    /// Share of runs where the output limit set `d_{t-1}`.
    pub output_active_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub rows: Vec<MetricsRow>,
    /// Runs that entered the aggregates.
    pub runs_used: usize,
    pub runs_diverged: usize,
    pub warm_up: usize,
}

impl MetricsRecord {
    /// Aggregates the non-diverged runs. With none left every value is NaN.
    pub fn aggregate(config: &ExperimentConfig, runs: &[RunOutcome]) -> Self {
        let used: Vec<&RunOutcome> = runs.iter().filter(|r| !r.diverged()).collect();
        let n = used.len() as f64;
        let limits = &config.limits;
        let rows = (0..config.steps)
            .map(|s| {
                let mut abs_delta = 0.0;
                let mut mse = 0.0;
                let mut violations = 0.0;
                let mut sum_d = 0.0;
                let mut sum_d2 = 0.0;
                let mut active = 0.0;
                for run in &used {
                    let rec = &run.steps[s];
                    abs_delta += rec.delta_next.abs();
                    mse += rec.mse_next;
                    if rec.delta_next > limits.yd_max || rec.delta_next < limits.yd_min {
                        violations += 1.0;
                    }
                    sum_d += rec.d;
                    sum_d2 += rec.d * rec.d;
                    if rec.design.is_some_and(|d| d.output_active) {
                        active += 1.0;
                    }
                }
                let mean_d = sum_d / n;
                MetricsRow {
                    t: s + 1,
                    mean_abs_delta: abs_delta / n,
                    mse: mse / n,
                    violation_rate: violations / n,
                    mean_d,
                    var_d: (sum_d2 / n - mean_d * mean_d).max(0.0),
                    output_active_rate: active / n,
                }
            })
            .collect();
        Self {
            rows,
            runs_used: used.len(),
            runs_diverged: runs.len() - used.len(),
            warm_up: config.warm_up,
        }
    }

    /// Row for time `t` (1-based).
    pub fn at(&self, t: usize) -> Option<&MetricsRow> {
        t.checked_sub(1).and_then(|i| self.rows.get(i))
    }

    fn mean_over<'a>(rows: impl Iterator<Item = &'a MetricsRow>, f: impl Fn(&MetricsRow) -> f64) -> f64 {
        let (sum, count) = rows.fold((0.0, 0usize), |(s, c), r| (s + f(r), c + 1));
        if count == 0 {
            f64::NAN
        } else {
            sum / count as f64
        }
    }

    fn steady_rows(&self) -> &[MetricsRow] {
        let start = self.rows.len().saturating_sub(STEADY_WINDOW);
        &self.rows[start..]
    }

    pub fn steady_mean_abs_delta(&self) -> f64 {
        Self::mean_over(self.steady_rows().iter(), |r| r.mean_abs_delta)
    }

    pub fn max_mean_abs_delta(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.mean_abs_delta)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_mse(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.mse)
    }

    pub fn mse_at_warm_up(&self) -> f64 {
        self.at(self.warm_up).map_or(f64::NAN, |r| r.mse)
    }

    /// Mean violation rate over `t > warm_up + SETTLE_STEPS`.
    pub fn settled_violation_rate(&self) -> f64 {
        let start = self.warm_up + SETTLE_STEPS;
        Self::mean_over(self.rows.iter().filter(|r| r.t > start), |r| r.violation_rate)
    }

    /// Mean share of post-warm-up steps where the output limit was binding.
    pub fn output_active_fraction(&self) -> f64 {
        Self::mean_over(
            self.rows.iter().filter(|r| r.t > self.warm_up),
            |r| r.output_active_rate,
        )
    }

    /// Mean of `d^2` over post-warm-up steps and runs.
    pub fn perturbation_power(&self) -> f64 {
        Self::mean_over(
            self.rows.iter().filter(|r| r.t > self.warm_up),
            |r| r.var_d + r.mean_d * r.mean_d,
        )
    }
}

/// Campaign-level numbers written to `summary.txt`.
#[derive(Clone, Debug, PartialEq)]
pub struct CampaignSummary {
    pub label: String,
    pub runs: usize,
    pub runs_diverged: usize,
    pub steady_mean_abs_delta: f64,
    pub max_mean_abs_delta: f64,
    pub final_mse: f64,
    pub mse_at_warm_up: f64,
    pub settled_violation_rate: f64,
    pub output_active_fraction: f64,
    pub perturbation_power: f64,
    pub projected_fraction: f64,
}

impl CampaignSummary {
    pub fn new(label: impl Into<String>, metrics: &MetricsRecord, runs: &[RunOutcome]) -> Self {
        let used: Vec<&RunOutcome> = runs.iter().filter(|r| !r.diverged()).collect();
        let projected = if used.is_empty() {
            f64::NAN
        } else {
            used.iter().map(|r| projected_fraction(r)).sum::<f64>() / used.len() as f64
        };
        Self {
            label: label.into(),
            runs: runs.len(),
            runs_diverged: metrics.runs_diverged,
            steady_mean_abs_delta: metrics.steady_mean_abs_delta(),
            max_mean_abs_delta: metrics.max_mean_abs_delta(),
            final_mse: metrics.final_mse(),
            mse_at_warm_up: metrics.mse_at_warm_up(),
            settled_violation_rate: metrics.settled_violation_rate(),
            output_active_fraction: metrics.output_active_fraction(),
            perturbation_power: metrics.perturbation_power(),
            projected_fraction: projected,
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "label = {}\nruns = {}\nruns_diverged = {}\nsteady_mean_abs_delta = {:e}\n\
             max_mean_abs_delta = {:e}\nfinal_mse = {:e}\nmse_at_warm_up = {:e}\n\
             settled_violation_rate = {:e}\noutput_active_fraction = {:e}\n\
             perturbation_power = {:e}\nprojected_fraction = {:e}\n",
            self.label,
            self.runs,
            self.runs_diverged,
            self.steady_mean_abs_delta,
            self.max_mean_abs_delta,
            self.final_mse,
            self.mse_at_warm_up,
            self.settled_violation_rate,
            self.output_active_fraction,
            self.perturbation_power,
            self.projected_fraction,
        )
    }
}
