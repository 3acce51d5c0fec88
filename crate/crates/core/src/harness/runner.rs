//! Single experiments and Monte Carlo campaigns.
//!
//! One iteration at time `t`: read `u_t` from the controller, pick `d_t`
//! (zero during warm-up), advance the true loop to `y~_{t+1}`, update the
//! estimator with `(y~_{t+1}, u~_t)` and `R` with the realised gradient.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::designer::{design_step, DesignInputs, Diagnostics};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Policy};
use crate::harness::metrics::MetricsRecord;
use crate::harness::prbs::Prbs;
use crate::plant::{ArmaxModel, ClosedLoop};
use crate::rpem::{InformationInverse, RpemState};
use crate::sensitivity::{
    build_sensitivity_from_parts, constraint_bounds, ConstraintStatus, PerturbationHistory,
};

/// `|y~|` beyond this aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Stream ids under a run seed.
const NOISE_STREAM: u64 = 1;
/// The PRBS is seeded from the base seed alone, so every run of a campaign
/// sees the same sequence.
const PRBS_STREAM: u64 = 2;

/// Everything observed during one iteration at time `t`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub r: f64,
    pub u: f64,
    pub d: f64,
    pub u_tilde: f64,
    /// `y~_t`, `delta_t`, `e_t` at the start of the iteration.
    pub y_tilde: f64,
    pub delta: f64,
    pub e: f64,
    /// `delta_{t+1}` produced by this iteration.
    pub delta_next: f64,
    /// `||theta - theta_hat_{t+1}||^2 / ||theta||^2`.
    pub mse_next: f64,
    pub design: Option<Diagnostics>,
    pub sensitivity_unstable: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    /// Step at which the run was aborted.
    pub diverged_at: Option<usize>,
    pub final_theta: Vec<f64>,
}

impl RunOutcome {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// Applied perturbations after the warm-up.
    pub fn perturbations_after(&self, warm_up: usize) -> Vec<f64> {
        self.steps.iter().skip(warm_up).map(|s| s.d).collect()
    }
}

/// A steppable single experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    config: ExperimentConfig,
    seed: u64,
    plant: ClosedLoop,
    rpem: RpemState,
    info: InformationInverse,
    history: PerturbationHistory,
    noise: ChaCha8Rng,
    prbs: Option<Prbs>,
    theta_true: Vec<f64>,
    theta_norm_sq: f64,
    t: usize,
}

impl Experiment {
    pub fn new(config: ExperimentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let orders = config.model.orders();
        let theta_true = config.model.theta_vector();
        let theta_norm_sq = theta_true.iter().map(|x| x * x).sum();
        let mut noise = ChaCha8Rng::seed_from_u64(seed);
        noise.set_stream(NOISE_STREAM);
        let prbs = (config.policy == Policy::Prbs).then(|| {
            Prbs::new(
                config.prbs.order,
                config.prbs.amplitude,
                config.prbs.switch_period,
                config.seed.wrapping_add(PRBS_STREAM << 32),
            )
        });
        Ok(Self {
            plant: ClosedLoop::new(config.model.clone(), config.controller.clone()),
            rpem: RpemState::new(orders, config.rpem),
            info: InformationInverse::new(orders.num_params(), config.info_prior),
            history: PerturbationHistory::new(config.horizon),
            noise,
            prbs,
            theta_true,
            theta_norm_sq,
            seed,
            config,
            t: 0,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn is_finished(&self) -> bool {
        self.t >= self.config.steps
    }

    pub fn estimator(&self) -> &RpemState {
        &self.rpem
    }

    pub fn information(&self) -> &InformationInverse {
        &self.info
    }

    pub fn plant(&self) -> &ClosedLoop {
        &self.plant
    }

    /// Normalised squared parameter error of the current estimate.
    pub fn mse(&self) -> f64 {
        normalized_error(&self.theta_true, self.rpem.theta().as_slice(), self.theta_norm_sq)
    }

    fn choose_perturbation(&self, u: f64) -> Result<(f64, Option<Diagnostics>, bool)> {
        if self.t < self.config.warm_up {
            return Ok((0.0, None, false));
        }
        match self.config.policy {
            Policy::Zero => Ok((0.0, None, false)),
            Policy::Prbs => {
                let prbs = self.prbs.as_ref().expect("prbs policy has a generator");
                Ok((prbs.value(self.t - self.config.warm_up), None, false))
            }
            Policy::Designed => {
                let orders = self.rpem.orders();
                let estimate = ArmaxModel::from_theta(self.rpem.theta().as_slice(), orders, 0.0)?;
                let sens = build_sensitivity_from_parts(
                    estimate.b(),
                    estimate.a(),
                    &self.config.controller,
                    self.config.horizon,
                )?;
                let ctx = constraint_bounds(&sens, &self.history, &self.config.limits);
                let inputs = DesignInputs::assemble(&self.info, &self.rpem, u, ctx);
                let (d, diag) = design_step(&inputs, &self.config.limits)?;
                Ok((d, Some(diag), !sens.is_stable()))
            }
        }
    }

    pub fn step(&mut self) -> Result<StepRecord> {
        let t = self.t;
        let r = self.config.reference.at(t);
        let y_tilde = self.plant.output();
        let delta = self.plant.delta();
        let e = self.plant.noise();
        let u = self.plant.preview_control(r);
        let (d, design, sensitivity_unstable) = self.choose_perturbation(u)?;

        let z: f64 = StandardNormal.sample(&mut self.noise);
        let e_next = self.config.model.noise_std() * z;
        let out = self.plant.step(r, d, e_next)?;
        if out.y_next.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                step: t,
                magnitude: out.y_next.abs(),
            });
        }
        self.history.push(d);
        let report = self.rpem.step(out.y_next, out.u_applied)?;
        self.info.update(&report.psi);
        self.t += 1;

        Ok(StepRecord {
            t,
            r,
            u,
            d,
            u_tilde: out.u_applied,
            y_tilde,
            delta,
            e,
            delta_next: out.delta_next,
            mse_next: self.mse(),
            design,
            sensitivity_unstable,
        })
    }

    /// Runs to completion; divergence ends the run early and is recorded.
    pub fn run(mut self) -> Result<RunOutcome> {
        let mut steps = Vec::with_capacity(self.config.steps);
        let mut diverged_at = None;
        while !self.is_finished() {
            match self.step() {
                Ok(rec) => steps.push(rec),
                Err(Error::Diverged { step, .. }) => {
                    diverged_at = Some(step);
                    break;
                }
                Err(Error::NonFinite(_)) => {
                    diverged_at = Some(self.t);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(RunOutcome {
            seed: self.seed,
            steps,
            diverged_at,
            final_theta: self.rpem.theta().as_slice().to_vec(),
        })
    }
}

pub fn normalized_error(theta: &[f64], estimate: &[f64], theta_norm_sq: f64) -> f64 {
    theta
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / theta_norm_sq
}

pub fn run_single(config: &ExperimentConfig, seed: u64) -> Result<RunOutcome> {
    Experiment::new(config.clone(), seed)?.run()
}

/// Seed of run `index` (0-based) in a campaign.
pub fn run_seed(config: &ExperimentConfig, index: usize) -> u64 {
    config.seed.wrapping_add(index as u64 + 1)
}

#[derive(Clone, Debug)]
pub struct Campaign {
    pub runs: Vec<RunOutcome>,
    pub metrics: MetricsRecord,
}

impl Campaign {
    pub fn diverged_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.diverged()).count()
    }
}

/// Runs `config.runs` independent experiments in parallel and aggregates them
/// in run order.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<Campaign> {
    config.validate()?;
    let runs = (0..config.runs)
        .into_par_iter()
        .map(|i| run_single(config, run_seed(config, i)))
        .collect::<Result<Vec<_>>>()?;
    let metrics = MetricsRecord::aggregate(config, &runs);
    Ok(Campaign { runs, metrics })
}

/// Share of designed steps after warm-up whose constraint context needed
/// the projection fallback.
pub fn projected_fraction(run: &RunOutcome) -> f64 {
    let designed: Vec<_> = run.steps.iter().filter_map(|s| s.design).collect();
    if designed.is_empty() {
        return 0.0;
    }
    designed
        .iter()
        .filter(|d| d.status == ConstraintStatus::Projected)
        .count() as f64
        / designed.len() as f64
}
