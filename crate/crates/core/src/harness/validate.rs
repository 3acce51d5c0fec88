//! Fast self-checks of the core identities, run by the `validate` subcommand.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::benchmark::{reference_controller, reference_model};
use crate::designer::{design_step, objective, DesignInputs};
use crate::plant::ClosedLoop;
use crate::poly::{filter_step, History};
use crate::rpem::{InformationInverse, Predictor};
use crate::sensitivity::{
    build_sensitivity, ConstraintContext, ConstraintStatus, PerturbationLimits,
};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, tol: f64) -> CheckResult {
    CheckResult {
        name,
        passed: value < tol,
        detail: format!("max error {value:.3e} (tolerance {tol:.0e})"),
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Impulse response by recursion vs. direct-form simulation of `B~/A~`.
pub fn impulse_vs_filter(k: usize) -> f64 {
    let s = build_sensitivity(&reference_model(), &reference_controller(), k).expect("valid");
    let depth = s.b_tilde().degree().max(s.a_tilde().degree()) + 1;
    let mut u = History::new(depth);
    let mut y = History::new(depth);
    let mut err: f64 = 0.0;
    for i in 0..=k {
        u.push(if i == 0 { 1.0 } else { 0.0 });
        let out = filter_step(s.b_tilde(), s.a_tilde(), &u, &y);
        y.push(out);
        if i >= 1 {
            err = err.max((out - s.impulse()[i - 1]).abs());
        }
    }
    err
}

/// Twin-loop `delta` under a unit pulse in `d` vs. the impulse response.
pub fn twin_loop_vs_impulse(k: usize) -> f64 {
    let model = reference_model();
    let ctrl = reference_controller();
    let s = build_sensitivity(&model, &ctrl, k).expect("valid");
    let mut plant = ClosedLoop::new(model, ctrl);
    let mut err: f64 = 0.0;
    for i in 0..k {
        let step = plant
            .step(0.0, if i == 0 { 1.0 } else { 0.0 }, 0.0)
            .expect("finite");
        err = err.max((step.delta_next - s.impulse()[i]).abs());
    }
    err
}

/// Largest `|delta|` over a run with `d = 0` and random noise.
pub fn twin_identity(steps: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plant = ClosedLoop::new(reference_model(), reference_controller());
    (0..steps)
        .map(|_| {
            plant
                .step(1.0, 0.0, 0.01 * gauss(&mut rng))
                .expect("finite")
                .delta_next
                .abs()
        })
        .fold(0.0, f64::max)
}

pub fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| gauss(rng));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.1
}

/// Relative error of `det(R'^-1) = det(R^-1) (1 + psi^T R psi)`.
pub fn determinant_lemma(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = 2 + (gauss(&mut rng).abs() * 3.0) as usize % 6;
        let r = random_spd(n, &mut rng);
        let psi = DVector::from_fn(n, |_, _| gauss(&mut rng));
        let mut info = InformationInverse::from_matrix(r.clone());
        let ratio = info.update(&psi);
        let before = r.try_inverse().expect("spd").determinant();
        let after = info.matrix().clone().try_inverse().expect("spd").determinant();
        worst = worst.max(((after - before * ratio) / after).abs());
    }
    worst
}

/// Worst shortfall of the closed-form objective against a grid search.
pub fn design_vs_grid(instances: usize, grid: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(-1.0, 1.0).expect("valid range");
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = 4;
        let info = InformationInverse::from_matrix(random_spd(n, &mut rng));
        let a = 0.5 * unit.sample(&mut rng);
        let b = a + 0.5 * (unit.sample(&mut rng) + 1.0) + 1e-3;
        let inputs = DesignInputs {
            r11: info.r11(),
            r12: info.r12(),
            xi: DVector::from_fn(n - 1, |_, _| gauss(&mut rng)),
            u_hat: unit.sample(&mut rng),
            bounds: ConstraintContext {
                g1: 1.0,
                h: 0.0,
                d_lo: a,
                d_hi: b,
                status: ConstraintStatus::Feasible,
            },
        };
        let (d, _) =
            design_step(&inputs, &PerturbationLimits::symmetric(1.0, f64::INFINITY)).expect("finite");
        let best = objective(&info, &inputs, d);
        let grid_best = (0..=grid)
            .map(|i| objective(&info, &inputs, a + (b - a) * i as f64 / grid as f64))
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((grid_best - best) / grid_best.abs().max(1.0));
    }
    worst
}

/// Gradient recursion vs. central differences of the residual trajectory.
/// Returns the worst per-component error relative to that component's scale.
pub fn gradient_vs_finite_difference(samples: usize, step: f64, seed: u64) -> f64 {
    let model = reference_model();
    let orders = model.orders();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plant = ClosedLoop::new(model.clone(), reference_controller());
    let mut data = Vec::with_capacity(samples);
    for _ in 0..samples {
        let d = if gauss(&mut rng) > 0.0 { 0.3 } else { -0.3 };
        let out = plant.step(1.0, d, 0.01 * gauss(&mut rng)).expect("finite");
        data.push((out.y_next, out.u_applied));
    }
    // evaluate at a point away from the truth
    let theta: Vec<f64> = model
        .theta_vector()
        .iter()
        .map(|x| x * 0.9 + 0.01)
        .collect();
    let residuals = |theta: &[f64]| -> (Vec<f64>, Vec<DVector<f64>>) {
        let th = DVector::from_column_slice(theta);
        let mut p = Predictor::new(orders);
        data.iter()
            .map(|&(y, u)| p.advance_fixed(&th, y, u))
            .unzip()
    };
    let (_, psi) = residuals(&theta);
    let mut worst: f64 = 0.0;
    for j in 0..theta.len() {
        let mut plus = theta.clone();
        let mut minus = theta.clone();
        plus[j] += step;
        minus[j] -= step;
        let (ep, _) = residuals(&plus);
        let (em, _) = residuals(&minus);
        let scale = psi.iter().map(|p| p[j].abs()).fold(0.0, f64::max);
        let err = psi
            .iter()
            .zip(ep.iter().zip(&em))
            .map(|(p, (a, b))| (p[j] + (a - b) / (2.0 * step)).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    worst
}

pub fn run_all() -> Vec<CheckResult> {
    vec![
        check("impulse response vs direct-form filter", impulse_vs_filter(50), 1e-10),
        check("twin-loop delta vs impulse response", twin_loop_vs_impulse(50), 1e-10),
        check("zero perturbation gives zero delta", twin_identity(1000, 7), 1e-12),
        check("matrix determinant lemma", determinant_lemma(200, 11), 1e-8),
        check("closed-form design vs grid search", design_vs_grid(200, 10_000, 13), 1e-10),
        check(
            "gradient recursion vs finite differences",
            gradient_vs_finite_difference(300, 1e-6, 17),
            1e-4,
        ),
    ]
}
