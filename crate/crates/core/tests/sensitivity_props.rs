use pertdesign::benchmark::{reference_controller, reference_model};
use pertdesign::plant::{ArmaxModel, ClosedLoop, Controller};
use pertdesign::poly::Polynomial;
use pertdesign::sensitivity::{
    build_sensitivity, build_sensitivity_from_parts, constraint_bounds, impulse_response, tail_contribution, truncation_bound,
    ConstraintStatus, PerturbationHistory, PerturbationLimits, SensitivityModel,
};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Open-loop FIR sensitivity with the given impulse response.
fn fir(g: &[f64]) -> SensitivityModel {
    let b = Polynomial::delayed(g).unwrap();
    let open = Controller::new(Polynomial::zero(0), Polynomial::one()).unwrap();
    build_sensitivity_from_parts(&b, &Polynomial::one(), &open, g.len()).unwrap()
}

fn reference(k: usize) -> SensitivityModel {
    build_sensitivity(&reference_model(), &reference_controller(), k).unwrap()
}

/// `g_i` from the twin loop driven by a unit pulse, `n` samples.
fn measured_pulse_response(n: usize) -> Vec<f64> {
    let mut plant = ClosedLoop::new(reference_model(), reference_controller());
    (0..n)
        .map(|i| {
            plant
                .step(0.0, if i == 0 { 1.0 } else { 0.0 }, 0.0)
                .unwrap()
                .delta_next
        })
        .collect()
}

#[test]
fn response_decays_within_horizon() {
    let s = reference(50);
    assert_eq!(s.impulse().len(), 50);
    let (early, late) = s.impulse().split_at(25);
    let max = |v: &[f64]| v.iter().map(|g| g.abs()).fold(0.0, f64::max);
    assert!(max(late) < max(early));
}

#[test]
fn fir_case() {
    let b = Polynomial::delayed(&[0.4, -0.1, 0.05]).unwrap();
    let g = impulse_response(&b, &Polynomial::one(), 6);
    assert_eq!(g, vec![0.4, -0.1, 0.05, 0.0, 0.0, 0.0]);
}

#[test]
fn horizon_prefixes_agree() {
    let short = reference(20);
    let long = reference(200);
    assert_eq!(short.impulse(), &long.impulse()[..20]);
}

/// The worst-case tail beyond the horizon, cross-checked against the pulse
/// response of the simulated loop. For the benchmark the slow closed-loop
/// pole (|z| near 0.99) keeps this around 0.17 at k = 50.
#[test]
fn truncation_bound_matches_simulated_tail() {
    let s = reference(50);
    let bound = truncation_bound(&s, 0.3, 5000);
    let tail: f64 = measured_pulse_response(5050)[50..]
        .iter()
        .map(|g| g.abs())
        .sum::<f64>()
        * 0.3;
    assert!((bound - tail).abs() < 1e-9 * tail, "{bound} vs {tail}");
    assert!(bound > 0.1 && bound < 0.25, "bound {bound}");
    let root = s.a_tilde().max_root_modulus();
    assert!(root > 0.98 && root < 1.0, "slowest pole {root}");
}

#[test]
fn sensitivity_gain_is_b1_for_delayed_controller_input() {
    let model = reference_model();
    let ctrl = Controller::pi(0.01, 1.0).unwrap();
    let s = build_sensitivity(&model, &ctrl, 5).unwrap();
    assert_eq!(s.g1(), model.b().coeff(1) * ctrl.m().coeff(0));
}

proptest! {
    #[test]
    fn interval_respects_output_limits(
        g1 in prop_oneof![-2.0..-0.01f64, 0.01..2.0f64],
        past in prop::collection::vec(-0.3..0.3f64, 0..6),
        tail in prop::collection::vec(-0.5..0.5f64, 6),
        yd in 0.01..0.5f64,
        d_max in 0.05..1.0f64,
    ) {
        let mut g = vec![g1];
        g.extend_from_slice(&tail);
        let s = fir(&g);
        let mut h = PerturbationHistory::new(s.horizon());
        for &d in past.iter().rev() {
            h.push(d);
        }
        let limits = PerturbationLimits::symmetric(d_max, yd);
        let ctx = constraint_bounds(&s, &h, &limits);
        prop_assert_eq!(ctx.h, tail_contribution(&s, &h));
        prop_assert!(ctx.d_lo >= -d_max && ctx.d_hi <= d_max);
        if ctx.status == ConstraintStatus::Feasible {
            prop_assert!(ctx.d_lo <= ctx.d_hi);
            for d in [ctx.d_lo, ctx.d_hi, 0.5 * (ctx.d_lo + ctx.d_hi)] {
                let y = ctx.predicted_delta(d);
                prop_assert!(y <= yd + 1e-12 && y >= -yd - 1e-12);
            }
        } else {
            prop_assert_eq!(ctx.status, ConstraintStatus::Projected);
            prop_assert_eq!(ctx.d_lo, ctx.d_hi);
            prop_assert!(ctx.d_lo == -d_max || ctx.d_lo == d_max);
        }
    }

    #[test]
    fn flipping_gain_sign_keeps_interval(g1 in 0.01..2.0f64, yd in 0.01..0.5f64) {
        let limits = PerturbationLimits::symmetric(0.3, yd);
        let h = PerturbationHistory::new(1);
        let pos = constraint_bounds(&fir(&[g1]), &h, &limits);
        let neg = constraint_bounds(&fir(&[-g1]), &h, &limits);
        prop_assert!((pos.d_lo - neg.d_lo).abs() < 1e-15);
        prop_assert!((pos.d_hi - neg.d_hi).abs() < 1e-15);
    }
}

/// With the true model used both to design and to predict, choosing either
/// endpoint of every interval never leaves the next one empty.
#[test]
fn feasibility_propagates_under_fixed_model() {
    let s = reference(50);
    for yd in [0.2, 0.1, 0.04] {
        let limits = PerturbationLimits::symmetric(0.3, yd);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut h = PerturbationHistory::new(50);
        let mut infeasible = 0;
        for _ in 0..5000 {
            let ctx = constraint_bounds(&s, &h, &limits);
            if ctx.status != ConstraintStatus::Feasible {
                infeasible += 1;
            }
            let d = if rng.random::<bool>() { ctx.d_lo } else { ctx.d_hi };
            let y = ctx.predicted_delta(d);
            assert!(y.abs() <= yd + 1e-12);
            h.push(d);
        }
        assert_eq!(infeasible, 0, "yd_max {yd}");
    }
}

#[test]
fn estimated_model_sensitivity_uses_controller() {
    let est = ArmaxModel::from_theta(
        &[0.5, 0.0, 0.0, -0.5, 0.0, 0.0, 0.0],
        reference_model().orders(),
        0.0,
    )
    .unwrap();
    let s = build_sensitivity(&est, &reference_controller(), 3).unwrap();
    assert_eq!(s.g1(), 0.5);
    assert!(s.is_stable());
}
