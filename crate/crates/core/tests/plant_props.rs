use pertdesign::benchmark::{reference_controller, reference_model};
use pertdesign::plant::{ArmaxModel, ClosedLoop, ModelOrders};
use pertdesign::sensitivity::build_sensitivity;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn deltas(d: &[f64], r: &[f64], e: &[f64]) -> Vec<f64> {
    let mut plant = ClosedLoop::new(reference_model(), reference_controller());
    d.iter()
        .zip(r)
        .zip(e)
        .map(|((&d, &r), &e)| plant.step(r, d, e).unwrap().delta_next)
        .collect()
}

fn signal(len: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delta_is_linear_in_d(d in signal(200, 0.3), e in signal(200, 0.03)) {
        let r = vec![1.0; d.len()];
        let once = deltas(&d, &r, &e);
        let doubled: Vec<f64> = d.iter().map(|x| 2.0 * x).collect();
        let twice = deltas(&doubled, &r, &e);
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((2.0 * a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn delta_ignores_reference_and_noise(
        d in signal(200, 0.3),
        e1 in signal(200, 0.03),
        e2 in signal(200, 0.03),
        r2 in signal(200, 2.0),
    ) {
        let a = deltas(&d, &vec![1.0; 200], &e1);
        let b = deltas(&d, &r2, &e2);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn theta_round_trip(theta in prop::collection::vec(-1.0..1.0f64, 6)) {
        let orders = ModelOrders { nb: 2, na: 3, nc: 1 };
        let m = ArmaxModel::from_theta(&theta, orders, 0.1).unwrap();
        prop_assert_eq!(m.theta_vector(), theta);
        prop_assert_eq!(m.a().coeff(0), 1.0);
        prop_assert_eq!(m.c().coeff(0), 1.0);
        prop_assert_eq!(m.b().coeff(0), 0.0);
    }
}

#[test]
fn pulse_response_matches_recursion() {
    let s = build_sensitivity(&reference_model(), &reference_controller(), 50).unwrap();
    let mut d = vec![0.0; 50];
    d[0] = 1.0;
    let got = deltas(&d, &[0.0; 50], &[0.0; 50]);
    for (i, (x, g)) in got.iter().zip(s.impulse()).enumerate() {
        assert!((x - g).abs() < 1e-10, "sample {i}: {x} vs {g}");
    }
}

#[test]
fn zero_perturbation_zero_delta() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = Normal::new(0.0, 0.01).unwrap();
    let e: Vec<f64> = (0..1000).map(|_| n.sample(&mut rng)).collect();
    let out = deltas(&[0.0; 1000], &[1.0; 1000], &e);
    assert!(out.iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn integral_action_tracks_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = Normal::new(0.0, 0.01).unwrap();
    let mut plant = ClosedLoop::new(reference_model(), reference_controller());
    let steps = 10_000;
    let tail: Vec<f64> = (0..steps)
        .map(|_| plant.step(1.0, 0.0, n.sample(&mut rng)).unwrap().y_next)
        .skip(steps - steps / 5)
        .collect();
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
}

#[test]
fn rest_state() {
    let mut plant = ClosedLoop::new(reference_model(), reference_controller());
    let s = plant.step(0.0, 0.0, 0.0).unwrap();
    assert_eq!((s.y_next, s.delta_next, s.u_applied), (0.0, 0.0, 0.0));
}
