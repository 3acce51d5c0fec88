//! The third-order benchmark loop used throughout the examples and tests:
//! ARMAX plant with C = 1 + 0.2 q^-1 regulated by a discrete PI controller.

use crate::plant::{ArmaxModel, Controller};
use crate::poly::Polynomial;

pub const A: [f64; 4] = [1.0, -0.9062, 0.4344, -0.1829];
pub const B: [f64; 4] = [0.0, 0.57, -0.38, 0.118];
pub const C: [f64; 2] = [1.0, 0.2];
pub const NOISE_STD: f64 = 0.01;

pub const PI_GAIN: f64 = 0.005607;

/// Nominal sampling period in seconds, used only to label frequency axes.
pub const SAMPLE_PERIOD: f64 = 0.01;

pub fn reference_model() -> ArmaxModel {
    ArmaxModel::new(
        Polynomial::new(B.to_vec()).expect("finite"),
        Polynomial::new(A.to_vec()).expect("finite"),
        Polynomial::new(C.to_vec()).expect("finite"),
        NOISE_STD,
    )
    .expect("benchmark model is well formed")
}

/// `K(q) = 0.005607 (1 + q^-1) / (1 - q^-1)`.
pub fn reference_controller() -> Controller {
    Controller::pi(PI_GAIN, 1.0).expect("benchmark controller is well formed")
}
