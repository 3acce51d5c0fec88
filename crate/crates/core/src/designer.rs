//! Closed-form one-step D-optimal perturbation.
//!
//! With `psi_{t+1} = [u_hat + d; xi]`, maximising `psi^T R psi` over an interval
//! is maximising a convex parabola in `d`, so the optimum is the endpoint
//! farther from the vertex `d_m = -(R_12 xi)/R_11 - u_hat`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rpem::{InformationInverse, RpemState};
use crate::sensitivity::{ConstraintContext, ConstraintStatus, PerturbationLimits};

#[derive(Clone, Debug, PartialEq)]
pub struct DesignInputs {
    pub r11: f64,
    pub r12: DVector<f64>,
    pub xi: DVector<f64>,
    pub u_hat: f64,
    pub bounds: ConstraintContext,
}

impl DesignInputs {
    /// Assembles the inputs from the information matrix, the estimator and the
    /// controller output `u_t` about to be applied.
    pub fn assemble(
        info: &InformationInverse,
        rpem: &RpemState,
        u_t: f64,
        bounds: ConstraintContext,
    ) -> Self {
        // gradient of the masked regressor (u~_t = 0): first entry is u_hat - u_t
        let masked = rpem.preview_gradient(0.0);
        let u_hat = compute_u_hat(u_t, &rpem.predictor().tau_history(), rpem.c_hat());
        debug_assert!((masked[0] + u_t - u_hat).abs() <= 1e-9 * (1.0 + u_hat.abs()));
        Self {
            r11: info.r11(),
            r12: info.r12(),
            xi: masked.rows(1, masked.len() - 1).into_owned(),
            u_hat,
            bounds,
        }
    }

    /// `psi_{t+1}` as a function of the chosen `d`.
    pub fn gradient_for(&self, d: f64) -> DVector<f64> {
        let mut psi = DVector::zeros(self.xi.len() + 1);
        psi[0] = self.u_hat + d;
        psi.rows_mut(1, self.xi.len()).copy_from(&self.xi);
        psi
    }
}

/// `u_hat_t = u_t - sum_i c_i tau_{t+1-i}`; `tau_history[0]` is `tau_t`.
pub fn compute_u_hat(u_t: f64, tau_history: &[f64], c_hat: &[f64]) -> f64 {
    u_t - c_hat
        .iter()
        .zip(tau_history)
        .map(|(c, tau)| c * tau)
        .sum::<f64>()
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endpoint {
    Lower,
    Upper,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Vertex of the parabola.
    pub d_m: f64,
    pub d_lo: f64,
    pub d_hi: f64,
    pub chosen: Endpoint,
    /// The chosen endpoint came from the output limit rather than the input box.
    pub output_active: bool,
    pub status: ConstraintStatus,
}

/// Returns the optimal `d_t` and how it was reached.
///
/// `input_limits` only serves to classify whether the output constraint was
/// the binding one.
pub fn design_step(
    inputs: &DesignInputs,
    input_limits: &PerturbationLimits,
) -> Result<(f64, Diagnostics)> {
    let ctx = &inputs.bounds;
    if !inputs.r11.is_finite()
        || !inputs.u_hat.is_finite()
        || inputs.r12.iter().chain(inputs.xi.iter()).any(|x| !x.is_finite())
        || ctx.d_lo.is_nan()
        || ctx.d_hi.is_nan()
    {
        return Err(Error::NonFinite("design inputs"));
    }
    if !(inputs.r11 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "R_11 must be positive, got {}",
            inputs.r11
        )));
    }
    if inputs.r12.len() != inputs.xi.len() {
        return Err(Error::LengthMismatch {
            expected: inputs.r12.len(),
            actual: inputs.xi.len(),
        });
    }
    let d_m = -inputs.r12.dot(&inputs.xi) / inputs.r11 - inputs.u_hat;
    let midpoint = 0.5 * (ctx.d_lo + ctx.d_hi);
    let (d, chosen) = if d_m > midpoint {
        (ctx.d_lo, Endpoint::Lower)
    } else {
        (ctx.d_hi, Endpoint::Upper)
    };
    let output_active = match chosen {
        Endpoint::Lower => ctx.d_lo > input_limits.d_min,
        Endpoint::Upper => ctx.d_hi < input_limits.d_max,
    };
    Ok((
        d,
        Diagnostics {
            d_m,
            d_lo: ctx.d_lo,
            d_hi: ctx.d_hi,
            chosen,
            output_active,
            status: ctx.status,
        },
    ))
}

/// `psi(d)^T R psi(d)` for the full matrix.
pub fn objective(info: &InformationInverse, inputs: &DesignInputs, d: f64) -> f64 {
    info.quadratic_form(&inputs.gradient_for(d))
}
