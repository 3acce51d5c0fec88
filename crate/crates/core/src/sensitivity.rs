//! Load sensitivity `G_d = B M / (A M + B L)` from the perturbation `d` to the
//! output perturbation `delta`, its truncated impulse response, and the linear
//! bounds it induces on the next perturbation sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{ArmaxModel, Controller};
use crate::poly::{closed_loop_denominator, convolve, History, Polynomial};

/// Below this `|g_1|` the output constraint is ignored for the step.
pub const G1_EPSILON: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityModel {
    a_tilde: Polynomial,
    b_tilde: Polynomial,
    /// `g[i]` holds the impulse response coefficient `g_{i+1}`.
    g: Vec<f64>,
    stable: bool,
}

impl SensitivityModel {
    pub fn a_tilde(&self) -> &Polynomial {
        &self.a_tilde
    }

    pub fn b_tilde(&self) -> &Polynomial {
        &self.b_tilde
    }

    /// `g_1..g_k`.
    pub fn impulse(&self) -> &[f64] {
        &self.g
    }

    pub fn horizon(&self) -> usize {
        self.g.len()
    }

    /// First Markov parameter: the instantaneous gain from `d_t` to `delta_{t+1}`.
    pub fn g1(&self) -> f64 {
        self.g[0]
    }

    /// Whether the closed-loop denominator is stable.
    pub fn is_stable(&self) -> bool {
        self.stable
    }
}

/// Impulse response `g_1..g_k` of `num/den` by the recursion
/// `g_i = num_i - sum_{j=1}^{i} den_j g_{i-j}` with `g_0 = num_0`.
pub fn impulse_response(num: &Polynomial, den: &Polynomial, k: usize) -> Vec<f64> {
    let mut g = vec![0.0; k + 1];
    g[0] = num.coeff(0);
    for i in 1..=k {
        let mut gi = num.coeff(i);
        for j in 1..=i.min(den.degree()) {
            gi -= den.coeff(j) * g[i - j];
        }
        g[i] = gi;
    }
    g.remove(0);
    g
}

pub fn build_sensitivity(
    model: &ArmaxModel,
    ctrl: &Controller,
    k: usize,
) -> Result<SensitivityModel> {
    build_sensitivity_from_parts(model.b(), model.a(), ctrl, k)
}

/// Same as [`build_sensitivity`] for a plant given as `B/A` only.
pub fn build_sensitivity_from_parts(
    b: &Polynomial,
    a: &Polynomial,
    ctrl: &Controller,
    k: usize,
) -> Result<SensitivityModel> {
    if k == 0 {
        return Err(Error::InvalidArgument("horizon k must be >= 1".into()));
    }
    let b_tilde = convolve(b, ctrl.m());
    let a_tilde = closed_loop_denominator(a, b, ctrl.l(), ctrl.m());
    if !a_tilde.is_monic() {
        return Err(Error::InvalidArgument(
            "closed-loop denominator is not monic; B must be strictly delayed".into(),
        ));
    }
    let g = impulse_response(&b_tilde, &a_tilde, k);
    let stable = a_tilde.is_stable();
    Ok(SensitivityModel {
        a_tilde,
        b_tilde,
        g,
        stable,
    })
}

/// Box limits on the input perturbation and the output perturbation.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationLimits {
    pub d_min: f64,
    pub d_max: f64,
    pub yd_min: f64,
    pub yd_max: f64,
}

impl PerturbationLimits {
    pub fn symmetric(d_max: f64, yd_max: f64) -> Self {
        Self {
            d_min: -d_max,
            d_max,
            yd_min: -yd_max,
            yd_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_min.is_finite() && self.d_max.is_finite()) {
            return Err(Error::InvalidArgument("d bounds must be finite".into()));
        }
        if !(self.d_min < self.d_max) {
            return Err(Error::InvalidArgument(format!(
                "need d_min < d_max, got [{}, {}]",
                self.d_min, self.d_max
            )));
        }
        if self.yd_min.is_nan() || self.yd_max.is_nan() || !(self.yd_min < self.yd_max) {
            return Err(Error::InvalidArgument(format!(
                "need yd_min < yd_max, got [{}, {}]",
                self.yd_min, self.yd_max
            )));
        }
        Ok(())
    }

    pub fn output_unbounded(&self) -> bool {
        self.yd_min == f64::NEG_INFINITY && self.yd_max == f64::INFINITY
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintStatus {
    /// Input and output limits intersect in a nonempty interval.
    Feasible,
    /// `|g_1|` is too small for the output limit to constrain `d_t`.
    Degenerate,
    /// The intersection was empty; the interval collapsed to the input bound
    /// whose predicted output lands closest to the output limits.
    Projected,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintContext {
    pub g1: f64,
    /// Contribution of past perturbations to `delta_{t+1}`.
    pub h: f64,
    pub d_lo: f64,
    pub d_hi: f64,
    pub status: ConstraintStatus,
}

impl ConstraintContext {
    /// Context with no output constraint.
    pub fn unconstrained(limits: &PerturbationLimits) -> Self {
        Self {
            g1: f64::NAN,
            h: 0.0,
            d_lo: limits.d_min,
            d_hi: limits.d_max,
            status: ConstraintStatus::Feasible,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status != ConstraintStatus::Projected
    }

    /// Predicted `delta_{t+1}` for a candidate `d_t`.
    pub fn predicted_delta(&self, d: f64) -> f64 {
        self.g1 * d + self.h
    }
}

/// Ring buffer of the last `k - 1` applied perturbations, most recent first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationHistory(History);

impl PerturbationHistory {
    pub fn new(horizon: usize) -> Self {
        Self(History::new(horizon.saturating_sub(1)))
    }

    pub fn push(&mut self, d: f64) {
        self.0.push(d);
    }

    /// `d_{t-1-i}`.
    pub fn get(&self, i: usize) -> f64 {
        self.0.get(i)
    }

    pub fn depth(&self) -> usize {
        self.0.depth()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.to_vec()
    }
}

/// `h_t = sum_{i=2}^{k} g_i d_{t+1-i}`.
pub fn tail_contribution(s: &SensitivityModel, history: &PerturbationHistory) -> f64 {
    s.g.iter()
        .skip(1)
        .enumerate()
        .map(|(i, gi)| gi * history.get(i))
        .sum()
}

/// Feasible interval for `d_t` after intersecting the input box with the
/// output limits `yd_min <= g_1 d_t + h_t <= yd_max`.
pub fn constraint_bounds(
    s: &SensitivityModel,
    history: &PerturbationHistory,
    limits: &PerturbationLimits,
) -> ConstraintContext {
    let g1 = s.g1();
    let h = tail_contribution(s, history);
    let mut ctx = ConstraintContext {
        g1,
        h,
        d_lo: limits.d_min,
        d_hi: limits.d_max,
        status: ConstraintStatus::Feasible,
    };
    if g1.abs() < G1_EPSILON {
        ctx.status = ConstraintStatus::Degenerate;
        return ctx;
    }
    let lo_ratio = (limits.yd_min - h) / g1;
    let hi_ratio = (limits.yd_max - h) / g1;
    ctx.d_lo = limits.d_min.max(lo_ratio.min(hi_ratio));
    ctx.d_hi = limits.d_max.min(lo_ratio.max(hi_ratio));
    if ctx.d_lo > ctx.d_hi {
        let miss = |d: f64| {
            let y = g1 * d + h;
            (limits.yd_min - y).max(y - limits.yd_max).max(0.0)
        };
        let d = if miss(limits.d_min) <= miss(limits.d_max) {
            limits.d_min
        } else {
            limits.d_max
        };
        ctx.d_lo = d;
        ctx.d_hi = d;
        ctx.status = ConstraintStatus::Projected;
    }
    ctx
}

/// Worst-case output contribution of impulse-response terms beyond the
/// horizon, `|d|_max * sum_{i>k} |g_i|`, evaluated with `extended` terms.
pub fn truncation_bound(s: &SensitivityModel, d_abs_max: f64, extended: usize) -> f64 {
    let full = impulse_response(&s.b_tilde, &s.a_tilde, s.horizon() + extended);
    d_abs_max * full[s.horizon()..].iter().map(|g| g.abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::{reference_controller, reference_model};

    fn reference() -> SensitivityModel {
        build_sensitivity(&reference_model(), &reference_controller(), 50).unwrap()
    }

    fn with_g1(g1: f64) -> SensitivityModel {
        let mut s = reference();
        s.g = vec![g1; 1];
        s
    }

    #[test]
    fn first_markov_parameter_is_b1() {
        let s = reference();
        assert!((s.g1() - 0.57).abs() < 1e-15);
        assert_eq!(s.horizon(), 50);
        assert!(s.is_stable());
    }

    #[test]
    fn fir_case_reads_numerator() {
        let num = Polynomial::new(vec![0.0, 0.3, -0.2, 0.1]).unwrap();
        let g = impulse_response(&num, &Polynomial::one(), 6);
        assert_eq!(g, vec![0.3, -0.2, 0.1, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn response_decays_over_horizon() {
        let g = reference().impulse().to_vec();
        let head = g[..25].iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let tail = g[25..].iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!(tail < head);
    }

    #[test]
    fn symmetric_output_limit_shrinks_interval() {
        let limits = PerturbationLimits::symmetric(0.3, 0.10);
        let hist = PerturbationHistory::new(1);
        let ctx = constraint_bounds(&with_g1(0.57), &hist, &limits);
        assert!((ctx.d_lo + 0.10 / 0.57).abs() < 1e-12);
        assert!((ctx.d_hi - 0.10 / 0.57).abs() < 1e-12);
        assert!((ctx.d_hi - 0.17544).abs() < 1e-5);
        assert_eq!(ctx.status, ConstraintStatus::Feasible);
    }

    #[test]
    fn negative_gain_gives_same_interval() {
        let limits = PerturbationLimits::symmetric(0.3, 0.10);
        let hist = PerturbationHistory::new(1);
        let pos = constraint_bounds(&with_g1(0.57), &hist, &limits);
        let neg = constraint_bounds(&with_g1(-0.57), &hist, &limits);
        assert!((pos.d_lo - neg.d_lo).abs() < 1e-15);
        assert!((pos.d_hi - neg.d_hi).abs() < 1e-15);
    }

    #[test]
    fn infinite_output_limit_is_inactive() {
        let limits = PerturbationLimits::symmetric(0.3, f64::INFINITY);
        let hist = PerturbationHistory::new(50);
        let ctx = constraint_bounds(&reference(), &hist, &limits);
        assert_eq!((ctx.d_lo, ctx.d_hi), (-0.3, 0.3));
    }

    #[test]
    fn tiny_gain_is_degenerate() {
        let limits = PerturbationLimits::symmetric(0.3, 0.01);
        let ctx = constraint_bounds(&with_g1(1e-10), &PerturbationHistory::new(1), &limits);
        assert_eq!(ctx.status, ConstraintStatus::Degenerate);
        assert_eq!((ctx.d_lo, ctx.d_hi), (-0.3, 0.3));
    }

    #[test]
    fn empty_intersection_projects_to_nearest_bound() {
        let mut s = reference();
        s.g = vec![0.5, 1.0];
        let limits = PerturbationLimits::symmetric(0.3, 0.1);
        let mut hist = PerturbationHistory::new(2);
        hist.push(1.0); // h = 1.0, far above yd_max
        let ctx = constraint_bounds(&s, &hist, &limits);
        assert_eq!(ctx.status, ConstraintStatus::Projected);
        assert_eq!((ctx.d_lo, ctx.d_hi), (-0.3, -0.3));
    }

    #[test]
    fn tail_uses_most_recent_first() {
        let mut s = reference();
        s.g = vec![1.0, 2.0, 3.0, 4.0];
        let mut hist = PerturbationHistory::new(4);
        assert_eq!(hist.depth(), 3);
        for d in [10.0, 100.0, 1000.0] {
            hist.push(d);
        }
        // d_{t-1} = 1000, d_{t-2} = 100, d_{t-3} = 10
        assert_eq!(tail_contribution(&s, &hist), 2.0 * 1000.0 + 3.0 * 100.0 + 4.0 * 10.0);
    }

    #[test]
    fn zero_horizon_rejected() {
        assert!(build_sensitivity(&reference_model(), &reference_controller(), 0).is_err());
    }
}
