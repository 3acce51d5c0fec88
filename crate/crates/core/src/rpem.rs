//! Recursive prediction error estimation for ARMAX models.
//!
//! Gauss-Newton RPEM with pseudo-linear regression. With the parameter
//! ordering `[b, a, c]` the regressor is
//! `phi_{t+1} = [u~_t .. u~_{t-nb+1}, -y~_t .. -y~_{t-na+1}, eps_t .. eps_{t-nc+1}]`
//! and the negative prediction error gradient obeys
//! `psi_{t+1} = phi_{t+1} - c_1 psi_t - ... - c_nc psi_{t-nc+1}`.
//!
//! [`InformationInverse`] keeps `R_t = (sum psi psi^T)^-1` without forgetting
//! for the experiment designer; the estimator gain uses forgetting.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::ModelOrders;
use crate::poly::{History, Polynomial};

pub const SNAPSHOT_VERSION: u32 = 1;

/// `mu_t = 1 - initial_deficit * decay^t`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForgettingSchedule {
    pub initial_deficit: f64,
    pub decay: f64,
}

impl Default for ForgettingSchedule {
    fn default() -> Self {
        Self {
            initial_deficit: 0.02,
            decay: 0.998,
        }
    }
}

impl ForgettingSchedule {
    pub fn factor(&self, t: usize) -> f64 {
        1.0 - self.initial_deficit * self.decay.powf(t as f64)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpemOptions {
    /// Every entry of the initial estimate.
    pub theta_init: f64,
    /// Initial gain is `gain_init * I`.
    pub gain_init: f64,
    pub lambda_init: f64,
    pub forgetting: ForgettingSchedule,
    /// Roots of C-hat must stay below `1 - c_margin` in modulus.
    pub c_margin: f64,
    pub max_halvings: u32,
}

impl Default for RpemOptions {
    fn default() -> Self {
        Self {
            theta_init: 1e-3,
            gain_init: 1e4,
            lambda_init: 1.0,
            forgetting: ForgettingSchedule::default(),
            c_margin: 1e-6,
            max_halvings: 30,
        }
    }
}

/// Signal buffers of the one-step predictor and its gradient filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    orders: ModelOrders,
    /// Past applied inputs, `[0]` = u~_{t-1}.
    u: History,
    /// `[0]` = y~_t.
    y: History,
    /// A-priori residuals, `[0]` = eps_t.
    eps: History,
    /// Past gradients, front = psi_t.
    psi: VecDeque<DVector<f64>>,
}

impl Predictor {
    pub fn new(orders: ModelOrders) -> Self {
        Self {
            orders,
            u: History::new(orders.nb.saturating_sub(1)),
            y: History::new(orders.na),
            eps: History::new(orders.nc),
            psi: VecDeque::with_capacity(orders.nc.max(1) + 1),
        }
    }

    pub fn orders(&self) -> ModelOrders {
        self.orders
    }

    /// `phi_{t+1}` with `u~_t = u_now`.
    pub fn regressor(&self, u_now: f64) -> DVector<f64> {
        let ModelOrders { nb, na, nc } = self.orders;
        let mut phi = DVector::zeros(nb + na + nc);
        if nb > 0 {
            phi[0] = u_now;
        }
        for i in 1..nb {
            phi[i] = self.u.get(i - 1);
        }
        for i in 0..na {
            phi[nb + i] = -self.y.get(i);
        }
        for i in 0..nc {
            phi[nb + na + i] = self.eps.get(i);
        }
        phi
    }

    /// `psi_{t+1} = phi - sum_i c_i psi_{t+1-i}`, leaving the buffer untouched.
    pub fn gradient(&self, phi: &DVector<f64>, c_hat: &[f64]) -> DVector<f64> {
        let mut psi = phi.clone();
        for (ci, past) in c_hat.iter().zip(self.psi.iter()) {
            psi.axpy(-ci, past, 1.0);
        }
        psi
    }

    /// Like [`gradient`](Self::gradient) and pushes the result into the buffer.
    pub fn gradient_update(&mut self, phi: &DVector<f64>, c_hat: &[f64]) -> DVector<f64> {
        let psi = self.gradient(phi, c_hat);
        self.push_psi(psi.clone());
        psi
    }

    fn push_psi(&mut self, psi: DVector<f64>) {
        self.psi.push_front(psi);
        self.psi.truncate(self.orders.nc.max(1));
    }

    /// Records the sample pair that produced `phi_{t+1}` and advances time.
    fn push_sample(&mut self, u_applied: f64, y: f64, eps: f64) {
        self.u.push(u_applied);
        self.y.push(y);
        self.eps.push(eps);
    }

    /// `psi_{t-i}`, or `None` before the buffer fills.
    pub fn past_gradient(&self, i: usize) -> Option<&DVector<f64>> {
        self.psi.get(i)
    }

    /// First gradient entries `tau_t, tau_{t-1}, ...`, zero-padded to `n_c`.
    pub fn tau_history(&self) -> Vec<f64> {
        (0..self.orders.nc)
            .map(|i| self.psi.get(i).map_or(0.0, |p| p[0]))
            .collect()
    }

    /// Advances the predictor with a FIXED parameter vector and returns
    /// `(eps_{t+1}, psi_{t+1})`.
    pub fn advance_fixed(&mut self, theta: &DVector<f64>, y: f64, u_applied: f64) -> (f64, DVector<f64>) {
        let phi = self.regressor(u_applied);
        let eps = y - phi.dot(theta);
        let psi = self.gradient_update(&phi, c_block(theta, self.orders));
        self.push_sample(u_applied, y, eps);
        (eps, psi)
    }
}

fn c_block(theta: &DVector<f64>, orders: ModelOrders) -> &[f64] {
    &theta.as_slice()[orders.nb + orders.na..]
}

/// Outcome of one [`RpemState::step`].
#[derive(Clone, Debug, PartialEq)]
pub struct RpemReport {
    /// A-priori prediction error.
    pub eps: f64,
    pub psi: DVector<f64>,
    /// False when the update was non-finite and discarded.
    pub accepted: bool,
    /// The C-block step was shortened (or dropped) to keep C-hat stable.
    pub c_projected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpemState {
    theta: DVector<f64>,
    gain: DMatrix<f64>,
    /// Forgetting-weighted sum of squared residuals and its total weight.
    sq_sum: f64,
    weight: f64,
    predictor: Predictor,
    options: RpemOptions,
    t: usize,
    rejected_steps: usize,
}

impl RpemState {
    pub fn new(orders: ModelOrders, options: RpemOptions) -> Self {
        let n = orders.num_params();
        Self {
            theta: DVector::from_element(n, options.theta_init),
            gain: DMatrix::identity(n, n) * options.gain_init,
            sq_sum: options.lambda_init,
            weight: 1.0,
            predictor: Predictor::new(orders),
            options,
            t: 0,
            rejected_steps: 0,
        }
    }

    pub fn orders(&self) -> ModelOrders {
        self.predictor.orders
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    /// Estimated innovation variance.
    pub fn lambda_hat(&self) -> f64 {
        self.sq_sum / self.weight
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected_steps
    }

    pub fn predictor(&self) -> &Predictor {
        &self.predictor
    }

    pub fn c_hat(&self) -> &[f64] {
        c_block(&self.theta, self.orders())
    }

    /// `phi_{t+1}` for a candidate applied input `u~_t`.
    pub fn regressor(&self, u_now: f64) -> DVector<f64> {
        self.predictor.regressor(u_now)
    }

    /// `psi_{t+1}` at the current estimate for a candidate `u~_t`, without
    /// changing state.
    pub fn preview_gradient(&self, u_now: f64) -> DVector<f64> {
        self.predictor.gradient(&self.regressor(u_now), self.c_hat())
    }

    /// One RPEM update with the new output `y~_{t+1}` and the input `u~_t`
    /// that was applied before it.
    pub fn step(&mut self, y_obs: f64, u_obs: f64) -> Result<RpemReport> {
        if !y_obs.is_finite() || !u_obs.is_finite() {
            return Err(Error::NonFinite("estimator data"));
        }
        let orders = self.orders();
        let mu = self.options.forgetting.factor(self.t + 1);

        let phi = self.predictor.regressor(u_obs);
        let eps = y_obs - phi.dot(&self.theta);
        let psi = self.predictor.gradient(&phi, self.c_hat());

        let p_psi = &self.gain * &psi;
        let denom = mu + psi.dot(&p_psi);
        let step = &p_psi * (eps / denom);
        let mut gain = (&self.gain - &p_psi * p_psi.transpose() / denom) / mu;
        gain = (&gain + gain.transpose()) * 0.5;

        let (theta, c_projected) = self.project_c(&step);
        let accepted =
            eps.is_finite() && theta.iter().all(|x| x.is_finite()) && gain.iter().all(|x| x.is_finite());
        if accepted {
            self.theta = theta;
            self.gain = gain;
            self.sq_sum = mu * self.sq_sum + eps * eps;
            self.weight = mu * self.weight + 1.0;
        } else {
            self.rejected_steps += 1;
        }

        self.predictor.push_psi(psi.clone());
        self.predictor
            .push_sample(u_obs, y_obs, if eps.is_finite() { eps } else { 0.0 });
        self.t += 1;
        debug_assert_eq!(self.theta.len(), orders.num_params());
        Ok(RpemReport {
            eps,
            psi,
            accepted,
            c_projected,
        })
    }

    /// Applies `step`, halving its C-block until C-hat is stable.
    fn project_c(&self, step: &DVector<f64>) -> (DVector<f64>, bool) {
        let orders = self.orders();
        let mut theta = &self.theta + step;
        if orders.nc == 0 {
            return (theta, false);
        }
        let c_start = orders.nb + orders.na;
        let stable = |theta: &DVector<f64>| {
            Polynomial::monic(&theta.as_slice()[c_start..])
                .map(|c| c.is_stable_with_margin(self.options.c_margin))
                .unwrap_or(false)
        };
        if stable(&theta) {
            return (theta, false);
        }
        let mut scale = 1.0;
        for _ in 0..self.options.max_halvings {
            scale *= 0.5;
            for i in c_start..theta.len() {
                theta[i] = self.theta[i] + scale * step[i];
            }
            if stable(&theta) {
                return (theta, true);
            }
        }
        for i in c_start..theta.len() {
            theta[i] = self.theta[i];
        }
        (theta, true)
    }

    pub fn to_snapshot(&self) -> Result<String> {
        serde_json::to_string(&Snapshot {
            version: SNAPSHOT_VERSION,
            rpem: self.clone(),
            info: None,
        })
        .map_err(|e| Error::Snapshot(e.to_string()))
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        Ok(Snapshot::parse(text)?.rpem)
    }
}

/// Versioned JSON blob of estimator (and optionally designer) state.
/// Floats are written in shortest round-trip form, so restore is exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    pub rpem: RpemState,
    pub info: Option<InformationInverse>,
}

impl Snapshot {
    pub fn parse(text: &str) -> Result<Self> {
        let snap: Snapshot =
            serde_json::from_str(text).map_err(|e| Error::Snapshot(e.to_string()))?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported snapshot version {} (expected {SNAPSHOT_VERSION})",
                snap.version
            )));
        }
        Ok(snap)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Snapshot(e.to_string()))
    }
}

/// `R_t = (rho^-1 I + sum psi_i psi_i^T)^-1`, updated by rank-one downdates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InformationInverse {
    r: DMatrix<f64>,
}

impl InformationInverse {
    pub fn new(dim: usize, rho: f64) -> Self {
        Self {
            r: DMatrix::identity(dim, dim) * rho,
        }
    }

    pub fn from_matrix(r: DMatrix<f64>) -> Self {
        assert!(r.is_square());
        Self { r }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn r11(&self) -> f64 {
        self.r[(0, 0)]
    }

    /// Top-right block `R_12` as a column vector.
    pub fn r12(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim() - 1, self.r.row(0).iter().skip(1).copied())
    }

    pub fn r22(&self) -> DMatrix<f64> {
        let n = self.dim() - 1;
        self.r.view((1, 1), (n, n)).into_owned()
    }

    /// `psi^T R psi`.
    pub fn quadratic_form(&self, psi: &DVector<f64>) -> f64 {
        psi.dot(&(&self.r * psi))
    }

    /// Sherman-Morrison: `R <- R - R psi psi^T R / (1 + psi^T R psi)`.
    /// Returns `1 + psi^T R psi` (the determinant ratio of the information matrices).
    pub fn update(&mut self, psi: &DVector<f64>) -> f64 {
        let r_psi = &self.r * psi;
        let denom = 1.0 + psi.dot(&r_psi);
        assert!(denom > 0.0, "R lost positive definiteness (1 + psi'R psi = {denom})");
        self.r -= &r_psi * r_psi.transpose() / denom;
        self.r = (&self.r + self.r.transpose()) * 0.5;
        denom
    }

    pub fn is_positive_definite(&self) -> bool {
        self.r.clone().cholesky().is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orders(nb: usize, na: usize, nc: usize) -> ModelOrders {
        ModelOrders { nb, na, nc }
    }

    #[test]
    fn quiescent_regressor_is_zero() {
        let p = Predictor::new(orders(3, 3, 1));
        assert_eq!(p.regressor(0.0), DVector::zeros(7));
    }

    #[test]
    fn arx_regressor_has_no_noise_block() {
        let p = Predictor::new(orders(2, 2, 0));
        assert_eq!(p.regressor(1.0).len(), 4);
    }

    #[test]
    fn regressor_read_off() {
        let mut p = Predictor::new(orders(1, 1, 1));
        p.push_sample(0.0, 2.0, 3.0);
        assert_eq!(p.regressor(1.0).as_slice(), &[1.0, -2.0, 3.0]);
    }

    #[test]
    fn gradient_without_noise_model_is_regressor() {
        let mut p = Predictor::new(orders(2, 1, 0));
        p.push_psi(DVector::from_vec(vec![5.0, 5.0, 5.0]));
        let phi = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(p.gradient(&phi, &[]), phi);
    }

    #[test]
    fn gradient_pure_recursion() {
        let mut p = Predictor::new(orders(1, 1, 1));
        p.push_psi(DVector::from_vec(vec![1.0, 1.0, 1.0]));
        let psi = p.gradient_update(&DVector::zeros(3), &[0.2]);
        for x in psi.iter() {
            assert!((x + 0.2).abs() < 1e-15);
        }
        assert_eq!(p.past_gradient(0), Some(&psi));
    }

    #[test]
    fn zero_information_step_keeps_theta() {
        let mut s = RpemState::new(orders(3, 3, 1), RpemOptions::default());
        let before = s.theta().clone();
        s.step(0.0, 0.0).unwrap();
        assert_eq!(s.theta(), &before);
    }

    #[test]
    fn forgetting_approaches_one() {
        let f = ForgettingSchedule::default();
        assert!((f.factor(0) - 0.98).abs() < 1e-15);
        assert!(f.factor(5000) > 1.0 - 1e-5);
        assert!(f.factor(5000) < 1.0);
    }

    #[test]
    fn sherman_morrison_by_hand() {
        let mut info = InformationInverse::new(3, 1.0);
        info.update(&DVector::from_vec(vec![1.0, 0.0, 0.0]));
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0, 1.0]));
        assert!((info.matrix() - expected).abs().max() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_r() {
        let mut info = InformationInverse::new(4, 1e6);
        let before = info.clone();
        assert_eq!(info.update(&DVector::zeros(4)), 1.0);
        assert_eq!(info, before);
    }

    #[test]
    fn partition_accessors() {
        let r = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 2.0, 1.0, 5.0, 0.5, 2.0, 0.5, 6.0]);
        let info = InformationInverse::from_matrix(r);
        assert_eq!(info.r11(), 4.0);
        assert_eq!(info.r12().as_slice(), &[1.0, 2.0]);
        assert_eq!(info.r22(), DMatrix::from_row_slice(2, 2, &[5.0, 0.5, 0.5, 6.0]));
    }

    #[test]
    fn c_hat_projection_keeps_noise_model_stable() {
        let mut s = RpemState::new(orders(1, 1, 1), RpemOptions::default());
        // drive the c estimate with large residuals
        for t in 0..200 {
            let y = if t % 2 == 0 { 50.0 } else { -50.0 };
            s.step(y, (t % 3) as f64).unwrap();
            let c = Polynomial::monic(s.c_hat()).unwrap();
            assert!(c.max_root_modulus() < 1.0 - 1e-6);
        }
    }

    #[test]
    fn non_finite_data_is_an_error() {
        let mut s = RpemState::new(orders(1, 1, 0), RpemOptions::default());
        assert!(s.step(f64::NAN, 0.0).is_err());
        assert_eq!(s.time(), 0);
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let mut s = RpemState::new(orders(2, 2, 1), RpemOptions::default());
        for t in 0..30 {
            s.step((t as f64 * 0.37).sin(), (t as f64 * 0.11).cos()).unwrap();
        }
        let back = RpemState::from_snapshot(&s.to_snapshot().unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn snapshot_version_checked() {
        let s = RpemState::new(orders(1, 1, 0), RpemOptions::default());
        let text = s.to_snapshot().unwrap().replacen("\"version\":1", "\"version\":99", 1);
        assert!(matches!(RpemState::from_snapshot(&text), Err(Error::Snapshot(_))));
    }
}
