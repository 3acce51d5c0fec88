//! ARMAX plant under output feedback with an additive input perturbation.
//!
//! [`ClosedLoop`] simulates two copies of the loop driven by the same noise:
//! the perturbed loop, which receives `d_t`, and a nominal twin with `d = 0`.
//! Because the loop is linear, their output difference is exactly the output
//! perturbation `delta_t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{filter_step, History, Polynomial};

/// Model orders `(n_b, n_a, n_c)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOrders {
    pub nb: usize,
    pub na: usize,
    pub nc: usize,
}

impl ModelOrders {
    pub fn num_params(&self) -> usize {
        self.nb + self.na + self.nc
    }

    pub fn max_order(&self) -> usize {
        self.nb.max(self.na).max(self.nc)
    }
}

/// `A(q) y = B(q) u + C(q) e`, with `e` white Gaussian of std `noise_std`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmaxModel {
    b: Polynomial,
    a: Polynomial,
    c: Polynomial,
    noise_std: f64,
}

impl ArmaxModel {
    pub fn new(b: Polynomial, a: Polynomial, c: Polynomial, noise_std: f64) -> Result<Self> {
        if !b.is_strictly_delayed() {
            return Err(Error::InvalidArgument("B must have b_0 = 0".into()));
        }
        if !a.is_monic() || !c.is_monic() {
            return Err(Error::InvalidArgument("A and C must be monic".into()));
        }
        if !(noise_std >= 0.0) || !noise_std.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise_std must be finite and >= 0, got {noise_std}"
            )));
        }
        Ok(Self { b, a, c, noise_std })
    }

    pub fn b(&self) -> &Polynomial {
        &self.b
    }

    pub fn a(&self) -> &Polynomial {
        &self.a
    }

    pub fn c(&self) -> &Polynomial {
        &self.c
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn orders(&self) -> ModelOrders {
        ModelOrders {
            nb: self.b.degree(),
            na: self.a.degree(),
            nc: self.c.degree(),
        }
    }

    /// `[b_1..b_nb, a_1..a_na, c_1..c_nc]`.
    pub fn theta_vector(&self) -> Vec<f64> {
        self.b
            .tail()
            .iter()
            .chain(self.a.tail())
            .chain(self.c.tail())
            .copied()
            .collect()
    }

    /// Inverse of [`ArmaxModel::theta_vector`].
    pub fn from_theta(theta: &[f64], orders: ModelOrders, noise_std: f64) -> Result<Self> {
        let expected = orders.num_params();
        if theta.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: theta.len(),
            });
        }
        let (b, rest) = theta.split_at(orders.nb);
        let (a, c) = rest.split_at(orders.na);
        Self::new(
            Polynomial::delayed(b)?,
            Polynomial::monic(a)?,
            Polynomial::monic(c)?,
            noise_std,
        )
    }
}

/// Output feedback `u = (L/M)(r - y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    l: Polynomial,
    m: Polynomial,
}

impl Controller {
    pub fn new(l: Polynomial, m: Polynomial) -> Result<Self> {
        if !m.is_monic() {
            return Err(Error::InvalidArgument("controller M must be monic".into()));
        }
        Ok(Self { l, m })
    }

    /// Discrete PI law `gain (1 + zero q^-1) / (1 - q^-1)`.
    pub fn pi(gain: f64, zero: f64) -> Result<Self> {
        Self::new(
            Polynomial::new(vec![gain, gain * zero])?,
            Polynomial::monic(&[-1.0])?,
        )
    }

    pub fn l(&self) -> &Polynomial {
        &self.l
    }

    pub fn m(&self) -> &Polynomial {
        &self.m
    }
}

/// Signals of one loop copy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LoopChannel {
    /// Measured output, `[0]` = y_t.
    y: History,
    /// Control error r - y, `[0]` = most recent.
    err: History,
    /// Controller output u.
    u: History,
    /// Applied input u + d.
    u_applied: History,
}

impl LoopChannel {
    fn new(depth: usize) -> Self {
        Self {
            y: History::new(depth),
            err: History::new(depth),
            u: History::new(depth),
            u_applied: History::new(depth),
        }
    }

    /// Controller output for the current sample given reference `r`.
    fn control(&self, ctrl: &Controller, r: f64) -> f64 {
        let mut err = self.err.clone();
        err.push(r - self.y.latest());
        filter_step(&ctrl.l, &ctrl.m, &err, &self.u)
    }

    /// Applies `u + d`, advances the plant one sample with innovation `e_next`,
    /// and returns `(u, u + d, y_next)`.
    fn advance(
        &mut self,
        model: &ArmaxModel,
        ctrl: &Controller,
        noise: &History,
        r: f64,
        d: f64,
    ) -> (f64, f64, f64) {
        self.err.push(r - self.y.latest());
        let u = filter_step(&ctrl.l, &ctrl.m, &self.err, &self.u);
        self.u.push(u);
        let u_applied = u + d;
        self.u_applied.push(u_applied);

        // y_{t+1} = sum b_i u~_{t+1-i} + sum c_i e_{t+1-i} - sum a_i y_{t+1-i}
        let forward: f64 = (1..=model.b.degree())
            .map(|i| model.b.coeff(i) * self.u_applied.get(i - 1))
            .sum();
        let moving_average: f64 = (0..=model.c.degree())
            .map(|i| model.c.coeff(i) * noise.get(i))
            .sum();
        let autoregressive: f64 = (1..=model.a.degree())
            .map(|i| model.a.coeff(i) * self.y.get(i - 1))
            .sum();
        let y_next = forward + moving_average - autoregressive;
        self.y.push(y_next);
        (u, u_applied, y_next)
    }
}

/// Result of one [`ClosedLoop::step`].
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LoopStep {
    /// Controller output `u_t`.
    pub u: f64,
    /// Applied input `u_t + d_t`.
    pub u_applied: f64,
    /// Perturbed output `y~_{t+1}`.
    pub y_next: f64,
    /// Output perturbation `delta_{t+1}`.
    pub delta_next: f64,
}

/// Perturbed loop plus its noise-matched nominal twin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoop {
    model: ArmaxModel,
    ctrl: Controller,
    perturbed: LoopChannel,
    nominal: LoopChannel,
    /// `[0]` = e_t, the innovation in the current output.
    noise: History,
    t: usize,
}

impl ClosedLoop {
    pub fn new(model: ArmaxModel, ctrl: Controller) -> Self {
        let depth = [
            model.a.degree(),
            model.b.degree(),
            model.c.degree(),
            ctrl.l.degree(),
            ctrl.m.degree(),
        ]
        .into_iter()
        .max()
        .unwrap_or(0)
            + 1;
        Self {
            perturbed: LoopChannel::new(depth),
            nominal: LoopChannel::new(depth),
            noise: History::new(depth),
            model,
            ctrl,
            t: 0,
        }
    }

    pub fn model(&self) -> &ArmaxModel {
        &self.model
    }

    pub fn controller(&self) -> &Controller {
        &self.ctrl
    }

    /// Current time index.
    pub fn time(&self) -> usize {
        self.t
    }

    /// Current perturbed output `y~_t`.
    pub fn output(&self) -> f64 {
        self.perturbed.y.latest()
    }

    /// Current output perturbation `delta_t`.
    pub fn delta(&self) -> f64 {
        self.perturbed.y.latest() - self.nominal.y.latest()
    }

    /// Innovation that entered the current output.
    pub fn noise(&self) -> f64 {
        self.noise.latest()
    }

    /// Controller output `u_t` that the next [`step`](Self::step) will apply
    /// for reference `r`. It does not depend on `d_t`.
    pub fn preview_control(&self, r: f64) -> f64 {
        self.perturbed.control(&self.ctrl, r)
    }

    /// Applies `d_t` at reference `r_t`, feeds innovation `e` into the next
    /// output sample and advances both loops by one sample.
    pub fn step(&mut self, r: f64, d: f64, e: f64) -> Result<LoopStep> {
        if !r.is_finite() {
            return Err(Error::NonFinite("reference"));
        }
        if !d.is_finite() {
            return Err(Error::NonFinite("perturbation"));
        }
        if !e.is_finite() {
            return Err(Error::NonFinite("noise"));
        }
        self.noise.push(e);
        let (u, u_applied, y_next) =
            self.perturbed
                .advance(&self.model, &self.ctrl, &self.noise, r, d);
        let (_, _, y_nominal) = self
            .nominal
            .advance(&self.model, &self.ctrl, &self.noise, r, 0.0);
        self.t += 1;
        if !y_next.is_finite() {
            return Err(Error::NonFinite("plant output"));
        }
        Ok(LoopStep {
            u,
            u_applied,
            y_next,
            delta_next: y_next - y_nominal,
        })
    }
}
