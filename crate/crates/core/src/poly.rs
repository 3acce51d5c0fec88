//! Polynomials in the backward-shift operator `q^-1` and direct-form filtering.
//!
//! A [`Polynomial`] stores `c_0, c_1, ..., c_n` where `c_i` multiplies `q^-i`.
//! Storage is dense and lowest shift power first. Trailing zeros are never
//! trimmed: the degree is whatever the caller constructed.

use std::collections::VecDeque;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Root moduli at or above `1 - STABILITY_TOL` count as unstable.
pub const STABILITY_TOL: f64 = 1e-9;

const SCHUR_MAX_ITER: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Polynomial {
    type Error = Error;

    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        Polynomial::new(coeffs)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument(
                "polynomial needs at least one coefficient".into(),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("polynomial coefficients"));
        }
        Ok(Self { coeffs })
    }

    /// The constant polynomial `1`.
    pub fn one() -> Self {
        Self { coeffs: vec![1.0] }
    }

    /// All-zero polynomial of the given degree.
    pub fn zero(degree: usize) -> Self {
        Self {
            coeffs: vec![0.0; degree + 1],
        }
    }

    /// `1 + tail[0] q^-1 + tail[1] q^-2 + ...`
    pub fn monic(tail: &[f64]) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(tail.len() + 1);
        coeffs.push(1.0);
        coeffs.extend_from_slice(tail);
        Self::new(coeffs)
    }

    /// `tail[0] q^-1 + tail[1] q^-2 + ...`
    pub fn delayed(tail: &[f64]) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(tail.len() + 1);
        coeffs.push(0.0);
        coeffs.extend_from_slice(tail);
        Self::new(coeffs)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `q^-i`; zero beyond the degree.
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    /// Coefficients `c_1..c_n`, i.e. everything past the constant term.
    pub fn tail(&self) -> &[f64] {
        &self.coeffs[1..]
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs[0] == 1.0
    }

    pub fn is_strictly_delayed(&self) -> bool {
        self.coeffs[0] == 0.0
    }

    pub fn convolve(&self, other: &Polynomial) -> Polynomial {
        convolve(self, other)
    }

    /// Coefficient-wise sum after zero-padding to the longer length.
    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|i| self.coeff(i) + other.coeff(i)).collect();
        Polynomial { coeffs }
    }

    pub fn scale(&self, k: f64) -> Polynomial {
        Polynomial {
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    /// Roots of `z^n + c_1 z^{n-1} + ... + c_n` (after dividing by `c_0`),
    /// computed as eigenvalues of the companion matrix. Trailing zero
    /// coefficients are split off as roots at the origin first. If the Schur
    /// iteration fails to converge the roots are reported as NaN.
    pub fn roots(&self) -> Vec<Complex64> {
        let n = self.degree();
        let at_origin = self.coeffs.iter().rev().take_while(|c| **c == 0.0).count().min(n);
        let m = n - at_origin;
        let mut roots = vec![Complex64::new(0.0, 0.0); at_origin];
        if m == 0 {
            return roots;
        }
        let lead = self.coeffs[0];
        let companion = DMatrix::from_fn(m, m, |i, j| {
            if i == 0 {
                -self.coeffs[j + 1] / lead
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        match Schur::try_new(companion, f64::EPSILON, SCHUR_MAX_ITER) {
            Some(schur) => roots.extend(schur.complex_eigenvalues().iter().copied()),
            None => roots.extend(std::iter::repeat_n(Complex64::new(f64::NAN, f64::NAN), m)),
        }
        roots
    }

    /// Largest root modulus; infinite when the roots could not be computed.
    pub fn max_root_modulus(&self) -> f64 {
        self.roots()
            .iter()
            .map(|z| if z.is_nan() { f64::INFINITY } else { z.norm() })
            .fold(0.0, f64::max)
    }

    /// True iff every root of the characteristic polynomial lies strictly inside
    /// the unit circle (with margin [`STABILITY_TOL`]). Degree zero is stable.
    pub fn is_stable(&self) -> bool {
        self.is_stable_with_margin(STABILITY_TOL)
    }

    pub fn is_stable_with_margin(&self, margin: f64) -> bool {
        self.degree() == 0 || self.max_root_modulus() < 1.0 - margin
    }

    /// Evaluates `sum c_i e^{-j omega i}`.
    pub fn frequency_response(&self, omega: f64) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| Complex64::from_polar(c, -omega * i as f64))
            .sum()
    }
}

/// Product of two polynomials: `out_i = sum_j p_j r_{i-j}`.
pub fn convolve(p: &Polynomial, r: &Polynomial) -> Polynomial {
    let mut coeffs = vec![0.0; p.coeffs.len() + r.coeffs.len() - 1];
    for (i, &pi) in p.coeffs.iter().enumerate() {
        for (j, &rj) in r.coeffs.iter().enumerate() {
            coeffs[i + j] += pi * rj;
        }
    }
    Polynomial { coeffs }
}

/// `A M + B L`: denominator of the load sensitivity `B M / (A M + B L)` of the
/// plant `B/A` under feedback `L/M`.
pub fn closed_loop_denominator(
    a: &Polynomial,
    b: &Polynomial,
    l: &Polynomial,
    m: &Polynomial,
) -> Polynomial {
    convolve(a, m).add(&convolve(b, l))
}

/// One sample of `a(q) y = b(q) u` in direct form:
/// `y_t = sum_{i=0}^{deg b} b_i u_{t-i} - sum_{i=1}^{deg a} a_i y_{t-i}`.
///
/// `input_history[0]` is `u_t`, `output_history[0]` is `y_{t-1}`. Missing
/// samples read as zero. `a` must be monic.
pub fn filter_step(
    b: &Polynomial,
    a: &Polynomial,
    input_history: &History,
    output_history: &History,
) -> f64 {
    debug_assert!(a.is_monic());
    let forward: f64 = b
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, &bi)| bi * input_history.get(i))
        .sum();
    let feedback: f64 = a
        .tail()
        .iter()
        .enumerate()
        .map(|(i, &ai)| ai * output_history.get(i))
        .sum();
    forward - feedback
}

/// Fixed-depth signal history, most recent sample first. Reads past the
/// stored depth return zero, which models a quiescent start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    depth: usize,
    samples: VecDeque<f64>,
}

impl History {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            samples: VecDeque::with_capacity(depth + 1),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn push(&mut self, x: f64) {
        if self.depth == 0 {
            return;
        }
        self.samples.push_front(x);
        self.samples.truncate(self.depth);
    }

    /// Sample `i` steps back from the most recent one.
    pub fn get(&self, i: usize) -> f64 {
        self.samples.get(i).copied().unwrap_or(0.0)
    }

    pub fn latest(&self) -> f64 {
        self.get(0)
    }

    /// Zero-padded copy of the full depth, most recent first.
    pub fn to_vec(&self) -> Vec<f64> {
        (0..self.depth).map(|i| self.get(i)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.depth).map(move |i| self.get(i))
    }
}
