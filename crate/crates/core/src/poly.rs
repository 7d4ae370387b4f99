//! Dense univariate polynomials with exact antiderivatives.

use std::ops::{Add, Mul, Neg, Sub};

use crate::scalar::Scalar;

/// Polynomial `Σ coeffs[k] x^k`. Trailing zero coefficients are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<S> {
    pub coeffs: Vec<S>,
}

impl<S: Scalar> Poly<S> {
    pub fn new(coeffs: Vec<S>) -> Self {
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: S) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `slope * x + intercept`
    pub fn linear(slope: S, intercept: S) -> Self {
        Self { coeffs: vec![intercept, slope] }
    }

    /// The monomial `x^k`.
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![S::zero(); k + 1];
        coeffs[k] = S::one();
        Self { coeffs }
    }

    pub fn coeff(&self, k: usize) -> S {
        self.coeffs.get(k).cloned().unwrap_or_else(S::zero)
    }

    /// Degree ignoring exactly-zero leading coefficients; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| !c.is_zero()).unwrap_or(0)
    }

    pub fn eval(&self, x: &S) -> S {
        self.coeffs.iter().rev().fold(S::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    pub fn scale(&self, factor: &S) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c.clone() * factor.clone()).collect() }
    }

    pub fn derivative(&self) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c.clone() * S::from_int(k as i64))
                .collect(),
        }
    }

    /// `∫_lo^hi p(x) dx` via the monomial antiderivative.
    pub fn integrate(&self, lo: &S, hi: &S) -> S {
        let terms = self.coeffs.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(k, c)| {
            let p = (k + 1) as u32;
            c.clone() * (hi.powi(p) - lo.powi(p)) / S::from_int(p as i64)
        });
        S::sum_all(terms)
    }

    /// Maximum absolute coefficient as a float, used to scale tolerances.
    pub fn magnitude(&self) -> f64 {
        self.coeffs.iter().map(|c| c.to_f64().abs()).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, scale: f64, eps: f64) -> bool {
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n).all(|k| self.coeff(k).approx_eq(&other.coeff(k), scale, eps))
    }
}

impl<S: Scalar> Add for &Poly<S> {
    type Output = Poly<S>;

    fn add(self, rhs: Self) -> Poly<S> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly { coeffs: (0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect() }
    }
}

impl<S: Scalar> Sub for &Poly<S> {
    type Output = Poly<S>;

    fn sub(self, rhs: Self) -> Poly<S> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly { coeffs: (0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect() }
    }
}

impl<S: Scalar> Mul for &Poly<S> {
    type Output = Poly<S>;

    fn mul(self, rhs: Self) -> Poly<S> {
        if self.coeffs.is_empty() || rhs.coeffs.is_empty() {
            return Poly::zero();
        }
        let mut coeffs = vec![S::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                coeffs[i + j] = coeffs[i + j].clone() + a.clone() * b.clone();
            }
        }
        Poly { coeffs }
    }
}

impl<S: Scalar> Neg for &Poly<S> {
    type Output = Poly<S>;

    fn neg(self) -> Poly<S> {
        Poly { coeffs: self.coeffs.iter().map(|c| -c.clone()).collect() }
    }
}
