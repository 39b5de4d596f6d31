//! Square-root smoothing of the plus function and Bernstein approximations
//! of the smoothed derivative.

use super::bernstein::{basis_row, binomial};
use crate::error::{LdpError, Result};

/// Upper bound on `|f'''_beta|` is `THIRD_DERIV_CONST / beta^2`.
pub const THIRD_DERIV_CONST: f64 = 0.429;

/// `f_beta(x) = (1/2 - x + sqrt((1/2 - x)^2 + beta^2)) / 2`, a smooth
/// surrogate for the hinge `max(0, 1/2 - x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedPlus {
    beta: f64,
}

impl SmoothedPlus {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(LdpError::param(format!(
                "smoothing beta must lie in (0, 1], got {beta}"
            )));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn value(&self, x: f64) -> f64 {
        let a = 0.5 - x;
        (a + a.hypot(self.beta)) / 2.0
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let a = x - 0.5;
        (-1.0 + a / a.hypot(self.beta)) / 2.0
    }
}

/// `h_beta(x) = (x + sqrt(x^2 + beta^2)) / 2`.
pub fn hbeta_value(beta: f64, x: f64) -> f64 {
    (x + x.hypot(beta)) / 2.0
}

/// `h'_beta(x) = (1 + x / sqrt(x^2 + beta^2)) / 2`, in `[0, 1]`.
pub fn hbeta_deriv(beta: f64, x: f64) -> f64 {
    (1.0 + x / x.hypot(beta)) / 2.0
}

/// A Bernstein polynomial on the interval `[lo, hi]`:
/// `P(u) = sum_j c_j C(d,j) t^j (1-t)^{d-j}` with `t = (u - lo)/(hi - lo)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinPoly {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
}

impl BernsteinPoly {
    pub fn new(lo: f64, hi: f64, coeffs: Vec<f64>) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(LdpError::param(format!("invalid interval [{lo}, {hi}]")));
        }
        if coeffs.len() < 2 {
            return Err(LdpError::param("Bernstein degree must be at least 1"));
        }
        Ok(Self { lo, hi, coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Maps `u` to the unit parameter `t`.
    pub fn unit(&self, u: f64) -> f64 {
        (u - self.lo) / (self.hi - self.lo)
    }

    /// Evaluates at `u`; outside the interval this extrapolates the polynomial.
    pub fn eval(&self, u: f64) -> f64 {
        let t = self.unit(u);
        if (0.0..=1.0).contains(&t) {
            return basis_row(self.degree(), t)
                .iter()
                .zip(&self.coeffs)
                .map(|(b, c)| b * c)
                .sum();
        }
        let d = self.degree();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * binomial(d, j) * t.powi(j as i32) * (1.0 - t).powi((d - j) as i32))
            .sum()
    }

    /// Sup-error against `f` on an evenly spaced grid of the interval.
    pub fn sup_error<F: Fn(f64) -> f64>(&self, f: F, points: usize) -> f64 {
        let points = points.max(2);
        (0..points)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (points - 1) as f64)
            .map(|u| (self.eval(u) - f(u)).abs())
            .fold(0.0, f64::max)
    }
}

/// Bernstein coefficients `c_j = f'(lo + (hi - lo) j / d)` of a derivative
/// callable on `[lo, hi]`.
pub fn bernstein_deriv_coeffs_on<F: Fn(f64) -> f64>(
    f_prime: F,
    d: usize,
    lo: f64,
    hi: f64,
) -> Result<BernsteinPoly> {
    if d == 0 {
        return Err(LdpError::param("Bernstein degree d must be at least 1"));
    }
    let coeffs = (0..=d)
        .map(|j| f_prime(lo + (hi - lo) * j as f64 / d as f64))
        .collect();
    BernsteinPoly::new(lo, hi, coeffs)
}

/// Which derivative to approximate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivTarget {
    /// `f'_beta` of the smoothed hinge.
    SmoothedPlus(SmoothedPlus),
    /// `h'_beta` with the given beta.
    HBeta(f64),
}

impl DerivTarget {
    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            DerivTarget::SmoothedPlus(s) => s.deriv(x),
            DerivTarget::HBeta(beta) => hbeta_deriv(*beta, x),
        }
    }
}

/// `c_j = f'(j/d)` on `[0, 1]`.
pub fn bernstein_deriv_coeffs(target: DerivTarget, d: usize) -> Result<BernsteinPoly> {
    bernstein_deriv_coeffs_on(|x| target.deriv(x), d, 0.0, 1.0)
}
