//! Low-degree approximations of OR on `{0, 1, ..., k}` built from the growth
//! of Chebyshev polynomials outside `[-1, 1]`.
//!
//! With `m(x) = (2x - k - 1)/(k - 1)` mapping `[1, k]` onto `[-1, 1]`, the
//! polynomial `p(x) = 1 - T_d(m(x)) / T_d(m(0))` vanishes at 0 and stays
//! within `1/|T_d(m(0))|` of 1 on `[1, k]`, because `|T_d| <= 1` there while
//! `|m(0)| > 1`.

use super::chebyshev::{chebyshev_eval, chebyshev_monomial};
use crate::error::{LdpError, Result};

/// Degrees beyond this are never needed for `gamma >= 1e-12`.
const MAX_DEGREE: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct OrPolynomial {
    k: usize,
    gamma: f64,
    degree: usize,
    /// Affine map `x -> scale * x + shift`.
    scale: f64,
    shift: f64,
    denom: f64,
    /// Monomial coefficients in `x`, constant term first (always exactly 0).
    coeffs: Vec<f64>,
}

impl OrPolynomial {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Stable evaluation through the Chebyshev form.
    pub fn eval(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        1.0 - chebyshev_eval(self.degree, self.scale * x + self.shift) / self.denom
    }

    /// Horner evaluation of the monomial form.
    pub fn eval_monomial(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// `max_{j in 1..=k} |p(j) - 1|`.
    pub fn max_deviation(&self) -> f64 {
        (1..=self.k)
            .map(|j| (self.eval(j as f64) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Builds the OR-polynomial for `k` with uniform error `gamma` on `{1..k}`.
///
/// For `k = 1` the map of `k = 2` is used: the point 1 lands inside
/// `[-1, 1]` and 0 lands at -3, so the same growth argument applies.
pub fn build_or_polynomial(k: usize, gamma: f64) -> Result<OrPolynomial> {
    if k == 0 {
        return Err(LdpError::param("OR-polynomial needs k >= 1"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(LdpError::param(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    let kk = k.max(2) as f64;
    let scale = 2.0 / (kk - 1.0);
    let shift = -(kk + 1.0) / (kk - 1.0);
    let degree = (1..=MAX_DEGREE)
        .find(|&d| chebyshev_eval(d, shift).abs() >= 1.0 / gamma)
        .ok_or_else(|| LdpError::param(format!("gamma {gamma} is too small")))?;
    let denom = chebyshev_eval(degree, shift);

    // Expand T_d(scale * x + shift) into monomials of x by Horner's scheme
    // over polynomials.
    let t = chebyshev_monomial(degree);
    let mut composed = vec![0.0; degree + 1];
    for &c in t.iter().rev() {
        let mut next = vec![0.0; degree + 1];
        for (i, a) in composed.iter().enumerate() {
            next[i] += a * shift;
            if i < degree {
                next[i + 1] += a * scale;
            }
        }
        next[0] += c;
        composed = next;
    }
    let mut coeffs: Vec<f64> = composed.iter().map(|c| -c / denom).collect();
    coeffs[0] = 0.0;

    let poly = OrPolynomial {
        k,
        gamma,
        degree,
        scale,
        shift,
        denom,
        coeffs,
    };
    let dev = poly.max_deviation();
    if dev > gamma {
        return Err(LdpError::Estimation(format!(
            "OR-polynomial misses its target: deviation {dev} > gamma {gamma}"
        )));
    }
    Ok(poly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn k_two_worked_example() {
        let p = build_or_polynomial(2, 0.05).unwrap();
        assert_eq!(p.degree(), 3);
        let expected = [0.0, 210.0 / 99.0, -144.0 / 99.0, 32.0 / 99.0];
        for (a, b) in p.coefficients().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn k_one() {
        let p = build_or_polynomial(1, 0.01).unwrap();
        assert_eq!(p.eval(0.0), 0.0);
        assert!((p.eval(1.0) - 1.0).abs() <= 0.01);
        assert!((p.eval_monomial(1.0) - 1.0).abs() <= 0.01);
    }

    #[test]
    fn k_four_degree() {
        let p = build_or_polynomial(4, 0.05).unwrap();
        assert_eq!(p.degree(), 4);
        assert!(p.degree() <= 9);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(build_or_polynomial(0, 0.1).is_err());
        assert!(build_or_polynomial(3, 1.0).is_err());
        assert!(build_or_polynomial(3, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn definition_holds(k in 1usize..=12, gamma in 0.005f64..0.5) {
            let p = build_or_polynomial(k, gamma).unwrap();
            prop_assert_eq!(p.coefficients()[0], 0.0);
            prop_assert!(p.eval_monomial(0.0).abs() <= 1e-12);
            for j in 1..=k {
                prop_assert!((p.eval(j as f64) - 1.0).abs() <= gamma);
                let mono = p.eval_monomial(j as f64);
                prop_assert!((mono - p.eval(j as f64)).abs() <= 1e-8 * p.max_abs_coefficient().max(1.0));
            }
        }
    }
}
