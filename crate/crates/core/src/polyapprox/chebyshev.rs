//! Chebyshev polynomials of the first kind and truncated Chebyshev series.

use std::f64::consts::PI;

/// `T_n(x)` by the three-term recursion. Valid for every real `x`; outside
/// `[-1, 1]` it follows the `cosh` growth branch.
pub fn chebyshev_eval(n: usize, x: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for _ in 1..n {
                let next = 2.0 * x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Monomial coefficients of `T_n`, lowest degree first.
pub fn chebyshev_monomial(n: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for _ in 1..n {
        let mut next = vec![0.0; cur.len() + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += 2.0 * c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Truncated series `sum_k a_k T_k(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevSeries {
    coeffs: Vec<f64>,
}

impl ChebyshevSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// Fits a degree-`n` series by cosine quadrature at the `n + 1`
    /// Chebyshev extrema `cos(pi j / n)`. The rule is exact when `f` is a
    /// polynomial of degree at most `n`.
    pub fn fit<F: Fn(f64) -> f64>(f: F, n: usize) -> Self {
        if n == 0 {
            return Self {
                coeffs: vec![f(0.0)],
            };
        }
        let nf = n as f64;
        let samples: Vec<f64> = (0..=n).map(|j| f((PI * j as f64 / nf).cos())).collect();
        let coeffs = (0..=n)
            .map(|k| {
                let s: f64 = samples
                    .iter()
                    .enumerate()
                    .map(|(j, fj)| {
                        let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                        w * fj * (PI * (j * k) as f64 / nf).cos()
                    })
                    .sum();
                let a = 2.0 * s / nf;
                if k == 0 || k == n {
                    a / 2.0
                } else {
                    a
                }
            })
            .collect();
        Self { coeffs }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Clenshaw summation.
    pub fn eval(&self, x: f64) -> f64 {
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &a in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * x * b1 - b2 + a;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs.first().copied().unwrap_or(0.0) + x * b1 - b2
    }
}
