//! Stochastic intermediate gradient method over a Euclidean ball.
//!
//! The prox-function is `d(x) = |x|^2 / 2`, so each argmin subproblem is the
//! projection of an explicit point onto the ball. Only gradients are consumed
//! from the oracle.

use std::io::Write;

use serde::Serialize;

use crate::error::{LdpError, Result};

/// `(γ, β, σ)`: bias, smoothness and gradient-noise level of an inexact oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleContract {
    pub gamma: f64,
    pub beta_smooth: f64,
    pub sigma: f64,
}

impl OracleContract {
    pub fn new(gamma: f64, beta_smooth: f64, sigma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(LdpError::param(format!(
                "oracle bias must be finite and >= 0, got {gamma}"
            )));
        }
        if !(beta_smooth > 0.0) || !beta_smooth.is_finite() {
            return Err(LdpError::param(format!(
                "oracle smoothness must be positive, got {beta_smooth}"
            )));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(LdpError::param(format!(
                "oracle noise must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(Self {
            gamma,
            beta_smooth,
            sigma,
        })
    }
}

/// Step-size sequences
/// `α_i = (1/a)((i+p)/p)^{p-1}`,
/// `β_i = β + (bσ/R)(i+p+1)^{(2p-1)/2}`,
/// `B_i = a α_i^2`, `A_k = Σ_{i≤k} α_i`, `η_i = α_{i+1}/B_{i+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmSchedule {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub beta: f64,
    pub sigma: f64,
    pub radius: f64,
}

impl SigmSchedule {
    pub fn new(a: f64, b: f64, p: f64, contract: OracleContract, radius: f64) -> Result<Self> {
        if !(a >= 1.0) || !(b >= 0.0) || !(p >= 1.0) {
            return Err(LdpError::param(format!(
                "schedule needs a >= 1, b >= 0, p >= 1 (a={a}, b={b}, p={p})"
            )));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(LdpError::param(format!(
                "radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            a,
            b,
            p,
            beta: contract.beta_smooth,
            sigma: contract.sigma,
            radius,
        })
    }

    /// The tuned constants `a = 2^{(p-1)/2}`, `b = 2^{(5-2p)/4} p^{(1-2p)/2}`.
    pub fn tuned(p: f64, contract: OracleContract, radius: f64) -> Result<Self> {
        let a = 2f64.powf((p - 1.0) / 2.0);
        let b = 2f64.powf((5.0 - 2.0 * p) / 4.0) * p.powf((1.0 - 2.0 * p) / 2.0);
        Self::new(a, b, p, contract, radius)
    }

    pub fn alpha(&self, i: usize) -> f64 {
        ((i as f64 + self.p) / self.p).powf(self.p - 1.0) / self.a
    }

    pub fn beta_at(&self, i: usize) -> f64 {
        self.beta
            + (self.b * self.sigma / self.radius)
                * (i as f64 + self.p + 1.0).powf((2.0 * self.p - 1.0) / 2.0)
    }

    pub fn big_b(&self, i: usize) -> f64 {
        self.a * self.alpha(i).powi(2)
    }

    /// `A_k`, summed directly.
    pub fn big_a(&self, k: usize) -> f64 {
        (0..=k).map(|i| self.alpha(i)).sum()
    }

    pub fn eta(&self, i: usize) -> f64 {
        self.alpha(i + 1) / self.big_b(i + 1)
    }
}

/// Euclidean ball centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ball {
    pub radius: f64,
}

impl Ball {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(LdpError::param(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self { radius })
    }

    pub fn project(&self, x: &mut [f64]) {
        let norm = norm(x);
        if norm > self.radius {
            let s = self.radius / norm;
            x.iter_mut().for_each(|v| *v *= s);
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A stochastic first-order oracle.
pub trait GradientOracle {
    fn gradient(&mut self, w: &[f64]) -> Result<Vec<f64>>;
}

impl<F> GradientOracle for F
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    fn gradient(&mut self, w: &[f64]) -> Result<Vec<f64>> {
        self(w)
    }
}

/// Iterates visible to an observer after each step.
#[derive(Debug, Clone, Copy)]
pub struct SigmStep<'a> {
    pub iter: usize,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub z: &'a [f64],
    /// `|y_{k+1} - y_k|`.
    pub step_norm: f64,
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

fn mix(a: &[f64], wa: f64, b: &[f64], wb: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
}

/// Runs `t` iterations and returns `y_T`.
pub fn sigm_run<O: GradientOracle>(
    oracle: &mut O,
    dim: usize,
    ball: &Ball,
    schedule: &SigmSchedule,
    t: usize,
) -> Result<Vec<f64>> {
    sigm_run_observed(oracle, dim, ball, schedule, t, |_| {})
}

/// As [`sigm_run`], calling `observe` after every iteration.
pub fn sigm_run_observed<O, F>(
    oracle: &mut O,
    dim: usize,
    ball: &Ball,
    schedule: &SigmSchedule,
    t: usize,
    mut observe: F,
) -> Result<Vec<f64>>
where
    O: GradientOracle,
    F: FnMut(SigmStep<'_>),
{
    if dim == 0 {
        return Err(LdpError::param("dimension must be positive"));
    }
    if t == 0 {
        return Err(LdpError::param("need at least one iteration"));
    }
    let check = |g: &Vec<f64>| -> Result<()> {
        if g.len() != dim || g.iter().any(|v| !v.is_finite()) {
            return Err(LdpError::Estimation(format!(
                "oracle returned a malformed gradient (len {}, expected {dim})",
                g.len()
            )));
        }
        Ok(())
    };

    let x0 = vec![0.0; dim];
    let g0 = oracle.gradient(&x0)?;
    check(&g0)?;
    let alpha0 = schedule.alpha(0);
    let mut sum_g = scaled(&g0, alpha0);
    let mut y = scaled(&g0, -alpha0 / schedule.beta_at(0));
    ball.project(&mut y);
    let mut big_a = alpha0;

    for k in 0..t {
        let beta_k = schedule.beta_at(k);
        let eta = schedule.eta(k);
        let mut z = scaled(&sum_g, -1.0 / beta_k);
        ball.project(&mut z);

        let x = mix(&z, eta, &y, 1.0 - eta);
        let g = oracle.gradient(&x)?;
        check(&g)?;
        let alpha_next = schedule.alpha(k + 1);

        let mut x_hat: Vec<f64> = z
            .iter()
            .zip(&g)
            .map(|(zi, gi)| zi - alpha_next * gi / beta_k)
            .collect();
        ball.project(&mut x_hat);
        let w = mix(&x_hat, eta, &y, 1.0 - eta);

        big_a += alpha_next;
        let b_next = schedule.big_b(k + 1);
        let mut y_next = mix(&y, (big_a - b_next) / big_a, &w, b_next / big_a);
        ball.project(&mut y_next);
        let step_norm = norm(&mix(&y_next, 1.0, &y, -1.0));
        y = y_next;

        for (s, gi) in sum_g.iter_mut().zip(&g) {
            *s += alpha_next * gi;
        }
        observe(SigmStep {
            iter: k + 1,
            x: &x,
            y: &y,
            z: &z,
            step_norm,
        });
    }
    Ok(y)
}

/// One row of the optional trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective_estimate: f64,
    pub step_norms: f64,
}

/// Writes `iter,objective_estimate,step_norms`.
pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
