//! Non-private reference optima for the excess-risk columns.
//!
//! Projected subgradient descent with suffix averaging, plus a dense grid
//! scan when the dimension is at most 2. The reported value is the smaller
//! of the two, so it only ever over-estimates the true minimum; the
//! documented tolerance is [`BASELINE_TOL`].

use serde::Serialize;

use crate::data::{BallDataset, Records};
use crate::error::{LdpError, Result};
use crate::glm::{empirical_risk, ScalarLoss};
use crate::par::sum_vectors;

use super::config::CubeLossKind;

pub const BASELINE_ITERS: usize = 10_000;
pub const BASELINE_TOL: f64 = 1e-3;

/// Feasible set of the reference problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feasible {
    UnitCube { dim: usize },
    Ball { dim: usize, radius: f64 },
}

impl Feasible {
    pub fn dim(&self) -> usize {
        match *self {
            Feasible::UnitCube { dim } | Feasible::Ball { dim, .. } => dim,
        }
    }

    pub fn project(&self, w: &mut [f64]) {
        match *self {
            Feasible::UnitCube { .. } => w.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0)),
            Feasible::Ball { radius, .. } => {
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > radius {
                    w.iter_mut().for_each(|v| *v *= radius / norm);
                }
            }
        }
    }

    fn contains(&self, w: &[f64]) -> bool {
        match *self {
            Feasible::UnitCube { .. } => w.iter().all(|x| (0.0..=1.0).contains(x)),
            Feasible::Ball { radius, .. } => {
                w.iter().map(|v| v * v).sum::<f64>() <= radius * radius + 1e-12
            }
        }
    }

    fn center(&self) -> Vec<f64> {
        match *self {
            Feasible::UnitCube { dim } => vec![0.5; dim],
            Feasible::Ball { dim, .. } => vec![0.0; dim],
        }
    }

    fn diameter(&self) -> f64 {
        match *self {
            Feasible::UnitCube { dim } => (dim as f64).sqrt(),
            Feasible::Ball { radius, .. } => 2.0 * radius,
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match *self {
            Feasible::UnitCube { .. } => (0.0, 1.0),
            Feasible::Ball { radius, .. } => (-radius, radius),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineResult {
    pub w: Vec<f64>,
    pub value: f64,
    /// Value found by subgradient descent alone.
    pub subgradient_value: f64,
    /// Value found by the grid scan (dimension <= 2 only).
    pub grid_value: Option<f64>,
}

/// Projected subgradient descent with steps `D / (L sqrt(t+1))`, returning
/// the better of the last iterate and the average of the second half.
pub fn projected_subgradient<V, S>(
    value: V,
    subgradient: S,
    region: &Feasible,
    lipschitz: f64,
    iters: usize,
) -> (Vec<f64>, f64)
where
    V: Fn(&[f64]) -> f64,
    S: Fn(&[f64]) -> Vec<f64>,
{
    let dim = region.dim();
    let scale = region.diameter() / lipschitz.max(1e-12);
    let mut w = region.center();
    let mut avg = vec![0.0; dim];
    let mut counted = 0usize;
    for t in 0..iters {
        let g = subgradient(&w);
        let step = scale / ((t + 1) as f64).sqrt();
        w.iter_mut().zip(&g).for_each(|(x, gi)| *x -= step * gi);
        region.project(&mut w);
        if 2 * t >= iters {
            avg.iter_mut().zip(&w).for_each(|(a, x)| *a += x);
            counted += 1;
        }
    }
    if counted > 0 {
        avg.iter_mut().for_each(|a| *a /= counted as f64);
        region.project(&mut avg);
    } else {
        avg = w.clone();
    }
    let (va, vw) = (value(&avg), value(&w));
    if va <= vw {
        (avg, va)
    } else {
        (w, vw)
    }
}

/// Exhaustive scan with `points_per_axis` points per axis, `dim <= 2`.
pub fn dense_grid_scan<V>(
    value: V,
    region: &Feasible,
    points_per_axis: usize,
) -> Result<(Vec<f64>, f64)>
where
    V: Fn(&[f64]) -> f64,
{
    let dim = region.dim();
    if dim > 2 || points_per_axis < 2 {
        return Err(LdpError::param(
            "grid scan needs dimension <= 2 and >= 2 points per axis",
        ));
    }
    let (lo, hi) = region.bounds();
    let at = |i: usize| lo + (hi - lo) * i as f64 / (points_per_axis - 1) as f64;
    let mut best = (Vec::new(), f64::INFINITY);
    let total = points_per_axis.pow(dim as u32);
    for idx in 0..total {
        let w: Vec<f64> = if dim == 1 {
            vec![at(idx)]
        } else {
            vec![at(idx / points_per_axis), at(idx % points_per_axis)]
        };
        if !region.contains(&w) {
            continue;
        }
        let v = value(&w);
        if v < best.1 {
            best = (w, v);
        }
    }
    Ok(best)
}

/// Subgradient descent plus the grid scan when `dim <= 2`.
pub fn baseline_solve<V, S>(
    value: V,
    subgradient: S,
    region: &Feasible,
    lipschitz: f64,
) -> Result<BaselineResult>
where
    V: Fn(&[f64]) -> f64,
    S: Fn(&[f64]) -> Vec<f64>,
{
    let (w, v) = projected_subgradient(&value, subgradient, region, lipschitz, BASELINE_ITERS);
    let grid = match region.dim() {
        1 => Some(dense_grid_scan(&value, region, 2001)?),
        2 => Some(dense_grid_scan(&value, region, 201)?),
        _ => None,
    };
    let grid_value = grid.as_ref().map(|g| g.1);
    Ok(match grid {
        Some((gw, gv)) if gv < v => BaselineResult {
            w: gw,
            value: gv,
            subgradient_value: v,
            grid_value,
        },
        _ => BaselineResult {
            w,
            value: v,
            subgradient_value: v,
            grid_value,
        },
    })
}

/// Reference optimum of `(1/n) Σ f(y_i <w, x_i>)` over the ball of `radius`.
pub fn glm_baseline(data: &BallDataset, loss: ScalarLoss, radius: f64) -> Result<BaselineResult> {
    let dim = data.dim();
    let n = data.len();
    let subgradient = |w: &[f64]| {
        let s = sum_vectors(n, dim, |r, acc| {
            for i in r {
                let x = data.x(i);
                let y = data.y(i);
                let m: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
                let c = loss.deriv(y * m) * y;
                acc.iter_mut().zip(x).for_each(|(a, xi)| *a += c * xi);
            }
        });
        s.into_iter().map(|v| v / n as f64).collect::<Vec<f64>>()
    };
    let lipschitz = match loss {
        ScalarLoss::HalfSquare => radius.max(1.0),
        _ => 1.0,
    };
    baseline_solve(
        |w| empirical_risk(data, loss, w),
        subgradient,
        &Feasible::Ball { dim, radius },
        lipschitz,
    )
}

/// Reference optimum of a cube loss over `[0,1]^p`.
pub fn cube_baseline(records: &Records, loss: CubeLossKind) -> Result<BaselineResult> {
    let dim = records.dim();
    let n = records.len();
    let value = |w: &[f64]| {
        sum_vectors(n, 1, |r, acc| {
            for i in r {
                acc[0] += loss.value(w, records.row(i));
            }
        })[0]
            / n as f64
    };
    let subgradient = |w: &[f64]| {
        let s = sum_vectors(n, dim, |r, acc| {
            for i in r {
                acc.iter_mut()
                    .zip(loss.subgradient(w, records.row(i)))
                    .for_each(|(a, g)| *a += g);
            }
        });
        s.into_iter().map(|v| v / n as f64).collect::<Vec<f64>>()
    };
    let lipschitz = match loss {
        CubeLossKind::Quadratic => 2.0 / (dim as f64).sqrt(),
        CubeLossKind::Absolute => 1.0 / (dim as f64).sqrt(),
    };
    baseline_solve(value, subgradient, &Feasible::UnitCube { dim }, lipschitz)
}
