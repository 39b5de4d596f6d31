//! Bernstein bases, the iterated operator `I - (I - B_k)^h`, and its
//! multivariate tensor form over the grid `{0, 1/k, ..., 1}^p`.

use crate::error::{LdpError, Result};

/// `C(n, k)` as a float, exact for every `n` used here (n ≤ 60).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k)
        .fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        .round()
}

/// `b_{v,k}(x) = C(k,v) x^v (1-x)^{k-v}`.
pub fn bernstein_basis(v: usize, k: usize, x: f64) -> Result<f64> {
    if v > k {
        return Err(LdpError::param(format!(
            "basis index {v} exceeds degree {k}"
        )));
    }
    Ok(basis_unchecked(v, k, x))
}

#[inline]
fn basis_unchecked(v: usize, k: usize, x: f64) -> f64 {
    binomial(k, v) * x.powi(v as i32) * (1.0 - x).powi((k - v) as i32)
}

/// All `k + 1` basis values at `x`, via the de Casteljau-style recursion
/// (stable and `O(k^2)`).
pub fn basis_row(k: usize, x: f64) -> Vec<f64> {
    let mut row = vec![0.0; k + 1];
    row[0] = 1.0;
    let y = 1.0 - x;
    for deg in 1..=k {
        for v in (0..=deg).rev() {
            let from_left = if v > 0 { row[v - 1] * x } else { 0.0 };
            let from_same = if v < deg { row[v] * y } else { 0.0 };
            row[v] = from_left + from_same;
        }
    }
    row
}

/// Derivatives `d/dx b_{v,k}(x) = k (b_{v-1,k-1}(x) - b_{v,k-1}(x))`.
pub fn basis_row_deriv(k: usize, x: f64) -> Vec<f64> {
    if k == 0 {
        return vec![0.0];
    }
    let lower = basis_row(k - 1, x);
    let kf = k as f64;
    (0..=k)
        .map(|v| {
            let a = if v > 0 { lower[v - 1] } else { 0.0 };
            let b = if v < k { lower[v] } else { 0.0 };
            kf * (a - b)
        })
        .collect()
}

/// Plain Bernstein polynomial `B_k(f; x)` of a univariate callable.
pub fn bernstein_eval_fn<F: Fn(f64) -> f64>(f: F, k: usize, x: f64) -> f64 {
    basis_row(k, x)
        .iter()
        .enumerate()
        .map(|(v, b)| f(v as f64 / k as f64) * b)
        .sum()
}

/// Degree, order and dimension of a multivariate iterated Bernstein operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BernsteinOperatorSpec {
    pub k: usize,
    pub h: usize,
    pub p: usize,
}

impl BernsteinOperatorSpec {
    pub fn new(k: usize, h: usize, p: usize) -> Result<Self> {
        if k == 0 || h == 0 || p == 0 {
            return Err(LdpError::param(format!(
                "operator needs k, h, p >= 1 (got k={k}, h={h}, p={p})"
            )));
        }
        Ok(Self { k, h, p })
    }

    /// `(k+1)^p`, or a configuration error if it overflows or exceeds `cap`.
    pub fn grid_len(&self, cap: usize) -> Result<usize> {
        let len = (self.k + 1)
            .checked_pow(self.p as u32)
            .filter(|&n| n <= cap)
            .ok_or_else(|| {
                LdpError::config(format!(
                    "grid (k+1)^p with k={}, p={} exceeds the cap of {cap} points; lower k or p",
                    self.k, self.p
                ))
            })?;
        Ok(len)
    }
}

/// Function values on the grid `{v/k}^p`, stored in lexicographic order of
/// the multi-index with the first coordinate most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct GridValues {
    k: usize,
    p: usize,
    values: Vec<f64>,
}

impl GridValues {
    pub fn new(k: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        let expected = (k + 1)
            .checked_pow(p as u32)
            .ok_or_else(|| LdpError::param("grid size overflows"))?;
        if k == 0 || p == 0 {
            return Err(LdpError::param("grid needs k >= 1 and p >= 1"));
        }
        if values.len() != expected {
            return Err(LdpError::param(format!(
                "grid needs {expected} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LdpError::param("grid values must be finite"));
        }
        Ok(Self { k, p, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn<F: FnMut(&[f64]) -> f64>(k: usize, p: usize, mut f: F) -> Result<Self> {
        let points = GridIter::new(k, p);
        let values = points.map(|pt| f(&pt)).collect();
        Self::new(k, p, values)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Iterates grid points `v/k` in lexicographic order.
#[derive(Debug, Clone)]
pub struct GridIter {
    k: usize,
    idx: Vec<usize>,
    done: bool,
}

impl GridIter {
    pub fn new(k: usize, p: usize) -> Self {
        Self {
            k,
            idx: vec![0; p],
            done: p == 0,
        }
    }
}

impl Iterator for GridIter {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.done {
            return None;
        }
        let point = self.idx.iter().map(|&v| v as f64 / self.k as f64).collect();
        let mut axis = self.idx.len();
        loop {
            if axis == 0 {
                self.done = true;
                break;
            }
            axis -= 1;
            if self.idx[axis] < self.k {
                self.idx[axis] += 1;
                break;
            }
            self.idx[axis] = 0;
        }
        Some(point)
    }
}

/// Univariate iterated operator, precomputed as a `(k+1) x (k+1)` mixing
/// matrix `W` so that `B^{(h)}(f; x) = beta(x)^T W f`.
///
/// With `M[u][v] = b_{v,k}(u/k)`, composing the operator `i` times gives
/// `beta^T M^{i-1} f`, hence `W = sum_{i=1}^h C(h,i) (-1)^{i-1} M^{i-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IteratedOperator {
    k: usize,
    h: usize,
    mix: Vec<f64>,
}

impl IteratedOperator {
    pub fn new(k: usize, h: usize) -> Result<Self> {
        BernsteinOperatorSpec::new(k, h, 1)?;
        let n = k + 1;
        let mut m = vec![0.0; n * n];
        for u in 0..n {
            let row = basis_row(k, u as f64 / k as f64);
            m[u * n..(u + 1) * n].copy_from_slice(&row);
        }
        let mut power = identity(n);
        let mut mix = vec![0.0; n * n];
        for i in 1..=h {
            let coef = binomial(h, i) * if i % 2 == 1 { 1.0 } else { -1.0 };
            for (acc, p) in mix.iter_mut().zip(&power) {
                *acc += coef * p;
            }
            if i < h {
                power = matmul(&power, &m, n);
            }
        }
        Ok(Self { k, h, mix })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn h(&self) -> usize {
        self.h
    }

    /// Weights `w_v(x)` with `B^{(h)}(f; x) = sum_v f(v/k) w_v(x)`.
    pub fn weights(&self, x: f64) -> Vec<f64> {
        let n = self.k + 1;
        let beta = basis_row(self.k, x);
        let mut w = vec![0.0; n];
        for (u, bu) in beta.iter().enumerate() {
            for (v, wv) in w.iter_mut().enumerate() {
                *wv += bu * self.mix[u * n + v];
            }
        }
        w
    }

    /// `W f`: coefficients of the plain Bernstein form equal to `B^{(h)}(f)`.
    pub fn transform(&self, f: &[f64]) -> Vec<f64> {
        let n = self.k + 1;
        (0..n)
            .map(|u| (0..n).map(|v| self.mix[u * n + v] * f[v]).sum())
            .collect()
    }

    /// Evaluates `B^{(h)}(f; x)` for a univariate callable.
    pub fn eval_fn<F: Fn(f64) -> f64>(&self, f: F, x: f64) -> f64 {
        self.weights(x)
            .iter()
            .enumerate()
            .map(|(v, w)| f(v as f64 / self.k as f64) * w)
            .sum()
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for l in 0..n {
            let ail = a[i * n + l];
            if ail == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += ail * b[l * n + j];
            }
        }
    }
    c
}

fn check_point(y: &[f64], p: usize) -> Result<()> {
    if y.len() != p {
        return Err(LdpError::param(format!(
            "point has {} coordinates, expected {p}",
            y.len()
        )));
    }
    if y.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(LdpError::param(
            "evaluation point lies outside the unit cube",
        ));
    }
    Ok(())
}

/// Applies a square `(k+1) x (k+1)` matrix along one axis of a tensor.
fn apply_along_axis(data: &mut [f64], n: usize, p: usize, axis: usize, op: &IteratedOperator) {
    let stride = n.pow((p - 1 - axis) as u32);
    let block = stride * n;
    let mut fiber = vec![0.0; n];
    for start in (0..data.len()).step_by(block) {
        for offset in 0..stride {
            for (v, f) in fiber.iter_mut().enumerate() {
                *f = data[start + offset + v * stride];
            }
            let out = op.transform(&fiber);
            for (u, o) in out.into_iter().enumerate() {
                data[start + offset + u * stride] = o;
            }
        }
    }
}

/// Contracts the tensor with one row vector per axis, first axis outermost.
fn contract(data: &[f64], n: usize, rows: &[Vec<f64>]) -> f64 {
    let mut current = data.to_vec();
    for row in rows.iter().rev() {
        current = current
            .chunks_exact(n)
            .map(|c| c.iter().zip(row).map(|(a, b)| a * b).sum())
            .collect();
    }
    current[0]
}

/// The multivariate iterated Bernstein polynomial of some grid values,
/// stored as transformed coefficients `c = (W ⊗ ... ⊗ W) g` so that
/// evaluation and differentiation are plain Bernstein tensor contractions.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinSurface {
    spec: BernsteinOperatorSpec,
    coeffs: Vec<f64>,
}

impl BernsteinSurface {
    pub fn new(grid: &GridValues, h: usize) -> Result<Self> {
        let spec = BernsteinOperatorSpec::new(grid.k(), h, grid.p())?;
        let op = IteratedOperator::new(spec.k, h)?;
        let mut coeffs = grid.values().to_vec();
        if h > 1 {
            for axis in 0..spec.p {
                apply_along_axis(&mut coeffs, spec.k + 1, spec.p, axis, &op);
            }
        }
        Ok(Self { spec, coeffs })
    }

    pub fn spec(&self) -> BernsteinOperatorSpec {
        self.spec
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        check_point(y, self.spec.p)?;
        Ok(self.eval_unchecked(y))
    }

    pub(crate) fn eval_unchecked(&self, y: &[f64]) -> f64 {
        let rows: Vec<_> = y.iter().map(|&c| basis_row(self.spec.k, c)).collect();
        contract(&self.coeffs, self.spec.k + 1, &rows)
    }

    /// Gradient with respect to `y`.
    pub fn gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_point(y, self.spec.p)?;
        Ok(self.value_and_gradient_unchecked(y).1)
    }

    pub(crate) fn value_and_gradient_unchecked(&self, y: &[f64]) -> (f64, Vec<f64>) {
        let k = self.spec.k;
        let rows: Vec<_> = y.iter().map(|&c| basis_row(k, c)).collect();
        let drows: Vec<_> = y.iter().map(|&c| basis_row_deriv(k, c)).collect();
        let value = contract(&self.coeffs, k + 1, &rows);
        let grad = (0..self.spec.p)
            .map(|j| {
                let mut mixed = rows.clone();
                mixed[j] = drows[j].clone();
                contract(&self.coeffs, k + 1, &mixed)
            })
            .collect();
        (value, grad)
    }
}

/// `B^{(h)}_k(f; y)` for grid values.
pub fn iterated_bernstein_eval(values: &GridValues, h: usize, y: &[f64]) -> Result<f64> {
    BernsteinSurface::new(values, h)?.eval(y)
}

/// `B^{(h)}_k(f; y)` for a callable, sampled on the grid first.
pub fn iterated_bernstein_eval_fn<F: FnMut(&[f64]) -> f64>(
    f: F,
    spec: BernsteinOperatorSpec,
    y: &[f64],
) -> Result<f64> {
    let grid = GridValues::from_fn(spec.k, spec.p, f)?;
    iterated_bernstein_eval(&grid, spec.h, y)
}

/// Tensor-product weights `w_v(y)`, one per grid point in lexicographic order.
pub fn iterated_basis_weights(spec: BernsteinOperatorSpec, y: &[f64]) -> Result<Vec<f64>> {
    check_point(y, spec.p)?;
    let op = IteratedOperator::new(spec.k, spec.h)?;
    let axes: Vec<_> = y.iter().map(|&c| op.weights(c)).collect();
    let mut out = vec![1.0];
    for axis in &axes {
        out = out
            .iter()
            .flat_map(|a| axis.iter().map(move |b| a * b))
            .collect();
    }
    Ok(out)
}
