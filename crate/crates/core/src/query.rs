//! Non-interactive release of query families.
//!
//! Two mechanisms share one shape: every player evaluates a fixed basis at
//! their record, the vector averaging protocol privatizes the basis average
//! once, and the server answers any number of queries from that table by
//! linear algebra alone.
//!
//! * Monotone disjunctions (`k`-way marginals) on `{0,1}^p`: the basis is the
//!   set of monomials of `y -> p_k(<y, x>)` for the OR-polynomial `p_k`.
//! * Smooth queries on `[-1,1]^p`: the basis is the tensor Chebyshev family
//!   `prod_j T_{v_j}(x_j) = prod_j cos(v_j arccos x_j)`.

use std::collections::HashMap;
use std::io::{Read, Write};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::{BinaryDataset, BoxDataset};
use crate::error::{LdpError, Result};
use crate::par::sum_vectors;
use crate::polyapprox::{build_or_polynomial, chebyshev_eval, OrPolynomial};
use crate::primitives::{
    vec_avg_warning, BudgetAccount, Privacy, TranscriptSummary, VectorAvgProtocol,
};
use crate::rng::{tag, SeedStream};

/// Largest coefficient table a release may allocate.
pub const DEFAULT_TABLE_CAP: usize = 1 << 20;

/// Failure probability used for the sample-size warnings.
const WARN_BETA: f64 = 0.05;

// ---------------------------------------------------------------------------
// Private basis averaging

struct Averaged {
    mean: Vec<f64>,
    warning: Option<String>,
}

/// Averages `value(i, j)` over players `i` for every coordinate `j`, through
/// the vector protocol when private. Values must lie in `[0, bound]`.
fn private_average<F>(
    n: usize,
    dim: usize,
    bound: f64,
    privacy: &Privacy,
    seeds: &SeedStream,
    value: F,
) -> Result<Averaged>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    if n == 0 {
        return Err(LdpError::param("release needs at least one player"));
    }
    match privacy {
        Privacy::Disabled => {
            let sums = sum_vectors(n, dim, |range, acc| {
                for i in range {
                    for (j, a) in acc.iter_mut().enumerate() {
                        *a += value(i, j);
                    }
                }
            });
            Ok(Averaged {
                mean: sums.iter().map(|s| s / n as f64).collect(),
                warning: None,
            })
        }
        Privacy::Private(budget) => {
            let protocol = VectorAvgProtocol::new(dim, bound, budget)?;
            let players = seeds.streams(tag::PLAYER);
            // First half: sums; second half: report counts.
            let acc = sum_vectors(n, 2 * dim, |range, acc| {
                for i in range {
                    let mut rng = players.rng(i as u64);
                    let m = protocol.player_message(|j| value(i, j), &mut rng);
                    acc[m.index] += m.value;
                    acc[dim + m.index] += 1.0;
                }
            });
            let (sums, counts) = acc.split_at(dim);
            if let Some(j) = counts.iter().position(|&c| c == 0.0) {
                return Err(LdpError::Estimation(format!(
                    "no player reported coordinate {j} (n = {n}, dim = {dim})"
                )));
            }
            let mean = sums.iter().zip(counts).map(|(s, c)| s / c).collect();
            Ok(Averaged {
                mean,
                warning: vec_avg_warning(n, dim, WARN_BETA),
            })
        }
    }
}

fn budget_of(privacy: &Privacy) -> BudgetAccount {
    match privacy {
        Privacy::Private(b) => BudgetAccount::uniform(b.epsilon, b.epsilon, 1),
        Privacy::Disabled => BudgetAccount::none(),
    }
}

// ---------------------------------------------------------------------------
// Monomials

fn binom_u128(n: u64, k: u64) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| {
        acc.saturating_mul((n - i) as u128) / (i as u128 + 1)
    })
}

/// `C(p + t, t)`, the number of `p`-variate monomials of total degree `<= t`.
pub fn monomial_count(p: usize, t: usize) -> u128 {
    binom_u128((p + t) as u64, t as u64)
}

/// Exponent vectors of total degree `<= t` in graded order: by degree, then
/// lexicographically with larger exponents on earlier variables first.
pub fn monomials(p: usize, t: usize, cap: usize) -> Result<Vec<Vec<u32>>> {
    if p == 0 {
        return Err(LdpError::param("dimension must be positive"));
    }
    let count = monomial_count(p, t);
    if count > cap as u128 {
        return Err(LdpError::config(format!(
            "{count} monomials for p = {p}, degree {t} exceed the table cap {cap}"
        )));
    }
    fn fill(rest: u32, j: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if j + 1 == cur.len() {
            cur[j] = rest;
            out.push(cur.clone());
            return;
        }
        for e in (0..=rest).rev() {
            cur[j] = e;
            fill(rest - e, j + 1, cur, out);
        }
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut cur = vec![0u32; p];
    for d in 0..=t as u32 {
        fill(d, 0, &mut cur, &mut out);
    }
    Ok(out)
}

/// `|a|! / prod a_j!`.
pub fn multinomial(alpha: &[u32]) -> f64 {
    let mut total = 0u32;
    let mut acc = 1.0;
    for &a in alpha {
        for i in 1..=a {
            total += 1;
            acc *= total as f64 / i as f64;
        }
    }
    acc
}

fn monomial_value(alpha: &[u32], y: &[f64]) -> f64 {
    alpha
        .iter()
        .zip(y)
        .filter(|(a, _)| **a > 0)
        .map(|(&a, &v)| v.powi(a as i32))
        .product()
}

/// Coefficient of `y^alpha` in `q(<y, x>)` where `q = sum_d c_d u^d`.
fn composed_coefficient(alpha: &[u32], x: &[f64], coeffs: &[f64]) -> f64 {
    let d: u32 = alpha.iter().sum();
    match coeffs.get(d as usize) {
        Some(&c) if c != 0.0 => c * multinomial(alpha) * monomial_value(alpha, x),
        _ => 0.0,
    }
}

/// Expands `y -> q(<y, x>)` over `monos`, for a univariate `q` given by its
/// monomial coefficients (constant first).
pub fn expand_composed(x: &[f64], coeffs: &[f64], monos: &[Vec<u32>]) -> Vec<f64> {
    monos
        .iter()
        .map(|a| composed_coefficient(a, x, coeffs))
        .collect()
}

/// Evaluates the polynomial with coefficient vector `table` over `monos` at `y`.
pub fn eval_multinomial(table: &[f64], monos: &[Vec<u32>], y: &[f64]) -> f64 {
    table
        .iter()
        .zip(monos)
        .map(|(c, a)| c * monomial_value(a, y))
        .sum()
}

/// A player's coefficient vector of `y -> p_k(sum_j y_j x_j)`.
pub fn marginals_player_expand(row: &[u8], orpoly: &OrPolynomial, cap: usize) -> Result<Vec<f64>> {
    let monos = monomials(row.len(), orpoly.degree(), cap)?;
    let x: Vec<f64> = row.iter().map(|&b| b as f64).collect();
    Ok(expand_composed(&x, orpoly.coefficients(), &monos))
}

// ---------------------------------------------------------------------------
// Marginals

/// What each player privatizes in the marginals release.
///
/// Every coefficient of `y^alpha` in a player's polynomial equals a public
/// constant times the indicator that the record has all bits of
/// `supp(alpha)` set. `MonomialIndicators` privatizes those indicators (one
/// per nonempty support of size `<= t`, values in `[0, 1]`) and the server
/// multiplies the public constants back in. `Coefficients` privatizes the
/// raw coefficient vector, whose range grows with the largest coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginalEncoding {
    #[default]
    MonomialIndicators,
    Coefficients,
}

impl MarginalEncoding {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "monomial-indicators" | "indicators" => Ok(Self::MonomialIndicators),
            "coefficients" => Ok(Self::Coefficients),
            other => Err(LdpError::config(format!(
                "unknown marginal encoding '{other}'"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MonomialIndicators => "monomial-indicators",
            Self::Coefficients => "coefficients",
        }
    }
}

/// Nonempty subsets of `[p]` of size `<= t`, as bitmasks, by size then lexicographically.
fn supports(p: usize, t: usize, cap: usize) -> Result<Vec<u64>> {
    if p > 64 {
        return Err(LdpError::config(format!(
            "indicator encoding supports p <= 64, got {p}"
        )));
    }
    let count: u128 = (1..=t.min(p)).map(|s| binom_u128(p as u64, s as u64)).sum();
    if count > cap as u128 {
        return Err(LdpError::config(format!(
            "{count} supports exceed the table cap {cap}"
        )));
    }
    fn fill(start: usize, left: usize, p: usize, mask: u64, out: &mut Vec<u64>) {
        if left == 0 {
            out.push(mask);
            return;
        }
        for j in start..=p - left {
            fill(j + 1, left - 1, p, mask | (1u64 << j), out);
        }
    }
    let mut out = Vec::with_capacity(count as usize);
    for s in 1..=t.min(p) {
        fill(0, s, p, 0, &mut out);
    }
    Ok(out)
}

fn support_mask(alpha: &[u32]) -> u64 {
    alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0)
        .fold(0u64, |m, (j, _)| m | (1u64 << j))
}

fn row_mask(row: &[u8]) -> u64 {
    row.iter()
        .enumerate()
        .filter(|(_, &b)| b != 0)
        .fold(0u64, |m, (j, _)| m | (1u64 << j))
}

/// Largest `|c_{|alpha|} * multinomial(alpha)|` over the monomials.
fn max_public_constant(monos: &[Vec<u32>], coeffs: &[f64]) -> f64 {
    monos
        .iter()
        .map(|a| {
            let d: u32 = a.iter().sum();
            (coeffs[d as usize] * multinomial(a)).abs()
        })
        .fold(0.0, f64::max)
}

/// Private table for all disjunctions of at most `k` attributes.
#[derive(Debug, Clone, Serialize)]
pub struct MarginalCoefficientTable {
    pub p: usize,
    pub k: usize,
    /// Degree `t_k` of the OR-polynomial.
    pub degree: usize,
    pub gamma: f64,
    pub encoding: MarginalEncoding,
    /// Range `[0, bound]` handed to the averaging protocol.
    pub bound: f64,
    /// Largest absolute monomial coefficient of the construction.
    pub max_coefficient: f64,
    pub n: usize,
    /// One entry per monomial of degree `<= t_k`, in [`monomials`] order.
    pub coeffs: Vec<f64>,
    #[serde(skip)]
    monos: Vec<Vec<u32>>,
    pub transcript: TranscriptSummary,
    pub budget: BudgetAccount,
    pub warnings: Vec<String>,
}

/// Answer to one disjunction query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalAnswer {
    pub raw: f64,
    /// `raw` clamped to `[0, 1]`.
    pub clamped: f64,
}

impl MarginalCoefficientTable {
    pub fn monomials(&self) -> &[Vec<u32>] {
        &self.monos
    }

    /// Evaluates the private polynomial at `y`; rejects `|y| > k`.
    pub fn answer(&self, y: &[u8]) -> Result<MarginalAnswer> {
        if y.len() != self.p {
            return Err(LdpError::param(format!(
                "query has {} bits, expected {}",
                y.len(),
                self.p
            )));
        }
        if y.iter().any(|&b| b > 1) {
            return Err(LdpError::param("query entries must be bits"));
        }
        let weight = y.iter().filter(|&&b| b == 1).count();
        if weight > self.k {
            return Err(LdpError::QueryClass(format!(
                "query touches {weight} attributes but the release covers at most k = {}",
                self.k
            )));
        }
        let yf: Vec<f64> = y.iter().map(|&b| b as f64).collect();
        let raw = eval_multinomial(&self.coeffs, &self.monos, &yf);
        Ok(MarginalAnswer {
            raw,
            clamped: raw.clamp(0.0, 1.0),
        })
    }
}

/// Free-function form of [`MarginalCoefficientTable::answer`].
pub fn marginals_answer(table: &MarginalCoefficientTable, y: &[u8]) -> Result<MarginalAnswer> {
    table.answer(y)
}

/// Sample size from the shape `max{ L ln(1/β) / (ε² α²), ln(1/β) / ε², L ln(1/β) }`
/// with `L = p^{√k ln(1/α)}`, `α = 2γ` and every hidden constant set to 1.
pub fn marginals_sample_hint(p: usize, k: usize, gamma: f64, epsilon: f64, beta: f64) -> f64 {
    let alpha = (2.0 * gamma).min(0.999);
    let lb = (1.0 / beta).ln();
    let growth = (p as f64).powf((k as f64).sqrt() * (1.0 / alpha).ln());
    let a = growth * lb / (epsilon * epsilon * alpha * alpha);
    let b = lb / (epsilon * epsilon);
    a.max(b).max(growth * lb)
}

/// Releases the private marginal table. Warns (never fails) when `n` is
/// below [`marginals_sample_hint`].
pub fn marginals_release(
    data: &BinaryDataset,
    k: usize,
    gamma: f64,
    privacy: &Privacy,
    encoding: MarginalEncoding,
    seeds: &SeedStream,
    cap: usize,
) -> Result<MarginalCoefficientTable> {
    let p = data.p();
    if k > p {
        return Err(LdpError::param(format!(
            "k = {k} exceeds the dimension p = {p}"
        )));
    }
    let poly = build_or_polynomial(k, gamma)?;
    let t = poly.degree();
    let coeffs = poly.coefficients();
    let monos = monomials(p, t, cap)?;
    let n = data.len();
    let max_coefficient = max_public_constant(&monos, coeffs);

    let mut warnings = Vec::new();
    if let Some(eps) = privacy.epsilon() {
        let hint = marginals_sample_hint(p, k, gamma, eps, WARN_BETA);
        if (n as f64) < hint {
            warnings.push(format!(
                "n = {n} is below the marginal sample-size shape {hint:.0}"
            ));
        }
    }

    let (table, bound) = match encoding {
        MarginalEncoding::MonomialIndicators => {
            let masks = supports(p, t, cap)?;
            let rows: Vec<u64> = data.rows().map(row_mask).collect();
            let avg = private_average(n, masks.len(), 1.0, privacy, seeds, |i, j| {
                f64::from(u8::from(rows[i] & masks[j] == masks[j]))
            })?;
            warnings.extend(avg.warning);
            let index: HashMap<u64, usize> =
                masks.iter().enumerate().map(|(j, &m)| (m, j)).collect();
            let table = monos
                .iter()
                .map(|a| {
                    let d: u32 = a.iter().sum();
                    if d == 0 {
                        return coeffs[0];
                    }
                    coeffs[d as usize] * multinomial(a) * avg.mean[index[&support_mask(a)]]
                })
                .collect();
            (table, 1.0)
        }
        MarginalEncoding::Coefficients => {
            let b = max_coefficient.max(f64::MIN_POSITIVE);
            let avg = private_average(n, monos.len(), 2.0 * b, privacy, seeds, |i, j| {
                let x: Vec<f64> = data.row(i).iter().map(|&v| v as f64).collect();
                composed_coefficient(&monos[j], &x, coeffs) + b
            })?;
            warnings.extend(avg.warning);
            (avg.mean.iter().map(|m| m - b).collect(), 2.0 * b)
        }
    };
    for w in &warnings {
        warn!("{w}");
    }
    Ok(MarginalCoefficientTable {
        p,
        k,
        degree: t,
        gamma,
        encoding,
        bound,
        max_coefficient,
        n,
        coeffs: table,
        monos,
        transcript: TranscriptSummary::reals(n, 1),
        budget: budget_of(privacy),
        warnings,
    })
}

/// All `y` in `{0,1}^p` with `|y| <= k`, the zero query first, then by weight.
pub fn disjunction_queries(p: usize, k: usize) -> Result<Vec<Vec<u8>>> {
    let mut out = vec![vec![0u8; p]];
    for m in supports(p, k, DEFAULT_TABLE_CAP)? {
        out.push((0..p).map(|j| ((m >> j) & 1) as u8).collect());
    }
    Ok(out)
}

/// Exact fraction of rows with at least one bit of `y` set.
pub fn disjunction_truth(data: &BinaryDataset, y: &[u8]) -> f64 {
    let hits = data
        .rows()
        .filter(|r| r.iter().zip(y).any(|(&a, &b)| a == 1 && b == 1))
        .count();
    hits as f64 / data.len() as f64
}

// ---------------------------------------------------------------------------
// Smooth queries

fn tensor_len(p: usize, t: usize, cap: usize) -> Result<usize> {
    if p == 0 || t == 0 {
        return Err(LdpError::param("smooth basis needs p >= 1 and t >= 1"));
    }
    let len = (t as u128).checked_pow(p as u32).unwrap_or(u128::MAX);
    if len > cap as u128 {
        return Err(LdpError::config(format!(
            "t^p = {t}^{p} exceeds the table cap {cap}"
        )));
    }
    Ok(len as usize)
}

/// Multi-index of flat position `idx`, first axis most significant.
fn tensor_index(mut idx: usize, p: usize, t: usize) -> Vec<usize> {
    let mut v = vec![0; p];
    for slot in v.iter_mut().rev() {
        *slot = idx % t;
        idx /= t;
    }
    v
}

fn basis_value(idx: usize, x: &[f64], t: usize) -> f64 {
    tensor_index(idx, x.len(), t)
        .iter()
        .zip(x)
        .map(|(&v, &xj)| chebyshev_eval(v, xj))
        .product()
}

/// `prod_j T_{v_j}(x_j)` for every `v` in `{0..t-1}^p`, flat index
/// `sum_j v_j t^{p-1-j}`.
pub fn smooth_player_basis(row: &[f64], t: usize, cap: usize) -> Result<Vec<f64>> {
    let len = tensor_len(row.len(), t, cap)?;
    if row.iter().any(|v| !(-1.0..=1.0).contains(v)) {
        return Err(LdpError::param("smooth basis needs a point in [-1, 1]^p"));
    }
    Ok((0..len).map(|i| basis_value(i, row, t)).collect())
}

/// Tensor Chebyshev coefficients of `f` by cosine quadrature at the `t`
/// Gauss nodes `cos(pi (m + 1/2) / t)` per axis. Exact when `f(cos θ)` is a
/// cosine polynomial of degree `< t` in every variable.
pub fn smooth_query_coefficients<F>(f: F, p: usize, t: usize, cap: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let len = tensor_len(p, t, cap)?;
    let theta: Vec<f64> = (0..t)
        .map(|m| std::f64::consts::PI * (m as f64 + 0.5) / t as f64)
        .collect();
    let nodes: Vec<f64> = theta.iter().map(|th| th.cos()).collect();
    // dct[r][m] = ((2 - [r = 0]) / t) cos(r θ_m)
    let dct: Vec<Vec<f64>> = (0..t)
        .map(|r| {
            let w = if r == 0 { 1.0 } else { 2.0 } / t as f64;
            theta.iter().map(|th| w * (r as f64 * th).cos()).collect()
        })
        .collect();

    let mut vals: Vec<f64> = (0..len)
        .map(|i| {
            let x: Vec<f64> = tensor_index(i, p, t).iter().map(|&m| nodes[m]).collect();
            f(&x)
        })
        .collect();
    // Apply the 1-D transform along each axis in turn.
    for axis in 0..p {
        let stride = t.pow((p - 1 - axis) as u32);
        let mut next = vec![0.0; len];
        for (i, out) in next.iter_mut().enumerate() {
            let r = (i / stride) % t;
            let base = i - r * stride;
            *out = (0..t).map(|m| dct[r][m] * vals[base + m * stride]).sum();
        }
        vals = next;
    }
    Ok(vals)
}

/// Evaluates `sum_v c_v prod_j T_{v_j}(x_j)`.
pub fn smooth_series_eval(coeffs: &[f64], t: usize, x: &[f64]) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(i, c)| c * basis_value(i, x, t))
        .sum()
}

/// Degree hint `ceil((√n ε)^{2/(5p+2h)})` with the hidden constant set to 1.
pub fn smooth_degree_hint(n: usize, epsilon: f64, p: usize, h: usize) -> usize {
    let base = (n as f64).sqrt() * epsilon;
    (base.max(1.0).powf(2.0 / (5 * p + 2 * h) as f64).ceil() as usize).max(1)
}

/// Private tensor-basis average. Answers any smooth query by an inner product.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothRelease {
    pub p: usize,
    pub t: usize,
    pub n: usize,
    /// Averaged basis values, back in `[-1, 1]` scale.
    pub table: Vec<f64>,
    pub transcript: TranscriptSummary,
    pub budget: BudgetAccount,
    pub warnings: Vec<String>,
}

impl SmoothRelease {
    pub fn answer(&self, coeffs: &[f64]) -> Result<f64> {
        if coeffs.len() != self.table.len() {
            return Err(LdpError::param(format!(
                "coefficient vector has length {}, table has {}",
                coeffs.len(),
                self.table.len()
            )));
        }
        Ok(coeffs.iter().zip(&self.table).map(|(c, v)| c * v).sum())
    }

    pub fn answer_fn<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<f64> {
        self.answer(&smooth_query_coefficients(
            f,
            self.p,
            self.t,
            self.table.len().max(1),
        )?)
    }
}

/// Players send one shifted basis coordinate `(T_v(x) + 1) / 2 ∈ [0, 1]`;
/// the server undoes the shift after averaging.
pub fn smooth_release(
    data: &BoxDataset,
    t: usize,
    privacy: &Privacy,
    seeds: &SeedStream,
    cap: usize,
) -> Result<SmoothRelease> {
    let p = data.p();
    let len = tensor_len(p, t, cap)?;
    let records = data.records();
    let avg = private_average(data.len(), len, 1.0, privacy, seeds, |i, j| {
        (basis_value(j, records.row(i), t) + 1.0) / 2.0
    })?;
    let warnings: Vec<String> = avg.warning.into_iter().collect();
    for w in &warnings {
        warn!("{w}");
    }
    Ok(SmoothRelease {
        p,
        t,
        n: data.len(),
        table: avg.mean.iter().map(|m| 2.0 * m - 1.0).collect(),
        transcript: TranscriptSummary::reals(data.len(), 1),
        budget: budget_of(privacy),
        warnings,
    })
}

/// A smooth query on `[-1, 1]^p`.
pub type SmoothQuery<'a> = &'a dyn Fn(&[f64]) -> f64;

/// One release, then every query answered from it.
pub fn smooth_release_and_answer(
    data: &BoxDataset,
    t: usize,
    privacy: &Privacy,
    queries: &[SmoothQuery<'_>],
    seeds: &SeedStream,
    cap: usize,
) -> Result<(SmoothRelease, Vec<f64>)> {
    let release = smooth_release(data, t, privacy, seeds, cap)?;
    let answers = queries
        .iter()
        .map(|f| release.answer_fn(f))
        .collect::<Result<Vec<_>>>()?;
    Ok((release, answers))
}

/// Gaussian kernel `exp(-|x - center|^2 / (2 h^2))`.
pub fn gaussian_kernel(center: &[f64], bandwidth: f64) -> impl Fn(&[f64]) -> f64 + '_ {
    move |x: &[f64]| {
        let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        (-d2 / (2.0 * bandwidth * bandwidth)).exp()
    }
}

// ---------------------------------------------------------------------------
// Files

/// Metadata line of a release file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseHeader {
    pub mechanism: String,
    pub p: usize,
    pub k: Option<usize>,
    pub t: usize,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub n: usize,
    pub seed: u64,
}

/// Writes the metadata record, then `index,coefficient` rows.
pub fn write_release_csv<W: Write>(out: W, header: &ReleaseHeader, coeffs: &[f64]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .has_headers(false)
        .from_writer(out);
    w.write_record(["mechanism", "p", "k", "t", "gamma", "epsilon", "n", "seed"])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    w.write_record([
        header.mechanism.clone(),
        header.p.to_string(),
        opt(header.k.map(|v| v.to_string())),
        header.t.to_string(),
        opt(header.gamma.map(|v| v.to_string())),
        opt(header.epsilon.map(|v| v.to_string())),
        header.n.to_string(),
        header.seed.to_string(),
    ])?;
    w.write_record(["index", "coefficient"])?;
    for (i, c) in coeffs.iter().enumerate() {
        w.write_record([i.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_release_csv`].
pub fn read_release_csv<R: Read>(input: R) -> Result<(ReleaseHeader, Vec<f64>)> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(false)
        .from_reader(input);
    let mut records = r.records();
    let bad = |what: &str| LdpError::config(format!("malformed release file: {what}"));
    let _names = records.next().ok_or_else(|| bad("missing header"))??;
    let meta = records.next().ok_or_else(|| bad("missing metadata"))??;
    let field = |i: usize| meta.get(i).unwrap_or("").to_string();
    let parse_opt = |s: String| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| bad("number"))
        }
    };
    let header = ReleaseHeader {
        mechanism: field(0),
        p: field(1).parse().map_err(|_| bad("p"))?,
        k: if field(2).is_empty() {
            None
        } else {
            Some(field(2).parse().map_err(|_| bad("k"))?)
        },
        t: field(3).parse().map_err(|_| bad("t"))?,
        gamma: parse_opt(field(4))?,
        epsilon: parse_opt(field(5))?,
        n: field(6).parse().map_err(|_| bad("n"))?,
        seed: field(7).parse().map_err(|_| bad("seed"))?,
    };
    let _cols = records
        .next()
        .ok_or_else(|| bad("missing coefficient header"))??;
    let mut coeffs = Vec::new();
    for rec in records {
        let rec = rec?;
        coeffs.push(
            rec.get(1)
                .ok_or_else(|| bad("row"))?
                .parse()
                .map_err(|_| bad("coefficient"))?,
        );
    }
    Ok((header, coeffs))
}

/// One row of an answers file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryAnswer {
    pub query_id: String,
    pub answer: f64,
    pub raw_answer: f64,
}

/// Writes `query_id,answer,raw_answer`.
pub fn write_answers_csv<W: Write>(out: W, answers: &[QueryAnswer]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(["query_id", "answer", "raw_answer"])?;
    for a in answers {
        w.serialize(a)?;
    }
    w.flush()?;
    Ok(())
}
