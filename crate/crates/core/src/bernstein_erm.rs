//! Grid mechanisms for losses on the unit cube: every player privately
//! reports its loss at the grid points `{0, 1/k, ..., 1}^p`, the server
//! fits an iterated Bernstein surrogate to the averaged grid values and
//! minimizes it.
//!
//! Two player protocols are provided. In [`GridMode::LaplacePerPoint`] each
//! player answers every grid point through the Laplace average with the
//! budget split evenly. In [`GridMode::OneBit`] the players are randomly
//! partitioned into one cell per grid point and each player sends a single
//! bit about its own cell's point.

use std::sync::Arc;

use log::warn;
use rand::seq::SliceRandom;

use crate::data::Records;
use crate::error::{LdpError, Result};
use crate::par::sum_vectors;
use crate::polyapprox::{BernsteinOperatorSpec, BernsteinSurface, GridIter, GridValues};
use crate::primitives::{
    onebit_decode, onebit_encode, BudgetAccount, LaplaceRandomizer, Privacy, PublicRandomness,
    TranscriptSummary,
};
use crate::rng::{tag, SeedStream};

/// Default cap on the number of grid points.
pub const DEFAULT_GRID_CAP: usize = 1 << 20;

/// Loss `ℓ(w; x)` with `w` in `[0,1]^p`, expected to take values in `[0, 1]`.
pub type CubeLoss = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// Records together with the loss evaluated on them.
#[derive(Clone)]
pub struct CubeDataset {
    records: Records,
    loss: Arc<CubeLoss>,
    p: usize,
}

impl std::fmt::Debug for CubeDataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CubeDataset")
            .field("n", &self.records.len())
            .field("p", &self.p)
            .finish()
    }
}

impl CubeDataset {
    /// `p` is the dimension of the parameter `w`.
    pub fn new<L>(records: Records, p: usize, loss: L) -> Result<Self>
    where
        L: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        if records.is_empty() {
            return Err(LdpError::param("dataset is empty"));
        }
        if p == 0 {
            return Err(LdpError::param("parameter dimension must be positive"));
        }
        Ok(Self {
            records,
            loss: Arc::new(loss),
            p,
        })
    }

    pub fn records(&self) -> &Records {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn loss(&self, w: &[f64], x: &[f64]) -> f64 {
        (self.loss)(w, x)
    }

    /// Loss clipped to `[0, 1]`; the flag reports whether clipping happened.
    fn clipped_loss(&self, w: &[f64], x: &[f64]) -> (f64, bool) {
        let v = (self.loss)(w, x);
        if v.is_nan() {
            return (0.0, true);
        }
        let c = v.clamp(0.0, 1.0);
        (c, c != v)
    }

    /// Empirical risk `(1/n) Σ ℓ(w; x_i)` (unclipped).
    pub fn empirical_risk(&self, w: &[f64]) -> f64 {
        let n = self.len();
        let s = sum_vectors(n, 1, |r, acc| {
            for i in r {
                acc[0] += (self.loss)(w, self.records.row(i));
            }
        });
        s[0] / n as f64
    }
}

/// Player protocol for the grid mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    LaplacePerPoint,
    OneBit,
}

impl GridMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GridMode::LaplacePerPoint => "laplace-per-point",
            GridMode::OneBit => "one-bit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridProtocolConfig {
    pub k: usize,
    pub h: usize,
    pub privacy: Privacy,
    pub mode: GridMode,
    pub grid_cap: usize,
}

impl GridProtocolConfig {
    pub fn new(k: usize, h: usize, privacy: Privacy, mode: GridMode) -> Self {
        Self {
            k,
            h,
            privacy,
            mode,
            grid_cap: DEFAULT_GRID_CAP,
        }
    }
}

/// `(k+1)^p` grid points in lexicographic order.
pub fn grid_points(k: usize, p: usize, cap: usize) -> Result<Vec<Vec<f64>>> {
    let spec = BernsteinOperatorSpec::new(k, 1, p)?;
    spec.grid_len(cap)?;
    Ok(GridIter::new(k, p).collect())
}

/// Heuristic grid resolution
/// `k ≈ (sqrt(p n) ε / (2^{(h+1)p} sqrt(ln(1/β))))^{1/(h+p)}` with the
/// unknown smoothness constant set to 1.
pub fn recommended_k(n: usize, p: usize, h: usize, epsilon: f64, beta: f64) -> usize {
    let num = ((p * n) as f64).sqrt() * epsilon;
    let den = 2f64.powi(((h + 1) * p) as i32) * (1.0 / beta).ln().sqrt();
    let k = (num / den).powf(1.0 / (h + p) as f64);
    (k.ceil() as usize).max(1)
}

/// Bernstein surrogate of the empirical risk.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinModel {
    grid: GridValues,
    surface: BernsteinSurface,
}

impl BernsteinModel {
    pub fn new(grid: GridValues, h: usize) -> Result<Self> {
        let surface = BernsteinSurface::new(&grid, h)?;
        Ok(Self { grid, surface })
    }

    pub fn spec(&self) -> BernsteinOperatorSpec {
        self.surface.spec()
    }

    pub fn grid(&self) -> &GridValues {
        &self.grid
    }

    pub fn p(&self) -> usize {
        self.grid.p()
    }

    pub fn eval(&self, w: &[f64]) -> Result<f64> {
        self.surface.eval(w)
    }

    pub fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.surface.gradient(w)
    }

    fn value_grad(&self, w: &[f64]) -> (f64, Vec<f64>) {
        self.surface.value_and_gradient_unchecked(w)
    }

    fn value(&self, w: &[f64]) -> f64 {
        self.surface.eval_unchecked(w)
    }
}

/// Result of one grid-mechanism run.
#[derive(Debug, Clone)]
pub struct BernsteinRun {
    pub model: BernsteinModel,
    pub w_priv: Vec<f64>,
    pub transcript: TranscriptSummary,
    pub budget: BudgetAccount,
    /// Number of loss values that had to be clipped into `[0, 1]`.
    pub clipped: usize,
    pub warnings: Vec<String>,
}

/// Feasible region inside the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Constraint {
    pub fn unit_cube(p: usize) -> Self {
        Constraint::Box {
            lo: vec![0.0; p],
            hi: vec![1.0; p],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Constraint::Box { lo, hi } => {
                if lo.len() != hi.len() || lo.is_empty() {
                    return Err(LdpError::param(
                        "box bounds must have equal, positive length",
                    ));
                }
                for (a, b) in lo.iter().zip(hi) {
                    if !(0.0 <= *a && a <= b && *b <= 1.0) {
                        return Err(LdpError::param(
                            "box must be a non-empty subset of the unit cube",
                        ));
                    }
                }
            }
            Constraint::Ball { center, radius } => {
                if center.is_empty() || !(*radius >= 0.0) {
                    return Err(LdpError::param(
                        "ball needs a center and a non-negative radius",
                    ));
                }
                if center.iter().any(|c| c - radius < 0.0 || c + radius > 1.0) {
                    return Err(LdpError::param("ball must lie inside the unit cube"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Constraint::Box { lo, .. } => lo.len(),
            Constraint::Ball { center, .. } => center.len(),
        }
    }

    pub fn project(&self, w: &mut [f64]) {
        match self {
            Constraint::Box { lo, hi } => {
                for ((x, a), b) in w.iter_mut().zip(lo).zip(hi) {
                    *x = x.clamp(*a, *b);
                }
            }
            Constraint::Ball { center, radius } => {
                let d: f64 = w
                    .iter()
                    .zip(center)
                    .map(|(x, c)| (x - c).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if d > *radius {
                    let s = radius / d;
                    for (x, c) in w.iter_mut().zip(center) {
                        *x = c + (*x - c) * s;
                    }
                }
                // Guard against rounding just outside the cube.
                w.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
            }
        }
    }

    /// Feasible range of coordinate `j` with the others held fixed.
    fn segment(&self, w: &[f64], j: usize) -> (f64, f64) {
        match self {
            Constraint::Box { lo, hi } => (lo[j], hi[j]),
            Constraint::Ball { center, radius } => {
                let rest: f64 = w
                    .iter()
                    .zip(center)
                    .enumerate()
                    .filter(|(i, _)| *i != j)
                    .map(|(_, (x, c))| (x - c).powi(2))
                    .sum();
                let half = (radius * radius - rest).max(0.0).sqrt();
                ((center[j] - half).max(0.0), (center[j] + half).min(1.0))
            }
        }
    }

    /// Maps a point of the unit cube into the region.
    fn embed(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Constraint::Box { lo, hi } => u
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(t, (a, b))| a + (b - a) * t)
                .collect(),
            Constraint::Ball { center, radius } => {
                let mut w: Vec<f64> = u
                    .iter()
                    .zip(center)
                    .map(|(t, c)| c + radius * (2.0 * t - 1.0))
                    .collect();
                self.project(&mut w);
                w
            }
        }
    }

    fn center(&self) -> Vec<f64> {
        match self {
            Constraint::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| (a + b) / 2.0).collect(),
            Constraint::Ball { center, .. } => center.clone(),
        }
    }
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Low-discrepancy points in `[0,1]^p` (Halton; a plain lattice offset is
/// used beyond the tabulated primes).
pub fn halton_points(count: usize, p: usize) -> Vec<Vec<f64>> {
    (1..=count as u64)
        .map(|i| {
            (0..p)
                .map(|j| match PRIMES.get(j) {
                    Some(&b) => radical_inverse(i, b),
                    None => ((i as f64) * (0.5 + j as f64).sqrt()).fract(),
                })
                .collect()
        })
        .collect()
}

const STARTS: usize = 32;
const PGD_ITERS: usize = 300;
const GOLDEN_ROUNDS: usize = 3;

/// Multi-start projected gradient descent with Armijo backtracking, followed
/// by a per-coordinate golden-section refinement. Always returns a feasible
/// point.
pub fn minimize_model(model: &BernsteinModel, constraint: &Constraint) -> Result<Vec<f64>> {
    constraint.validate()?;
    if constraint.dim() != model.p() {
        return Err(LdpError::param(format!(
            "constraint has dimension {}, model has {}",
            constraint.dim(),
            model.p()
        )));
    }
    let mut starts = vec![constraint.center()];
    starts.extend(
        halton_points(STARTS - 1, model.p())
            .iter()
            .map(|u| constraint.embed(u)),
    );

    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in starts {
        let mut w = projected_descent(model, constraint, start);
        coordinate_refine(model, constraint, &mut w);
        let v = model.value(&w);
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, w));
        }
    }
    Ok(best.map(|(_, w)| w).expect("at least one start"))
}

fn projected_descent(model: &BernsteinModel, c: &Constraint, mut w: Vec<f64>) -> Vec<f64> {
    c.project(&mut w);
    let mut step = 1.0;
    let (mut f, mut g) = model.value_grad(&w);
    for _ in 0..PGD_ITERS {
        let mut accepted = None;
        for _ in 0..50 {
            let mut cand: Vec<f64> = w.iter().zip(&g).map(|(x, gi)| x - step * gi).collect();
            c.project(&mut cand);
            let diff: Vec<f64> = cand.iter().zip(&w).map(|(a, b)| a - b).collect();
            let lin: f64 = diff.iter().zip(&g).map(|(d, gi)| d * gi).sum();
            let sq: f64 = diff.iter().map(|d| d * d).sum();
            let fc = model.value(&cand);
            if fc <= f + lin + sq / (2.0 * step) + 1e-15 {
                accepted = Some((cand, fc, sq));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc, sq)) = accepted else {
            break;
        };
        w = cand;
        let moved = sq.sqrt();
        f = fc;
        g = model.value_grad(&w).1;
        step *= 2.0;
        if moved < 1e-12 {
            break;
        }
    }
    w
}

fn coordinate_refine(model: &BernsteinModel, c: &Constraint, w: &mut [f64]) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..GOLDEN_ROUNDS {
        for j in 0..w.len() {
            let (mut a, mut b) = c.segment(w, j);
            if b - a < 1e-12 {
                continue;
            }
            let mut probe = w.to_vec();
            let mut at = |x: f64| {
                probe[j] = x;
                model.value(&probe)
            };
            let current = w[j];
            let f_current = at(current);
            let (mut x1, mut x2) = (b - ratio * (b - a), a + ratio * (b - a));
            let (mut f1, mut f2) = (at(x1), at(x2));
            while b - a > 1e-9 {
                if f1 <= f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - ratio * (b - a);
                    f1 = at(x1);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + ratio * (b - a);
                    f2 = at(x2);
                }
            }
            let x = 0.5 * (a + b);
            let (lo, hi) = c.segment(w, j);
            let mut options = [(at(x), x), (at(lo), lo), (at(hi), hi)];
            options.sort_by(|p, q| p.0.total_cmp(&q.0));
            if options[0].0 < f_current {
                w[j] = options[0].1;
            }
        }
    }
}

/// Dense-grid minimization over a box (`p <= 2`), used as a cross-check.
pub fn dense_grid_minimize(model: &BernsteinModel, step: f64) -> Result<Vec<f64>> {
    let p = model.p();
    if p > 2 {
        return Err(LdpError::param(
            "dense grid search is only offered for p <= 2",
        ));
    }
    let m = (1.0 / step).round() as usize;
    let mut best = (f64::INFINITY, vec![0.0; p]);
    for pt in GridIter::new(m, p) {
        let v = model.value(&pt);
        if v < best.0 {
            best = (v, pt);
        }
    }
    Ok(best.1)
}

fn check_cfg(data: &CubeDataset, cfg: &GridProtocolConfig) -> Result<BernsteinOperatorSpec> {
    let spec = BernsteinOperatorSpec::new(cfg.k, cfg.h, data.p())?;
    spec.grid_len(cfg.grid_cap)?;
    Ok(spec)
}

/// Local Bernstein mechanism with a Laplace report per grid point.
pub fn laplace_grid_run(
    data: &CubeDataset,
    cfg: &GridProtocolConfig,
    constraint: &Constraint,
    seeds: &SeedStream,
) -> Result<BernsteinRun> {
    let spec = check_cfg(data, cfg)?;
    let points: Vec<Vec<f64>> = GridIter::new(spec.k, spec.p).collect();
    let g = points.len();
    let n = data.len();
    let randomizer = match cfg.privacy {
        Privacy::Private(b) => Some(LaplaceRandomizer::new(1.0, b.epsilon / g as f64)?),
        Privacy::Disabled => None,
    };
    let players = seeds.streams(tag::PLAYER);

    // Width g + 1: the last slot counts clipped values.
    let sums = sum_vectors(n, g + 1, |range, acc| {
        for i in range {
            let x = data.records.row(i);
            let mut rng = players.rng(i as u64);
            for (j, pt) in points.iter().enumerate() {
                let (v, clipped) = data.clipped_loss(pt, x);
                if clipped {
                    acc[g] += 1.0;
                }
                acc[j] += match &randomizer {
                    Some(r) => r.randomize(v, &mut rng),
                    None => v,
                };
            }
        }
    });
    let clipped = sums[g] as usize;
    let values: Vec<f64> = sums[..g].iter().map(|s| s / n as f64).collect();

    let mut warnings = Vec::new();
    if clipped > 0 {
        let msg = format!("{clipped} loss values clipped into [0, 1]");
        warn!("{msg}");
        warnings.push(msg);
    }
    let model = BernsteinModel::new(GridValues::new(spec.k, spec.p, values)?, spec.h)?;
    let w_priv = minimize_model(&model, constraint)?;
    let budget = match cfg.privacy {
        Privacy::Private(b) => BudgetAccount::uniform(b.epsilon, b.epsilon / g as f64, g),
        Privacy::Disabled => BudgetAccount::none(),
    };
    Ok(BernsteinRun {
        model,
        w_priv,
        transcript: TranscriptSummary::reals(n, g as u64),
        budget,
        clipped,
        warnings,
    })
}

/// Random partition of `[n]` into `cells` balanced blocks (seeded shuffle).
pub fn random_partition(n: usize, cells: usize, seeds: &SeedStream) -> Result<Vec<Vec<usize>>> {
    if n < cells {
        return Err(LdpError::Estimation(format!(
            "{n} players cannot fill {cells} partition cells (seed {}); every reshuffle leaves a cell \
             empty, so raise n or lower k",
            seeds.master()
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeds.rng(tag::PARTITION, 0));
    Ok((0..cells)
        .map(|c| perm[c * n / cells..(c + 1) * n / cells].to_vec())
        .collect())
}

/// Player-efficient variant: one bit per player.
pub fn onebit_grid_run(
    data: &CubeDataset,
    cfg: &GridProtocolConfig,
    constraint: &Constraint,
    seeds: &SeedStream,
) -> Result<BernsteinRun> {
    let spec = check_cfg(data, cfg)?;
    let budget = match cfg.privacy {
        Privacy::Private(b) => b,
        Privacy::Disabled => {
            return Err(LdpError::param(
                "the one-bit protocol has no non-private mode",
            ));
        }
    };
    budget.require_one_bit()?;
    let points: Vec<Vec<f64>> = GridIter::new(spec.k, spec.p).collect();
    let g = points.len();
    let n = data.len();
    let cells = random_partition(n, g, seeds)?;

    let mut warnings = Vec::new();
    let threshold = spec.p as f64 * g as f64 * ((spec.k + 1) as f64).ln();
    if (n as f64) < threshold {
        let msg = format!(
            "n = {n} is below p (k+1)^p ln(k+1) = {threshold:.0}; cell estimates will be noisy"
        );
        warn!("{msg}");
        warnings.push(msg);
    }

    let mut cell_of = vec![0usize; n];
    for (c, members) in cells.iter().enumerate() {
        for &i in members {
            cell_of[i] = c;
        }
    }
    let publics = PublicRandomness::new(seeds.child(&[tag::PUBLIC]).master(), &budget);
    let players = seeds.streams(tag::PLAYER);
    let mut bits = vec![0u8; n];
    let mut clipped = 0usize;
    {
        use rayon::prelude::*;
        clipped += bits
            .par_chunks_mut(crate::par::CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut clipped = 0usize;
                for (off, bit) in chunk.iter_mut().enumerate() {
                    let i = c * crate::par::CHUNK + off;
                    let (v, was_clipped) =
                        data.clipped_loss(&points[cell_of[i]], data.records.row(i));
                    clipped += usize::from(was_clipped);
                    let y = publics.draw(i);
                    *bit = onebit_encode(v, y, &budget, &mut players.rng(i as u64))
                        .expect("validated budget and clipped value")
                        .bit;
                }
                clipped
            })
            .sum::<usize>();
    }
    if clipped > 0 {
        let msg = format!("{clipped} loss values clipped into [0, 1]");
        warn!("{msg}");
        warnings.push(msg);
    }

    let values = {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|cell| onebit_decode(&bits, &publics, cell))
            .collect::<Result<Vec<f64>>>()?
    };
    let model = BernsteinModel::new(GridValues::new(spec.k, spec.p, values)?, spec.h)?;
    let w_priv = minimize_model(&model, constraint)?;
    Ok(BernsteinRun {
        model,
        w_priv,
        transcript: TranscriptSummary::bits(n, 1),
        budget: BudgetAccount::uniform(budget.epsilon, budget.epsilon, 1),
        clipped,
        warnings,
    })
}

/// Dispatches on `cfg.mode`.
pub fn run_grid_mechanism(
    data: &CubeDataset,
    cfg: &GridProtocolConfig,
    constraint: &Constraint,
    seeds: &SeedStream,
) -> Result<BernsteinRun> {
    match cfg.mode {
        GridMode::LaplacePerPoint => laplace_grid_run(data, cfg, constraint, seeds),
        GridMode::OneBit => onebit_grid_run(data, cfg, constraint, seeds),
    }
}
