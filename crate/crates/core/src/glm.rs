//! Generalized linear losses `ℓ(w; x, y) = f(y⟨w, x⟩)` on the unit ball.
//!
//! Every player sends `d(d+1) + 1` independently noised copies of its record.
//! The server multiplies affine functions of distinct copies, one copy per
//! factor, to get an unbiased estimate of a Bernstein polynomial in the
//! margin `y⟨w, x⟩`. That gives a stochastic gradient oracle for a smoothed
//! loss, which drives SIGM.

use std::ops::Range;

use rand::Rng;
use serde::Serialize;

use crate::data::BallDataset;
use crate::error::{LdpError, Result};
use crate::polyapprox::{
    bernstein_deriv_coeffs_on, binomial, hbeta_deriv, BernsteinPoly, SmoothedPlus,
    SubgradientSampler,
};
use crate::primitives::{gaussian_unchecked, BudgetAccount, Privacy, TranscriptSummary};
use crate::rng::{tag, SeedStream};
use crate::sigm::{sigm_run, Ball, GradientOracle, OracleContract, SigmSchedule};

/// Default cap on the Bernstein degree.
pub const DEFAULT_D_CAP: usize = 8;

/// Number of oracle draws used to estimate the gradient noise level.
pub const PILOT_SAMPLES: usize = 200;

/// Head replica variance `32 ln(1.25/δ) / ε²`.
pub fn head_variance(epsilon: f64, delta: f64) -> f64 {
    32.0 * (1.25 / delta).ln() / (epsilon * epsilon)
}

/// Body replica variance `8 ln(1.25/δ) d²(d+1)² / ε²`.
pub fn body_variance(epsilon: f64, delta: f64, d: usize) -> f64 {
    let dd = (d * (d + 1)) as f64;
    8.0 * (1.25 / delta).ln() * dd * dd / (epsilon * epsilon)
}

/// Number of body replicas, `d(d+1)`.
pub fn body_replicas(d: usize) -> usize {
    d * (d + 1)
}

/// For `j = 0..=d`, the replica indices of the `t_j` and `s_j` products:
/// block `j` is `jd+1 ..= jd+d`, the first `j` indices feed `t_j` and the
/// rest feed `s_j`.
pub fn replica_blocks(d: usize) -> Vec<(Range<usize>, Range<usize>)> {
    (0..=d)
        .map(|j| {
            let start = j * d + 1;
            (start..start + j, start + j..start + d)
        })
        .collect()
}

/// The noised copies one player sends.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaMessage {
    p: usize,
    /// Row `j` holds `x_{i,j}`; row 0 is the head copy.
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl ReplicaMessage {
    pub fn replicas(&self) -> usize {
        self.ys.len()
    }

    pub fn x(&self, j: usize) -> &[f64] {
        &self.xs[j * self.p..(j + 1) * self.p]
    }

    pub fn y(&self, j: usize) -> f64 {
        self.ys[j]
    }

    /// Reals transmitted: `(d(d+1)+1)(p+1)`.
    pub fn real_count(&self) -> usize {
        self.xs.len() + self.ys.len()
    }

    /// `y_{i,j} ⟨w, x_{i,j}⟩`.
    fn margin(&self, j: usize, w: &[f64]) -> f64 {
        self.y(j) * dot(w, self.x(j))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Player-side encoder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaEncoder {
    p: usize,
    d: usize,
    head_std: f64,
    body_std: f64,
}

impl ReplicaEncoder {
    pub fn new(p: usize, d: usize, privacy: Privacy) -> Result<Self> {
        if p == 0 || d == 0 {
            return Err(LdpError::param("encoder needs p >= 1 and d >= 1"));
        }
        let (head_std, body_std) = match privacy {
            Privacy::Private(b) => {
                if !(b.delta > 0.0) {
                    return Err(LdpError::param("the Gaussian replicas need delta > 0"));
                }
                (
                    head_variance(b.epsilon, b.delta).sqrt(),
                    body_variance(b.epsilon, b.delta, d).sqrt(),
                )
            }
            Privacy::Disabled => (0.0, 0.0),
        };
        Ok(Self {
            p,
            d,
            head_std,
            body_std,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn head_std(&self) -> f64 {
        self.head_std
    }

    pub fn body_std(&self) -> f64 {
        self.body_std
    }

    pub fn reals_per_player(&self) -> usize {
        (body_replicas(self.d) + 1) * (self.p + 1)
    }

    pub fn encode<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        y: f64,
        rng: &mut R,
    ) -> Result<ReplicaMessage> {
        if x.len() != self.p {
            return Err(LdpError::param(format!(
                "record has {} features, expected {}",
                x.len(),
                self.p
            )));
        }
        let count = body_replicas(self.d) + 1;
        let mut xs = Vec::with_capacity(count * self.p);
        let mut ys = Vec::with_capacity(count);
        for j in 0..count {
            let std = if j == 0 { self.head_std } else { self.body_std };
            let noise = |rng: &mut R| {
                if std > 0.0 {
                    gaussian_unchecked(std, rng)
                } else {
                    0.0
                }
            };
            xs.extend(x.iter().map(|v| v + noise(rng)));
            ys.push(y + noise(rng));
        }
        Ok(ReplicaMessage { p: self.p, xs, ys })
    }
}

/// Player side: encode one record.
pub fn glm_player_encode<R: Rng + ?Sized>(
    x: &[f64],
    y: f64,
    encoder: &ReplicaEncoder,
    rng: &mut R,
) -> Result<ReplicaMessage> {
    encoder.encode(x, y, rng)
}

fn check_message(msg: &ReplicaMessage, d: usize, w: &[f64]) -> Result<()> {
    if msg.replicas() != body_replicas(d) + 1 {
        return Err(LdpError::Protocol(format!(
            "message carries {} replicas, degree {d} needs {}",
            msg.replicas(),
            body_replicas(d) + 1
        )));
    }
    if w.len() != msg.p {
        return Err(LdpError::param(format!(
            "w has {} coordinates, records have {}",
            w.len(),
            msg.p
        )));
    }
    Ok(())
}

/// `Σ_j c_j C(d,j) t_j s_j` where the unit argument of replica `k` is
/// `arg(k)`.
fn bernstein_product_sum(poly: &BernsteinPoly, arg: impl Fn(usize) -> f64) -> f64 {
    let d = poly.degree();
    replica_blocks(d)
        .into_iter()
        .zip(poly.coefficients())
        .enumerate()
        .map(|(j, ((t_idx, s_idx), c))| {
            let t: f64 = t_idx.map(&arg).product();
            let s: f64 = s_idx.map(|k| 1.0 - arg(k)).product();
            c * binomial(d, j) * t * s
        })
        .sum()
}

/// Hinge-path gradient sample `(Σ_j c_j C(d,j) t_j s_j) y_{i,0} x_{i,0}`,
/// unbiased for `P(y⟨w, x⟩) y x` where `P` is `poly`.
pub fn hinge_gradient_sample(
    w: &[f64],
    msg: &ReplicaMessage,
    poly: &BernsteinPoly,
) -> Result<Vec<f64>> {
    check_message(msg, poly.degree(), w)?;
    let scale = bernstein_product_sum(poly, |k| poly.unit(msg.margin(k, w)));
    let y0 = msg.y(0);
    Ok(msg.x(0).iter().map(|x| scale * y0 * x).collect())
}

/// How the kink locations are drawn for one general-path gradient sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShiftSampling {
    /// One draw shared by every factor; unbiased for the smoothed composite.
    Shared,
    /// An independent draw per replica factor.
    PerReplica,
}

/// General-path gradient sample
/// `[(f'(1) - f'(-1)) Σ_j c_j C(d,j) t_j r_j + f'(-1)] y_{i,0} x_{i,0}`,
/// where the factors use the shifted arguments `(y_{i,k}⟨w, x_{i,k}⟩ - s_k)/2`
/// and `poly` approximates `h'_β` on `[-1, 1]`.
pub fn general_linear_gradient_sample<R: Rng + ?Sized>(
    w: &[f64],
    msg: &ReplicaMessage,
    poly: &BernsteinPoly,
    sampler: &SubgradientSampler,
    shift: ShiftSampling,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_message(msg, poly.degree(), w)?;
    let left = sampler.left();
    let y0 = msg.y(0);
    if sampler.is_degenerate() {
        return Ok(msg.x(0).iter().map(|x| left * y0 * x).collect());
    }
    let shifts: Vec<f64> = match shift {
        ShiftSampling::Shared => vec![sampler.sample(rng)?; body_replicas(poly.degree()) + 1],
        ShiftSampling::PerReplica => (0..=body_replicas(poly.degree()))
            .map(|_| sampler.sample(rng))
            .collect::<Result<_>>()?,
    };
    let sum = bernstein_product_sum(poly, |k| poly.unit((msg.margin(k, w) - shifts[k]) / 2.0));
    let scale = (sampler.right() - left) * sum + left;
    Ok(msg.x(0).iter().map(|x| scale * y0 * x).collect())
}

/// Scalar convex 1-Lipschitz losses with closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScalarLoss {
    /// `max(0, 1/2 - θ)`.
    Hinge,
    /// `|θ|`.
    Absolute,
    /// `ln(1 + e^{-θ})`.
    Logistic,
    /// `θ² / 2`.
    HalfSquare,
}

impl ScalarLoss {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "hinge" => Ok(ScalarLoss::Hinge),
            "abs" | "absolute" => Ok(ScalarLoss::Absolute),
            "logistic" => Ok(ScalarLoss::Logistic),
            "half-square" | "squared" => Ok(ScalarLoss::HalfSquare),
            other => Err(LdpError::config(format!("unknown scalar loss {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScalarLoss::Hinge => "hinge",
            ScalarLoss::Absolute => "abs",
            ScalarLoss::Logistic => "logistic",
            ScalarLoss::HalfSquare => "half-square",
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            ScalarLoss::Hinge => (0.5 - t).max(0.0),
            ScalarLoss::Absolute => t.abs(),
            ScalarLoss::Logistic => (-t).exp().ln_1p(),
            ScalarLoss::HalfSquare => t * t / 2.0,
        }
    }

    /// A subgradient; at kinks the left one.
    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            ScalarLoss::Hinge => {
                if t < 0.5 {
                    -1.0
                } else {
                    0.0
                }
            }
            ScalarLoss::Absolute => {
                if t > 0.0 {
                    1.0
                } else if t < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            ScalarLoss::Logistic => -1.0 / (1.0 + t.exp()),
            ScalarLoss::HalfSquare => t,
        }
    }

    pub fn sampler(&self) -> Result<SubgradientSampler> {
        let me = *self;
        SubgradientSampler::new(move |t| me.deriv(t))
    }
}

/// Which gradient oracle the server runs.
#[derive(Debug, Clone)]
pub enum Flavor {
    /// Smoothed hinge with the dedicated product oracle.
    Hinge,
    /// Any scalar loss through the kink-mixture oracle.
    GeneralLinear {
        loss: ScalarLoss,
        shift: ShiftSampling,
    },
}

impl Flavor {
    pub fn name(&self) -> String {
        match self {
            Flavor::Hinge => "hinge".into(),
            Flavor::GeneralLinear { loss, .. } => format!("general-linear:{}", loss.name()),
        }
    }

    pub fn loss(&self) -> ScalarLoss {
        match self {
            Flavor::Hinge => ScalarLoss::Hinge,
            Flavor::GeneralLinear { loss, .. } => *loss,
        }
    }
}

/// Empirical risk `(1/n) Σ f(y_i ⟨w, x_i⟩)`.
pub fn empirical_risk(data: &BallDataset, loss: ScalarLoss, w: &[f64]) -> f64 {
    let n = data.len();
    let s = crate::par::sum_vectors(n, 1, |r, acc| {
        for i in r {
            acc[0] += loss.value(data.y(i) * dot(w, data.x(i)));
        }
    });
    s[0] / n as f64
}

/// Smoothing and degree from a target accuracy: `β = α/4`, `d = 2/(β² α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeChoice {
    pub beta: f64,
    pub d_theory: f64,
    pub d: usize,
    pub capped: bool,
}

pub fn degree_from_target(alpha: f64, d_cap: usize) -> Result<DegreeChoice> {
    if !(alpha > 0.0 && alpha <= 4.0) {
        return Err(LdpError::param(format!(
            "target alpha must lie in (0, 4], got {alpha}"
        )));
    }
    let beta = alpha / 4.0;
    let d_theory = 2.0 / (beta * beta * alpha);
    let want = d_theory.ceil().max(1.0);
    let d = if want > d_cap as f64 {
        d_cap.max(1)
    } else {
        want as usize
    };
    Ok(DegreeChoice {
        beta,
        d_theory,
        d,
        capped: want > d_cap as f64,
    })
}

/// Bernstein polynomial used by the hinge path: `f'_β` on `[-1, 1]`.
pub fn hinge_poly(beta: f64, d: usize) -> Result<BernsteinPoly> {
    let s = SmoothedPlus::new(beta)?;
    bernstein_deriv_coeffs_on(move |x| s.deriv(x), d, -1.0, 1.0)
}

/// Bernstein polynomial used by the general path: `h'_β` on `[-1, 1]`.
pub fn general_poly(beta: f64, d: usize) -> Result<BernsteinPoly> {
    if !(beta > 0.0) {
        return Err(LdpError::param("smoothing beta must be positive"));
    }
    bernstein_deriv_coeffs_on(move |x| hbeta_deriv(beta, x), d, -1.0, 1.0)
}

#[derive(Debug, Clone)]
pub struct GlmConfig {
    pub flavor: Flavor,
    pub beta_smoothing: f64,
    pub d: usize,
    pub privacy: Privacy,
    /// SIGM iterations; the number of players when `None`.
    pub iterations: Option<usize>,
    /// Radius of the constraint ball.
    pub radius: f64,
}

/// Output of one run.
#[derive(Debug, Clone, Serialize)]
pub struct GlmRun {
    pub w: Vec<f64>,
    pub iterations: usize,
    pub sigma_estimate: f64,
    pub transcript: TranscriptSummary,
    pub budget: BudgetAccount,
}

/// Server-side stochastic oracle over lazily regenerated player messages.
pub struct GlmOracle<'a> {
    data: &'a BallDataset,
    encoder: ReplicaEncoder,
    players: crate::rng::TaggedStreams,
    poly: BernsteinPoly,
    flavor: Flavor,
    sampler: Option<SubgradientSampler>,
    rng: rand_chacha::ChaCha8Rng,
}

impl<'a> GlmOracle<'a> {
    pub fn new(
        data: &'a BallDataset,
        cfg: &GlmConfig,
        seeds: &SeedStream,
        server_tag: u64,
    ) -> Result<Self> {
        let encoder = ReplicaEncoder::new(data.dim(), cfg.d, cfg.privacy)?;
        let (poly, sampler) = match &cfg.flavor {
            Flavor::Hinge => (hinge_poly(cfg.beta_smoothing, cfg.d)?, None),
            Flavor::GeneralLinear { loss, .. } => (
                general_poly(cfg.beta_smoothing, cfg.d)?,
                Some(loss.sampler()?),
            ),
        };
        Ok(Self {
            data,
            encoder,
            players: seeds.streams(tag::PLAYER),
            poly,
            flavor: cfg.flavor.clone(),
            sampler,
            rng: seeds.rng(server_tag, 0),
        })
    }

    /// The message player `i` sent (regenerated from its stream).
    pub fn message(&self, i: usize) -> Result<ReplicaMessage> {
        self.encoder.encode(
            self.data.x(i),
            self.data.y(i),
            &mut self.players.rng(i as u64),
        )
    }

    fn sample_at(&mut self, w: &[f64], i: usize) -> Result<Vec<f64>> {
        let msg = self.message(i)?;
        match (&self.flavor, &self.sampler) {
            (Flavor::GeneralLinear { shift, .. }, Some(sampler)) => {
                general_linear_gradient_sample(w, &msg, &self.poly, sampler, *shift, &mut self.rng)
            }
            _ => hinge_gradient_sample(w, &msg, &self.poly),
        }
    }
}

impl GradientOracle for GlmOracle<'_> {
    fn gradient(&mut self, w: &[f64]) -> Result<Vec<f64>> {
        let i = self.rng.random_range(0..self.data.len());
        self.sample_at(w, i)
    }
}

/// Root-mean-square deviation of `samples` oracle draws at `w = 0`.
fn estimate_sigma(oracle: &mut GlmOracle<'_>, samples: usize) -> Result<f64> {
    let w = vec![0.0; oracle.data.dim()];
    let draws: Vec<Vec<f64>> = (0..samples)
        .map(|_| oracle.gradient(&w))
        .collect::<Result<_>>()?;
    let p = w.len();
    let mean: Vec<f64> = (0..p)
        .map(|j| draws.iter().map(|g| g[j]).sum::<f64>() / samples as f64)
        .collect();
    let var = draws
        .iter()
        .map(|g| {
            g.iter()
                .zip(&mean)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        / (samples.max(2) - 1) as f64;
    Ok(var.sqrt())
}

/// Full pipeline: encode, build the oracle, run SIGM.
pub fn glm_erm_run(data: &BallDataset, cfg: &GlmConfig, seeds: &SeedStream) -> Result<GlmRun> {
    let n = data.len();
    let iterations = cfg.iterations.unwrap_or(n).max(1);
    let ball = Ball::new(cfg.radius)?;

    // The noise level of the oracle sets the SIGM step schedule. It is
    // measured on the server from the received messages, so it costs no
    // privacy.
    let mut pilot = GlmOracle::new(data, cfg, seeds, tag::PILOT)?;
    let sigma = estimate_sigma(&mut pilot, PILOT_SAMPLES)?;

    let contract = OracleContract::new(0.0, 1.0 / cfg.beta_smoothing, sigma)?;
    let schedule = SigmSchedule::tuned(1.0, contract, cfg.radius)?;
    let mut oracle = GlmOracle::new(data, cfg, seeds, tag::SERVER)?;
    let w = sigm_run(&mut oracle, data.dim(), &ball, &schedule, iterations)?;

    let encoder = oracle.encoder;
    let budget = match cfg.privacy {
        Privacy::Private(b) => BudgetAccount::uniform(b.epsilon, b.epsilon, 1),
        Privacy::Disabled => BudgetAccount::none(),
    };
    Ok(GlmRun {
        w,
        iterations,
        sigma_estimate: sigma,
        transcript: TranscriptSummary::reals(n, encoder.reals_per_player() as u64),
        budget,
    })
}
