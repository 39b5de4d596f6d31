//! Noise sources, the scalar and vector LDP averaging protocols, and the
//! one-bit Bernoulli encoder/decoder.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LdpError, Result};
use crate::rng::{tag, SeedStream};

/// Failure probability used for the vector-average sample-size warning.
pub const DEFAULT_FAILURE_PROB: f64 = 0.05;

/// (ε, δ) privacy parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) || epsilon.is_nan() {
            return Err(LdpError::param(format!(
                "epsilon must be > 0, got {epsilon}"
            )));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(LdpError::param(format!(
                "delta must lie in [0, 1), got {delta}"
            )));
        }
        Ok(Self { epsilon, delta })
    }

    /// Pure ε-LDP budget (δ = 0).
    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }

    /// The one-bit encoder needs ε ≤ ln 2 so that its bias stays in (0, 1].
    pub fn require_one_bit(&self) -> Result<()> {
        if self.epsilon > std::f64::consts::LN_2 {
            return Err(LdpError::param(format!(
                "one-bit protocol requires epsilon <= ln 2, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Whether a mechanism randomizes at all. `Disabled` computes the exact,
/// non-private quantity and exists for reference runs and tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Privacy {
    Private(PrivacyBudget),
    Disabled,
}

impl Privacy {
    pub fn budget(&self) -> Option<&PrivacyBudget> {
        match self {
            Privacy::Private(b) => Some(b),
            Privacy::Disabled => None,
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.budget().map(|b| b.epsilon)
    }
}

/// Basic-composition ledger for one player's releases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetAccount {
    /// Total ε the mechanism was configured with.
    pub declared: f64,
    /// ε spent by each individual release of one player.
    pub per_release: Vec<f64>,
}

impl BudgetAccount {
    pub fn uniform(declared: f64, per_release: f64, releases: usize) -> Self {
        Self {
            declared,
            per_release: vec![per_release; releases],
        }
    }

    pub fn none() -> Self {
        Self {
            declared: 0.0,
            per_release: Vec::new(),
        }
    }

    pub fn spent(&self) -> f64 {
        self.per_release.iter().sum()
    }

    pub fn within_declared(&self) -> bool {
        self.spent() <= self.declared + 1e-12
    }
}

/// A player's scalar input for the averaging protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayerValue {
    value: f64,
    bound: f64,
}

impl PlayerValue {
    pub fn new(value: f64, bound: f64) -> Result<Self> {
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(LdpError::param(format!(
                "bound must be positive, got {bound}"
            )));
        }
        if !(0.0..=bound).contains(&value) {
            return Err(LdpError::param(format!(
                "value {value} outside [0, {bound}]"
            )));
        }
        Ok(Self { value, bound })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }
}

/// One draw from the centered Laplace law with the given scale.
pub fn laplace_draw<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(LdpError::param(format!(
            "laplace scale must be positive, got {scale}"
        )));
    }
    Ok(laplace_unchecked(scale, rng))
}

#[inline]
pub(crate) fn laplace_unchecked<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let mut u: f64 = rng.random();
    while u == 0.0 {
        u = rng.random();
    }
    let centered = u - 0.5;
    -scale * centered.signum() * (1.0 - 2.0 * centered.abs()).ln()
}

/// One draw from N(0, std²).
pub fn gaussian_draw<R: Rng + ?Sized>(std: f64, rng: &mut R) -> Result<f64> {
    if !(std > 0.0) || !std.is_finite() {
        return Err(LdpError::param(format!(
            "gaussian std must be positive, got {std}"
        )));
    }
    Ok(gaussian_unchecked(std, rng))
}

#[inline]
pub(crate) fn gaussian_unchecked<R: Rng + ?Sized>(std: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    std * z
}

/// Log-density of Laplace(0, scale) at `x`.
pub fn laplace_log_density(x: f64, scale: f64) -> f64 {
    -(2.0 * scale).ln() - x.abs() / scale
}

/// Log likelihood ratio ln(p(z | v) / p(z | v')) of the Laplace randomizer
/// `z = v + Lap(bound / ε)`.
pub fn laplace_privacy_loss(z: f64, v: f64, v_prime: f64, bound: f64, epsilon: f64) -> f64 {
    (epsilon / bound) * ((z - v_prime).abs() - (z - v).abs())
}

/// The player's side of the scalar protocol: `v + Lap(b/ε)`.
#[derive(Debug, Clone, Copy)]
pub struct LaplaceRandomizer {
    scale: f64,
}

impl LaplaceRandomizer {
    pub fn new(bound: f64, epsilon: f64) -> Result<Self> {
        if !(bound > 0.0) || !(epsilon > 0.0) {
            return Err(LdpError::param(
                "laplace randomizer needs bound > 0 and epsilon > 0",
            ));
        }
        let scale = bound / epsilon;
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(LdpError::param(format!(
                "laplace scale {scale} is not usable"
            )));
        }
        Ok(Self { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    #[inline]
    pub fn randomize<R: Rng + ?Sized>(&self, value: f64, rng: &mut R) -> f64 {
        value + laplace_unchecked(self.scale, rng)
    }
}

/// Scalar LDP average: every player sends `v_i + Lap(b/ε)`; the server averages.
pub fn ldp_avg_1d<R: Rng + ?Sized>(
    values: &[PlayerValue],
    budget: &PrivacyBudget,
    rng: &mut R,
) -> Result<f64> {
    let first = values
        .first()
        .ok_or_else(|| LdpError::param("ldp_avg_1d needs at least one player"))?;
    let bound = first.bound();
    if values.iter().any(|v| v.bound() != bound) {
        return Err(LdpError::param("all players must share the same bound"));
    }
    let randomizer = LaplaceRandomizer::new(bound, budget.epsilon)?;
    let sum: f64 = values
        .iter()
        .map(|v| randomizer.randomize(v.value(), rng))
        .sum();
    Ok(sum / values.len() as f64)
}

/// High-probability accuracy radius of the scalar protocol,
/// `2 b sqrt(ln(2/β)) / (sqrt(n) ε)`.
pub fn avg_1d_error_bound(n: usize, bound: f64, epsilon: f64, beta: f64) -> f64 {
    2.0 * bound * (2.0 / beta).ln().sqrt() / ((n as f64).sqrt() * epsilon)
}

/// Message of the vector protocol: one coordinate index and its randomized value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledCoordinate {
    pub index: usize,
    pub value: f64,
}

/// Output of the vector protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct VecAverage {
    pub mean: Vec<f64>,
    /// Number of players that reported each coordinate.
    pub counts: Vec<usize>,
    /// Set when n is below the sample-size condition `8p ln(8p/β)`.
    pub warning: Option<String>,
}

/// Vector LDP average with O(1) work per player: each player picks one
/// coordinate uniformly at random and privatizes only that coordinate at the
/// full budget. The server averages each coordinate over the players that
/// reported it, which rescales the per-player contribution by roughly `p`.
#[derive(Debug, Clone, Copy)]
pub struct VectorAvgProtocol {
    dim: usize,
    randomizer: LaplaceRandomizer,
}

impl VectorAvgProtocol {
    pub fn new(dim: usize, bound: f64, budget: &PrivacyBudget) -> Result<Self> {
        if dim == 0 {
            return Err(LdpError::param("vector dimension must be positive"));
        }
        Ok(Self {
            dim,
            randomizer: LaplaceRandomizer::new(bound, budget.epsilon)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Player side. `coordinate(j)` is only evaluated for the sampled `j`.
    pub fn player_message<R, F>(&self, coordinate: F, rng: &mut R) -> SampledCoordinate
    where
        R: Rng + ?Sized,
        F: FnOnce(usize) -> f64,
    {
        let index = rng.random_range(0..self.dim);
        let value = self.randomizer.randomize(coordinate(index), rng);
        SampledCoordinate { index, value }
    }

    /// Server side.
    pub fn aggregate<I>(&self, messages: I) -> Result<VecAverage>
    where
        I: IntoIterator<Item = SampledCoordinate>,
    {
        let mut sums = vec![0.0; self.dim];
        let mut counts = vec![0usize; self.dim];
        let mut n = 0usize;
        for m in messages {
            if m.index >= self.dim {
                return Err(LdpError::Protocol(format!(
                    "coordinate index {} out of range {}",
                    m.index, self.dim
                )));
            }
            sums[m.index] += m.value;
            counts[m.index] += 1;
            n += 1;
        }
        if let Some(j) = counts.iter().position(|&c| c == 0) {
            return Err(LdpError::Estimation(format!(
                "no player reported coordinate {j} (n = {n}, dim = {})",
                self.dim
            )));
        }
        let mean = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| s / c as f64)
            .collect();
        Ok(VecAverage {
            mean,
            counts,
            warning: vec_avg_warning(n, self.dim, DEFAULT_FAILURE_PROB),
        })
    }
}

/// Warning text when `n < 8p ln(8p/β)`.
pub fn vec_avg_warning(n: usize, dim: usize, beta: f64) -> Option<String> {
    let p = dim as f64;
    let threshold = 8.0 * p * (8.0 * p / beta).ln();
    ((n as f64) < threshold).then(|| {
        format!(
            "n = {n} is below the vector-average sample condition 8p ln(8p/beta) = {threshold:.0}"
        )
    })
}

/// Vector LDP average over materialized vectors, each coordinate in `[0, bound]`.
pub fn ldp_avg_vec<R: Rng + ?Sized>(
    vectors: &[Vec<f64>],
    bound: f64,
    budget: &PrivacyBudget,
    rng: &mut R,
) -> Result<VecAverage> {
    let dim = vectors
        .first()
        .map(Vec::len)
        .ok_or_else(|| LdpError::param("ldp_avg_vec needs at least one player"))?;
    for v in vectors {
        if v.len() != dim {
            return Err(LdpError::param(format!(
                "inconsistent dimensions: {} vs {dim}",
                v.len()
            )));
        }
        if v.iter().any(|x| !(0.0..=bound).contains(x)) {
            return Err(LdpError::param(format!("coordinate outside [0, {bound}]")));
        }
    }
    let protocol = VectorAvgProtocol::new(dim, bound, budget)?;
    let messages: Vec<_> = vectors
        .iter()
        .map(|v| protocol.player_message(|j| v[j], rng))
        .collect();
    protocol.aggregate(messages)
}

/// Shared public Laplace(1/ε) strings, regenerated from the seed on demand.
#[derive(Debug, Clone)]
pub struct PublicRandomness {
    seed: u64,
    scale: f64,
    streams: crate::rng::TaggedStreams,
}

impl PublicRandomness {
    pub fn new(seed: u64, budget: &PrivacyBudget) -> Self {
        Self {
            seed,
            scale: 1.0 / budget.epsilon,
            streams: SeedStream::new(seed).streams(tag::PUBLIC),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Public draw `y_i`.
    pub fn draw(&self, player: usize) -> f64 {
        laplace_unchecked(self.scale, &mut self.streams.rng(player as u64))
    }
}

/// A single transmitted bit together with the bias it was drawn with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneBitMessage {
    pub bit: u8,
    pub bias: f64,
}

/// Closed-form bias `(1/2) exp(-ε(|y − v| − |y|))`.
pub fn onebit_bias(v: f64, y: f64, epsilon: f64) -> f64 {
    0.5 * (-epsilon * ((y - v).abs() - y.abs())).exp()
}

/// Bias computed literally as half the ratio of the Laplace(1/ε) densities of
/// `v + Lap` and `Lap` at `y`.
pub fn onebit_bias_from_densities(v: f64, y: f64, epsilon: f64) -> f64 {
    let scale = 1.0 / epsilon;
    0.5 * (laplace_log_density(y - v, scale) - laplace_log_density(y, scale)).exp()
}

/// ln(p(v)/p(v')) for the bit-one branch.
pub fn onebit_privacy_loss(y: f64, v: f64, v_prime: f64, epsilon: f64) -> f64 {
    epsilon * ((y - v_prime).abs() - (y - v).abs())
}

/// Player side of the one-bit protocol for a value in [0, 1].
pub fn onebit_encode<R: Rng + ?Sized>(
    v: f64,
    y: f64,
    budget: &PrivacyBudget,
    rng: &mut R,
) -> Result<OneBitMessage> {
    budget.require_one_bit()?;
    if !(0.0..=1.0).contains(&v) {
        return Err(LdpError::param(format!("one-bit value {v} outside [0, 1]")));
    }
    let bias = onebit_bias(v, y, budget.epsilon);
    let bit = u8::from(rng.random::<f64>() < bias);
    Ok(OneBitMessage { bit, bias })
}

/// Server side for one partition cell: `(2/|I|) Σ_{i∈I} 1[b_i = 1] y_i`.
///
/// The factor 2 undoes the 1/2 in the encoder bias, giving an unbiased
/// estimate of the cell mean of `v`.
pub fn onebit_decode(bits: &[u8], publics: &PublicRandomness, cell: &[usize]) -> Result<f64> {
    if cell.is_empty() {
        return Err(LdpError::Estimation(
            "empty partition cell; merge cells or abort the run".into(),
        ));
    }
    let mut sum = 0.0;
    for &i in cell {
        let bit = *bits
            .get(i)
            .ok_or_else(|| LdpError::Protocol(format!("player {i} sent no bit")))?;
        if bit == 1 {
            sum += publics.draw(i);
        }
    }
    Ok(2.0 * sum / cell.len() as f64)
}

/// Per-run communication accounting.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TranscriptSummary {
    pub players: usize,
    /// Bits sent by each player (constant across players in every mechanism here).
    pub bits_per_player: u64,
    /// Real numbers sent by each player (0 for bit protocols).
    pub reals_per_player: u64,
    pub total_bits: u64,
}

impl TranscriptSummary {
    pub fn bits(players: usize, bits_per_player: u64) -> Self {
        Self {
            players,
            bits_per_player,
            reals_per_player: 0,
            total_bits: players as u64 * bits_per_player,
        }
    }

    pub fn reals(players: usize, reals_per_player: u64) -> Self {
        Self {
            players,
            bits_per_player: 64 * reals_per_player,
            reals_per_player,
            total_bits: players as u64 * 64 * reals_per_player,
        }
    }
}

/// One row of an optional per-player transcript dump.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEntry {
    pub player_index: usize,
    pub message_bits: u64,
    pub payload: String,
}

/// Writes `player_index,message_bits,payload` CSV.
pub fn write_transcript_csv<W: Write>(
    out: W,
    entries: impl IntoIterator<Item = TranscriptEntry>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["player_index", "message_bits", "payload"])?;
    for e in entries {
        w.write_record([
            e.player_index.to_string(),
            e.message_bits.to_string(),
            e.payload,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn laplace_moments() {
        let mut r = rng(1);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| laplace_draw(1.0, &mut r).unwrap())
            .collect();
        let (mean, _) = moments(&xs);
        assert!(mean.abs() < 0.01, "mean {mean}");
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        assert!(median.abs() < 0.01, "median {median}");

        let ys: Vec<f64> = (0..1_000_000)
            .map(|_| laplace_draw(2.0, &mut r).unwrap())
            .collect();
        let (_, var) = moments(&ys);
        assert!((var - 8.0).abs() / 8.0 < 0.05, "var {var}");
    }

    #[test]
    fn gaussian_moments() {
        let mut r = rng(2);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| gaussian_draw(1.0, &mut r).unwrap())
            .collect();
        let (mean, _) = moments(&xs);
        assert!(mean.abs() <= 0.01);
        let inside = xs.iter().filter(|x| x.abs() <= 1.96).count() as f64 / xs.len() as f64;
        assert!((inside - 0.95).abs() < 0.01, "coverage {inside}");
        let ys: Vec<f64> = (0..1_000_000)
            .map(|_| gaussian_draw(3.0, &mut r).unwrap())
            .collect();
        let (_, var) = moments(&ys);
        assert!((var - 9.0).abs() / 9.0 < 0.05);
    }

    #[test]
    fn noise_parameter_errors() {
        let mut r = rng(0);
        assert!(matches!(
            laplace_draw(0.0, &mut r),
            Err(LdpError::Parameter(_))
        ));
        assert!(matches!(
            laplace_draw(-1.0, &mut r),
            Err(LdpError::Parameter(_))
        ));
        assert!(matches!(
            gaussian_draw(0.0, &mut r),
            Err(LdpError::Parameter(_))
        ));
        assert!(PrivacyBudget::new(0.0, 0.0).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0).is_err());
        assert!(PlayerValue::new(1.5, 1.0).is_err());
    }

    #[test]
    fn avg_1d_empty_is_error() {
        let b = PrivacyBudget::pure(1.0).unwrap();
        assert!(ldp_avg_1d(&[], &b, &mut rng(0)).is_err());
    }

    #[test]
    fn avg_1d_zero_signal_is_unbiased() {
        let b = PrivacyBudget::pure(1.0).unwrap();
        let vals = vec![PlayerValue::new(0.0, 1.0).unwrap(); 100];
        let mut r = rng(3);
        let reps = 10_000;
        let mean: f64 = (0..reps)
            .map(|_| ldp_avg_1d(&vals, &b, &mut r).unwrap())
            .sum::<f64>()
            / reps as f64;
        // std of one output is sqrt(2)/10; of the replay mean, ~0.0014
        assert!(mean.abs() < 0.006, "mean {mean}");
    }

    #[test]
    fn avg_1d_vanishing_noise() {
        let b = PrivacyBudget::pure(1e9).unwrap();
        let vals = vec![PlayerValue::new(0.3, 1.0).unwrap()];
        let a = ldp_avg_1d(&vals, &b, &mut rng(4)).unwrap();
        assert!((a - 0.3).abs() < 1e-6);
    }

    #[test]
    fn avg_1d_error_bound_coverage() {
        let b = PrivacyBudget::pure(1.0).unwrap();
        let vals = vec![PlayerValue::new(0.5, 1.0).unwrap(); 10_000];
        let radius = avg_1d_error_bound(10_000, 1.0, 1.0, 0.05);
        assert!((radius - 0.0384).abs() < 1e-3);
        let mut r = rng(5);
        let hits = (0..200)
            .filter(|_| (ldp_avg_1d(&vals, &b, &mut r).unwrap() - 0.5).abs() <= radius)
            .count();
        assert!(hits >= 190, "coverage {hits}/200");
    }

    #[test]
    fn avg_vec_constant_signal_and_errors() {
        let b = PrivacyBudget::pure(1.0).unwrap();
        let vectors = vec![vec![0.2, 0.4, 0.6]; 60_000];
        let out = ldp_avg_vec(&vectors, 1.0, &b, &mut rng(6)).unwrap();
        for (m, c) in out.mean.iter().zip([0.2, 0.4, 0.6]) {
            assert!((m - c).abs() < 0.05, "{m} vs {c}");
        }
        assert!(out.warning.is_none());
        let bad = vec![vec![0.1, 0.2], vec![0.1]];
        assert!(ldp_avg_vec(&bad, 1.0, &b, &mut rng(0)).is_err());
    }

    #[test]
    fn avg_vec_warns_below_threshold() {
        let b = PrivacyBudget::pure(1.0).unwrap();
        let vectors = vec![vec![0.5; 4]; 200];
        let out = ldp_avg_vec(&vectors, 1.0, &b, &mut rng(7)).unwrap();
        assert!(out.warning.is_some());
    }

    #[test]
    fn avg_vec_uniform_cube_accuracy() {
        // Frozen regression target: max-coordinate deviation <= 0.05 in >= 90% of trials.
        let b = PrivacyBudget::pure(1.0).unwrap();
        let mut data_rng = rng(8);
        let vectors: Vec<Vec<f64>> = (0..100_000)
            .map(|_| (0..4).map(|_| data_rng.random::<f64>()).collect())
            .collect();
        let truth: Vec<f64> = (0..4)
            .map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / vectors.len() as f64)
            .collect();
        let mut r = rng(9);
        let good = (0..100)
            .filter(|_| {
                let out = ldp_avg_vec(&vectors, 1.0, &b, &mut r).unwrap();
                out.mean
                    .iter()
                    .zip(&truth)
                    .map(|(a, t)| (a - t).abs())
                    .fold(0.0, f64::max)
                    <= 0.05
            })
            .count();
        assert!(good >= 90, "{good}/100");
    }

    #[test]
    fn onebit_bias_examples() {
        assert_eq!(onebit_bias(0.0, 3.7, 0.5), 0.5);
        assert_eq!(onebit_bias(0.0, -2.0, 0.1), 0.5);
        let p = onebit_bias(1.0, 10.0, 0.5);
        assert!((p - 0.5 * 0.5f64.exp()).abs() < 1e-15);
        assert!((p - 0.8244).abs() < 1e-4);
    }

    #[test]
    fn onebit_bias_matches_density_ratio() {
        let mut r = rng(10);
        for _ in 0..10_000 {
            let v: f64 = r.random();
            let y = laplace_draw(3.0, &mut r).unwrap();
            let eps = r.random_range(0.01..std::f64::consts::LN_2);
            let a = onebit_bias(v, y, eps);
            let b = onebit_bias_from_densities(v, y, eps);
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            assert!(a >= (-eps).exp() / 2.0 - 1e-15 && a <= eps.exp() / 2.0 + 1e-15);
        }
    }

    #[test]
    fn onebit_rejects_large_epsilon() {
        let b = PrivacyBudget::pure(0.8).unwrap();
        assert!(onebit_encode(0.5, 0.0, &b, &mut rng(0)).is_err());
    }

    #[test]
    fn onebit_expected_y_times_bit_is_half_v() {
        let b = PrivacyBudget::pure(0.5).unwrap();
        let mut r = rng(11);
        for v in [0.0, 0.3, 1.0] {
            let reps = 1_000_000;
            let mut acc = 0.0;
            for _ in 0..reps {
                let y = laplace_draw(2.0, &mut r).unwrap();
                let m = onebit_encode(v, y, &b, &mut r).unwrap();
                acc += y * m.bit as f64;
            }
            let est = acc / reps as f64;
            assert!((est - v / 2.0).abs() < 0.01, "v={v}: {est}");
        }
    }

    fn encode_cell(
        values: &[f64],
        budget: &PrivacyBudget,
        seed: u64,
    ) -> (Vec<u8>, PublicRandomness) {
        let publics = PublicRandomness::new(seed, budget);
        let players = SeedStream::new(seed).streams(tag::PLAYER);
        let bits = values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                onebit_encode(v, publics.draw(i), budget, &mut players.rng(i as u64))
                    .unwrap()
                    .bit
            })
            .collect();
        (bits, publics)
    }

    #[test]
    fn onebit_decode_cell_mean() {
        let b = PrivacyBudget::pure(0.5).unwrap();
        let n = 100_000;
        let values = vec![0.7; n];
        let cell: Vec<usize> = (0..n).collect();
        let good = (0..100)
            .filter(|&t| {
                let (bits, publics) = encode_cell(&values, &b, 1000 + t);
                (onebit_decode(&bits, &publics, &cell).unwrap() - 0.7).abs() <= 0.05
            })
            .count();
        assert!(good >= 90, "{good}/100");
    }

    #[test]
    fn onebit_decode_zero_and_edge_cases() {
        let b = PrivacyBudget::pure(0.5).unwrap();
        let n = 200_000;
        let (bits, publics) = encode_cell(&vec![0.0; n], &b, 3);
        let cell: Vec<usize> = (0..n).collect();
        let est = onebit_decode(&bits, &publics, &cell).unwrap();
        assert!(est.abs() < 0.05, "{est}");

        let single = onebit_decode(&bits, &publics, &[5]).unwrap();
        let expected = if bits[5] == 1 {
            2.0 * publics.draw(5)
        } else {
            0.0
        };
        assert_eq!(single, expected);

        assert!(matches!(
            onebit_decode(&bits, &publics, &[]),
            Err(LdpError::Estimation(_))
        ));
        assert!(matches!(
            onebit_decode(&bits, &publics, &[n + 1]),
            Err(LdpError::Protocol(_))
        ));
    }

    #[test]
    fn public_randomness_regenerates() {
        let b = PrivacyBudget::pure(0.5).unwrap();
        let a = PublicRandomness::new(9, &b);
        let c = PublicRandomness::new(9, &b);
        for i in [0, 1, 77, 1_000_000] {
            assert_eq!(a.draw(i).to_bits(), c.draw(i).to_bits());
        }
    }

    #[test]
    fn transcript_csv_header() {
        let mut buf = Vec::new();
        let rows = [TranscriptEntry {
            player_index: 0,
            message_bits: 1,
            payload: "1".into(),
        }];
        write_transcript_csv(&mut buf, rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "player_index,message_bits,payload\n0,1,1\n"
        );
    }

    #[test]
    fn budget_account_sums() {
        let acc = BudgetAccount::uniform(2.0, 2.0 / 27.0, 27);
        assert!((acc.spent() - 2.0).abs() < 1e-12);
        assert!(acc.within_declared());
    }
}
