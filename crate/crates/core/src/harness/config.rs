//! Experiment configuration, read from TOML.
//!
//! ```toml
//! mechanism = "bernstein"
//! seed = 7
//! trials = 20
//!
//! [dataset]
//! family = "uniform-cube"
//! p = 1
//! n = 100000
//!
//! [privacy]
//! epsilon = 2.0
//!
//! [sweep]
//! n = [10000, 100000, 1000000]
//!
//! [bernstein]
//! k = 8
//! h = 1
//! ```
//!
//! A swept list that is absent falls back to the single scalar value of the
//! corresponding section. A list that is present but empty yields no cells.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LdpError, Result};
use crate::glm::ScalarLoss;
use crate::query::MarginalEncoding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    Bernstein,
    Onebit,
    Hinge,
    GeneralLinear,
    Marginals,
    SmoothQueries,
    AvgBench,
}

impl Mechanism {
    pub const ALL: [Mechanism; 7] = [
        Mechanism::Bernstein,
        Mechanism::Onebit,
        Mechanism::Hinge,
        Mechanism::GeneralLinear,
        Mechanism::Marginals,
        Mechanism::SmoothQueries,
        Mechanism::AvgBench,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mechanism::Bernstein => "bernstein",
            Mechanism::Onebit => "onebit",
            Mechanism::Hinge => "hinge",
            Mechanism::GeneralLinear => "general-linear",
            Mechanism::Marginals => "marginals",
            Mechanism::SmoothQueries => "smooth-queries",
            Mechanism::AvgBench => "avg-bench",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mechanism {
    type Err = LdpError;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| LdpError::config(format!("unknown mechanism '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    UniformCube,
    GaussianBallClipped,
    SeparableTwoClass,
    BernoulliBits,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::UniformCube => "uniform-cube",
            Family::GaussianBallClipped => "gaussian-ball-clipped",
            Family::SeparableTwoClass => "separable-two-class",
            Family::BernoulliBits => "bernoulli-bits",
        }
    }
}

fn default_p() -> usize {
    1
}
fn default_n() -> usize {
    10_000
}
fn default_margin() -> f64 {
    0.2
}
fn default_q() -> f64 {
    0.3
}
fn default_sigma() -> f64 {
    0.5
}
fn default_flip() -> f64 {
    0.1
}

/// Where the records come from. Either `family` or `path` must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub family: Option<Family>,
    /// CSV of numeric rows with a header line. For labelled mechanisms the
    /// last column is the label.
    pub path: Option<PathBuf>,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Seed of the data generator; defaults to the run seed.
    pub seed: Option<u64>,
    /// Half-width of the empty slab around the separating hyperplane.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Bit probability of `bernoulli-bits`.
    #[serde(default = "default_q")]
    pub q: f64,
    /// Coordinate standard deviation of `gaussian-ball-clipped`.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Label flip probability of `gaussian-ball-clipped`.
    #[serde(default = "default_flip")]
    pub flip: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            family: None,
            path: None,
            p: default_p(),
            n: default_n(),
            seed: None,
            margin: default_margin(),
            q: default_q(),
            sigma: default_sigma(),
            flip: default_flip(),
        }
    }
}

fn default_epsilon() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySpec {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub delta: f64,
    /// Runs the mechanism without noise (diagnostics only).
    #[serde(default)]
    pub disabled: bool,
}

impl Default for PrivacySpec {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
            delta: 0.0,
            disabled: false,
        }
    }
}

/// Swept parameters. `None` means "use the scalar setting".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub n: Option<Vec<usize>>,
    pub epsilon: Option<Vec<f64>>,
    pub k: Option<Vec<usize>>,
    pub d: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CubeLossKind {
    /// `|w - x|^2 / p`.
    #[default]
    Quadratic,
    /// `|w - x|_1 / p`.
    Absolute,
}

impl CubeLossKind {
    pub fn value(&self, w: &[f64], x: &[f64]) -> f64 {
        let p = w.len() as f64;
        match self {
            CubeLossKind::Quadratic => {
                w.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p
            }
            CubeLossKind::Absolute => w.iter().zip(x).map(|(a, b)| (a - b).abs()).sum::<f64>() / p,
        }
    }

    pub fn subgradient(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        let p = w.len() as f64;
        match self {
            CubeLossKind::Quadratic => w.iter().zip(x).map(|(a, b)| 2.0 * (a - b) / p).collect(),
            CubeLossKind::Absolute => w.iter().zip(x).map(|(a, b)| (a - b).signum() / p).collect(),
        }
    }
}

fn default_k() -> usize {
    8
}
fn default_h() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BernsteinSpec {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_h")]
    pub h: usize,
    #[serde(default)]
    pub loss: CubeLossKind,
}

impl Default for BernsteinSpec {
    fn default() -> Self {
        Self {
            k: default_k(),
            h: default_h(),
            loss: CubeLossKind::default(),
        }
    }
}

fn default_beta_smoothing() -> f64 {
    0.5
}
fn default_d() -> usize {
    3
}
fn default_radius() -> f64 {
    1.0
}
fn default_scalar_loss() -> String {
    "hinge".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlmSpec {
    /// Scalar loss for `general-linear` (`hinge`, `abs`, `logistic`, `half-square`).
    #[serde(default = "default_scalar_loss")]
    pub loss: String,
    #[serde(default = "default_beta_smoothing")]
    pub beta_smoothing: f64,
    #[serde(default = "default_d")]
    pub d: usize,
    /// SIGM iterations; the number of players when absent.
    pub iterations: Option<usize>,
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Draw an independent kink location per replica instead of one shared draw.
    #[serde(default)]
    pub per_replica_shift: bool,
}

impl Default for GlmSpec {
    fn default() -> Self {
        Self {
            loss: default_scalar_loss(),
            beta_smoothing: default_beta_smoothing(),
            d: default_d(),
            iterations: None,
            radius: default_radius(),
            per_replica_shift: false,
        }
    }
}

impl GlmSpec {
    pub fn scalar_loss(&self) -> Result<ScalarLoss> {
        ScalarLoss::parse(&self.loss)
    }
}

fn default_marg_k() -> usize {
    2
}
fn default_gamma() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalsSpec {
    #[serde(default = "default_marg_k")]
    pub k: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub encoding: MarginalEncoding,
}

impl Default for MarginalsSpec {
    fn default() -> Self {
        Self {
            k: default_marg_k(),
            gamma: default_gamma(),
            encoding: MarginalEncoding::default(),
        }
    }
}

fn default_t() -> usize {
    8
}
fn default_bandwidths() -> Vec<f64> {
    vec![1.0, 0.8]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothSpec {
    #[serde(default = "default_t")]
    pub t: usize,
    /// Kernel centers; the origin when empty.
    #[serde(default)]
    pub centers: Vec<Vec<f64>>,
    #[serde(default = "default_bandwidths")]
    pub bandwidths: Vec<f64>,
}

impl Default for SmoothSpec {
    fn default() -> Self {
        Self {
            t: default_t(),
            centers: Vec::new(),
            bandwidths: default_bandwidths(),
        }
    }
}

fn default_bound() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvgSpec {
    /// Values are `bound * u` for the uniform-cube draws `u`.
    #[serde(default = "default_bound")]
    pub bound: f64,
}

impl Default for AvgSpec {
    fn default() -> Self {
        Self {
            bound: default_bound(),
        }
    }
}

fn default_seed() -> u64 {
    0
}
fn default_trials() -> usize {
    20
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mechanism: Option<Mechanism>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub privacy: PrivacySpec,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub bernstein: BernsteinSpec,
    #[serde(default)]
    pub glm: GlmSpec,
    #[serde(default)]
    pub marginals: MarginalsSpec,
    #[serde(default)]
    pub smooth: SmoothSpec,
    #[serde(default)]
    pub avg: AvgSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mechanism: None,
            seed: default_seed(),
            trials: default_trials(),
            workers: None,
            out: None,
            dataset: DatasetSpec::default(),
            privacy: PrivacySpec::default(),
            sweep: Sweep::default(),
            bernstein: BernsteinSpec::default(),
            glm: GlmSpec::default(),
            marginals: MarginalsSpec::default(),
            smooth: SmoothSpec::default(),
            avg: AvgSpec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LdpError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LdpError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LdpError::config(e.to_string()))
    }

    pub fn mechanism(&self) -> Result<Mechanism> {
        self.mechanism
            .ok_or_else(|| LdpError::config("no mechanism given"))
    }

    /// Family actually used: the configured one, or the mechanism's natural default.
    pub fn family(&self) -> Result<Family> {
        if let Some(f) = self.dataset.family {
            return Ok(f);
        }
        Ok(match self.mechanism()? {
            Mechanism::Bernstein | Mechanism::Onebit | Mechanism::AvgBench => Family::UniformCube,
            Mechanism::Hinge | Mechanism::GeneralLinear => Family::SeparableTwoClass,
            Mechanism::Marginals => Family::BernoulliBits,
            Mechanism::SmoothQueries => Family::GaussianBallClipped,
        })
    }

    pub fn n_values(&self) -> Vec<usize> {
        self.sweep.n.clone().unwrap_or_else(|| vec![self.dataset.n])
    }

    pub fn epsilon_values(&self) -> Vec<f64> {
        self.sweep
            .epsilon
            .clone()
            .unwrap_or_else(|| vec![self.privacy.epsilon])
    }

    /// Swept `k` for the grid mechanisms and marginals; a single dummy otherwise.
    pub fn k_values(&self) -> Vec<usize> {
        match self.mechanism {
            Some(Mechanism::Bernstein | Mechanism::Onebit) => self
                .sweep
                .k
                .clone()
                .unwrap_or_else(|| vec![self.bernstein.k]),
            Some(Mechanism::Marginals) => self
                .sweep
                .k
                .clone()
                .unwrap_or_else(|| vec![self.marginals.k]),
            _ => vec![0],
        }
    }

    /// Swept `d` for the generalized linear mechanisms; a single dummy otherwise.
    pub fn d_values(&self) -> Vec<usize> {
        match self.mechanism {
            Some(Mechanism::Hinge | Mechanism::GeneralLinear) => {
                self.sweep.d.clone().unwrap_or_else(|| vec![self.glm.d])
            }
            _ => vec![0],
        }
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        let mech = self.mechanism()?;
        let family = self.family()?;
        if self.dataset.p == 0 {
            return Err(LdpError::config("dataset.p must be positive"));
        }
        if self.n_values().contains(&0) {
            return Err(LdpError::config("every n must be positive"));
        }
        if !self.privacy.disabled {
            for e in self.epsilon_values() {
                if !(e > 0.0 && e.is_finite()) {
                    return Err(LdpError::config(format!(
                        "epsilon must be positive, got {e}"
                    )));
                }
            }
        }
        if !(0.0..1.0).contains(&self.privacy.delta) {
            return Err(LdpError::config("privacy.delta must lie in [0, 1)"));
        }
        let family_ok = match mech {
            Mechanism::Bernstein | Mechanism::Onebit | Mechanism::AvgBench => {
                family == Family::UniformCube
            }
            Mechanism::Hinge | Mechanism::GeneralLinear => {
                matches!(
                    family,
                    Family::SeparableTwoClass | Family::GaussianBallClipped
                )
            }
            Mechanism::Marginals => family == Family::BernoulliBits,
            Mechanism::SmoothQueries => {
                matches!(family, Family::UniformCube | Family::GaussianBallClipped)
            }
        };
        if self.dataset.path.is_none() && !family_ok {
            return Err(LdpError::config(format!(
                "dataset family {} does not fit mechanism {mech}",
                family.as_str()
            )));
        }
        match mech {
            Mechanism::Bernstein | Mechanism::Onebit => {
                if self.k_values().contains(&0) || self.bernstein.h == 0 {
                    return Err(LdpError::config(
                        "bernstein.k and bernstein.h must be positive",
                    ));
                }
            }
            Mechanism::Hinge | Mechanism::GeneralLinear => {
                if !self.privacy.disabled && self.privacy.delta <= 0.0 {
                    return Err(LdpError::config(
                        "the generalized linear mechanisms need privacy.delta > 0",
                    ));
                }
                if self.d_values().contains(&0) {
                    return Err(LdpError::config("glm.d must be positive"));
                }
                if !(self.glm.beta_smoothing > 0.0 && self.glm.beta_smoothing <= 1.0) {
                    return Err(LdpError::config("glm.beta_smoothing must lie in (0, 1]"));
                }
                self.glm.scalar_loss()?;
            }
            Mechanism::Marginals => {
                if self
                    .k_values()
                    .iter()
                    .any(|&k| k == 0 || k > self.dataset.p)
                {
                    return Err(LdpError::config("marginals.k must lie in 1..=p"));
                }
                if !(self.marginals.gamma > 0.0 && self.marginals.gamma < 1.0) {
                    return Err(LdpError::config("marginals.gamma must lie in (0, 1)"));
                }
            }
            Mechanism::SmoothQueries => {
                if self.smooth.t == 0 || self.smooth.bandwidths.iter().any(|b| !(*b > 0.0)) {
                    return Err(LdpError::config(
                        "smooth.t and every bandwidth must be positive",
                    ));
                }
                if self
                    .smooth
                    .centers
                    .iter()
                    .any(|c| c.len() != self.dataset.p)
                {
                    return Err(LdpError::config(
                        "every smooth.centers entry needs p coordinates",
                    ));
                }
            }
            Mechanism::AvgBench => {
                if !(self.avg.bound > 0.0) {
                    return Err(LdpError::config("avg.bound must be positive"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_toml_str("mechanism = \"avg-bench\"\n").unwrap();
        assert_eq!(cfg.mechanism, Some(Mechanism::AvgBench));
        assert_eq!(cfg.trials, 20);
        assert_eq!(cfg.family().unwrap(), Family::UniformCube);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("mechanism = \"hinge\"\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[dataset]\nfamily = \"nope\"\n").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::from_toml_str(
            "mechanism = \"marginals\"\n[dataset]\np = 8\n[sweep]\nn = [100, 1000]\n",
        )
        .unwrap();
        cfg.seed = 99;
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn sweep_defaults_and_empty_lists() {
        let cfg = ExperimentConfig::from_toml_str("mechanism = \"bernstein\"\n[sweep]\nn = []\n")
            .unwrap();
        assert!(cfg.n_values().is_empty());
        assert_eq!(cfg.k_values(), vec![8]);
        assert_eq!(cfg.d_values(), vec![0]);
    }

    #[test]
    fn mismatched_family_is_a_config_error() {
        let cfg = ExperimentConfig::from_toml_str(
            "mechanism = \"marginals\"\n[dataset]\nfamily = \"uniform-cube\"\np = 4\n",
        )
        .unwrap();
        assert!(matches!(cfg.validate(), Err(LdpError::Config(_))));
    }

    #[test]
    fn glm_needs_delta() {
        let cfg =
            ExperimentConfig::from_toml_str("mechanism = \"hinge\"\n[dataset]\np = 3\n").unwrap();
        assert!(cfg.validate().is_err());
    }
}
