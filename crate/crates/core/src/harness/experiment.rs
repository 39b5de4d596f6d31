//! Sweep orchestration.
//!
//! Every combination of the swept values is a cell; every cell runs
//! `trials` independent trials. Trial `j` of cell `c` draws all of its
//! randomness from the child stream `(TRIAL, c, j)` of the master seed, so
//! results do not depend on scheduling or on the worker count. The dataset
//! of a cell depends only on the dataset seed and `n`.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use log::info;
use rayon::prelude::*;

use super::baseline::{cube_baseline, glm_baseline, BaselineResult};
use super::config::{ExperimentConfig, Family, Mechanism};
use super::datasets::{generate_dataset, load_dataset_csv, Dataset, DatasetKind};
use super::report::{
    write_report_csv, write_timing_csv, write_transcript_summary_csv, Manifest, ReportRow,
    TimingRow, TranscriptRow,
};
use crate::bernstein_erm::{
    run_grid_mechanism, Constraint, CubeDataset, GridMode, GridProtocolConfig,
};
use crate::data::{BallDataset, BoxDataset, Records};
use crate::error::{LdpError, Result};
use crate::glm::{empirical_risk, glm_erm_run, Flavor, GlmConfig, ShiftSampling};
use crate::primitives::{
    ldp_avg_1d, BudgetAccount, PlayerValue, Privacy, PrivacyBudget, TranscriptSummary,
};
use crate::query::{
    disjunction_queries, disjunction_truth, gaussian_kernel, marginals_release,
    smooth_query_coefficients, smooth_release, DEFAULT_TABLE_CAP,
};
use crate::rng::{derive_seed, tag, SeedStream};

/// One point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub n: usize,
    pub epsilon: f64,
    /// Grid degree or marginal width; 0 when unused.
    pub k: usize,
    /// Bernstein degree of the GLM oracle; 0 when unused.
    pub d: usize,
}

/// Cartesian product of the swept values, `n` outermost.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &n in &cfg.n_values() {
        for &epsilon in &cfg.epsilon_values() {
            for &k in &cfg.k_values() {
                for &d in &cfg.d_values() {
                    out.push(Cell {
                        index: out.len(),
                        n,
                        epsilon,
                        k,
                        d,
                    });
                }
            }
        }
    }
    out
}

/// Everything a run produces.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub rows: Vec<ReportRow>,
    pub transcripts: Vec<TranscriptRow>,
    pub timings: Vec<TimingRow>,
    /// Trials that ended with an error row.
    pub failures: usize,
}

/// Data shared by every trial of the cells with a given `n`.
struct Prepared {
    data: Dataset,
    baseline: Option<BaselineResult>,
    /// Exact answers of the query workload.
    truths: Vec<f64>,
}

fn dataset_kind(mech: Mechanism) -> DatasetKind {
    match mech {
        Mechanism::Hinge | Mechanism::GeneralLinear => DatasetKind::Ball,
        Mechanism::Marginals => DatasetKind::Bits,
        _ => DatasetKind::Cube,
    }
}

fn kernel_centers(cfg: &ExperimentConfig) -> Vec<Vec<f64>> {
    if cfg.smooth.centers.is_empty() {
        vec![vec![0.0; cfg.dataset.p]]
    } else {
        cfg.smooth.centers.clone()
    }
}

/// `(center, bandwidth)` for every kernel query.
fn kernel_workload(cfg: &ExperimentConfig) -> Vec<(Vec<f64>, f64)> {
    kernel_centers(cfg)
        .into_iter()
        .flat_map(|c| cfg.smooth.bandwidths.iter().map(move |&h| (c.clone(), h)))
        .collect()
}

fn prepare(cfg: &ExperimentConfig, n: usize, k_values: &[usize]) -> Result<Prepared> {
    let mech = cfg.mechanism()?;
    let data = match &cfg.dataset.path {
        Some(path) => load_dataset_csv(path, dataset_kind(mech))?,
        None => {
            let seed = derive_seed(
                cfg.dataset.seed.unwrap_or(cfg.seed),
                &[tag::DATASET, n as u64],
            );
            generate_dataset(&cfg.dataset, cfg.family()?, n, seed)?
        }
    };
    let baseline = match (&data, mech) {
        (Dataset::Cube(r), Mechanism::Bernstein | Mechanism::Onebit) => {
            Some(cube_baseline(r, cfg.bernstein.loss)?)
        }
        (Dataset::Ball(b), Mechanism::Hinge) => Some(glm_baseline(
            b,
            crate::glm::ScalarLoss::Hinge,
            cfg.glm.radius,
        )?),
        (Dataset::Ball(b), Mechanism::GeneralLinear) => {
            Some(glm_baseline(b, cfg.glm.scalar_loss()?, cfg.glm.radius)?)
        }
        _ => None,
    };
    let truths = match (&data, mech) {
        (Dataset::Bits(b), Mechanism::Marginals) => {
            // Workload of the widest k; narrower cells use a prefix.
            let kmax = k_values.iter().copied().max().unwrap_or(1);
            disjunction_queries(b.p(), kmax)?
                .iter()
                .map(|y| disjunction_truth(b, y))
                .collect()
        }
        (Dataset::Cube(r), Mechanism::SmoothQueries) => kernel_workload(cfg)
            .iter()
            .map(|(c, h)| {
                let f = gaussian_kernel(c, *h);
                r.rows().map(&f).sum::<f64>() / r.len() as f64
            })
            .collect(),
        (Dataset::Ball(b), Mechanism::SmoothQueries) => kernel_workload(cfg)
            .iter()
            .map(|(c, h)| {
                let f = gaussian_kernel(c, *h);
                b.features().rows().map(&f).sum::<f64>() / b.len() as f64
            })
            .collect(),
        _ => Vec::new(),
    };
    Ok(Prepared {
        data,
        baseline,
        truths,
    })
}

fn privacy_for(cfg: &ExperimentConfig, epsilon: f64) -> Result<Privacy> {
    if cfg.privacy.disabled {
        Ok(Privacy::Disabled)
    } else {
        Ok(Privacy::Private(PrivacyBudget::new(
            epsilon,
            cfg.privacy.delta,
        )?))
    }
}

/// Mechanism-specific part of a report row.
#[derive(Default)]
struct TrialMetrics {
    error: Option<f64>,
    objective: Option<f64>,
    max_query_error: Option<f64>,
    mean_query_error: Option<f64>,
    t: Option<usize>,
    transcript: TranscriptSummary,
    budget: Option<BudgetAccount>,
    warnings: Vec<String>,
}

fn wrong_data(mech: Mechanism) -> LdpError {
    LdpError::config(format!("dataset shape does not fit mechanism {mech}"))
}

fn query_errors(answers: &[f64], truths: &[f64]) -> (f64, f64) {
    let errs: Vec<f64> = answers
        .iter()
        .zip(truths)
        .map(|(a, t)| (a - t).abs())
        .collect();
    let max = errs.iter().copied().fold(0.0, f64::max);
    (max, errs.iter().sum::<f64>() / errs.len().max(1) as f64)
}

fn run_trial(
    cfg: &ExperimentConfig,
    cell: &Cell,
    prep: &Prepared,
    seeds: &SeedStream,
) -> Result<TrialMetrics> {
    let mech = cfg.mechanism()?;
    let privacy = privacy_for(cfg, cell.epsilon)?;
    let mut m = TrialMetrics::default();
    match mech {
        Mechanism::AvgBench => {
            let Dataset::Cube(r) = &prep.data else {
                return Err(wrong_data(mech));
            };
            let bound = cfg.avg.bound;
            let values = r
                .rows()
                .map(|row| PlayerValue::new(bound * row[0], bound))
                .collect::<Result<Vec<_>>>()?;
            let mean = values.iter().map(|v| v.value()).sum::<f64>() / values.len() as f64;
            let a = match privacy {
                Privacy::Private(b) => ldp_avg_1d(&values, &b, &mut seeds.rng(tag::PLAYER, 0))?,
                Privacy::Disabled => mean,
            };
            m.error = Some((a - mean).abs());
            m.objective = Some(a);
            m.transcript = TranscriptSummary::reals(values.len(), 1);
            m.budget = Some(match privacy {
                Privacy::Private(b) => BudgetAccount::uniform(b.epsilon, b.epsilon, 1),
                Privacy::Disabled => BudgetAccount::none(),
            });
        }
        Mechanism::Bernstein | Mechanism::Onebit => {
            let Dataset::Cube(r) = &prep.data else {
                return Err(wrong_data(mech));
            };
            let loss = cfg.bernstein.loss;
            let p = r.dim();
            let data = CubeDataset::new(r.clone(), p, move |w, x| loss.value(w, x))?;
            let mode = if mech == Mechanism::Onebit {
                GridMode::OneBit
            } else {
                GridMode::LaplacePerPoint
            };
            let grid_cfg = GridProtocolConfig::new(cell.k, cfg.bernstein.h, privacy, mode);
            let run = run_grid_mechanism(&data, &grid_cfg, &Constraint::unit_cube(p), seeds)?;
            let obj = data.empirical_risk(&run.w_priv);
            m.objective = Some(obj);
            m.transcript = run.transcript;
            m.budget = Some(run.budget);
            m.warnings = run.warnings;
        }
        Mechanism::Hinge | Mechanism::GeneralLinear => {
            let Dataset::Ball(b) = &prep.data else {
                return Err(wrong_data(mech));
            };
            let flavor = if mech == Mechanism::Hinge {
                Flavor::Hinge
            } else {
                let shift = if cfg.glm.per_replica_shift {
                    ShiftSampling::PerReplica
                } else {
                    ShiftSampling::Shared
                };
                Flavor::GeneralLinear {
                    loss: cfg.glm.scalar_loss()?,
                    shift,
                }
            };
            let loss = flavor.loss();
            let glm_cfg = GlmConfig {
                flavor,
                beta_smoothing: cfg.glm.beta_smoothing,
                d: cell.d,
                privacy,
                iterations: cfg.glm.iterations,
                radius: cfg.glm.radius,
            };
            let run = glm_erm_run(b, &glm_cfg, seeds)?;
            m.objective = Some(empirical_risk(b, loss, &run.w));
            m.transcript = run.transcript;
            m.budget = Some(run.budget);
        }
        Mechanism::Marginals => {
            let Dataset::Bits(b) = &prep.data else {
                return Err(wrong_data(mech));
            };
            let table = marginals_release(
                b,
                cell.k,
                cfg.marginals.gamma,
                &privacy,
                cfg.marginals.encoding,
                seeds,
                DEFAULT_TABLE_CAP,
            )?;
            let queries = disjunction_queries(b.p(), cell.k)?;
            let answers = queries
                .iter()
                .map(|y| table.answer(y).map(|a| a.clamped))
                .collect::<Result<Vec<_>>>()?;
            let (max, mean) = query_errors(&answers, &prep.truths[..queries.len()]);
            m.error = Some(max);
            m.max_query_error = Some(max);
            m.mean_query_error = Some(mean);
            m.t = Some(table.degree);
            m.transcript = table.transcript;
            m.budget = Some(table.budget);
            m.warnings = table.warnings;
        }
        Mechanism::SmoothQueries => {
            let records: &Records = match &prep.data {
                Dataset::Cube(r) => r,
                Dataset::Ball(b) => b.features(),
                Dataset::Bits(_) => return Err(wrong_data(mech)),
            };
            let boxed = BoxDataset::new(records.clone())?;
            let t = cfg.smooth.t;
            let release = smooth_release(&boxed, t, &privacy, seeds, DEFAULT_TABLE_CAP)?;
            let answers = kernel_workload(cfg)
                .iter()
                .map(|(c, h)| {
                    let coeffs = smooth_query_coefficients(
                        gaussian_kernel(c, *h),
                        boxed.p(),
                        t,
                        DEFAULT_TABLE_CAP,
                    )?;
                    release.answer(&coeffs)
                })
                .collect::<Result<Vec<_>>>()?;
            let (max, mean) = query_errors(&answers, &prep.truths);
            m.error = Some(max);
            m.max_query_error = Some(max);
            m.mean_query_error = Some(mean);
            m.t = Some(t);
            m.transcript = release.transcript;
            m.budget = Some(release.budget);
            m.warnings = release.warnings;
        }
    }
    if let Some(b) = &m.budget {
        if !b.within_declared() {
            return Err(LdpError::Protocol(format!(
                "mechanism spent epsilon {} above the declared {}",
                b.spent(),
                b.declared
            )));
        }
    }
    Ok(m)
}

fn base_row(cfg: &ExperimentConfig, cell: &Cell, trial: usize, seed: u64, p: usize) -> ReportRow {
    let mech = cfg.mechanism.expect("validated");
    let private = !cfg.privacy.disabled;
    let (k, h, d, gamma) = match mech {
        Mechanism::Bernstein | Mechanism::Onebit => {
            (Some(cell.k), Some(cfg.bernstein.h), None, None)
        }
        Mechanism::Hinge | Mechanism::GeneralLinear => (None, None, Some(cell.d), None),
        Mechanism::Marginals => (Some(cell.k), None, None, Some(cfg.marginals.gamma)),
        _ => (None, None, None, None),
    };
    let uses_delta = matches!(mech, Mechanism::Hinge | Mechanism::GeneralLinear);
    ReportRow {
        mechanism: mech.to_string(),
        cell: cell.index,
        trial,
        seed,
        n: cell.n,
        p,
        epsilon: private.then_some(cell.epsilon),
        delta: (private && uses_delta).then_some(cfg.privacy.delta),
        k,
        h,
        d,
        gamma,
        ..ReportRow::default()
    }
}

struct TrialOutput {
    row: ReportRow,
    transcript: Option<TranscriptRow>,
    timing: TimingRow,
}

fn execute(cfg: &ExperimentConfig, cell: &Cell, trial: usize, prep: &Prepared) -> TrialOutput {
    let seeds = SeedStream::new(cfg.seed).child(&[tag::TRIAL, cell.index as u64, trial as u64]);
    let mut row = base_row(cfg, cell, trial, seeds.master(), prep.data.p());
    let start = Instant::now();
    let result = run_trial(cfg, cell, prep, &seeds);
    let wall_seconds = start.elapsed().as_secs_f64();
    let transcript = match result {
        Ok(m) => {
            row.objective = m.objective;
            row.t = m.t;
            row.max_query_error = m.max_query_error;
            row.mean_query_error = m.mean_query_error;
            if let (Some(obj), Some(base)) = (m.objective, &prep.baseline) {
                row.baseline_objective = Some(base.value);
                row.excess_risk = Some(obj - base.value);
                row.error = Some(obj - base.value);
            } else {
                row.error = m.error;
            }
            row.bits_per_player = Some(m.transcript.bits_per_player);
            row.reals_per_player = Some(m.transcript.reals_per_player);
            row.epsilon_spent = m.budget.as_ref().map(BudgetAccount::spent);
            row.status = "ok".into();
            row.warnings = m.warnings.join("; ");
            Some(TranscriptRow {
                mechanism: row.mechanism.clone(),
                cell: cell.index,
                trial,
                players: m.transcript.players,
                bits_per_player: m.transcript.bits_per_player,
                reals_per_player: m.transcript.reals_per_player,
                total_bits: m.transcript.total_bits,
            })
        }
        Err(e) => {
            row.status = "failed".into();
            row.error_code = e.code().into();
            row.warnings = e.to_string();
            None
        }
    };
    TrialOutput {
        row,
        transcript,
        timing: TimingRow {
            cell: cell.index,
            trial,
            wall_seconds,
        },
    }
}

/// Runs every cell and trial. A failing trial becomes an error row; only
/// configuration problems abort the whole run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let cells = cells(cfg);
    let k_values = cfg.k_values();

    let mut prepared: BTreeMap<usize, Prepared> = BTreeMap::new();
    for c in &cells {
        if let std::collections::btree_map::Entry::Vacant(slot) = prepared.entry(c.n) {
            info!("preparing dataset with n = {}", c.n);
            slot.insert(prepare(cfg, c.n, &k_values)?);
        }
    }

    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let run = || -> Vec<TrialOutput> {
        jobs.par_iter()
            .map(|&(c, t)| {
                let cell = &cells[c];
                execute(cfg, cell, t, &prepared[&cell.n])
            })
            .collect()
    };
    let outputs = match cfg.workers {
        Some(w) if w > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| LdpError::config(format!("cannot start {w} workers: {e}")))?
            .install(run),
        _ => run(),
    };

    let mut outcome = RunOutcome::default();
    for o in outputs {
        if o.row.status != "ok" {
            outcome.failures += 1;
        }
        outcome.rows.push(o.row);
        outcome.transcripts.extend(o.transcript);
        outcome.timings.push(o.timing);
    }
    Ok(outcome)
}

/// Writes `report.csv`, `transcript_summary.csv`, `timing.csv` and
/// `manifest.json` into `dir`.
pub fn write_outputs(cfg: &ExperimentConfig, outcome: &RunOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_report_csv(
        std::fs::File::create(dir.join("report.csv"))?,
        &outcome.rows,
    )?;
    write_transcript_summary_csv(
        std::fs::File::create(dir.join("transcript_summary.csv"))?,
        &outcome.transcripts,
    )?;
    write_timing_csv(
        std::fs::File::create(dir.join("timing.csv"))?,
        &outcome.timings,
    )?;
    Manifest::new(cfg, cells(cfg).len()).save(&dir.join("manifest.json"))?;
    Ok(())
}

/// Is the family one of the labelled ones?
pub fn is_labelled(family: Family) -> bool {
    matches!(
        family,
        Family::SeparableTwoClass | Family::GaussianBallClipped
    )
}

/// Convenience for tests and the FFI: the labelled dataset of a config.
pub fn labelled_dataset(cfg: &ExperimentConfig, n: usize) -> Result<BallDataset> {
    match prepare(cfg, n, &[])?.data {
        Dataset::Ball(b) => Ok(b),
        _ => Err(LdpError::config(
            "configuration does not describe a labelled dataset",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(text).unwrap()
    }

    #[test]
    fn cells_are_a_product() {
        let c = cfg("mechanism = \"bernstein\"\n[sweep]\nn = [10, 20]\nepsilon = [1.0, 2.0]\nk = [2, 4, 8]\n");
        let cs = cells(&c);
        assert_eq!(cs.len(), 12);
        assert_eq!((cs[0].n, cs[0].epsilon, cs[0].k), (10, 1.0, 2));
        assert_eq!((cs[11].n, cs[11].epsilon, cs[11].k), (20, 2.0, 8));
    }

    #[test]
    fn empty_sweep_gives_header_only() {
        let c = cfg("mechanism = \"avg-bench\"\n[sweep]\nn = []\n");
        let out = run_experiment(&c).unwrap();
        assert!(out.rows.is_empty());
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &out.rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }

    #[test]
    fn avg_bench_rows() {
        let c = cfg("mechanism = \"avg-bench\"\ntrials = 3\n[dataset]\nn = 500\n");
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.rows.len(), 3);
        assert_eq!(out.failures, 0);
        assert!(out
            .rows
            .iter()
            .all(|r| r.error.unwrap() < 0.5 && r.reals_per_player == Some(1)));
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        // 3 players cannot fill the 9 cells of the one-bit partition.
        let c =
            cfg("mechanism = \"onebit\"\ntrials = 2\n[dataset]\nn = 3\n[privacy]\nepsilon = 0.5\n");
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.failures, 2);
        assert_eq!(out.rows[0].error_code, "E_ESTIMATION");
    }
}
