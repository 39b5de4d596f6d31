use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, info, warn};

use ldp_erm::harness::{run_experiment, write_outputs, ExperimentConfig, Manifest, Mechanism};
use ldp_erm::LdpError;

/// Simulates non-interactive LDP mechanisms and writes CSV reports.
#[derive(Debug, Parser)]
#[command(name = "ldp-erm", version)]
struct Cli {
    /// bernstein, onebit, hinge, general-linear, marginals, smooth-queries or avg-bench.
    mechanism: String,

    /// TOML experiment configuration.
    #[arg(
        long,
        conflicts_with = "manifest",
        required_unless_present = "manifest"
    )]
    config: Option<PathBuf>,

    /// Re-run the experiment recorded in a manifest.json.
    #[arg(long)]
    manifest: Option<PathBuf>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    trials: Option<usize>,

    /// Concurrent trials.
    #[arg(long, env = "LDP_ERM_WORKERS")]
    workers: Option<usize>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

fn resolve(cli: &Cli) -> Result<ExperimentConfig, LdpError> {
    let mechanism: Mechanism = cli.mechanism.parse()?;
    let mut cfg = match (&cli.config, &cli.manifest) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(path)) => {
            let m = Manifest::load(path)
                .map_err(|e| LdpError::Config(format!("{}: {e}", path.display())))?;
            if m.config
                .mechanism
                .is_some_and(|recorded| recorded != mechanism)
            {
                return Err(LdpError::Config(format!(
                    "manifest records mechanism {}, not {mechanism}",
                    m.mechanism
                )));
            }
            m.config
        }
        (None, None) => unreachable!("clap requires one of --config / --manifest"),
    };
    if cfg.mechanism.is_some_and(|m| m != mechanism) {
        warn!(
            "command line mechanism {mechanism} overrides the file's {}",
            cfg.mechanism.unwrap()
        );
    }
    cfg.mechanism = Some(mechanism);
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if cfg.out.is_none() {
        cfg.out = Some(PathBuf::from(format!("ldp-erm-out/{mechanism}")));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let out = cfg.out.clone().expect("resolved above");
    let outcome = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e @ LdpError::Config(_)) => {
            error!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            error!("{e}");
            return ExitCode::FAILURE;
        }
    };
    if let Err(e) = write_outputs(&cfg, &outcome, &out) {
        error!("writing outputs to {}: {e}", out.display());
        return ExitCode::FAILURE;
    }
    info!("{} rows written to {}", outcome.rows.len(), out.display());
    if outcome.failures > 0 {
        warn!(
            "{} of {} trials failed",
            outcome.failures,
            outcome.rows.len()
        );
        return ExitCode::from(EXIT_PARTIAL);
    }
    ExitCode::SUCCESS
}
