//! `davies-lab`: batch runner for the Davies-generator laboratory.
//!
//! Exit codes: 0 when every verdict passes and nothing failed, 1 for a failed
//! verdict or a numerical error, 2 for an invalid configuration, 3 when a
//! request exceeds a size cap.

mod config;
mod output;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use davies_lab::LabError;

use config::{ConfigError, ExperimentConfig, Suite, SCHEMA_VERSION};
use output::{json_artifact, sha256_hex, Manifest, SuiteRecord};
use suites::RunContext;

const EXIT_VERDICT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CAPABILITY: u8 = 3;

#[derive(Parser)]
#[command(name = "davies-lab", version, about = "Davies-generator numerical laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Number of grid cells computed in parallel.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Replace the seed of the configuration.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Build and verify the coarse-graining.
    CoarseGrain,
    /// Scan MCMI over the partition family and fit its decay.
    McmiScan,
    /// Check the functional inequalities on random states.
    IneqCheck,
    /// Spectral gaps of local generators.
    Gap,
    /// Trace and Wasserstein mixing times.
    MixTime,
    /// Wasserstein distances with certified bounds.
    W1,
    /// Closed-form bound calculators.
    Bounds,
    /// Every suite listed in the configuration.
    All,
}

impl Command {
    fn suites(self, cfg: &ExperimentConfig) -> Vec<Suite> {
        match self {
            Command::CoarseGrain => vec![Suite::CoarseGrain],
            Command::McmiScan => vec![Suite::McmiScan],
            Command::IneqCheck => vec![Suite::Ineq],
            Command::Gap => vec![Suite::Gap],
            Command::MixTime => vec![Suite::Mix],
            Command::W1 => vec![Suite::W1],
            Command::Bounds => vec![Suite::Bounds],
            Command::All => cfg.suites.clone(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Command::CoarseGrain => "coarse-grain",
            Command::McmiScan => "mcmi-scan",
            Command::IneqCheck => "ineq-check",
            Command::Gap => "gap",
            Command::MixTime => "mix-time",
            Command::W1 => "w1",
            Command::Bounds => "bounds",
            Command::All => "all",
        }
    }
}

fn config_exit(e: &ConfigError) -> u8 {
    match e {
        ConfigError::Capability(_) => EXIT_CAPABILITY,
        _ => EXIT_CONFIG,
    }
}

fn lab_exit(e: &LabError) -> u8 {
    match e {
        LabError::Capability(_) => EXIT_CAPABILITY,
        LabError::Config(_) | LabError::Model(_) => EXIT_CONFIG,
        _ => EXIT_VERDICT,
    }
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("davies-lab: {message}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config_path) = &cli.config else {
        return fail(EXIT_CONFIG, "missing --config");
    };
    let mut cfg = match config::load(config_path) {
        Ok(c) => c,
        Err(e) => return fail(config_exit(&e), e),
    };
    if let Some(seed) = cli.seed_override {
        cfg.seed = seed;
    }
    let Some(out_dir) = cli.out.clone().or_else(|| cfg.output.clone()) else {
        return fail(EXIT_CONFIG, "no output directory: pass --out or set `output`");
    };
    let suites = cli.command.suites(&cfg);
    let h = match cfg.validate(&suites) {
        Ok(h) => h,
        Err(e) => return fail(config_exit(&e), e),
    };
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        return fail(EXIT_VERDICT, format!("cannot create {}: {e}", out_dir.display()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        builder = builder.num_threads(jobs.max(1));
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => return fail(EXIT_VERDICT, format!("cannot start the job pool: {e}")),
    };
    let ctx = RunContext {
        cfg: &cfg,
        h: &h,
        seed: cfg.seed,
        pool: &pool,
        cache: std::env::var_os("DAVIES_LAB_CACHE").map(PathBuf::from),
    };

    let mut records = Vec::new();
    let mut artifacts = Vec::new();
    let mut exit = 0u8;
    for &suite in &suites {
        let start = Instant::now();
        let result = suites::run(&ctx, suite);
        let seconds = start.elapsed().as_secs_f64();
        match result {
            Ok(out) => {
                if out.failures > 0 {
                    exit = exit.max(EXIT_VERDICT);
                }
                records.push(SuiteRecord {
                    suite: suite.as_str().into(),
                    files: out.artifacts.iter().map(|a| a.name.clone()).collect(),
                    verdicts: out.verdicts,
                    failures: out.failures,
                    seconds,
                    error: None,
                });
                artifacts.extend(out.artifacts);
            }
            Err(e) => {
                eprintln!("davies-lab: suite {} failed: {e}", suite.as_str());
                exit = lab_exit(&e);
                records.push(SuiteRecord {
                    suite: suite.as_str().into(),
                    files: Vec::new(),
                    verdicts: 0,
                    failures: 0,
                    seconds,
                    error: Some(e.to_string()),
                });
                break;
            }
        }
    }

    for a in &artifacts {
        if let Err(e) = output::write(&out_dir, a) {
            return fail(EXIT_VERDICT, format!("cannot write {}: {e}", a.name));
        }
    }
    let manifest = Manifest {
        tool: "davies-lab",
        version: env!("CARGO_PKG_VERSION"),
        schema_version: SCHEMA_VERSION,
        command: cli.command.name().into(),
        seed: cfg.seed,
        config_digest: config_digest(&cfg, &h),
        suites: records,
        artifacts: artifacts.iter().map(|a| (a.name.clone(), sha256_hex(&a.bytes))).collect(),
        exit_code: exit as i32,
    };
    if let Err(e) = output::write(&out_dir, &json_artifact("manifest.json", &manifest)) {
        return fail(EXIT_VERDICT, format!("cannot write the manifest: {e}"));
    }
    ExitCode::from(exit)
}

/// Digest of every input that affects numbers: the effective configuration
/// (after the seed override, without the output location) and the canonical
/// form of the model it builds.
fn config_digest(cfg: &ExperimentConfig, h: &davies_lab::LocalHamiltonian) -> String {
    let mut effective = cfg.clone();
    effective.output = None;
    let mut bytes = serde_json::to_vec(&effective).expect("serializable");
    bytes.extend_from_slice(h.canonical_text().as_bytes());
    sha256_hex(&bytes)
}
