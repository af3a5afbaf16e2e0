//! Command-line front end: run experiments, validate configurations and
//! write test fixtures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fedmon_core::environment::{
    gen_ground_truth, synthetic_mmse_panel, CsvColumns, GroundTruthSpec,
};
use fedmon_core::harness::{emit_results, run_experiment, ExperimentConfig, PolicyKind};
use fedmon_core::Error;

#[derive(Parser)]
#[command(name = "fedmon", version, about = "Federated collaborative online monitoring simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment and write results.csv, summary.csv, failures.csv and manifest.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this policy (overrides the config's list).
        #[arg(long)]
        policy: Option<String>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Replication count (overrides the config).
        #[arg(long)]
        reps: Option<usize>,
        /// Record every trial instead of the thinned trace.
        #[arg(long)]
        full_trace: bool,
    },
    /// Parse and check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a small reproducible fixture.
    GenFixture {
        #[arg(long, value_enum)]
        kind: FixtureKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    /// Ground-truth representation and memberships as JSON.
    Synthetic,
    /// Long-format MMSE-like panel as CSV.
    Panel,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Cmd::Run {
            config,
            policy,
            out,
            seed,
            reps,
            full_trace,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(p) = policy {
                cfg.policy = vec![p.parse::<PolicyKind>()?];
            }
            if let Some(out) = out {
                cfg.output = out;
            }
            if let Some(seed) = seed {
                cfg.base_seed = seed;
            }
            if let Some(reps) = reps {
                cfg.reps = reps;
            }
            cfg.full_trace |= full_trace;
            let result = run_experiment(&cfg)?;
            let written = emit_results(&result, &cfg.output)?;
            for kind in &result.config.policy {
                let (mean, sd) = result.summary(*kind);
                println!("{kind}: R(T) = {mean:.2} ± {sd:.2}");
            }
            for path in written {
                log::info!("wrote {}", path.display());
            }
            let failures = result.failures();
            if !failures.is_empty() {
                return Err(Error::Numerical(format!(
                    "{} replication(s) failed; see {}",
                    failures.len(),
                    cfg.output.join("failures.csv").display()
                )));
            }
            Ok(())
        }
        Cmd::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate()?;
            let (n, p) = cfg.shape()?;
            println!(
                "ok: N={n}, p={p}, M={}, T={}, reps={}, policies={:?}",
                cfg.budget.resolve(n)?,
                cfg.horizon,
                cfg.reps,
                cfg.policy.iter().map(|k| k.as_str()).collect::<Vec<_>>()
            );
            Ok(())
        }
        Cmd::GenFixture { kind, out, seed } => {
            match kind {
                FixtureKind::Synthetic => {
                    let spec = GroundTruthSpec {
                        dim: 4,
                        rank: 2,
                        n_units: 6,
                        sigma2: 100.0,
                        noise_sd: 1.0,
                        priors: None,
                    };
                    let fixture = gen_ground_truth(&spec, seed)?.to_fixture();
                    let text = serde_json::to_string_pretty(&fixture).map_err(|e| Error::Json {
                        path: out.clone(),
                        source: e,
                    })?;
                    std::fs::write(&out, text + "\n").map_err(|e| Error::Io {
                        path: out.clone(),
                        source: e,
                    })?;
                }
                FixtureKind::Panel => {
                    synthetic_mmse_panel(20, seed).write_csv(&out, &CsvColumns::default())?;
                }
            }
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}
