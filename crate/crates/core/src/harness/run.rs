use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EnvironmentConfig, ExperimentConfig, PanelSource, PolicyKind};
use crate::baselines::{clucb, LinUcb, SyncLinUcb};
use crate::environment::{
    load_longitudinal_csv, panel_to_environment, synthetic_mmse_panel, Environment,
    LongitudinalPanel, SyntheticEnvironment,
};
use crate::error::Result;
use crate::fcom::Fcom;
use crate::policy::{select_top_m, Feedback, Policy, UpdateReport};

/// Sum of the `m` largest expected rewards (same tie-break as selection).
pub fn regret_oracle(expected: &[f64], m: usize) -> Result<f64> {
    Ok(select_top_m(expected, m)?.iter().map(|&i| expected[i]).sum())
}

/// One trial's accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub selected: Vec<usize>,
    pub inst_regret: f64,
    pub inst_regret_realized: f64,
    pub report: UpdateReport,
}

/// Plays one trial: score, select, reveal, learn.
pub fn play_round(policy: &mut dyn Policy, env: &dyn Environment, t: usize, m: usize) -> Result<RoundRecord> {
    let trial = env.trial(t)?;
    let scores = policy.scores(t, &trial.features)?;
    let selected = select_top_m(&scores, m)?;
    let collected: f64 = selected.iter().map(|&i| trial.expected[i]).sum();
    let collected_realized: f64 = selected.iter().map(|&i| trial.realized[i]).sum();
    // Equal sets give bit-identical sums (same summation order), hence an
    // exact zero; the clamp only absorbs rounding between tied sets.
    let inst_regret = (regret_oracle(&trial.expected, m)? - collected).max(0.0);
    let inst_regret_realized = (regret_oracle(&trial.realized, m)? - collected_realized).max(0.0);
    let feedback: Vec<Feedback<'_>> = selected
        .iter()
        .map(|&i| Feedback {
            unit: i,
            x: &trial.features[i],
            y: trial.realized[i],
        })
        .collect();
    let report = policy.update(t, &feedback)?;
    Ok(RoundRecord {
        t,
        selected,
        inst_regret,
        inst_regret_realized,
        report,
    })
}

/// One row of the results table; communication and non-convergence counts
/// are cumulative up to `trial`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub policy: String,
    pub rep: usize,
    pub trial: usize,
    pub cum_regret: f64,
    pub inst_regret: f64,
    pub cum_regret_realized: f64,
    pub uploads: u64,
    pub downloads: u64,
    pub scalars_sent: u64,
    pub selected_count: usize,
    pub als_nonconverged: u64,
}

/// Whether trial `t` of `horizon` is kept in a thinned trace.
pub fn keep_trial(t: usize, horizon: usize, full: bool) -> bool {
    full || t <= 1000 || t % 10 == 0 || t == horizon
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub policy: String,
    pub rep: usize,
    pub trial: usize,
    pub error: String,
}

/// Outcome of one (policy, replication) run.
#[derive(Debug, Clone)]
pub struct RepResult {
    pub policy: PolicyKind,
    pub rep: usize,
    pub seed: u64,
    pub rows: Vec<ResultRow>,
    pub final_regret: f64,
    pub totals: UpdateReport,
    pub failure: Option<Failure>,
}

/// Runs `horizon` trials; a runtime failure stops the run and is recorded.
pub fn run_replication(
    kind: PolicyKind,
    policy: &mut dyn Policy,
    env: &dyn Environment,
    m: usize,
    rep: usize,
    seed: u64,
    full_trace: bool,
) -> RepResult {
    let horizon = env.horizon();
    let mut rows = Vec::new();
    let (mut cum, mut cum_realized) = (0.0, 0.0);
    let mut totals = UpdateReport::default();
    let mut failure = None;
    for t in 1..=horizon {
        match play_round(policy, env, t, m) {
            Ok(r) => {
                cum += r.inst_regret;
                cum_realized += r.inst_regret_realized;
                totals += r.report;
                if keep_trial(t, horizon, full_trace) {
                    rows.push(ResultRow {
                        policy: kind.to_string(),
                        rep,
                        trial: t,
                        cum_regret: cum,
                        inst_regret: r.inst_regret,
                        cum_regret_realized: cum_realized,
                        uploads: totals.uploads,
                        downloads: totals.downloads,
                        scalars_sent: totals.scalars,
                        selected_count: r.selected.len(),
                        als_nonconverged: totals.als_nonconverged,
                    });
                }
            }
            Err(e) => {
                log::error!("{kind} rep {rep}: trial {t} failed: {e}");
                failure = Some(Failure {
                    policy: kind.to_string(),
                    rep,
                    trial: t,
                    error: e.to_string(),
                });
                break;
            }
        }
        if t % 5000 == 0 {
            log::debug!("{kind} rep {rep}: trial {t}/{horizon}, R = {cum:.2}");
        }
    }
    RepResult {
        policy: kind,
        rep,
        seed,
        rows,
        final_regret: cum,
        totals,
        failure,
    }
}

/// Builds the environment of one replication.
pub fn build_environment(cfg: &ExperimentConfig, horizon: usize, seed: u64) -> Result<Arc<dyn Environment>> {
    Ok(match &cfg.environment {
        EnvironmentConfig::Synthetic(s) => Arc::new(SyntheticEnvironment::new(
            &s.truth_spec(),
            horizon,
            s.feature_noise_sd,
            seed,
        )?),
        EnvironmentConfig::Panel(p) => {
            let pool = load_panel(&p.source)?;
            let panel = match p.sample {
                Some(n) => pool.sample_subjects(n, seed)?,
                None => pool,
            };
            Arc::new(panel_to_environment(panel, horizon, p.degree, p.transform)?)
        }
    })
}

fn load_panel(source: &PanelSource) -> Result<LongitudinalPanel> {
    match source {
        PanelSource::Csv { path, columns } => {
            let (panel, summary) = load_longitudinal_csv(path, columns)?;
            log::info!(
                "{}: {} rows, {} subjects kept, {} dropped",
                path.display(),
                summary.rows,
                summary.subjects_kept,
                summary.subjects_dropped
            );
            Ok(panel)
        }
        PanelSource::Generated { subjects, seed } => Ok(synthetic_mmse_panel(*subjects, *seed)),
    }
}

/// Builds a fresh policy for a population of `n` units with `p` features.
pub fn build_policy(
    kind: PolicyKind,
    cfg: &ExperimentConfig,
    n: usize,
    p: usize,
    seed: u64,
) -> Result<Box<dyn Policy>> {
    Ok(match kind {
        PolicyKind::Fcom => Box::new(Fcom::new(cfg.fcom.clone(), n, p, seed)?),
        PolicyKind::Clucb => Box::new(clucb(cfg.clucb.clone(), n, p, seed)?),
        PolicyKind::Linucb => Box::new(LinUcb::new(cfg.linucb.clone(), n, p)?),
        PolicyKind::SyncLinucb => Box::new(SyncLinUcb::new(cfg.sync_linucb.clone(), n, p)?),
    })
}

/// Returns a copy of `cfg` with `kind`'s exploration weight(s) set to `alpha`.
pub fn with_alpha(cfg: &ExperimentConfig, kind: PolicyKind, alpha: f64) -> ExperimentConfig {
    let mut c = cfg.clone();
    match kind {
        PolicyKind::Fcom => c.fcom = c.fcom.with_alpha(alpha),
        PolicyKind::Clucb => c.clucb = c.clucb.with_alpha(alpha),
        PolicyKind::Linucb => c.linucb = c.linucb.with_alpha(alpha),
        PolicyKind::SyncLinucb => c.sync_linucb = c.sync_linucb.with_alpha(alpha),
    }
    c
}

/// Best exploration weight per policy on the tuning replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedAlpha {
    pub policy: String,
    pub alpha: f64,
    /// Final cumulative regret for each grid value, in grid order.
    pub grid_regret: Vec<f64>,
}

/// Everything one invocation produced.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// The configuration actually run (after tuning).
    pub config: ExperimentConfig,
    pub budget: usize,
    pub reps: Vec<RepResult>,
    pub tuned: Vec<TunedAlpha>,
    pub seeds: Vec<u64>,
    pub started_unix: f64,
    pub elapsed_secs: f64,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

impl ExperimentResult {
    /// `(mean, sd)` of the final cumulative regret over successful reps.
    pub fn summary(&self, kind: PolicyKind) -> (f64, f64) {
        let finals: Vec<f64> = self
            .reps
            .iter()
            .filter(|r| r.policy == kind && r.failure.is_none())
            .map(|r| r.final_regret)
            .collect();
        mean_sd(&finals)
    }

    pub fn failures(&self) -> Vec<&Failure> {
        self.reps.iter().filter_map(|r| r.failure.as_ref()).collect()
    }
}

/// Validates, tunes (if requested), and runs every (policy, replication)
/// pair. Replications run in parallel; each owns its environment, policy
/// and random streams, so results do not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let started = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let clock = Instant::now();
    let (n, p) = cfg.shape()?;
    let m = cfg.budget.resolve(n)?;

    let mut cfg = cfg.clone();
    let mut tuned = Vec::new();
    if let Some(tuning) = cfg.tuning.clone() {
        let env = build_environment(&cfg, tuning.horizon, tuning.seed)?;
        for kind in cfg.policy.clone() {
            let jobs: Vec<f64> = tuning.grid.clone();
            let regrets: Vec<f64> = jobs
                .par_iter()
                .map(|&alpha| -> Result<f64> {
                    let c = with_alpha(&cfg, kind, alpha);
                    let mut policy = build_policy(kind, &c, n, p, tuning.seed)?;
                    let r = run_replication(kind, policy.as_mut(), env.as_ref(), m, 0, tuning.seed, false);
                    Ok(if r.failure.is_some() { f64::INFINITY } else { r.final_regret })
                })
                .collect::<Result<_>>()?;
            let best = regrets
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .expect("non-empty grid");
            log::info!("tuning {kind}: grid {:?} -> regret {regrets:?}, alpha {}", tuning.grid, tuning.grid[best]);
            cfg = with_alpha(&cfg, kind, tuning.grid[best]);
            tuned.push(TunedAlpha {
                policy: kind.to_string(),
                alpha: tuning.grid[best],
                grid_regret: regrets,
            });
        }
    }

    let seeds: Vec<u64> = (0..cfg.reps as u64).map(|r| cfg.base_seed + r).collect();
    let envs: Vec<Arc<dyn Environment>> = seeds
        .iter()
        .map(|&s| build_environment(&cfg, cfg.horizon, s))
        .collect::<Result<_>>()?;
    let jobs: Vec<(PolicyKind, usize)> = cfg
        .policy
        .iter()
        .flat_map(|&k| (0..cfg.reps).map(move |r| (k, r)))
        .collect();
    let reps: Vec<RepResult> = jobs
        .par_iter()
        .map(|&(kind, rep)| -> Result<RepResult> {
            let seed = seeds[rep];
            let env = envs[rep].as_ref();
            let mut policy = build_policy(kind, &cfg, n, p, seed)?;
            let r = run_replication(kind, policy.as_mut(), env, m, rep, seed, cfg.full_trace);
            log::info!("{kind} rep {rep} (seed {seed}): R(T) = {:.3}", r.final_regret);
            Ok(r)
        })
        .collect::<Result<_>>()?;

    Ok(ExperimentResult {
        config: cfg,
        budget: m,
        reps,
        tuned,
        seeds,
        started_unix: started,
        elapsed_secs: clock.elapsed().as_secs_f64(),
    })
}
