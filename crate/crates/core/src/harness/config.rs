use std::fmt;
use std::path::{Path, PathBuf};

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::baselines::{LinUcbConfig, SyncLinUcbConfig};
use crate::environment::{CsvColumns, GroundTruthSpec, RewardTransform};
use crate::error::{Error, Result};
use crate::fcom::FcomConfig;

/// One experiment: a population, a set of policies, and how long and how
/// often to run them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentConfig,
    /// A single policy name or a list.
    #[serde(deserialize_with = "one_or_many")]
    pub policy: Vec<PolicyKind>,
    #[serde(default)]
    pub fcom: FcomConfig,
    #[serde(default)]
    pub clucb: FcomConfig,
    #[serde(default)]
    pub linucb: LinUcbConfig,
    #[serde(default)]
    pub sync_linucb: SyncLinUcbConfig,
    /// Number of trials `T`.
    pub horizon: usize,
    pub budget: Budget,
    #[serde(default = "one")]
    pub reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Record every trial instead of the thinned trace.
    #[serde(default)]
    pub full_trace: bool,
    /// Pick each policy's exploration weight from a small grid first.
    #[serde(default)]
    pub tuning: Option<TuningConfig>,
}

fn one() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    Synthetic(SyntheticConfig),
    Panel(PanelConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_units: usize,
    #[serde(default = "ten")]
    pub dim: usize,
    /// Rank of the hidden representation.
    #[serde(default = "three")]
    pub rank: usize,
    #[serde(default = "hundred")]
    pub sigma2: f64,
    /// Reward noise standard deviation.
    #[serde(default = "unit")]
    pub noise_sd: f64,
    /// Per-coordinate feature noise standard deviation.
    #[serde(default = "unit")]
    pub feature_noise_sd: f64,
    #[serde(default)]
    pub priors: Option<Vec<f64>>,
}

fn ten() -> usize {
    10
}
fn three() -> usize {
    3
}
fn hundred() -> f64 {
    100.0
}
fn unit() -> f64 {
    1.0
}

impl SyntheticConfig {
    pub fn truth_spec(&self) -> GroundTruthSpec {
        GroundTruthSpec {
            dim: self.dim,
            rank: self.rank,
            n_units: self.n_units,
            sigma2: self.sigma2,
            noise_sd: self.noise_sd,
            priors: self.priors.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelConfig {
    pub source: PanelSource,
    /// Subjects drawn (without replacement) per replication; all when absent.
    #[serde(default)]
    pub sample: Option<usize>,
    #[serde(default = "five")]
    pub degree: usize,
    #[serde(default)]
    pub transform: RewardTransform,
}

fn five() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PanelSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        columns: CsvColumns,
    },
    /// Generated MMSE-like cohort.
    Generated { subjects: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Fcom,
    Linucb,
    SyncLinucb,
    Clucb,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Fcom => "fcom",
            PolicyKind::Linucb => "linucb",
            PolicyKind::SyncLinucb => "sync_linucb",
            PolicyKind::Clucb => "clucb",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::config(format!("policy: unknown policy `{s}`")))
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<PolicyKind>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(PolicyKind),
        Many(Vec<PolicyKind>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(p) => vec![p],
        OneOrMany::Many(v) => v,
    })
}

/// Monitoring budget: an absolute count or a percentage of the population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Count(usize),
    Percent(f64),
}

impl Budget {
    /// Percentages resolve to `round(N * pct / 100)`, at least 1.
    pub fn resolve(self, n_units: usize) -> Result<usize> {
        let m = match self {
            Budget::Count(m) => m,
            Budget::Percent(pct) => {
                if !(pct > 0.0 && pct <= 100.0) {
                    return Err(Error::config(format!("budget: percentage {pct} outside (0, 100]")));
                }
                ((n_units as f64 * pct / 100.0).round() as usize).max(1)
            }
        };
        if m == 0 || m > n_units {
            return Err(Error::config(format!(
                "budget: M={m} must satisfy 1 <= M <= N={n_units}"
            )));
        }
        Ok(m)
    }
}

impl std::str::FromStr for Budget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::config(format!("budget: cannot parse `{s}` (use e.g. 33 or \"33%\")"));
        match s.strip_suffix('%') {
            Some(pct) => pct.trim().parse().map(Budget::Percent).map_err(|_| bad()),
            None => s.parse().map(Budget::Count).map_err(|_| bad()),
        }
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Count(m) => write!(f, "{m}"),
            Budget::Percent(p) => write!(f, "{p}%"),
        }
    }
}

impl Serialize for Budget {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Budget::Count(m) => s.serialize_u64(*m as u64),
            Budget::Percent(_) => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Budget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(m) => Ok(Budget::Count(m)),
            Raw::Text(s) => s.parse().map_err(de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningConfig {
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    /// Shorter horizon used only for tuning runs.
    #[serde(default = "default_tuning_horizon")]
    pub horizon: usize,
    /// Seed of the single tuning replication, kept apart from the
    /// evaluation seeds.
    #[serde(default = "default_tuning_seed")]
    pub seed: u64,
}

fn default_grid() -> Vec<f64> {
    vec![0.1, 0.5, 1.0]
}

fn default_tuning_horizon() -> usize {
    5000
}

fn default_tuning_seed() -> u64 {
    9_999
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            horizon: default_tuning_horizon(),
            seed: default_tuning_seed(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Json {
            path: PathBuf::from("<config>"),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_owned(),
            source: e,
        })?;
        // Relative data paths are relative to the config file.
        if let EnvironmentConfig::Panel(PanelConfig {
            source: PanelSource::Csv { path: csv, .. },
            ..
        }) = &mut cfg.environment
        {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(cfg)
    }

    /// Population size and feature dimension implied by the environment.
    pub fn shape(&self) -> Result<(usize, usize)> {
        match &self.environment {
            EnvironmentConfig::Synthetic(s) => Ok((s.n_units, s.dim)),
            EnvironmentConfig::Panel(p) => {
                let available = match &p.source {
                    PanelSource::Generated { subjects, .. } => *subjects,
                    PanelSource::Csv { path, columns } => {
                        crate::environment::load_longitudinal_csv(path, columns)?.0.subjects.len()
                    }
                };
                let n = p.sample.unwrap_or(available);
                if n > available {
                    return Err(Error::config(format!(
                        "environment.panel.sample: {n} exceeds the {available} available subjects"
                    )));
                }
                Ok((n, p.degree + 1))
            }
        }
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, e: Error| match e {
            Error::InvalidConfig(m) => Error::config(format!("{name}: {m}")),
            other => other,
        };
        if self.policy.is_empty() {
            return Err(Error::config("policy: at least one policy is required"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon: must be at least 1"));
        }
        if self.reps == 0 {
            return Err(Error::config("reps: must be at least 1"));
        }
        match &self.environment {
            EnvironmentConfig::Synthetic(s) => {
                if s.n_units == 0 || s.dim == 0 {
                    return Err(Error::config("environment.synthetic: n_units and dim must be positive"));
                }
                if s.rank == 0 || s.rank > s.dim {
                    return Err(Error::config("environment.synthetic.rank: must satisfy 1 <= K <= p"));
                }
                if !(s.sigma2 > 0.0) || !(s.noise_sd >= 0.0) || !(s.feature_noise_sd >= 0.0) {
                    return Err(Error::config(
                        "environment.synthetic: sigma2 must be positive, noise scales nonnegative",
                    ));
                }
            }
            EnvironmentConfig::Panel(p) => {
                if self.horizon < 2 {
                    return Err(Error::config("horizon: panel environments need at least 2 trials"));
                }
                if let PanelSource::Csv { path, .. } = &p.source {
                    if !path.is_file() {
                        return Err(Error::config(format!(
                            "environment.panel.source.csv.path: {} does not exist",
                            path.display()
                        )));
                    }
                }
                if p.sample == Some(0) {
                    return Err(Error::config("environment.panel.sample: must be positive"));
                }
            }
        }
        let (n, p) = self.shape()?;
        self.budget.resolve(n)?;
        for kind in &self.policy {
            match kind {
                PolicyKind::Fcom => self.fcom.validate(n, p).map_err(|e| field("fcom", e))?,
                PolicyKind::Clucb => self.clucb.validate(n, p).map_err(|e| field("clucb", e))?,
                PolicyKind::Linucb => self.linucb.validate().map_err(|e| field("linucb", e))?,
                PolicyKind::SyncLinucb => {
                    self.sync_linucb.validate().map_err(|e| field("sync_linucb", e))?
                }
            }
        }
        if let Some(t) = &self.tuning {
            if t.grid.is_empty() || t.grid.iter().any(|a| !(*a >= 0.0)) {
                return Err(Error::config("tuning.grid: needs nonnegative values"));
            }
            if t.horizon < 2 {
                return Err(Error::config("tuning.horizon: must be at least 2"));
            }
        }
        Ok(())
    }
}
