//! Monitored populations: feature processes, hidden reward structure, and the
//! noiseless oracle used for regret accounting.

mod panel;
mod synthetic;

use nalgebra::DVector;

use crate::error::Result;

pub use panel::{
    interpolate, load_longitudinal_csv, panel_to_environment, polynomial_features,
    synthetic_mmse_panel, CsvColumns, LoadSummary, LongitudinalPanel, PanelEnvironment,
    RewardTransform, Subject,
};
pub use synthetic::{
    expected_reward, gen_ground_truth, gen_sigmoid_features, gen_sigmoid_params,
    normalized_time, sample_reward, FeatureTensor, GroundTruth, GroundTruthFixture,
    GroundTruthSpec, SigmoidFeatureModel, SigmoidFeatureParams, SyntheticEnvironment,
};

/// Everything the world reveals (or hides) about one trial.
#[derive(Debug, Clone)]
pub struct Trial {
    /// 1-based trial index.
    pub t: usize,
    pub features: Vec<DVector<f64>>,
    /// Noiseless expected reward per unit; never shown to policies.
    pub expected: Vec<f64>,
    /// Realized (noisy) reward per unit; policies only see the selected entries.
    pub realized: Vec<f64>,
}

pub trait Environment: Send + Sync {
    fn n_units(&self) -> usize;
    fn dim(&self) -> usize;
    fn horizon(&self) -> usize;
    /// Trial `t` in `1..=horizon`. Pure function of `t` and the construction seed.
    fn trial(&self, t: usize) -> Result<Trial>;
}
