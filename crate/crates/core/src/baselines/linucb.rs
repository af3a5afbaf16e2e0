use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Chol};
use crate::policy::{Feedback, Policy, UpdateReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinUcbConfig {
    /// Ridge weight `λ`.
    pub ridge: f64,
    pub alpha: f64,
}

impl Default for LinUcbConfig {
    fn default() -> Self {
        Self {
            ridge: 1.0,
            alpha: 0.5,
        }
    }
}

impl LinUcbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ridge > 0.0) {
            return Err(Error::config("linucb ridge must be positive"));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::config("linucb alpha must be nonnegative"));
        }
        Ok(())
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }
}

/// Ridge regression statistics for one unit.
#[derive(Debug, Clone)]
pub struct RidgeArmState {
    v: DMatrix<f64>,
    u: DVector<f64>,
    theta: DVector<f64>,
    chol: Chol,
}

impl RidgeArmState {
    pub fn new(dim: usize, ridge: f64) -> Result<Self> {
        let v = DMatrix::identity(dim, dim) * ridge;
        Ok(Self {
            chol: linalg::factor(&v, "ridge Gram")?,
            v,
            u: DVector::zeros(dim),
            theta: DVector::zeros(dim),
        })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn observe(&mut self, x: &DVector<f64>, y: f64) -> Result<()> {
        self.v.ger(1.0, x, x, 1.0);
        self.u.axpy(y, x, 1.0);
        self.refit()
    }

    fn refit(&mut self) -> Result<()> {
        self.chol = linalg::factor(&self.v, "ridge Gram")?;
        self.theta = self.chol.solve(&self.u);
        Ok(())
    }

    /// `θᵀx + α·√(xᵀV⁻¹x)`.
    pub fn score(&self, x: &DVector<f64>, alpha: f64) -> f64 {
        let mut s = self.theta.dot(x);
        if alpha != 0.0 {
            s += alpha * linalg::inv_quad_form(&self.chol, x).sqrt();
        }
        s
    }
}

/// Independent per-unit linear UCB; units never communicate.
#[derive(Debug, Clone)]
pub struct LinUcb {
    cfg: LinUcbConfig,
    dim: usize,
    arms: Vec<RidgeArmState>,
}

impl LinUcb {
    pub fn new(cfg: LinUcbConfig, n_units: usize, dim: usize) -> Result<Self> {
        cfg.validate()?;
        let arms = (0..n_units)
            .map(|_| RidgeArmState::new(dim, cfg.ridge))
            .collect::<Result<_>>()?;
        Ok(Self { cfg, dim, arms })
    }

    pub fn arms(&self) -> &[RidgeArmState] {
        &self.arms
    }

    /// Centers every unit's ridge prior at a known coefficient vector with
    /// weight `strength` (oracle runs).
    pub fn preload(&mut self, betas: &[DVector<f64>], strength: f64) -> Result<()> {
        if betas.len() != self.arms.len() || betas.iter().any(|b| b.len() != self.dim) {
            return Err(Error::Shape {
                expected: format!("{} coefficient vectors of length {}", self.arms.len(), self.dim),
                actual: format!("{} vectors", betas.len()),
            });
        }
        let total = self.cfg.ridge + strength;
        for (arm, beta) in self.arms.iter_mut().zip(betas) {
            arm.v = DMatrix::identity(self.dim, self.dim) * total;
            arm.u = beta * total;
            arm.refit()?;
        }
        Ok(())
    }
}

impl Policy for LinUcb {
    fn name(&self) -> &'static str {
        "linucb"
    }

    fn scores(&mut self, _t: usize, features: &[DVector<f64>]) -> Result<Vec<f64>> {
        check_features(features, self.arms.len(), self.dim)?;
        Ok(self
            .arms
            .iter()
            .zip(features)
            .map(|(arm, x)| arm.score(x, self.cfg.alpha))
            .collect())
    }

    fn update(&mut self, _t: usize, feedback: &[Feedback<'_>]) -> Result<UpdateReport> {
        let len = self.arms.len();
        for fb in feedback {
            self.arms
                .get_mut(fb.unit)
                .ok_or(Error::UnitOutOfRange { index: fb.unit, len })?
                .observe(fb.x, fb.y)?;
        }
        Ok(UpdateReport::default())
    }

    fn totals(&self) -> UpdateReport {
        UpdateReport::default()
    }
}

pub(super) fn check_features(features: &[DVector<f64>], n: usize, dim: usize) -> Result<()> {
    if features.len() != n {
        return Err(Error::Shape {
            expected: format!("{n} feature vectors"),
            actual: features.len().to_string(),
        });
    }
    for (i, x) in features.iter().enumerate() {
        if x.len() != dim {
            return Err(Error::Shape {
                expected: format!("feature of length {dim}"),
                actual: x.len().to_string(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature { unit: i });
        }
    }
    Ok(())
}
