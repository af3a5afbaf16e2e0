use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linucb::check_features;
use crate::error::{Error, Result};
use crate::fcom::determinant_trigger;
use crate::linalg::{self, Chol};
use crate::policy::{Feedback, Policy, UpdateReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncLinUcbConfig {
    /// Ridge weight for both the fixed and the random effect.
    pub ridge: f64,
    pub alpha_fixed: f64,
    pub alpha_random: f64,
    /// Determinant-ratio threshold for fixed-effect uploads (`>= 1`).
    pub trigger_threshold: f64,
}

impl Default for SyncLinUcbConfig {
    fn default() -> Self {
        Self {
            ridge: 1.0,
            alpha_fixed: 0.5,
            alpha_random: 0.5,
            trigger_threshold: 2.0,
        }
    }
}

impl SyncLinUcbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ridge > 0.0) {
            return Err(Error::config("sync_linucb ridge must be positive"));
        }
        if !(self.alpha_fixed >= 0.0 && self.alpha_random >= 0.0) {
            return Err(Error::config("sync_linucb alphas must be nonnegative"));
        }
        if !(self.trigger_threshold >= 1.0) {
            return Err(Error::config("sync_linucb trigger_threshold must be >= 1"));
        }
        Ok(())
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha_fixed = alpha;
        self.alpha_random = alpha;
        self
    }
}

/// One unit's view of a fixed-plus-random-effect linear model.
///
/// The fixed effect is estimated collaboratively: the unit keeps the last
/// broadcast global statistics and queues its own contributions, fitted
/// against the residual after its random effect. The random effect is fitted
/// locally against the residual after the current fixed effect.
#[derive(Debug, Clone)]
pub struct MixedModelState {
    sxx: DMatrix<f64>,
    sxy: DVector<f64>,
    random_chol: Chol,
    theta_random: DVector<f64>,
    random_stale: bool,

    base_v: DMatrix<f64>,
    base_chol: Chol,
    theta_fixed: DVector<f64>,

    delta_v: DMatrix<f64>,
    delta_u: DVector<f64>,
    ridge: f64,
}

impl MixedModelState {
    fn new(dim: usize, ridge: f64) -> Result<Self> {
        let v = DMatrix::identity(dim, dim) * ridge;
        let chol = linalg::factor(&v, "random-effect Gram")?;
        Ok(Self {
            sxx: DMatrix::zeros(dim, dim),
            sxy: DVector::zeros(dim),
            random_chol: chol.clone(),
            theta_random: DVector::zeros(dim),
            random_stale: false,
            base_v: v,
            base_chol: chol,
            theta_fixed: DVector::zeros(dim),
            delta_v: DMatrix::zeros(dim, dim),
            delta_u: DVector::zeros(dim),
            ridge,
        })
    }

    pub fn theta_fixed(&self) -> &DVector<f64> {
        &self.theta_fixed
    }

    pub fn theta_random(&self) -> &DVector<f64> {
        &self.theta_random
    }

    pub fn fixed_gram(&self) -> &DMatrix<f64> {
        &self.base_v
    }

    /// Random effect against the residual `y − xᵀθ_fixed` over the history.
    fn refit_random(&mut self) {
        let target = &self.sxy - &self.sxx * &self.theta_fixed;
        self.theta_random = self.random_chol.solve(&target);
        self.random_stale = false;
    }

    fn observe(&mut self, x: &DVector<f64>, y: f64) -> Result<()> {
        self.sxx.ger(1.0, x, x, 1.0);
        self.sxy.axpy(y, x, 1.0);
        let mut v = self.sxx.clone();
        for i in 0..v.nrows() {
            v[(i, i)] += self.ridge;
        }
        self.random_chol = linalg::factor(&v, "random-effect Gram")?;
        self.refit_random();
        let resid = y - self.theta_random.dot(x);
        self.delta_v.ger(1.0, x, x, 1.0);
        self.delta_u.axpy(resid, x, 1.0);
        Ok(())
    }

    fn score(&self, x: &DVector<f64>, alpha_fixed: f64, alpha_random: f64) -> f64 {
        let mut s = (&self.theta_fixed + &self.theta_random).dot(x);
        if alpha_fixed != 0.0 {
            s += alpha_fixed * linalg::inv_quad_form(&self.base_chol, x).sqrt();
        }
        if alpha_random != 0.0 {
            s += alpha_random * linalg::inv_quad_form(&self.random_chol, x).sqrt();
        }
        s
    }
}

/// Federated linear UCB with a shared fixed effect and per-unit random
/// effects.
#[derive(Debug, Clone)]
pub struct SyncLinUcb {
    cfg: SyncLinUcbConfig,
    dim: usize,
    units: Vec<MixedModelState>,
    v_g: DMatrix<f64>,
    u_g: DVector<f64>,
    chol_g: Chol,
    theta_g: DVector<f64>,
    totals: UpdateReport,
}

impl SyncLinUcb {
    pub fn new(cfg: SyncLinUcbConfig, n_units: usize, dim: usize) -> Result<Self> {
        cfg.validate()?;
        let units = (0..n_units)
            .map(|_| MixedModelState::new(dim, cfg.ridge))
            .collect::<Result<_>>()?;
        let v_g = DMatrix::identity(dim, dim) * cfg.ridge;
        Ok(Self {
            chol_g: linalg::factor(&v_g, "fixed-effect Gram")?,
            v_g,
            u_g: DVector::zeros(dim),
            theta_g: DVector::zeros(dim),
            cfg,
            dim,
            units,
            totals: UpdateReport::default(),
        })
    }

    pub fn units(&self) -> &[MixedModelState] {
        &self.units
    }

    pub fn theta_global(&self) -> &DVector<f64> {
        &self.theta_g
    }

    fn message_scalars(&self) -> u64 {
        let p = self.dim as u64;
        p * p + p
    }
}

impl Policy for SyncLinUcb {
    fn name(&self) -> &'static str {
        "sync_linucb"
    }

    fn scores(&mut self, _t: usize, features: &[DVector<f64>]) -> Result<Vec<f64>> {
        check_features(features, self.units.len(), self.dim)?;
        let (af, ar) = (self.cfg.alpha_fixed, self.cfg.alpha_random);
        Ok(self
            .units
            .iter_mut()
            .zip(features)
            .map(|(u, x)| {
                if u.random_stale {
                    u.refit_random();
                }
                u.score(x, af, ar)
            })
            .collect())
    }

    fn update(&mut self, _t: usize, feedback: &[Feedback<'_>]) -> Result<UpdateReport> {
        let len = self.units.len();
        for fb in feedback {
            self.units
                .get_mut(fb.unit)
                .ok_or(Error::UnitOutOfRange { index: fb.unit, len })?
                .observe(fb.x, fb.y)?;
        }
        let mut report = UpdateReport::default();
        for fb in feedback {
            let u = &mut self.units[fb.unit];
            let candidate = &u.base_v + &u.delta_v;
            if determinant_trigger(&candidate, &u.delta_v, self.cfg.trigger_threshold)? {
                let dim = self.dim;
                let dv = std::mem::replace(&mut u.delta_v, DMatrix::zeros(dim, dim));
                let du = std::mem::replace(&mut u.delta_u, DVector::zeros(dim));
                self.v_g += dv;
                self.u_g += du;
                report.uploads += 1;
            }
        }
        if report.uploads > 0 {
            self.chol_g = linalg::factor(&self.v_g, "fixed-effect Gram")?;
            self.theta_g = self.chol_g.solve(&self.u_g);
            for u in &mut self.units {
                u.base_v.copy_from(&self.v_g);
                u.base_chol = self.chol_g.clone();
                u.theta_fixed.copy_from(&self.theta_g);
                u.random_stale = true;
            }
            report.downloads = self.units.len() as u64;
        }
        report.scalars = (report.uploads + report.downloads) * self.message_scalars();
        self.totals += report;
        Ok(report)
    }

    fn totals(&self) -> UpdateReport {
        self.totals
    }
}
