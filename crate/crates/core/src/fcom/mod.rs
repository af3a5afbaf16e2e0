//! Federated collaborative online monitoring.
//!
//! Each unit fits its membership vector and a local copy of the shared
//! representation by alternating ridge solves, queues the representation
//! statistics learned from each monitored trial, and uploads them only when a
//! determinant-ratio test says they carry enough new information. The server
//! folds uploads into global statistics and broadcasts the result to every
//! unit at the end of any trial with at least one upload.

mod bounds;
mod kmeans;
mod server;
mod unit;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{Feedback, Policy, UpdateReport};
use crate::rng::{stream, Stream};

pub use bounds::{determinant_trigger, lemma1_bounds, BoundConstants};
pub use server::{ServerSnapshot, ServerState};
pub use unit::{AlsOutcome, UnitSnapshot, UnitState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Exploration {
    Constant { alpha_q: f64, alpha_c: f64 },
    /// Recompute the confidence radii from the closed-form bounds each trial.
    Lemma1(BoundConstants),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MembershipInit {
    /// Seeded draw from the uniform distribution on the unit sphere.
    Sphere,
    /// Sphere start, then a one-off re-initialization once every unit has
    /// `window` observations: k-means (cosine geometry) over per-unit ridge
    /// estimates assigns memberships, and all units resynchronize.
    KMeans { window: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FcomConfig {
    /// Representation rank `K`.
    pub rank: usize,
    pub eta1: f64,
    pub eta2: f64,
    /// Determinant-ratio threshold for uploads (`>= 1`).
    pub trigger_threshold: f64,
    pub exploration: Exploration,
    pub als_tol: f64,
    pub als_max_iter: usize,
    /// Re-fit stale memberships of units that received a broadcast before
    /// scoring them.
    pub refresh_memberships: bool,
    pub init: MembershipInit,
}

impl Default for FcomConfig {
    fn default() -> Self {
        Self {
            rank: 3,
            eta1: 1.0,
            eta2: 1.0,
            trigger_threshold: 2.0,
            exploration: Exploration::Constant {
                alpha_q: 0.5,
                alpha_c: 0.5,
            },
            als_tol: 1e-6,
            als_max_iter: 50,
            refresh_memberships: true,
            init: MembershipInit::Sphere,
        }
    }
}

impl FcomConfig {
    pub fn validate(&self, n_units: usize, dim: usize) -> Result<()> {
        if self.rank == 0 || self.rank > dim {
            return Err(Error::config(format!(
                "rank K={} must satisfy 1 <= K <= p={dim}",
                self.rank
            )));
        }
        if !(self.eta1 > 0.0 && self.eta2 > 0.0) {
            return Err(Error::config("eta1 and eta2 must be positive"));
        }
        if !(self.trigger_threshold >= 1.0) {
            return Err(Error::config("trigger_threshold must be >= 1"));
        }
        if !(self.als_tol >= 0.0) || self.als_max_iter == 0 {
            return Err(Error::config("als_tol must be >= 0 and als_max_iter >= 1"));
        }
        match self.exploration {
            Exploration::Constant { alpha_q, alpha_c } => {
                if !(alpha_q >= 0.0 && alpha_c >= 0.0) {
                    return Err(Error::config("exploration weights must be nonnegative"));
                }
            }
            Exploration::Lemma1(bc) => {
                lemma1_bounds(self.eta1, self.eta2, &bc, 1, n_units, self.rank, dim)?;
            }
        }
        if let MembershipInit::KMeans { window } = self.init {
            if window == 0 || n_units < self.rank {
                return Err(Error::config("k-means warm start needs window >= 1 and N >= K"));
            }
        }
        Ok(())
    }

    pub fn alphas(&self, t: usize, n_units: usize, dim: usize) -> Result<(f64, f64)> {
        match self.exploration {
            Exploration::Constant { alpha_q, alpha_c } => Ok((alpha_q, alpha_c)),
            Exploration::Lemma1(bc) => lemma1_bounds(self.eta1, self.eta2, &bc, t, n_units, self.rank, dim),
        }
    }

    /// Replaces both exploration weights with `alpha` (tuning grids).
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.exploration = Exploration::Constant {
            alpha_q: alpha,
            alpha_c: alpha,
        };
        self
    }
}

/// How representation statistics reach the shared state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SyncMode {
    /// Determinant-triggered uploads, broadcast on any upload.
    Federated,
    /// Every monitored observation is sent to a central server each trial.
    Centralized,
}

/// The full population state for one run: units, server, counters.
#[derive(Debug, Clone)]
pub struct Fcom {
    cfg: FcomConfig,
    sync: SyncMode,
    dim: usize,
    units: Vec<UnitState>,
    server: ServerState,
    totals: UpdateReport,
    warm_started: bool,
}

impl Fcom {
    pub fn new(cfg: FcomConfig, n_units: usize, dim: usize, seed: u64) -> Result<Self> {
        Self::with_sync(cfg, SyncMode::Federated, n_units, dim, seed)
    }

    /// The same estimator with a central server that receives every
    /// monitored observation as it happens: no triggers, and no downloads
    /// are billed because the server itself does the scoring.
    pub fn centralized(cfg: FcomConfig, n_units: usize, dim: usize, seed: u64) -> Result<Self> {
        Self::with_sync(cfg, SyncMode::Centralized, n_units, dim, seed)
    }

    pub(crate) fn with_sync(
        cfg: FcomConfig,
        sync: SyncMode,
        n_units: usize,
        dim: usize,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate(n_units, dim)?;
        let k = cfg.rank;
        let mut rng = stream(seed, Stream::PolicyInit);
        let units = (0..n_units)
            .map(|_| UnitState::new(dim, k, cfg.eta1, cfg.eta2, random_direction(&mut rng, k)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            server: ServerState::new(k * dim, cfg.eta1)?,
            cfg,
            sync,
            dim,
            units,
            totals: UpdateReport::default(),
            warm_started: false,
        })
    }

    pub fn config(&self) -> &FcomConfig {
        &self.cfg
    }

    pub fn units(&self) -> &[UnitState] {
        &self.units
    }

    pub fn units_mut(&mut self) -> &mut [UnitState] {
        &mut self.units
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    /// Installs a known representation as a strong prior (`strength · I`
    /// centered at `q`) on the server and every unit, together with known
    /// memberships (held by an equally strong membership prior). Used for oracle runs: with noiseless rewards the data
    /// agree with the prior, so the estimates stay at the truth up to the
    /// ridge shrinkage toward zero.
    pub fn preload(&mut self, q: &DVector<f64>, memberships: &[DVector<f64>], strength: f64) -> Result<()> {
        let kp = self.cfg.rank * self.dim;
        if q.len() != kp || memberships.len() != self.units.len() {
            return Err(Error::Shape {
                expected: format!("representation of length {kp} and {} memberships", self.units.len()),
                actual: format!("{} and {}", q.len(), memberships.len()),
            });
        }
        if !(strength > 0.0) {
            return Err(Error::config("prior strength must be positive"));
        }
        let mut server = ServerState::new(kp, self.cfg.eta1)?;
        server.aggregate(
            &(nalgebra::DMatrix::identity(kp, kp) * strength),
            &(q * (self.cfg.eta1 + strength)),
        )?;
        self.server = server;
        self.broadcast();
        for (u, c) in self.units.iter_mut().zip(memberships) {
            u.set_membership(c.clone())?;
            u.set_membership_prior(c.clone(), strength)?;
        }
        Ok(())
    }

    /// Scalars in one representation message (`A` and `b`).
    pub fn message_scalars(&self) -> u64 {
        let kp = (self.cfg.rank * self.dim) as u64;
        kp * kp + kp
    }

    fn broadcast(&mut self) {
        for u in &mut self.units {
            u.apply_broadcast(&self.server);
        }
    }

    /// Clustering warm start; returns the communication it cost.
    fn warm_start(&mut self) -> Result<UpdateReport> {
        let k = self.cfg.rank;
        let ridge: Vec<DVector<f64>> = self
            .units
            .iter()
            .map(|u| {
                let (sxx, sxy) = u.moments();
                let mut v = sxx.clone();
                for i in 0..self.dim {
                    v[(i, i)] += self.cfg.eta2;
                }
                crate::linalg::factor(&v, "warm-start ridge Gram").map(|c| c.solve(sxy))
            })
            .collect::<Result<_>>()?;
        let directions: Vec<DVector<f64>> = ridge
            .iter()
            .map(|b| {
                let n = b.norm();
                if n > 0.0 { b / n } else { b.clone() }
            })
            .collect();
        let centroids = kmeans::spherical_kmeans(&directions, k, 50);
        let mut report = UpdateReport::default();
        let mut server = ServerState::new(k * self.dim, self.cfg.eta1)?;
        let (eta1, message) = (self.cfg.eta1, self.message_scalars());
        for (u, b) in self.units.iter_mut().zip(&ridge) {
            // Membership: the coefficient along the closest centroid.
            let (best, proj) = centroids
                .iter()
                .enumerate()
                .map(|(j, m)| (j, m.dot(b)))
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                .expect("k >= 1");
            let mut c = DVector::zeros(k);
            c[best] = proj;
            u.restart(c, eta1)?;
            let (da, db) = u.take_upload();
            server.aggregate(&da, &db)?;
            report.uploads += 1;
            report.scalars += message;
        }
        self.server = server;
        self.broadcast();
        if self.sync == SyncMode::Federated {
            report.downloads += self.units.len() as u64;
            report.scalars += self.units.len() as u64 * self.message_scalars();
        }
        Ok(report)
    }
}

fn random_direction<R: Rng>(rng: &mut R, k: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

impl Policy for Fcom {
    fn name(&self) -> &'static str {
        match self.sync {
            SyncMode::Federated => "fcom",
            SyncMode::Centralized => "clucb",
        }
    }

    fn scores(&mut self, t: usize, features: &[DVector<f64>]) -> Result<Vec<f64>> {
        if features.len() != self.units.len() {
            return Err(Error::Shape {
                expected: format!("{} feature vectors", self.units.len()),
                actual: features.len().to_string(),
            });
        }
        let (alpha_q, alpha_c) = self.cfg.alphas(t, self.units.len(), self.dim)?;
        let refresh = self.cfg.refresh_memberships;
        self.units
            .iter_mut()
            .zip(features)
            .enumerate()
            .map(|(i, (u, x))| {
                if refresh && u.membership_stale() {
                    u.update_membership()?;
                }
                u.ucb_score(x, alpha_q, alpha_c).map_err(|e| match e {
                    Error::Numerical(_) if x.iter().any(|v| !v.is_finite()) => {
                        Error::NonFiniteFeature { unit: i }
                    }
                    other => other,
                })
            })
            .collect()
    }

    fn update(&mut self, _t: usize, feedback: &[Feedback<'_>]) -> Result<UpdateReport> {
        let mut report = UpdateReport::default();
        for fb in feedback {
            let len = self.units.len();
            let unit = self
                .units
                .get_mut(fb.unit)
                .ok_or(Error::UnitOutOfRange { index: fb.unit, len })?;
            let out = unit.local_als(fb.x, fb.y, self.cfg.als_tol, self.cfg.als_max_iter)?;
            if !out.converged {
                report.als_nonconverged += 1;
            }
        }

        let mut uploaded = false;
        for fb in feedback {
            let unit = &mut self.units[fb.unit];
            let send = match self.sync {
                SyncMode::Federated => unit.should_upload(self.cfg.trigger_threshold)?,
                SyncMode::Centralized => true,
            };
            if send {
                let (da, db) = unit.take_upload();
                self.server.aggregate(&da, &db)?;
                uploaded = true;
                report.uploads += 1;
                report.scalars += match self.sync {
                    SyncMode::Federated => self.message_scalars(),
                    SyncMode::Centralized => self.dim as u64 + 1,
                };
            }
        }
        if uploaded {
            self.broadcast();
            if self.sync == SyncMode::Federated {
                let n = self.units.len() as u64;
                report.downloads += n;
                report.scalars += n * self.message_scalars();
            }
        }

        if let MembershipInit::KMeans { window } = self.cfg.init {
            if !self.warm_started && self.units.iter().all(|u| u.n_obs() >= window) {
                self.warm_started = true;
                report += self.warm_start()?;
            }
        }
        self.totals += report;
        Ok(report)
    }

    fn totals(&self) -> UpdateReport {
        self.totals
    }
}
