use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::bounds::determinant_trigger;
use super::server::ServerState;
use crate::error::{Error, Result};
use crate::linalg::{self, Chol};

/// Result of one local alternating solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlsOutcome {
    pub iterations: usize,
    pub converged: bool,
}

/// One unit's local statistics and estimates.
///
/// The unit's own history is kept as raw second moments (`Σ x xᵀ`, `Σ x y`,
/// `Σ y²`), which is all the alternating solves need: under a fixed
/// membership `c` the summed representation Gram of the history is
/// `(c cᵀ) ⊗ Σ x xᵀ`, and under a fixed representation `Q` the membership Gram
/// is `Qᵀ (Σ x xᵀ) Q`.
///
/// The representation statistics are the last broadcast server state
/// (`base_*`) with this unit's previously uploaded contribution (`synced_*`)
/// swapped out for its history re-expressed under the current membership.
/// Pending uploads (`delta_*`) accumulate one rank-one term per monitored
/// trial.
#[derive(Debug, Clone)]
pub struct UnitState {
    p: usize,
    k: usize,
    eta2: f64,

    a: DMatrix<f64>,
    b: DVector<f64>,
    q_hat: DVector<f64>,
    a_chol: Chol,

    base_a: DMatrix<f64>,
    base_b: DVector<f64>,
    synced_a: DMatrix<f64>,
    synced_b: DVector<f64>,
    delta_a: DMatrix<f64>,
    delta_b: DVector<f64>,

    d: DMatrix<f64>,
    d_vec: DVector<f64>,
    c_hat: DVector<f64>,
    d_chol: Chol,
    membership_stale: bool,
    /// Optional ridge prior on the membership: strength and center.
    c_prior: Option<(f64, DVector<f64>)>,

    sxx: DMatrix<f64>,
    sxy: DVector<f64>,
    syy: f64,
    n_obs: usize,
}

impl UnitState {
    pub fn new(p: usize, k: usize, eta1: f64, eta2: f64, c0: DVector<f64>) -> Result<Self> {
        if c0.len() != k {
            return Err(Error::Shape {
                expected: format!("membership of length {k}"),
                actual: c0.len().to_string(),
            });
        }
        if !(eta1 > 0.0 && eta2 > 0.0) {
            return Err(Error::config("ridge weights eta1, eta2 must be positive"));
        }
        let kp = k * p;
        let a = DMatrix::identity(kp, kp) * eta1;
        let d = DMatrix::identity(k, k) * eta2;
        Ok(Self {
            p,
            k,
            eta2,
            a_chol: linalg::factor(&a, "initial representation Gram")?,
            d_chol: linalg::factor(&d, "initial membership Gram")?,
            base_a: a.clone(),
            a,
            b: DVector::zeros(kp),
            q_hat: DVector::zeros(kp),
            base_b: DVector::zeros(kp),
            synced_a: DMatrix::zeros(kp, kp),
            synced_b: DVector::zeros(kp),
            delta_a: DMatrix::zeros(kp, kp),
            delta_b: DVector::zeros(kp),
            d,
            d_vec: DVector::zeros(k),
            c_hat: c0,
            membership_stale: false,
            c_prior: None,
            sxx: DMatrix::zeros(p, p),
            sxy: DVector::zeros(p),
            syy: 0.0,
            n_obs: 0,
        })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn q_hat(&self) -> &DVector<f64> {
        &self.q_hat
    }

    pub fn c_hat(&self) -> &DVector<f64> {
        &self.c_hat
    }

    pub fn membership_gram(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn membership_moment(&self) -> &DVector<f64> {
        &self.d_vec
    }

    pub fn pending(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.delta_a, &self.delta_b)
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn membership_stale(&self) -> bool {
        self.membership_stale
    }

    /// Raw `(Σ x xᵀ, Σ x y)` over the unit's history.
    pub fn moments(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.sxx, &self.sxy)
    }

    /// Overrides the membership estimate (initialization and scripted tests).
    pub fn set_membership(&mut self, c: DVector<f64>) -> Result<()> {
        if c.len() != self.k {
            return Err(Error::Shape {
                expected: format!("membership of length {}", self.k),
                actual: c.len().to_string(),
            });
        }
        self.c_hat = c;
        self.membership_stale = false;
        Ok(())
    }

    /// Adds `strength · ‖c − mean‖²` to the membership objective (oracle
    /// runs with known memberships).
    pub fn set_membership_prior(&mut self, mean: DVector<f64>, strength: f64) -> Result<()> {
        if mean.len() != self.k || !(strength > 0.0) {
            return Err(Error::config("membership prior needs length K and positive strength"));
        }
        self.c_prior = Some((strength, mean));
        Ok(())
    }

    /// Overrides the local representation estimate.
    pub fn set_representation(&mut self, q: DVector<f64>) -> Result<()> {
        if q.len() != self.k * self.p {
            return Err(Error::Shape {
                expected: format!("representation of length {}", self.k * self.p),
                actual: q.len().to_string(),
            });
        }
        self.q_hat = q;
        Ok(())
    }

    /// Restarts the shared-statistics bookkeeping from a fresh prior with a
    /// new membership: the whole history, re-expressed under `c`, becomes
    /// this unit's pending upload.
    pub fn restart(&mut self, c: DVector<f64>, eta1: f64) -> Result<()> {
        self.set_membership(c)?;
        let kp = self.k * self.p;
        self.base_a = DMatrix::identity(kp, kp) * eta1;
        self.base_b = DVector::zeros(kp);
        self.synced_a = DMatrix::zeros(kp, kp);
        self.synced_b = DVector::zeros(kp);
        self.delta_a = DMatrix::zeros(kp, kp);
        linalg::add_kron_outer(&mut self.delta_a, &self.c_hat, &self.sxx);
        self.delta_b = linalg::kron_vec(&self.c_hat, &self.sxy);
        self.update_local_representation()
    }

    pub fn observe(&mut self, x: &DVector<f64>, y: f64) {
        self.sxx.ger(1.0, x, x, 1.0);
        self.sxy.axpy(y, x, 1.0);
        self.syy += y * y;
        self.n_obs += 1;
    }

    /// `Q̂ᵀ x` for the current local representation.
    pub fn membership_design(&self, x: &DVector<f64>) -> DVector<f64> {
        let p = self.p;
        DVector::from_fn(self.k, |k, _| {
            self.q_hat.rows(k * p, p).dot(x)
        })
    }

    /// Membership half-step: ridge solve over the whole history with the
    /// local representation held fixed.
    pub fn update_membership(&mut self) -> Result<()> {
        let q = linalg::unstack(&self.q_hat, self.p);
        let sq = &self.sxx * &q;
        let mut d = q.transpose() * sq;
        let mut d_vec = q.transpose() * &self.sxy;
        let extra = match &self.c_prior {
            Some((s, mean)) => {
                d_vec.axpy(*s, mean, 1.0);
                *s
            }
            None => 0.0,
        };
        for i in 0..self.k {
            d[(i, i)] += self.eta2 + extra;
        }
        linalg::symmetrize(&mut d);
        self.d_vec = d_vec;
        self.d_chol = linalg::factor(&d, "membership Gram")?;
        self.c_hat = self.d_chol.solve(&self.d_vec);
        self.d = d;
        self.membership_stale = false;
        Ok(())
    }

    /// Representation half-step with the membership held fixed.
    pub fn update_local_representation(&mut self) -> Result<()> {
        let mut a = &self.base_a - &self.synced_a;
        linalg::add_kron_outer(&mut a, &self.c_hat, &self.sxx);
        let b = &self.base_b - &self.synced_b + linalg::kron_vec(&self.c_hat, &self.sxy);
        self.a_chol = linalg::factor(&a, "local representation Gram")?;
        self.q_hat = self.a_chol.solve(&b);
        self.a = a;
        self.b = b;
        Ok(())
    }

    /// Absorbs a new observation and alternates the two half-steps until the
    /// estimates settle, then queues this trial's contribution for upload.
    pub fn local_als(
        &mut self,
        x: &DVector<f64>,
        y: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<AlsOutcome> {
        if x.iter().any(|v| !v.is_finite()) || !y.is_finite() {
            return Err(Error::Numerical("non-finite observation".into()));
        }
        self.observe(x, y);
        self.update_local_representation()?;
        let mut outcome = AlsOutcome {
            iterations: 0,
            converged: false,
        };
        while outcome.iterations < max_iter.max(1) {
            let (c_prev, q_prev) = (self.c_hat.clone(), self.q_hat.clone());
            self.update_membership()?;
            self.update_local_representation()?;
            outcome.iterations += 1;
            let change = linalg::max_abs_diff(&self.c_hat, &c_prev)
                .max(linalg::max_abs_diff(&self.q_hat, &q_prev));
            if change < tol {
                outcome.converged = true;
                break;
            }
        }
        let w = linalg::kron_vec(&self.c_hat, x);
        self.delta_a.ger(1.0, &w, &w, 1.0);
        self.delta_b.axpy(y, &w, 1.0);
        Ok(outcome)
    }

    pub fn predict(&self, x: &DVector<f64>) -> f64 {
        self.c_hat.dot(&self.membership_design(x))
    }

    /// Predicted reward plus the membership and representation confidence widths.
    pub fn ucb_score(&self, x: &DVector<f64>, alpha_q: f64, alpha_c: f64) -> Result<f64> {
        if x.len() != self.p {
            return Err(Error::Shape {
                expected: format!("feature of length {}", self.p),
                actual: x.len().to_string(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite feature".into()));
        }
        let z = self.membership_design(x);
        let mean = self.c_hat.dot(&z);
        let mut score = mean;
        if alpha_c != 0.0 {
            score += alpha_c * linalg::inv_quad_form(&self.d_chol, &z).sqrt();
        }
        if alpha_q != 0.0 {
            let w = linalg::kron_vec(&self.c_hat, x);
            score += alpha_q * linalg::inv_quad_form(&self.a_chol, &w).sqrt();
        }
        if !score.is_finite() {
            return Err(Error::Numerical("non-finite UCB score".into()));
        }
        Ok(score)
    }

    /// Whether the pending statistics carry enough new information to upload.
    pub fn should_upload(&self, gamma: f64) -> Result<bool> {
        determinant_trigger(&(&self.base_a + &self.delta_a), &self.delta_a, gamma)
    }

    /// Hands over (and clears) the pending statistics.
    pub fn take_upload(&mut self) -> (DMatrix<f64>, DVector<f64>) {
        let kp = self.k * self.p;
        let da = std::mem::replace(&mut self.delta_a, DMatrix::zeros(kp, kp));
        let db = std::mem::replace(&mut self.delta_b, DVector::zeros(kp));
        self.synced_a += &da;
        self.synced_b += &db;
        (da, db)
    }

    pub fn apply_broadcast(&mut self, server: &ServerState) {
        self.a.copy_from(&server.a);
        self.b.copy_from(&server.b);
        self.q_hat.copy_from(&server.q_hat);
        self.a_chol = server.chol.clone();
        self.base_a.copy_from(&server.a);
        self.base_b.copy_from(&server.b);
        self.membership_stale = true;
    }

    /// The unit's regularized objective at the current estimates:
    /// squared residuals over its history, the membership ridge term, and the
    /// quadratic prior carried by the other units' synced statistics.
    pub fn local_objective(&self) -> f64 {
        let q = linalg::unstack(&self.q_hat, self.p);
        let beta = &q * &self.c_hat;
        let resid = (beta.transpose() * &self.sxx * &beta)[0] - 2.0 * beta.dot(&self.sxy) + self.syy;
        let prior_a = &self.base_a - &self.synced_a;
        let prior_b = &self.base_b - &self.synced_b;
        let prior = (self.q_hat.transpose() * prior_a * &self.q_hat)[0] - 2.0 * prior_b.dot(&self.q_hat);
        let c_prior = self
            .c_prior
            .as_ref()
            .map_or(0.0, |(s, mean)| s * (&self.c_hat - mean).norm_squared());
        resid + self.eta2 * self.c_hat.norm_squared() + c_prior + prior
    }

    pub fn snapshot(&self) -> UnitSnapshot {
        let rows = |m: &DMatrix<f64>| m.row_iter().map(|r| r.iter().copied().collect()).collect();
        let vec = |v: &DVector<f64>| v.iter().copied().collect();
        UnitSnapshot {
            a: rows(&self.a),
            b: vec(&self.b),
            d: rows(&self.d),
            d_vec: vec(&self.d_vec),
            delta_a: rows(&self.delta_a),
            delta_b: vec(&self.delta_b),
            q_hat: vec(&self.q_hat),
            c_hat: vec(&self.c_hat),
            n_obs: self.n_obs,
        }
    }
}

/// JSON snapshot of the estimator-visible state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSnapshot {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub d: Vec<Vec<f64>>,
    pub d_vec: Vec<f64>,
    pub delta_a: Vec<Vec<f64>>,
    pub delta_b: Vec<f64>,
    pub q_hat: Vec<f64>,
    pub c_hat: Vec<f64>,
    pub n_obs: usize,
}
