use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Chol};

/// Global representation statistics held by the coordinating server.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub(crate) a: DMatrix<f64>,
    pub(crate) b: DVector<f64>,
    pub(crate) q_hat: DVector<f64>,
    pub(crate) chol: Chol,
}

impl ServerState {
    pub fn new(dim: usize, eta1: f64) -> Result<Self> {
        let a = DMatrix::identity(dim, dim) * eta1;
        let chol = linalg::factor(&a, "initial global Gram")?;
        Ok(Self {
            a,
            b: DVector::zeros(dim),
            q_hat: DVector::zeros(dim),
            chol,
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

    /// Folds one unit's upload into the global statistics and re-solves.
    pub fn aggregate(&mut self, delta_a: &DMatrix<f64>, delta_b: &DVector<f64>) -> Result<()> {
        if delta_a.shape() != self.a.shape() || delta_b.len() != self.b.len() {
            return Err(Error::Shape {
                expected: format!("{:?} / {}", self.a.shape(), self.b.len()),
                actual: format!("{:?} / {}", delta_a.shape(), delta_b.len()),
            });
        }
        self.a += delta_a;
        self.b += delta_b;
        self.chol = linalg::factor(&self.a, "global Gram")?;
        self.q_hat = self.chol.solve(&self.b);
        Ok(())
    }

    pub fn snapshot(&self) -> ServerSnapshot {
        ServerSnapshot {
            a: self.a.row_iter().map(|r| r.iter().copied().collect()).collect(),
            b: self.b.iter().copied().collect(),
            q_hat: self.q_hat.iter().copied().collect(),
        }
    }
}

/// JSON snapshot for golden tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerSnapshot {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub q_hat: Vec<f64>,
}
