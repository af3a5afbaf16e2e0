//! Confidence radii for the representation and membership estimates, and the
//! determinant-ratio communication trigger.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Constants entering the closed-form confidence radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConstants {
    /// Bound on the design norm.
    pub s: f64,
    /// Bound on the representation norm.
    pub l: f64,
    /// Bound on the membership norm.
    pub p: f64,
    /// Linear convergence rates of the alternating solves and their slacks.
    pub v1: f64,
    pub v2: f64,
    pub eps1: f64,
    pub eps2: f64,
    /// Failure probability.
    pub delta: f64,
}

/// `(alpha_q, alpha_c)` at trial `t` for a population of `n` units, rank `k`
/// and feature dimension `p`.
pub fn lemma1_bounds(
    eta1: f64,
    eta2: f64,
    bc: &BoundConstants,
    t: usize,
    n: usize,
    k: usize,
    p: usize,
) -> Result<(f64, f64)> {
    let rho1 = bc.v1 + bc.eps1;
    let rho2 = bc.v2 + bc.eps2;
    if !(rho1 > 0.0 && rho1 < 1.0 && rho2 > 0.0 && rho2 < 1.0) {
        return Err(Error::config(format!(
            "convergence rates must satisfy 0 < v+eps < 1 (got {rho1}, {rho2})"
        )));
    }
    if !(bc.delta > 0.0 && bc.delta <= 1.0) {
        return Err(Error::config(format!("delta must lie in (0, 1], got {}", bc.delta)));
    }
    if !(bc.s > 0.0 && bc.l > 0.0 && bc.p > 0.0 && eta1 > 0.0 && eta2 > 0.0) {
        return Err(Error::config("norm bounds and ridge weights must be positive"));
    }
    let t_f = t as f64;
    let geometric = |rho: f64| rho * (1.0 - rho.powi(t as i32)) / (1.0 - rho);
    let kp = (k * p) as f64;
    let nk = (n * k) as f64;
    let cross = 2.0 * bc.s * bc.p * bc.l;

    let alpha_q = (kp * ((eta1 * kp + t_f * bc.s.powi(2) * bc.p.powi(2)) / (eta1 * kp * bc.delta)).ln())
        .sqrt()
        + cross / eta1.sqrt() * geometric(rho1)
        + eta1.sqrt() * bc.l;
    let alpha_c = (nk * ((eta2 * nk + t_f * bc.s.powi(2) * bc.l.powi(2)) / (eta2 * nk * bc.delta)).ln())
        .sqrt()
        + cross / eta2.sqrt() * geometric(rho2)
        + eta2.sqrt() * bc.p;
    Ok((alpha_q, alpha_c))
}

/// `det(a) > gamma * det(a - delta)`, compared on the log scale.
pub fn determinant_trigger(a: &DMatrix<f64>, delta: &DMatrix<f64>, gamma: f64) -> Result<bool> {
    if !(gamma >= 1.0) {
        return Err(Error::config(format!("trigger threshold must be >= 1, got {gamma}")));
    }
    if a.shape() != delta.shape() {
        return Err(Error::Shape {
            expected: format!("{:?}", a.shape()),
            actual: format!("{:?}", delta.shape()),
        });
    }
    let full = linalg::log_det(a, "local representation Gram")?;
    let without = linalg::log_det(&(a - delta), "Gram minus pending delta")?;
    Ok(full - without > gamma.ln())
}
