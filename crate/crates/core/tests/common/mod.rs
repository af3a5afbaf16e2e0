#![allow(dead_code)]

use fedmon_core::environment::{GroundTruthSpec, SyntheticEnvironment};
use fedmon_core::fcom::{Exploration, FcomConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn gauss_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Textbook Kronecker product, written out entry by entry.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Solves the stacked least-squares problem `min ‖M v − r‖²` with an SVD.
pub fn lstsq(m: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
    m.clone().svd(true, true).solve(r, 1e-14).expect("svd solve")
}

/// Ridge solution `min Σ (rowᵀv − y)² + λ‖v − prior‖²` as a stacked
/// least-squares problem.
pub fn stacked_ridge(rows: &[DVector<f64>], ys: &[f64], lambda: f64, prior: &DVector<f64>) -> DVector<f64> {
    let d = prior.len();
    let n = rows.len();
    let mut m = DMatrix::zeros(n + d, d);
    let mut r = DVector::zeros(n + d);
    for (i, (row, y)) in rows.iter().zip(ys).enumerate() {
        m.row_mut(i).copy_from(&row.transpose());
        r[i] = *y;
    }
    let s = lambda.sqrt();
    for j in 0..d {
        m[(n + j, j)] = s;
        r[n + j] = s * prior[j];
    }
    lstsq(&m, &r)
}

pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

/// Small synthetic population over 5 features with rank-2 structure.
pub fn synthetic(n: usize, noise_sd: f64, horizon: usize, seed: u64) -> SyntheticEnvironment {
    let spec = GroundTruthSpec {
        dim: 5,
        rank: 2,
        n_units: n,
        sigma2: 100.0,
        noise_sd,
        priors: None,
    };
    SyntheticEnvironment::new(&spec, horizon, 1.0, seed).unwrap()
}

pub fn fcom_cfg(rank: usize, gamma: f64, alpha: f64) -> FcomConfig {
    FcomConfig {
        rank,
        trigger_threshold: gamma,
        exploration: Exploration::Constant {
            alpha_q: alpha,
            alpha_c: alpha,
        },
        ..FcomConfig::default()
    }
}
