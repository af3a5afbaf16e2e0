//! The compact per-unit statistics against the population-level objects
//! written out literally: `X_it = 𝐗_it ⊗ I_K` with `𝐗_it` the p×N matrix
//! holding `x_it` in column i, and the block membership vector `c̃_it`.

use crate::common::{gauss_mat, gauss_vec, kron, min_eig, rng};
use fedmon_core::fcom::UnitState;
use fedmon_core::linalg::kron_vec;
use nalgebra::{DMatrix, DVector};

const TOL: f64 = 1e-9;

/// Literal `𝐗 ⊗ I_K` for unit `i`.
fn literal_design(x: &DVector<f64>, i: usize, n: usize, k: usize) -> DMatrix<f64> {
    let p = x.len();
    let mut big_x = DMatrix::zeros(p, n);
    big_x.column_mut(i).copy_from(x);
    kron(&big_x, &DMatrix::identity(k, k))
}

/// The literal design orders the representation coordinates as
/// (feature j, component k) → j·K + k; the compact one as k·p + j.
fn to_literal_order(q: &DVector<f64>, p: usize, k: usize) -> DVector<f64> {
    DVector::from_fn(p * k, |r, _| q[(r % k) * p + r / k])
}

fn matrix_to_compact(a: &DMatrix<f64>, p: usize, k: usize) -> DMatrix<f64> {
    let lit = |c: usize| (c % p) * k + c / p;
    DMatrix::from_fn(p * k, p * k, |r, c| a[(lit(r), lit(c))])
}

fn vector_to_compact(v: &DVector<f64>, p: usize, k: usize) -> DVector<f64> {
    DVector::from_fn(p * k, |r, _| v[(r % p) * k + r / p])
}

fn block_vec(c: &DVector<f64>, i: usize, n: usize) -> DVector<f64> {
    let k = c.len();
    let mut v = DVector::zeros(n * k);
    v.rows_mut(i * k, k).copy_from(c);
    v
}

struct Case {
    n: usize,
    k: usize,
    p: usize,
    i: usize,
    xs: Vec<DVector<f64>>,
    ys: Vec<f64>,
    q: DVector<f64>,
    c: DVector<f64>,
    eta1: f64,
    eta2: f64,
}

fn cases() -> Vec<Case> {
    let mut out = Vec::new();
    let mut r = rng(11);
    for n in 1..=4 {
        for k in 1..=3 {
            for p in k..=4 {
                let i = (n * 7 + k + p) % n;
                let t = 3 + (n + k + p) % 4;
                out.push(Case {
                    n,
                    k,
                    p,
                    i,
                    xs: (0..t).map(|_| gauss_vec(&mut r, p)).collect(),
                    ys: (0..t).map(|_| gauss_vec(&mut r, 1)[0] * 3.0).collect(),
                    q: gauss_vec(&mut r, k * p),
                    c: gauss_vec(&mut r, k),
                    eta1: 0.5 + (n as f64) * 0.25,
                    eta2: 1.5 - (k as f64) * 0.25,
                });
            }
        }
    }
    out
}

pub fn membership_statistics_match_literal_population_form() {
    for case in cases() {
        let Case { n, k, p, i, .. } = case;
        let q_lit = to_literal_order(&case.q, p, k);
        let mut big_d = DMatrix::identity(n * k, n * k) * case.eta2;
        let mut big_d_vec = DVector::zeros(n * k);
        for (x, y) in case.xs.iter().zip(&case.ys) {
            let xl = literal_design(x, i, n, k);
            let proj = xl.transpose() * &q_lit;
            big_d += &proj * proj.transpose();
            big_d_vec += proj * *y;
        }
        let c_tilde = big_d.clone().lu().solve(&big_d_vec).unwrap();

        let mut unit = UnitState::new(p, k, case.eta1, case.eta2, DVector::zeros(k)).unwrap();
        for (x, y) in case.xs.iter().zip(&case.ys) {
            unit.observe(x, *y);
        }
        unit.set_representation(case.q.clone()).unwrap();
        unit.update_membership().unwrap();

        let block = big_d.view((i * k, i * k), (k, k)).clone_owned();
        assert!((unit.membership_gram() - block).amax() < TOL, "D block n={n} k={k} p={p}");
        let d_block = big_d_vec.rows(i * k, k).clone_owned();
        assert!((unit.membership_moment() - d_block).amax() < TOL);
        let expected = block_vec(unit.c_hat(), i, n);
        assert!((c_tilde - expected).amax() < TOL, "c n={n} k={k} p={p}");
    }
}

pub fn representation_statistics_match_literal_population_form() {
    for case in cases() {
        let Case { n, k, p, i, .. } = case;
        let c_tilde = block_vec(&case.c, i, n);
        let mut big_a = DMatrix::identity(k * p, k * p) * case.eta1;
        let mut big_b = DVector::zeros(k * p);
        for (x, y) in case.xs.iter().zip(&case.ys) {
            let col = literal_design(x, i, n, k) * &c_tilde;
            big_a += &col * col.transpose();
            big_b += col * *y;
        }
        let q_lit = big_a.clone().lu().solve(&big_b).unwrap();

        let mut unit = UnitState::new(p, k, case.eta1, case.eta2, case.c.clone()).unwrap();
        for (x, y) in case.xs.iter().zip(&case.ys) {
            unit.observe(x, *y);
        }
        unit.update_local_representation().unwrap();

        assert!((unit.gram() - matrix_to_compact(&big_a, p, k)).amax() < TOL, "A n={n} k={k} p={p}");
        assert!((unit.moment() - vector_to_compact(&big_b, p, k)).amax() < TOL);
        assert!((unit.q_hat() - vector_to_compact(&q_lit, p, k)).amax() < TOL, "q n={n} k={k} p={p}");
    }
}

pub fn pending_upload_matches_literal_increment() {
    for case in cases() {
        let Case { n, k, p, i, .. } = case;
        let mut unit = UnitState::new(p, k, case.eta1, case.eta2, case.c.clone()).unwrap();
        let (mut lit_da, mut lit_db) = (DMatrix::zeros(k * p, k * p), DVector::zeros(k * p));
        for (x, y) in case.xs.iter().zip(&case.ys) {
            unit.local_als(x, *y, 1e-10, 200).unwrap();
            let col = literal_design(x, i, n, k) * block_vec(unit.c_hat(), i, n);
            lit_da += &col * col.transpose();
            lit_db += col * *y;
        }
        let (da, db) = unit.pending();
        assert!((da - matrix_to_compact(&lit_da, p, k)).amax() < TOL);
        assert!((db - vector_to_compact(&lit_db, p, k)).amax() < TOL);
    }
}

pub fn score_matches_literal_population_form() {
    for case in cases() {
        let Case { n, k, p, i, .. } = case;
        let mut unit = UnitState::new(p, k, case.eta1, case.eta2, case.c.clone()).unwrap();
        for (x, y) in case.xs.iter().zip(&case.ys) {
            unit.local_als(x, *y, 1e-8, 100).unwrap();
        }
        let x = &case.xs[0];
        let xl = literal_design(x, i, n, k);
        let q_lit = to_literal_order(unit.q_hat(), p, k);
        let c_tilde = block_vec(unit.c_hat(), i, n);
        // D over the whole population: unit i's block plus η₂ I elsewhere.
        let mut big_d = DMatrix::identity(n * k, n * k) * case.eta2;
        big_d.view_mut((i * k, i * k), (k, k)).copy_from(unit.membership_gram());
        let mut big_a = DMatrix::zeros(k * p, k * p);
        let lit = |c: usize| (c % k) * p + c / k;
        for r in 0..k * p {
            for c in 0..k * p {
                big_a[(r, c)] = unit.gram()[(lit(r), lit(c))];
            }
        }
        let (aq, ac) = (0.7, 1.3);
        let z = xl.transpose() * &q_lit;
        let w = &xl * &c_tilde;
        let literal = c_tilde.dot(&z)
            + ac * z.dot(&big_d.clone().lu().solve(&z).unwrap()).sqrt()
            + aq * w.dot(&big_a.clone().lu().solve(&w).unwrap()).sqrt();
        let compact = unit.ucb_score(x, aq, ac).unwrap();
        assert!((literal - compact).abs() < TOL * literal.abs().max(1.0), "{literal} vs {compact}");
    }
}

pub fn design_forms_predict_identically() {
    let mut r = rng(3);
    for _ in 0..200 {
        let (p, k) = (4, 3);
        let q = gauss_mat(&mut r, p, k);
        let c = gauss_vec(&mut r, k);
        let x = gauss_vec(&mut r, p);
        let vec_q = DVector::from_column_slice(q.as_slice());
        let a = kron_vec(&c, &x).dot(&vec_q);
        let b = c.dot(&(q.transpose() * &x));
        let d = x.dot(&(&q * &c));
        assert!((a - b).abs() < 1e-12 && (b - d).abs() < 1e-12);
    }
}

/// Runs ALS by hand, checking the local objective after every half-step.
pub fn alternating_solves_never_increase_the_objective() {
    let mut r = rng(5);
    for trial in 0..40 {
        let (p, k) = (3 + trial % 3, 1 + trial % 3);
        let mut unit = UnitState::new(p, k, 1.0, 0.7, gauss_vec(&mut r, k)).unwrap();
        let beta = gauss_vec(&mut r, p) * 2.0;
        for _ in 0..(5 + trial) {
            let x = gauss_vec(&mut r, p);
            unit.observe(&x, beta.dot(&x) + gauss_vec(&mut r, 1)[0]);
        }
        let mut last = unit.local_objective();
        for _ in 0..30 {
            unit.update_local_representation().unwrap();
            let j = unit.local_objective();
            assert!(j <= last + 1e-9 * last.abs().max(1.0), "q-step {last} -> {j}");
            last = j;
            unit.update_membership().unwrap();
            let j = unit.local_objective();
            assert!(j <= last + 1e-9 * last.abs().max(1.0), "c-step {last} -> {j}");
            last = j;
        }
    }
}

pub fn gram_matrices_stay_above_their_ridge_floor() {
    let mut r = rng(8);
    let (p, k, eta1, eta2) = (4, 2, 0.8, 1.7);
    let mut unit = UnitState::new(p, k, eta1, eta2, gauss_vec(&mut r, k)).unwrap();
    for _ in 0..60 {
        let x = gauss_vec(&mut r, p);
        unit.local_als(&x, gauss_vec(&mut r, 1)[0] * 5.0, 1e-6, 50).unwrap();
        assert!(min_eig(unit.gram()) >= eta1 * (1.0 - 1e-9));
        assert!(min_eig(unit.membership_gram()) >= eta2 * (1.0 - 1e-9));
        let (da, _) = unit.pending();
        assert!(min_eig(da) >= -1e-9 * da.amax().max(1.0));
    }
}

pub fn exploration_width_shrinks_with_information() {
    let mut r = rng(9);
    for _ in 0..100 {
        let d = 5;
        let g = gauss_mat(&mut r, d, d);
        let a = &g * g.transpose() + DMatrix::identity(d, d);
        let h = gauss_mat(&mut r, d, 2);
        let inc = &h * h.transpose();
        let w = gauss_vec(&mut r, d);
        let before = w.dot(&a.clone().cholesky().unwrap().solve(&w));
        let after = w.dot(&(&a + inc).cholesky().unwrap().solve(&w));
        assert!(after <= before * (1.0 + 1e-12));
    }
}
