//! Closed-form ridge solutions against a generic least-squares solver on the
//! stacked system `[rows; √λ I] v = [y; √λ prior]`.

use crate::common::{gauss_vec, rng, stacked_ridge};
use fedmon_core::baselines::RidgeArmState;
use fedmon_core::fcom::{ServerState, UnitState};
use fedmon_core::linalg::kron_vec;
use nalgebra::{DMatrix, DVector};

const TOL: f64 = 1e-8;

pub fn membership_step_is_the_ridge_solution() {
    let mut r = rng(21);
    for _ in 0..25 {
        let (p, k) = (4, 3);
        let q = gauss_vec(&mut r, k * p);
        let mut unit = UnitState::new(p, k, 1.0, 0.6, gauss_vec(&mut r, k)).unwrap();
        unit.set_representation(q.clone()).unwrap();
        let (mut rows, mut ys) = (Vec::new(), Vec::new());
        for _ in 0..7 {
            let x = gauss_vec(&mut r, p);
            let y = gauss_vec(&mut r, 1)[0] * 4.0;
            unit.observe(&x, y);
            rows.push(unit.membership_design(&x));
            ys.push(y);
        }
        unit.update_membership().unwrap();
        let oracle = stacked_ridge(&rows, &ys, 0.6, &DVector::zeros(k));
        assert!((unit.c_hat() - oracle).amax() < TOL);
    }
}

pub fn representation_step_is_the_ridge_solution() {
    let mut r = rng(22);
    for _ in 0..25 {
        let (p, k) = (3, 2);
        let c = gauss_vec(&mut r, k);
        let mut unit = UnitState::new(p, k, 0.9, 1.0, c.clone()).unwrap();
        let (mut rows, mut ys) = (Vec::new(), Vec::new());
        for _ in 0..6 {
            let x = gauss_vec(&mut r, p);
            let y = gauss_vec(&mut r, 1)[0];
            unit.observe(&x, y);
            rows.push(kron_vec(&c, &x));
            ys.push(y);
        }
        unit.update_local_representation().unwrap();
        let oracle = stacked_ridge(&rows, &ys, 0.9, &DVector::zeros(k * p));
        assert!((unit.q_hat() - oracle).amax() < TOL);
    }
}

pub fn rank_one_representation_is_plain_ridge() {
    let mut r = rng(23);
    let p = 4;
    let mut unit = UnitState::new(p, 1, 1.0, 1.0, DVector::from_element(1, 1.0)).unwrap();
    let (mut rows, mut ys) = (Vec::new(), Vec::new());
    for _ in 0..9 {
        let x = gauss_vec(&mut r, p);
        let y = gauss_vec(&mut r, 1)[0];
        unit.observe(&x, y);
        rows.push(x);
        ys.push(y);
    }
    unit.update_local_representation().unwrap();
    let oracle = stacked_ridge(&rows, &ys, 1.0, &DVector::zeros(p));
    assert!((unit.q_hat() - oracle).amax() < TOL);
}

pub fn server_estimate_is_ridge_over_all_uploaded_rows() {
    let mut r = rng(24);
    let d = 6;
    let mut server = ServerState::new(d, 1.3).unwrap();
    let (mut rows, mut ys) = (Vec::new(), Vec::new());
    for _ in 0..4 {
        let (mut da, mut db) = (DMatrix::zeros(d, d), DVector::zeros(d));
        for _ in 0..3 {
            let w = gauss_vec(&mut r, d);
            let y = gauss_vec(&mut r, 1)[0];
            da += &w * w.transpose();
            db += &w * y;
            rows.push(w);
            ys.push(y);
        }
        server.aggregate(&da, &db).unwrap();
    }
    let oracle = stacked_ridge(&rows, &ys, 1.3, &DVector::zeros(d));
    assert!((server.q_hat() - oracle).amax() < TOL);
}

/// After a broadcast, the local representation is the ridge fit over the
/// other units' uploaded rows plus this unit's entire history expressed
/// under its current membership — its own earlier uploads are not counted
/// twice.
pub fn local_representation_after_broadcast_counts_each_observation_once() {
    let mut r = rng(25);
    let (p, k, eta1) = (3, 2, 1.0);
    let mut server = ServerState::new(k * p, eta1).unwrap();
    let (mut rows, mut ys) = (Vec::new(), Vec::new());

    // Another unit's upload.
    let other_c = gauss_vec(&mut r, k);
    let (mut da, mut db) = (DMatrix::zeros(k * p, k * p), DVector::zeros(k * p));
    for _ in 0..5 {
        let w = kron_vec(&other_c, &gauss_vec(&mut r, p));
        let y = gauss_vec(&mut r, 1)[0];
        da += &w * w.transpose();
        db += &w * y;
        rows.push(w);
        ys.push(y);
    }
    server.aggregate(&da, &db).unwrap();

    // This unit: observe, upload, receive the broadcast, observe more.
    let mut unit = UnitState::new(p, k, eta1, 1.0, gauss_vec(&mut r, k)).unwrap();
    let mut own = Vec::new();
    for _ in 0..4 {
        let x = gauss_vec(&mut r, p);
        let y = gauss_vec(&mut r, 1)[0];
        unit.local_als(&x, y, 1e-9, 100).unwrap();
        own.push((x, y));
    }
    let (da, db) = unit.take_upload();
    server.aggregate(&da, &db).unwrap();
    unit.apply_broadcast(&server);
    for _ in 0..3 {
        let x = gauss_vec(&mut r, p);
        let y = gauss_vec(&mut r, 1)[0];
        unit.observe(&x, y);
        own.push((x, y));
    }
    let c = DVector::from_vec(vec![0.4, -1.1]);
    unit.set_membership(c.clone()).unwrap();
    unit.update_local_representation().unwrap();

    for (x, y) in &own {
        rows.push(kron_vec(&c, x));
        ys.push(*y);
    }
    let oracle = stacked_ridge(&rows, &ys, eta1, &DVector::zeros(k * p));
    assert!((unit.q_hat() - oracle).amax() < TOL);
}

pub fn linucb_arm_after_five_observations() {
    let mut r = rng(26);
    let p = 4;
    let mut arm = RidgeArmState::new(p, 1.0).unwrap();
    let (mut rows, mut ys) = (Vec::new(), Vec::new());
    for _ in 0..5 {
        let x = gauss_vec(&mut r, p);
        let y = gauss_vec(&mut r, 1)[0] * 2.0;
        arm.observe(&x, y).unwrap();
        rows.push(x);
        ys.push(y);
    }
    let oracle = stacked_ridge(&rows, &ys, 1.0, &DVector::zeros(p));
    assert!((arm.theta() - oracle).amax() < TOL);
}
