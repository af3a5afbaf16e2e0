//! Confidence radii against values evaluated independently at 40 significant
//! digits.

use fedmon_core::fcom::{lemma1_bounds, BoundConstants};

fn unit_constants() -> BoundConstants {
    BoundConstants {
        s: 1.0,
        l: 1.0,
        p: 1.0,
        v1: 0.25,
        v2: 0.25,
        eps1: 0.25,
        eps2: 0.25,
        delta: 0.1,
    }
}

pub fn spot_values() {
    let (aq, ac) = lemma1_bounds(1.0, 1.0, &unit_constants(), 100, 4, 3, 10).unwrap();
    assert!((aq - 13.633_328_023_418_829).abs() < 1e-12, "{aq}");
    assert!((ac - 10.377_948_751_110_546).abs() < 1e-12, "{ac}");
}

pub fn zero_trials_leave_only_the_log_and_prior_terms() {
    let bc = unit_constants();
    let (aq, ac) = lemma1_bounds(2.0, 0.5, &bc, 0, 4, 3, 10).unwrap();
    let expected_q = (30.0 * (1.0f64 / 0.1).ln()).sqrt() + 2.0f64.sqrt();
    let expected_c = (12.0 * (1.0f64 / 0.1).ln()).sqrt() + 0.5f64.sqrt();
    assert!((aq - expected_q).abs() < 1e-12);
    assert!((ac - expected_c).abs() < 1e-12);
}

pub fn radii_grow_with_time() {
    let bc = unit_constants();
    let mut last = (0.0, 0.0);
    for t in [0, 1, 2, 5, 10, 100, 1_000, 30_000] {
        let now = lemma1_bounds(1.0, 1.0, &bc, t, 100, 3, 10).unwrap();
        assert!(now.0 >= last.0 && now.1 >= last.1);
        last = now;
    }
}

pub fn rejects_rates_outside_the_unit_interval() {
    let mut bc = unit_constants();
    bc.v1 = 0.8;
    assert!(lemma1_bounds(1.0, 1.0, &bc, 10, 4, 3, 10).unwrap_err().is_config());
    let mut bc = unit_constants();
    bc.delta = 0.0;
    assert!(lemma1_bounds(1.0, 1.0, &bc, 10, 4, 3, 10).unwrap_err().is_config());
}
