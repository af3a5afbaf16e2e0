//! The determinant trigger on 2×2 cases whose determinants are worked out by
//! hand.

use fedmon_core::fcom::determinant_trigger;
use nalgebra::DMatrix;

fn m(a: f64, b: f64, d: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a, b, b, d])
}

pub fn hand_computed_two_by_two_cases() {
    // det(2I) = 4, det(2I − I) = 1: ratio 4.
    assert!(determinant_trigger(&m(2.0, 0.0, 2.0), &m(1.0, 0.0, 1.0), 3.9).unwrap());
    assert!(!determinant_trigger(&m(2.0, 0.0, 2.0), &m(1.0, 0.0, 1.0), 4.1).unwrap());
    // det [[3,1],[1,2]] = 5, minus diag(1,0) leaves [[2,1],[1,2]] with det 3: ratio 5/3.
    assert!(determinant_trigger(&m(3.0, 1.0, 2.0), &m(1.0, 0.0, 0.0), 1.6).unwrap());
    assert!(!determinant_trigger(&m(3.0, 1.0, 2.0), &m(1.0, 0.0, 0.0), 1.7).unwrap());
    // Rank-one delta w wᵀ with w = (1, 1) on top of I: det(I + w wᵀ) = 1 + |w|² = 3.
    assert!(determinant_trigger(&m(2.0, 1.0, 2.0), &m(1.0, 1.0, 1.0), 2.9).unwrap());
    assert!(!determinant_trigger(&m(2.0, 1.0, 2.0), &m(1.0, 1.0, 1.0), 3.1).unwrap());
    // An empty delta never triggers, even at the smallest threshold.
    assert!(!determinant_trigger(&m(2.0, 0.5, 1.0), &DMatrix::zeros(2, 2), 1.0).unwrap());
    // Any information at all triggers at threshold 1.
    assert!(determinant_trigger(&m(2.0, 0.0, 2.0), &m(1e-6, 0.0, 0.0), 1.0).unwrap());
}

pub fn rejects_invalid_inputs() {
    let a = m(2.0, 0.0, 2.0);
    assert!(determinant_trigger(&a, &m(1.0, 0.0, 1.0), 0.5).is_err());
    assert!(determinant_trigger(&a, &m(3.0, 0.0, 3.0), 2.0).is_err());
    assert!(determinant_trigger(&a, &DMatrix::zeros(3, 3), 2.0).is_err());
}
