//! Deterministic helpers shared by unit, integration, and acceptance tests.

use crate::autodiff::Data;
use ndarray::{ArrayD, IxDyn};
use rand::Rng;

/// Max relative error between two slices, with an absolute floor so that
/// near-zero entries compare absolutely.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "rel_err length mismatch");
    let mut worst = 0.0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let scale = x.abs().max(y.abs()).max(1e-6);
        worst = worst.max((x - y).abs() / scale);
    }
    worst
}

/// Uniform array in `[-1, 1)`.
pub fn rand_array(rng: &mut impl Rng, shape: &[usize]) -> Data {
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ArrayD::from_shape_vec(IxDyn(shape), v).unwrap()
}

/// Asserts two scalars agree within `tol`.
pub fn assert_close(actual: f64, expected: f64, tol: f64, label: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{label}: expected {expected}, got {actual} (diff {})",
        (actual - expected).abs()
    );
}
