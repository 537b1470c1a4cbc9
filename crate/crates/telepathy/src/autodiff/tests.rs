use super::*;
use crate::testutil::{rand_array, rel_err};
use ndarray::IxDyn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Central finite differences of a scalar-valued graph with respect to one
/// leaf, compared against the analytic gradient.
fn check_grad(build: impl Fn(&Tensor) -> Tensor, x0: Data, tol: f64) {
    let x = Tensor::param(x0.clone());
    let loss = build(&x);
    loss.backward();
    let analytic = x.grad().expect("gradient missing");

    let eps = 1e-6;
    let mut numeric = ArrayD::zeros(x0.raw_dim());
    for i in 0..x0.len() {
        let mut plus = x0.clone();
        let mut minus = x0.clone();
        plus.as_slice_mut().unwrap()[i] += eps;
        minus.as_slice_mut().unwrap()[i] -= eps;
        let fp = build(&Tensor::constant(plus)).value();
        let fm = build(&Tensor::constant(minus)).value();
        numeric.as_slice_mut().unwrap()[i] = (fp - fm) / (2.0 * eps);
    }
    let e = rel_err(analytic.as_slice().unwrap(), numeric.as_slice().unwrap());
    assert!(e < tol, "gradient mismatch: rel err {e}");
}

fn arr2(rows: usize, cols: usize, seed: u64) -> Data {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand_array(&mut rng, &[rows, cols])
}

#[test]
fn elementwise_grads_match_finite_differences() {
    let x0 = arr2(3, 4, 1);
    let y = Tensor::constant(arr2(3, 4, 2));
    check_grad(|x| x.add(&y).mul(&y).sum_all(), x0.clone(), 1e-7);
    check_grad(|x| x.sub(&y).square().sum_all(), x0.clone(), 1e-7);
    check_grad(|x| x.div(&y.add_scalar(3.0)).sum_all(), x0.clone(), 1e-7);
    check_grad(|x| x.mul_scalar(2.5).add_scalar(1.0).sum_all(), x0, 1e-7);
}

#[test]
fn nonlinearity_grads_match_finite_differences() {
    let x0 = arr2(2, 5, 3);
    check_grad(|x| x.exp().sum_all(), x0.clone(), 1e-7);
    check_grad(|x| x.add_scalar(4.0).ln().sum_all(), x0.clone(), 1e-7);
    check_grad(|x| x.add_scalar(4.0).sqrt().sum_all(), x0.clone(), 1e-7);
    check_grad(|x| x.sigmoid().sum_all(), x0.clone(), 1e-7);
    check_grad(|x| x.tanh().sum_all(), x0.clone(), 1e-7);
    check_grad(|x| x.softplus().sum_all(), x0.clone(), 1e-7);
    check_grad(|x| x.silu().sum_all(), x0, 1e-7);
}

#[test]
fn matmul_and_shape_grads_match_finite_differences() {
    let x0 = arr2(3, 4, 4);
    let w = Tensor::constant(arr2(4, 2, 5));
    check_grad(|x| x.matmul(&w).square().sum_all(), x0.clone(), 1e-6);
    check_grad(|x| x.t().square().sum_all(), x0.clone(), 1e-7);
    check_grad(|x| x.reshape(&[2, 6]).matmul(&Tensor::constant(arr2(6, 3, 6))).sum_all(), x0.clone(), 1e-6);
    check_grad(|x| x.sum_axis0().square().sum_all(), x0.clone(), 1e-7);
    check_grad(|x| x.sum_axis1().square().sum_all(), x0.clone(), 1e-7);
    check_grad(|x| x.slice_rows(1, 3).square().sum_all(), x0.clone(), 1e-7);
    check_grad(|x| x.slice_cols(0, 2).square().sum_all(), x0.clone(), 1e-7);
    check_grad(|x| x.select_rows(&[0, 2, 2]).square().sum_all(), x0.clone(), 1e-7);
    check_grad(|x| x.scatter_rows(&[4, 0, 2], 6).square().sum_all(), x0.clone(), 1e-7);
    check_grad(|x| x.cumsum_exclusive_rows().square().sum_all(), x0, 1e-7);
}

#[test]
fn broadcast_grads_match_finite_differences() {
    let row = arr2(1, 5, 7);
    check_grad(|x| x.broadcast0(4).square().sum_all(), row, 1e-7);
    let col = arr2(4, 1, 8);
    check_grad(|x| x.broadcast1(3).square().sum_all(), col, 1e-7);
}

#[test]
fn concat_and_gather_grads_match_finite_differences() {
    let x0 = arr2(2, 3, 9);
    let other = Tensor::constant(arr2(3, 3, 10));
    check_grad(
        |x| Tensor::concat_rows(&[x.clone(), other.clone()]).square().sum_all(),
        x0.clone(),
        1e-7,
    );
    // Map with a duplicate read and a padding slot.
    let map = Rc::new(vec![0i64, 5, 5, -1, 3, 2]);
    check_grad(|x| x.gather_flat(map.clone(), &[2, 3]).square().sum_all(), x0, 1e-7);
}

#[test]
fn softmax_rows_sum_to_one_and_grads_check() {
    let x0 = arr2(4, 6, 11);
    let s = Tensor::constant(x0.clone()).softmax_rows();
    let sd = s.to_data();
    for i in 0..4 {
        let row: f64 = sd.index_axis(Axis(0), i).sum();
        assert!((row - 1.0).abs() < 1e-12);
    }
    let probe = Tensor::constant(arr2(4, 6, 12));
    check_grad(|x| x.softmax_rows().mul(&probe).sum_all(), x0, 1e-6);
}

#[test]
fn l2_normalize_rows_grad_checks() {
    let x0 = arr2(3, 4, 13);
    let probe = Tensor::constant(arr2(3, 4, 14));
    check_grad(|x| x.l2_normalize_rows(1e-9).mul(&probe).sum_all(), x0, 1e-6);
}

#[test]
fn single_key_softmax_returns_value_row() {
    // softmax over one element is exactly 1.
    let q = Tensor::constant(ArrayD::from_shape_vec(IxDyn(&[1, 1]), vec![0.37]).unwrap());
    let v = Tensor::constant(ArrayD::from_shape_vec(IxDyn(&[1, 3]), vec![1.0, -2.0, 0.5]).unwrap());
    let w = q.softmax_rows();
    let out = w.matmul(&v);
    assert_eq!(out.to_data().as_slice().unwrap(), &[1.0, -2.0, 0.5]);
}

#[test]
fn hand_softmax_case_matches() {
    // d_k = 1, query 1, keys {1, -1}, values {2, 0}, scale 1:
    // weight on key 1 is e/(e + e^-1) ~ 0.8808, output ~ 1.7616.
    let logits = Tensor::constant(ArrayD::from_shape_vec(IxDyn(&[1, 2]), vec![1.0, -1.0]).unwrap());
    let values = Tensor::constant(ArrayD::from_shape_vec(IxDyn(&[2, 1]), vec![2.0, 0.0]).unwrap());
    let out = logits.softmax_rows().matmul(&values).value();
    let expect = 2.0 * 1.0f64.exp() / (1.0f64.exp() + (-1.0f64).exp());
    assert!((out - expect).abs() < 1e-12);
    assert!((out - 1.7616).abs() < 1e-4);
}

#[test]
fn backward_accumulates_across_reuse() {
    let x = Tensor::param(ArrayD::from_elem(IxDyn(&[1]), 3.0));
    // f = x*x + 2x => f' = 2x + 2 = 8.
    let f = x.mul(&x).add(&x.mul_scalar(2.0)).sum_all();
    f.backward();
    assert!((x.grad().unwrap()[0] - 8.0).abs() < 1e-12);
}

#[test]
fn no_grad_suppresses_graph() {
    let x = Tensor::param(arr2(2, 2, 20));
    let y = no_grad(|| x.mul_scalar(2.0).sum_all());
    assert!(!y.requires_grad());
    // backward on a fresh graph still works afterwards.
    let z = x.sum_all();
    z.backward();
    assert!(x.grad().is_some());
}

#[test]
fn detach_blocks_gradient_flow() {
    let x = Tensor::param(arr2(2, 2, 21));
    let y = x.detach().mul_scalar(3.0).sum_all();
    assert!(!y.requires_grad());
    let z = x.mul(&x.detach()).sum_all();
    z.backward();
    // Gradient flows only through the live branch: dz/dx = detached(x).
    let g = x.grad().unwrap();
    let e = rel_err(g.as_slice().unwrap(), x.to_data().as_slice().unwrap());
    assert!(e < 1e-12);
}
