//! Reverse-mode automatic differentiation over `f64` ndarrays.
//!
//! Small tape-free design: every [`Tensor`] owns its value and an optional
//! backward step linking it to its parents. Calling [`Tensor::backward`] on a
//! scalar walks the graph in reverse topological order and accumulates
//! gradients into every reachable parameter leaf.
//!
//! Double precision is used throughout so analytic gradients can be checked
//! against central finite differences at tight tolerances. All operations run
//! single-threaded with a fixed reduction order, which keeps repeated runs
//! bit-identical.
//!
//! Gradient recording can be suspended with [`no_grad`], e.g. for evaluation
//! forwards or for score lookups whose gradient is deliberately discarded.

use ndarray::{ArrayD, Axis, Ix2, IxDyn};
use std::cell::{Cell, Ref, RefCell};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

/// Dense value type shared by the whole crate.
pub type Data = ArrayD<f64>;

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Runs `f` with gradient recording disabled on this thread.
///
/// Tensors created inside carry no parent links, so large evaluation-only
/// forwards cost no graph memory.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    let prev = GRAD_ENABLED.with(|g| g.replace(false));
    let out = f();
    GRAD_ENABLED.with(|g| g.set(prev));
    out
}

fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

type BackwardFn = Box<dyn Fn(&Data, &[Tensor])>;

struct BackwardStep {
    parents: Vec<Tensor>,
    back: BackwardFn,
}

struct Inner {
    id: u64,
    data: RefCell<Data>,
    grad: RefCell<Option<Data>>,
    requires_grad: bool,
    step: Option<BackwardStep>,
}

/// A node in the computation graph: an n-d `f64` array plus backward links.
///
/// Cloning is cheap (reference-counted). Leaves created with
/// [`Tensor::param`] participate in gradient accumulation; leaves from
/// [`Tensor::constant`] do not.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

impl Tensor {
    fn leaf(data: Data, requires_grad: bool) -> Tensor {
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                step: None,
            }),
        }
    }

    /// Trainable leaf; gradients accumulate here.
    pub fn param(data: Data) -> Tensor {
        Tensor::leaf(data, true)
    }

    /// Non-trainable leaf.
    pub fn constant(data: Data) -> Tensor {
        Tensor::leaf(data, false)
    }

    /// Scalar constant of shape `[1]`.
    pub fn scalar(v: f64) -> Tensor {
        Tensor::constant(ArrayD::from_elem(IxDyn(&[1]), v))
    }

    fn from_op(data: Data, parents: Vec<Tensor>, back: BackwardFn) -> Tensor {
        let track = grad_enabled() && parents.iter().any(|p| p.inner.requires_grad);
        if !track {
            return Tensor::leaf(data, false);
        }
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad: true,
                step: Some(BackwardStep { parents, back }),
            }),
        }
    }

    /// Borrow the forward value.
    pub fn data(&self) -> Ref<'_, Data> {
        self.inner.data.borrow()
    }

    /// Copy of the forward value.
    pub fn to_data(&self) -> Data {
        self.inner.data.borrow().clone()
    }

    /// Scalar value of a single-element tensor.
    pub fn value(&self) -> f64 {
        let d = self.inner.data.borrow();
        assert_eq!(d.len(), 1, "value() requires a scalar tensor");
        *d.iter().next().unwrap()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.data.borrow().shape().to_vec()
    }

    pub fn len(&self) -> usize {
        self.inner.data.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    /// Accumulated gradient, if any.
    pub fn grad(&self) -> Option<Data> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Overwrite the stored value in place (used by optimizers).
    pub fn set_data(&self, data: Data) {
        let mut d = self.inner.data.borrow_mut();
        assert_eq!(d.shape(), data.shape(), "set_data shape mismatch");
        *d = data;
    }

    /// A view of the same value detached from the graph.
    pub fn detach(&self) -> Tensor {
        Tensor::constant(self.to_data())
    }

    fn accumulate(&self, g: &Data) {
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(acc) => *acc += g,
            None => *slot = Some(g.clone()),
        }
    }

    /// Backpropagate from this scalar, accumulating into every parameter.
    pub fn backward(&self) {
        assert_eq!(self.len(), 1, "backward() requires a scalar loss");
        let order = topo_order(self);
        self.accumulate(&ArrayD::from_elem(IxDyn(&[1]), 1.0));
        for node in order.iter().rev() {
            let Some(step) = node.inner.step.as_ref() else {
                continue;
            };
            let g = node.inner.grad.borrow();
            let Some(g) = g.as_ref() else { continue };
            (step.back)(g, &step.parents);
        }
        // Interior grads are no longer needed once leaves are filled in.
        for node in order {
            if node.inner.step.is_some() {
                *node.inner.grad.borrow_mut() = None;
            }
        }
    }
}

fn topo_order(root: &Tensor) -> Vec<Tensor> {
    let mut order: Vec<Tensor> = Vec::new();
    let mut visited: std::collections::HashSet<u64> = std::collections::HashSet::new();
    // Iterative post-order DFS; graphs can be deep enough to overflow the
    // call stack otherwise.
    let mut stack: Vec<(Tensor, usize)> = vec![(root.clone(), 0)];
    visited.insert(root.inner.id);
    while let Some((node, child)) = stack.pop() {
        let n_parents = node.inner.step.as_ref().map_or(0, |s| s.parents.len());
        if child < n_parents {
            stack.push((node.clone(), child + 1));
            let parent = node.inner.step.as_ref().unwrap().parents[child].clone();
            if parent.inner.requires_grad && visited.insert(parent.inner.id) {
                stack.push((parent, 0));
            }
        } else {
            order.push(node);
        }
    }
    order
}

fn same_shape(a: &Tensor, b: &Tensor, op: &str) {
    assert_eq!(
        a.shape(),
        b.shape(),
        "{op}: shape mismatch {:?} vs {:?}",
        a.shape(),
        b.shape()
    );
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Tensor {
        same_shape(self, other, "add");
        let out = &*self.data() + &*other.data();
        Tensor::from_op(
            out,
            vec![self.clone(), other.clone()],
            Box::new(|g, ps| {
                ps[0].accumulate(g);
                ps[1].accumulate(g);
            }),
        )
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        same_shape(self, other, "sub");
        let out = &*self.data() - &*other.data();
        Tensor::from_op(
            out,
            vec![self.clone(), other.clone()],
            Box::new(|g, ps| {
                ps[0].accumulate(g);
                ps[1].accumulate(&(-g));
            }),
        )
    }

    pub fn mul(&self, other: &Tensor) -> Tensor {
        same_shape(self, other, "mul");
        let out = &*self.data() * &*other.data();
        Tensor::from_op(
            out,
            vec![self.clone(), other.clone()],
            Box::new(|g, ps| {
                ps[0].accumulate(&(g * &*ps[1].data()));
                ps[1].accumulate(&(g * &*ps[0].data()));
            }),
        )
    }

    pub fn div(&self, other: &Tensor) -> Tensor {
        same_shape(self, other, "div");
        let out = &*self.data() / &*other.data();
        Tensor::from_op(
            out,
            vec![self.clone(), other.clone()],
            Box::new(|g, ps| {
                let b = ps[1].data();
                ps[0].accumulate(&(g / &*b));
                let a = ps[0].data();
                ps[1].accumulate(&(-(g * &*a) / (&*b * &*b)));
            }),
        )
    }

    pub fn neg(&self) -> Tensor {
        self.mul_scalar(-1.0)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        let out = &*self.data() + c;
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(|g, ps| ps[0].accumulate(g)),
        )
    }

    pub fn mul_scalar(&self, c: f64) -> Tensor {
        let out = &*self.data() * c;
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, ps| ps[0].accumulate(&(g * c))),
        )
    }

    pub fn square(&self) -> Tensor {
        self.mul(self)
    }
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

impl Tensor {
    pub fn exp(&self) -> Tensor {
        let out = self.data().mapv(f64::exp);
        let saved = out.clone();
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, ps| ps[0].accumulate(&(g * &saved))),
        )
    }

    pub fn ln(&self) -> Tensor {
        let out = self.data().mapv(f64::ln);
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(|g, ps| {
                let a = ps[0].data();
                ps[0].accumulate(&(g / &*a));
            }),
        )
    }

    pub fn sqrt(&self) -> Tensor {
        let out = self.data().mapv(f64::sqrt);
        let saved = out.clone();
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, ps| ps[0].accumulate(&(g / (&saved * 2.0)))),
        )
    }

    pub fn sigmoid(&self) -> Tensor {
        let out = self.data().mapv(|x| 1.0 / (1.0 + (-x).exp()));
        let saved = out.clone();
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, ps| {
                let d = &saved * &(1.0 - &saved);
                ps[0].accumulate(&(g * &d));
            }),
        )
    }

    pub fn tanh(&self) -> Tensor {
        let out = self.data().mapv(f64::tanh);
        let saved = out.clone();
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, ps| {
                let d = 1.0 - &(&saved * &saved);
                ps[0].accumulate(&(g * &d));
            }),
        )
    }

    /// `ln(1 + e^x)`, computed stably; derivative is `sigmoid(x)`.
    pub fn softplus(&self) -> Tensor {
        let out = self
            .data()
            .mapv(|x| if x > 30.0 { x } else { (1.0 + x.exp()).ln() });
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(|g, ps| {
                let d = ps[0].data().mapv(|x| 1.0 / (1.0 + (-x).exp()));
                ps[0].accumulate(&(g * &d));
            }),
        )
    }

    /// `x * sigmoid(x)`.
    pub fn silu(&self) -> Tensor {
        self.mul(&self.sigmoid())
    }
}

// ---------------------------------------------------------------------------
// Linear algebra and shape ops
// ---------------------------------------------------------------------------

impl Tensor {
    /// 2-D matrix product `[n,k] x [k,m] -> [n,m]`.
    pub fn matmul(&self, other: &Tensor) -> Tensor {
        let a = self.data();
        let b = other.data();
        let a2 = a.view().into_dimensionality::<Ix2>().expect("matmul lhs 2d");
        let b2 = b.view().into_dimensionality::<Ix2>().expect("matmul rhs 2d");
        assert_eq!(a2.ncols(), b2.nrows(), "matmul inner dims");
        let out = a2.dot(&b2).into_dyn();
        drop(a);
        drop(b);
        Tensor::from_op(
            out,
            vec![self.clone(), other.clone()],
            Box::new(|g, ps| {
                let g2 = g.view().into_dimensionality::<Ix2>().unwrap();
                {
                    let b = ps[1].data();
                    let b2 = b.view().into_dimensionality::<Ix2>().unwrap();
                    ps[0].accumulate(&g2.dot(&b2.t()).into_dyn());
                }
                {
                    let a = ps[0].data();
                    let a2 = a.view().into_dimensionality::<Ix2>().unwrap();
                    ps[1].accumulate(&a2.t().dot(&g2).into_dyn());
                }
            }),
        )
    }

    /// 2-D transpose (result stored in standard layout).
    pub fn t(&self) -> Tensor {
        let out = {
            let d = self.data();
            let d2 = d.view().into_dimensionality::<Ix2>().expect("t() 2d");
            d2.t().as_standard_layout().to_owned().into_dyn()
        };
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(|g, ps| {
                let g2 = g.view().into_dimensionality::<Ix2>().unwrap();
                ps[0].accumulate(&g2.t().as_standard_layout().to_owned().into_dyn());
            }),
        )
    }

    pub fn reshape(&self, shape: &[usize]) -> Tensor {
        let orig: Vec<usize> = self.shape();
        let out = self
            .to_data()
            .into_shape_with_order(IxDyn(shape))
            .expect("reshape size mismatch");
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, ps| {
                let back = g
                    .clone()
                    .into_shape_with_order(IxDyn(&orig))
                    .expect("reshape backward");
                ps[0].accumulate(&back);
            }),
        )
    }

    pub fn sum_all(&self) -> Tensor {
        let s = self.data().sum();
        let shape: Vec<usize> = self.shape();
        Tensor::from_op(
            ArrayD::from_elem(IxDyn(&[1]), s),
            vec![self.clone()],
            Box::new(move |g, ps| {
                ps[0].accumulate(&ArrayD::from_elem(IxDyn(&shape), g[0]));
            }),
        )
    }

    pub fn mean_all(&self) -> Tensor {
        let n = self.len() as f64;
        self.sum_all().mul_scalar(1.0 / n)
    }

    /// Column sums: `[n,d] -> [1,d]`.
    pub fn sum_axis0(&self) -> Tensor {
        let d = self.data();
        let out = d.sum_axis(Axis(0)).insert_axis(Axis(0));
        let n = d.shape()[0];
        drop(d);
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, ps| {
                let row = g.index_axis(Axis(0), 0);
                let full = row.broadcast((n, row.len())).unwrap().to_owned().into_dyn();
                ps[0].accumulate(&full);
            }),
        )
    }

    /// Row sums: `[n,d] -> [n,1]`.
    pub fn sum_axis1(&self) -> Tensor {
        let d = self.data();
        let out = d.sum_axis(Axis(1)).insert_axis(Axis(1));
        let m = d.shape()[1];
        drop(d);
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, ps| {
                let col = g.index_axis(Axis(1), 0);
                let n = col.len();
                let mut full = ArrayD::zeros(IxDyn(&[n, m]));
                for i in 0..n {
                    full.index_axis_mut(Axis(0), i).fill(col[i]);
                }
                ps[0].accumulate(&full);
            }),
        )
    }

    /// Repeat a `[1,d]` row `n` times -> `[n,d]`.
    pub fn broadcast0(&self, n: usize) -> Tensor {
        let d = self.data();
        assert_eq!(d.shape()[0], 1, "broadcast0 expects [1,d]");
        let row = d.index_axis(Axis(0), 0);
        let out = row.broadcast((n, row.len())).unwrap().to_owned().into_dyn();
        drop(d);
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(|g, ps| {
                ps[0].accumulate(&g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }),
        )
    }

    /// Repeat a `[n,1]` column `m` times -> `[n,m]`.
    pub fn broadcast1(&self, m: usize) -> Tensor {
        let d = self.data();
        assert_eq!(d.shape()[1], 1, "broadcast1 expects [n,1]");
        let n = d.shape()[0];
        let mut out = ArrayD::zeros(IxDyn(&[n, m]));
        for i in 0..n {
            out.index_axis_mut(Axis(0), i).fill(d[[i, 0]]);
        }
        drop(d);
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(|g, ps| {
                ps[0].accumulate(&g.sum_axis(Axis(1)).insert_axis(Axis(1)));
            }),
        )
    }

    /// Rows `r0..r1` of a 2-D tensor.
    pub fn slice_rows(&self, r0: usize, r1: usize) -> Tensor {
        let d = self.data();
        let (n, m) = (d.shape()[0], d.shape()[1]);
        assert!(r0 <= r1 && r1 <= n, "slice_rows out of range");
        let out = d
            .view()
            .into_dimensionality::<Ix2>()
            .unwrap()
            .slice(ndarray::s![r0..r1, ..])
            .to_owned()
            .into_dyn();
        drop(d);
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, ps| {
                let mut full = ArrayD::zeros(IxDyn(&[n, m]));
                full.slice_mut(ndarray::s![r0..r1, ..])
                    .assign(&g.view().into_dimensionality::<Ix2>().unwrap());
                ps[0].accumulate(&full);
            }),
        )
    }

    /// Columns `c0..c1` of a 2-D tensor.
    pub fn slice_cols(&self, c0: usize, c1: usize) -> Tensor {
        let d = self.data();
        let (n, m) = (d.shape()[0], d.shape()[1]);
        assert!(c0 <= c1 && c1 <= m, "slice_cols out of range");
        let out = d
            .view()
            .into_dimensionality::<Ix2>()
            .unwrap()
            .slice(ndarray::s![.., c0..c1])
            .to_owned()
            .into_dyn();
        drop(d);
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, ps| {
                let mut full = ArrayD::zeros(IxDyn(&[n, m]));
                full.slice_mut(ndarray::s![.., c0..c1])
                    .assign(&g.view().into_dimensionality::<Ix2>().unwrap());
                ps[0].accumulate(&full);
            }),
        )
    }

    /// Gather rows by index (duplicates allowed): `out[k] = self[idx[k]]`.
    pub fn select_rows(&self, idx: &[usize]) -> Tensor {
        let d = self.data();
        let (n, m) = (d.shape()[0], d.shape()[1]);
        let mut out = ArrayD::zeros(IxDyn(&[idx.len(), m]));
        for (k, &i) in idx.iter().enumerate() {
            assert!(i < n, "select_rows index out of range");
            out.index_axis_mut(Axis(0), k).assign(&d.index_axis(Axis(0), i));
        }
        drop(d);
        let idx: Vec<usize> = idx.to_vec();
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, ps| {
                let mut full = ArrayD::zeros(IxDyn(&[n, m]));
                for (k, &i) in idx.iter().enumerate() {
                    let mut row = full.index_axis_mut(Axis(0), i);
                    row += &g.index_axis(Axis(0), k);
                }
                ps[0].accumulate(&full);
            }),
        )
    }

    /// Scatter rows into a zero matrix of `n_rows`: `out[idx[k]] = self[k]`.
    ///
    /// Indices must be unique.
    pub fn scatter_rows(&self, idx: &[usize], n_rows: usize) -> Tensor {
        let d = self.data();
        assert_eq!(d.shape()[0], idx.len(), "scatter_rows count mismatch");
        let m = d.shape()[1];
        let mut out = ArrayD::zeros(IxDyn(&[n_rows, m]));
        for (k, &i) in idx.iter().enumerate() {
            assert!(i < n_rows, "scatter_rows index out of range");
            out.index_axis_mut(Axis(0), i).assign(&d.index_axis(Axis(0), k));
        }
        drop(d);
        let idx: Vec<usize> = idx.to_vec();
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, ps| {
                let mut back = ArrayD::zeros(IxDyn(&[idx.len(), m]));
                for (k, &i) in idx.iter().enumerate() {
                    back.index_axis_mut(Axis(0), k).assign(&g.index_axis(Axis(0), i));
                }
                ps[0].accumulate(&back);
            }),
        )
    }

    /// Stack 2-D tensors along axis 0. All parts must share the column count.
    pub fn concat_rows(parts: &[Tensor]) -> Tensor {
        assert!(!parts.is_empty(), "concat_rows needs at least one part");
        let m = parts[0].shape()[1];
        let rows: Vec<usize> = parts.iter().map(|p| p.shape()[0]).collect();
        let total: usize = rows.iter().sum();
        let mut out = ArrayD::zeros(IxDyn(&[total, m]));
        let mut r = 0;
        for p in parts {
            let d = p.data();
            assert_eq!(d.shape()[1], m, "concat_rows column mismatch");
            out.slice_mut(ndarray::s![r..r + d.shape()[0], ..])
                .assign(&d.view().into_dimensionality::<Ix2>().unwrap());
            r += d.shape()[0];
        }
        Tensor::from_op(
            out,
            parts.to_vec(),
            Box::new(move |g, ps| {
                let g2 = g.view().into_dimensionality::<Ix2>().unwrap();
                let mut r = 0;
                for (p, &nr) in ps.iter().zip(rows.iter()) {
                    p.accumulate(&g2.slice(ndarray::s![r..r + nr, ..]).to_owned().into_dyn());
                    r += nr;
                }
            }),
        )
    }

    /// Index-map gather over flattened storage. `map[i]` gives the source
    /// element of output element `i`; `-1` yields zero (used for conv padding).
    pub fn gather_flat(&self, map: Rc<Vec<i64>>, out_shape: &[usize]) -> Tensor {
        let numel: usize = out_shape.iter().product();
        assert_eq!(map.len(), numel, "gather_flat map length mismatch");
        let d = self.data();
        let src = d.as_slice().expect("gather_flat contiguous input");
        let in_len = src.len();
        let mut out = vec![0.0f64; numel];
        for (o, &m) in out.iter_mut().zip(map.iter()) {
            if m >= 0 {
                *o = src[m as usize];
            }
        }
        drop(d);
        let out = ArrayD::from_shape_vec(IxDyn(out_shape), out).unwrap();
        let in_shape: Vec<usize> = self.shape();
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, ps| {
                let gs = g.as_slice().expect("gather_flat grad contiguous");
                let mut back = vec![0.0f64; in_len];
                for (gv, &m) in gs.iter().zip(map.iter()) {
                    if m >= 0 {
                        back[m as usize] += gv;
                    }
                }
                ps[0].accumulate(&ArrayD::from_shape_vec(IxDyn(&in_shape), back).unwrap());
            }),
        )
    }

    /// Exclusive cumulative sum along each row: `out[i,j] = sum_{k<j} a[i,k]`.
    pub fn cumsum_exclusive_rows(&self) -> Tensor {
        let d = self.data();
        let (n, m) = (d.shape()[0], d.shape()[1]);
        let mut out = ArrayD::zeros(IxDyn(&[n, m]));
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..m {
                out[[i, j]] = acc;
                acc += d[[i, j]];
            }
        }
        drop(d);
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, ps| {
                // d out[i,j] / d a[i,k] = 1 for j > k.
                let mut back = ArrayD::zeros(IxDyn(&[n, m]));
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in (0..m).rev() {
                        back[[i, j]] = acc;
                        acc += g[[i, j]];
                    }
                }
                ps[0].accumulate(&back);
            }),
        )
    }
}

// ---------------------------------------------------------------------------
// Composite helpers
// ---------------------------------------------------------------------------

impl Tensor {
    /// Row-wise softmax of a 2-D tensor. Uses the shift-invariance of softmax:
    /// subtracting the detached row max leaves both value and gradient exact.
    pub fn softmax_rows(&self) -> Tensor {
        let maxes = {
            let d = self.data();
            let (n, _m) = (d.shape()[0], d.shape()[1]);
            let mut mx = ArrayD::zeros(IxDyn(&[n, 1]));
            for i in 0..n {
                let row = d.index_axis(Axis(0), i);
                mx[[i, 0]] = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            }
            Tensor::constant(mx)
        };
        let m = self.shape()[1];
        let e = self.sub(&maxes.broadcast1(m)).exp();
        let denom = e.sum_axis1().broadcast1(m);
        e.div(&denom)
    }

    /// Mean squared difference over all elements.
    pub fn mse(&self, target: &Tensor) -> Tensor {
        self.sub(target).square().mean_all()
    }

    /// Row-wise L2 normalization with an epsilon for the zero vector.
    pub fn l2_normalize_rows(&self, eps: f64) -> Tensor {
        let m = self.shape()[1];
        let norm = self.square().sum_axis1().add_scalar(eps * eps).sqrt();
        self.div(&norm.broadcast1(m))
    }
}

#[cfg(test)]
mod tests;
