//! Define-by-run reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is a reference-counted node. Every operation applied to
//! tensors that require gradients records a backward closure on the output
//! node, so the graph is rebuilt on each forward pass and freed once the
//! last handle to the loss is dropped. [`Tensor::backward`] walks the graph
//! in reverse topological order and accumulates into the leaves.

use std::cell::{Cell, Ref, RefCell, RefMut};
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Runs `f` without recording any backward operations.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    let prev = GRAD_ENABLED.with(|g| g.replace(false));
    let out = f();
    GRAD_ENABLED.with(|g| g.set(prev));
    out
}

pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// Backward rule of a recorded operation.
pub(crate) trait BackwardOp<S: Scalar> {
    fn inputs(&self) -> Vec<&Tensor<S>>;

    /// Propagates `grad` (same shape as the output) into the inputs.
    fn backward(&self, output: &[S], grad: &[S]);
}

struct Node<S: Scalar> {
    shape: Vec<usize>,
    data: RefCell<Vec<S>>,
    grad: RefCell<Option<Vec<S>>>,
    requires_grad: bool,
    op: Option<Box<dyn BackwardOp<S>>>,
}

/// N-dimensional row-major array with optional gradient tracking.
pub struct Tensor<S: Scalar>(Rc<Node<S>>);

impl<S: Scalar> Clone for Tensor<S> {
    fn clone(&self) -> Self {
        Tensor(Rc::clone(&self.0))
    }
}

impl<S: Scalar> fmt::Debug for Tensor<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .finish()
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<S: Scalar> Tensor<S> {
    fn leaf(shape: Vec<usize>, data: Vec<S>, requires_grad: bool) -> Self {
        Tensor(Rc::new(Node {
            shape,
            data: RefCell::new(data),
            grad: RefCell::new(None),
            requires_grad,
            op: None,
        }))
    }

    pub fn from_vec(shape: &[usize], data: Vec<S>) -> Result<Self> {
        if numel(shape) != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {} values, got {}",
                numel(shape),
                data.len()
            )));
        }
        Ok(Self::leaf(shape.to_vec(), data, false))
    }

    pub fn from_f64(shape: &[usize], data: &[f64]) -> Result<Self> {
        Self::from_vec(shape, data.iter().map(|&v| S::of(v)).collect())
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, S::zero())
    }

    pub fn full(shape: &[usize], value: S) -> Self {
        Self::leaf(shape.to_vec(), vec![value; numel(shape)], false)
    }

    pub fn scalar(value: S) -> Self {
        Self::leaf(Vec::new(), vec![value], false)
    }

    /// Leaf tensor that accumulates gradients.
    pub fn variable(shape: &[usize], data: Vec<S>) -> Result<Self> {
        let t = Self::from_vec(shape, data)?;
        Ok(Self::leaf(t.0.shape.clone(), t.0.data.take(), true))
    }

    /// Detached copy sharing no graph history.
    pub fn detach(&self) -> Self {
        Self::leaf(self.0.shape.clone(), self.data().clone(), false)
    }

    /// Output of an operation; records `op` when any input tracks gradients.
    pub(crate) fn from_op(shape: Vec<usize>, data: Vec<S>, op: impl BackwardOp<S> + 'static) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        let track = grad_enabled() && op.inputs().iter().any(|t| t.requires_grad());
        Tensor(Rc::new(Node {
            shape,
            data: RefCell::new(data),
            grad: RefCell::new(None),
            requires_grad: track,
            op: if track { Some(Box::new(op)) } else { None },
        }))
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn ndim(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        numel(&self.0.shape)
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn data(&self) -> Ref<'_, Vec<S>> {
        self.0.data.borrow()
    }

    /// Mutable access to the values; used by optimizers and checkpoint loading.
    pub fn data_mut(&self) -> RefMut<'_, Vec<S>> {
        self.0.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<S> {
        self.data().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> S {
        let d = self.data();
        assert_eq!(d.len(), 1, "item() on tensor of shape {:?}", self.shape());
        d[0]
    }

    pub fn grad(&self) -> Option<Vec<S>> {
        self.0.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    pub fn same_node(&self, other: &Tensor<S>) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }

    /// Adds `f`'s contribution into this tensor's gradient buffer.
    pub(crate) fn accumulate(&self, f: impl FnOnce(&mut [S])) {
        if !self.0.requires_grad {
            return;
        }
        let mut g = self.0.grad.borrow_mut();
        let buf = g.get_or_insert_with(|| vec![S::zero(); self.numel()]);
        f(buf);
    }

    pub(crate) fn accumulate_slice(&self, delta: &[S]) {
        self.accumulate(|g| {
            for (a, &d) in g.iter_mut().zip(delta) {
                *a += d;
            }
        });
    }

    /// Populates gradients of every reachable leaf. Calls accumulate.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::NonScalarLoss(self.shape().to_vec()));
        }
        if !self.requires_grad() {
            return Ok(());
        }
        let order = self.topo_order();
        self.accumulate(|g| g[0] += S::one());
        for node in order.iter().rev() {
            let Some(op) = node.0.op.as_ref() else {
                continue;
            };
            let grad = node.0.grad.borrow_mut().take();
            if let Some(grad) = grad {
                let out = node.0.data.borrow();
                op.backward(&out, &grad);
            }
        }
        Ok(())
    }

    /// Post-order over the recorded graph (inputs before outputs).
    fn topo_order(&self) -> Vec<Tensor<S>> {
        let mut order = Vec::new();
        let mut seen: HashSet<*const Node<S>> = HashSet::new();
        let mut stack: Vec<(Tensor<S>, bool)> = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !seen.insert(Rc::as_ptr(&t.0)) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(op) = t.0.op.as_ref() {
                for input in op.inputs() {
                    if input.requires_grad() && !seen.contains(&Rc::as_ptr(&input.0)) {
                        stack.push((input.clone(), false));
                    }
                }
            }
        }
        order
    }

    pub fn all_finite(&self) -> bool {
        self.data().iter().all(|v| v.is_finite())
    }
}
