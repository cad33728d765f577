//! Dense-tensor reverse-mode differentiation graph.
//!
//! A [`Tensor`] is a shared handle to shape + row-major values + gradient
//! buffer. Ops build new tensors holding their parents and a backward
//! closure; [`Tensor::backward`] walks the graph once in reverse topological
//! order and accumulates exact gradients into every ancestor that requires
//! them.
//!
//! Borrow discipline for backward closures: the engine passes the output's
//! values and gradient as plain slices, closures capture any input values
//! they need as owned clones at construction time, and they borrow at most
//! one parent mutably at a time. That makes ops whose inputs alias (for
//! example `mul(&x, &x)`) safe.

use std::cell::{Ref, RefCell};
use std::collections::HashSet;
use std::rc::Rc;

/// Backward pass of one op: (output values, output gradient, parents).
pub type BackwardFn = Box<dyn Fn(&[f64], &[f64], &[Tensor])>;

pub(crate) struct Inner {
    pub(crate) shape: Vec<usize>,
    pub(crate) values: Vec<f64>,
    pub(crate) grad: Vec<f64>,
    pub(crate) requires_grad: bool,
    pub(crate) parents: Vec<Tensor>,
    pub(crate) backward: Option<BackwardFn>,
}

/// Shared handle to a node in the differentiation graph.
#[derive(Clone)]
pub struct Tensor(pub(crate) Rc<RefCell<Inner>>);

impl Tensor {
    fn leaf(shape: Vec<usize>, values: Vec<f64>, requires_grad: bool) -> Tensor {
        let n: usize = shape.iter().product();
        assert_eq!(
            n,
            values.len(),
            "shape {shape:?} wants {n} values, got {}",
            values.len()
        );
        Tensor(Rc::new(RefCell::new(Inner {
            shape,
            grad: vec![0.0; values.len()],
            values,
            requires_grad,
            parents: Vec::new(),
            backward: None,
        })))
    }

    /// Trainable leaf: participates in gradient accumulation.
    pub fn parameter(shape: &[usize], values: Vec<f64>) -> Tensor {
        Tensor::leaf(shape.to_vec(), values, true)
    }

    /// Non-trainable leaf (inputs, labels, masks).
    pub fn constant(shape: &[usize], values: Vec<f64>) -> Tensor {
        Tensor::leaf(shape.to_vec(), values, false)
    }

    /// Scalar constant.
    pub fn scalar(v: f64) -> Tensor {
        Tensor::constant(&[1], vec![v])
    }

    /// Result of an op. Graph edges and the backward closure are kept only
    /// when some parent participates in differentiation, so inference-only
    /// forwards never build a graph.
    pub fn from_op(
        shape: Vec<usize>,
        values: Vec<f64>,
        parents: Vec<Tensor>,
        backward: BackwardFn,
    ) -> Tensor {
        let n: usize = shape.iter().product();
        assert_eq!(n, values.len(), "op output shape/value mismatch");
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        let (parents, backward) = if requires_grad {
            (parents, Some(backward))
        } else {
            (Vec::new(), None)
        };
        Tensor(Rc::new(RefCell::new(Inner {
            shape,
            grad: vec![0.0; n],
            values,
            requires_grad,
            parents,
            backward,
        })))
    }

    pub fn shape(&self) -> Vec<usize> {
        self.0.borrow().shape.clone()
    }

    pub fn len(&self) -> usize {
        self.0.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.0.borrow().requires_grad
    }

    /// Borrowed view of the values (panics if an op is mid-mutation).
    pub fn values(&self) -> Ref<'_, [f64]> {
        Ref::map(self.0.borrow(), |i| i.values.as_slice())
    }

    pub fn values_vec(&self) -> Vec<f64> {
        self.0.borrow().values.clone()
    }

    pub fn grad_vec(&self) -> Vec<f64> {
        self.0.borrow().grad.clone()
    }

    /// The single value of a scalar tensor.
    pub fn value(&self) -> f64 {
        let b = self.0.borrow();
        assert_eq!(b.values.len(), 1, "value() on non-scalar {:?}", b.shape);
        b.values[0]
    }

    /// Overwrites values in place (optimizer updates, finite differences).
    pub fn set_values(&self, values: &[f64]) {
        let mut b = self.0.borrow_mut();
        assert_eq!(b.values.len(), values.len());
        b.values.copy_from_slice(values);
    }

    pub fn set_value_at(&self, i: usize, v: f64) {
        self.0.borrow_mut().values[i] = v;
    }

    pub fn value_at(&self, i: usize) -> f64 {
        self.0.borrow().values[i]
    }

    pub fn zero_grad(&self) {
        self.0.borrow_mut().grad.fill(0.0);
    }

    /// Accumulates gradients of this scalar into every ancestor: seeds
    /// d(self)/d(self) = 1 and walks the graph in reverse topological order.
    pub fn backward(&self) {
        {
            let b = self.0.borrow();
            assert_eq!(
                b.values.len(),
                1,
                "backward() needs a scalar root, got shape {:?}",
                b.shape
            );
            if !b.requires_grad {
                return;
            }
        }
        let order = topo_order(self);
        // Op-node gradients are scratch space for a single pass; only leaves
        // accumulate across calls, so two backward() calls double a
        // parameter's gradient rather than compounding the seed.
        for node in &order {
            let mut inner = node.0.borrow_mut();
            if inner.backward.is_some() {
                inner.grad.fill(0.0);
            }
        }
        self.0.borrow_mut().grad[0] += 1.0;
        for node in order.iter().rev() {
            let inner = node.0.borrow();
            if let Some(f) = &inner.backward {
                f(&inner.values, &inner.grad, &inner.parents);
            }
        }
    }
}

/// Parents-first topological order of the subgraph that requires gradients.
fn topo_order(root: &Tensor) -> Vec<Tensor> {
    let mut order = Vec::new();
    let mut visited: HashSet<usize> = HashSet::new();
    let mut stack: Vec<(Tensor, bool)> = vec![(root.clone(), false)];
    while let Some((node, emit)) = stack.pop() {
        if emit {
            order.push(node);
            continue;
        }
        let key = Rc::as_ptr(&node.0) as usize;
        if !visited.insert(key) {
            continue;
        }
        stack.push((node.clone(), true));
        let inner = node.0.borrow();
        for p in &inner.parents {
            if p.requires_grad() {
                stack.push((p.clone(), false));
            }
        }
    }
    order
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let b = self.0.borrow();
        f.debug_struct("Tensor")
            .field("shape", &b.shape)
            .field("requires_grad", &b.requires_grad)
            .field("values", &b.values)
            .finish()
    }
}
