//! Reverse-mode automatic differentiation on a Wengert tape.
//!
//! Graphs are built eagerly: every op validates shapes, computes its value
//! immediately, and records parent indices. `backward` replays the tape in
//! reverse creation order (which is already a topological order, since an
//! op's parents always precede it) and accumulates gradients by summation,
//! so fan-out "diamond" graphs come out right without bookkeeping.
//!
//! A tape is built fresh per dialogue and thrown away after the optimizer
//! step; nothing here is shared or thread-aware. All values are fp64.
//!
//! The primitive set is exactly what the encoders, the classifier heads,
//! the loss sums, and the differentiable aggregation step need — including
//! `bp_step`, whose backward is hand-derived from its closed form.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::bp::bp_step_closed;
use crate::math;
use crate::tensor::Tensor;

/// Index of a node on a tape. Only meaningful for the tape that issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Hadamard(NodeId, NodeId),
    /// Elementwise `mul * x + add` with f64 constants.
    Affine { x: NodeId, mul: f64 },
    Sigmoid(NodeId),
    Tanh(NodeId),
    Log(NodeId),
    /// Elementwise `max(x, floor)`; gradient is blocked where `x <= floor`.
    MaxConst { x: NodeId, floor: f64 },
    Softmax(NodeId),
    /// Flattens each input and concatenates into one vector.
    Concat(Vec<NodeId>),
    /// Stacks equal-length vectors as the *columns* of a matrix.
    StackCols(Vec<NodeId>),
    Dot(NodeId, NodeId),
    Pick { x: NodeId, index: usize },
    Row { x: NodeId, index: usize },
    Sum(NodeId),
    /// One message-passing step of the state chain; see [`Tape::bp_step`].
    BpStep { gamma: NodeId, beta: NodeId },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TapeError {
    /// An op got operands whose shapes don't compose. Names the op and the
    /// offending shapes.
    ShapeMismatch { op: &'static str, details: String },
    /// `backward` requires a scalar root.
    NonScalarRoot { shape: String },
    /// `backward` ran twice without `zero_grads` in between.
    RepeatedBackward,
    /// An op that needs at least one input got none.
    EmptyInput { op: &'static str },
    IndexOutOfRange { op: &'static str, index: usize, len: usize },
    /// `bp_step` inputs must each sum to 1 within 1e-6.
    NotNormalized { op: &'static str, sum: f64 },
}

impl fmt::Display for TapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TapeError::ShapeMismatch { op, details } => {
                write!(f, "shape mismatch in {op}: {details}")
            }
            TapeError::NonScalarRoot { shape } => {
                write!(f, "backward root must be a scalar, got {shape}")
            }
            TapeError::RepeatedBackward => {
                write!(f, "backward already ran on this tape; call zero_grads first")
            }
            TapeError::EmptyInput { op } => write!(f, "{op} needs at least one input"),
            TapeError::IndexOutOfRange { op, index, len } => {
                write!(f, "{op}: index {index} out of range for length {len}")
            }
            TapeError::NotNormalized { op, sum } => {
                write!(f, "{op}: input sums to {sum:e}, more than 1e-6 away from 1")
            }
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
}

pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    backward_done: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), grads: Vec::new(), backward_done: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers an input node (parameter snapshot or constant).
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward` root w.r.t. this node, if any
    /// reached it.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    /// Clears all gradients so `backward` may run again.
    pub fn zero_grads(&mut self) {
        for g in self.grads.iter_mut() {
            *g = None;
        }
        self.backward_done = false;
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.grads.push(None);
        NodeId(self.nodes.len() - 1)
    }

    fn shape_err(op: &'static str, details: String) -> TapeError {
        TapeError::ShapeMismatch { op, details }
    }

    fn val(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    // ── primitive ops ──

    /// Matrix product: `[r x k] · [k x c] -> [r x c]`, or matrix–vector
    /// `[r x k] · [k] -> [r]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TapeError> {
        let (av, bv) = (self.val(a), self.val(b));
        if !av.is_matrix() {
            return Err(Self::shape_err(
                "matmul",
                format!("left operand must be a matrix, got {}", av.shape_string()),
            ));
        }
        let (r, k) = (av.rows(), av.cols());
        let value = if bv.is_vector() {
            if bv.numel() != k {
                return Err(Self::shape_err(
                    "matmul",
                    format!("{} · {}", av.shape_string(), bv.shape_string()),
                ));
            }
            let mut out = vec![0.0; r];
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for j in 0..k {
                    acc += av.at(i, j) * bv.data()[j];
                }
                *o = acc;
            }
            Tensor::vector(out)
        } else if bv.is_matrix() {
            if bv.rows() != k {
                return Err(Self::shape_err(
                    "matmul",
                    format!("{} · {}", av.shape_string(), bv.shape_string()),
                ));
            }
            let c = bv.cols();
            let mut out = vec![0.0; r * c];
            for i in 0..r {
                for j in 0..k {
                    let aij = av.at(i, j);
                    for l in 0..c {
                        out[i * c + l] += aij * bv.at(j, l);
                    }
                }
            }
            Tensor::matrix(r, c, out)
        } else {
            return Err(Self::shape_err(
                "matmul",
                format!("right operand must be matrix or vector, got {}", bv.shape_string()),
            ));
        };
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, x: NodeId) -> Result<NodeId, TapeError> {
        let xv = self.val(x);
        if !xv.is_matrix() {
            return Err(Self::shape_err(
                "transpose",
                format!("needs a matrix, got {}", xv.shape_string()),
            ));
        }
        let (r, c) = (xv.rows(), xv.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = xv.at(i, j);
            }
        }
        Ok(self.push(Tensor::matrix(c, r, out), Op::Transpose(x)))
    }

    fn check_same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<(), TapeError> {
        let (av, bv) = (self.val(a), self.val(b));
        if av.dims() != bv.dims() {
            return Err(Self::shape_err(
                op,
                format!("{} vs {}", av.shape_string(), bv.shape_string()),
            ));
        }
        Ok(())
    }

    fn map_binary(&self, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (av, bv) = (self.val(a), self.val(b));
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::from_parts(av.dims().to_vec(), data)
    }

    fn map_unary(&self, x: NodeId, f: impl Fn(f64) -> f64) -> Tensor {
        let xv = self.val(x);
        let data = xv.data().iter().map(|&v| f(v)).collect();
        Tensor::from_parts(xv.dims().to_vec(), data)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TapeError> {
        self.check_same_shape("add", a, b)?;
        let value = self.map_binary(a, b, |x, y| x + y);
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TapeError> {
        self.check_same_shape("hadamard", a, b)?;
        let value = self.map_binary(a, b, |x, y| x * y);
        Ok(self.push(value, Op::Hadamard(a, b)))
    }

    /// Elementwise `mul * x + add`. Covers negation, scaling, and the
    /// `1 - z` gate complement.
    pub fn affine(&mut self, x: NodeId, mul: f64, add: f64) -> NodeId {
        let value = self.map_unary(x, |v| mul * v + add);
        self.push(value, Op::Affine { x, mul })
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let value = self.map_unary(x, math::sigmoid);
        self.push(value, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let value = self.map_unary(x, math::tanh);
        self.push(value, Op::Tanh(x))
    }

    /// Natural log, elementwise. The domain is the caller's problem; pair
    /// with [`Tape::max_const`] to clamp probabilities first.
    pub fn log(&mut self, x: NodeId) -> NodeId {
        let value = self.map_unary(x, math::ln);
        self.push(value, Op::Log(x))
    }

    pub fn max_const(&mut self, x: NodeId, floor: f64) -> NodeId {
        let value = self.map_unary(x, |v| if v > floor { v } else { floor });
        self.push(value, Op::MaxConst { x, floor })
    }

    /// Stable softmax over a vector. Output sums to 1 within 1e-12.
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId, TapeError> {
        let xv = self.val(x);
        if !xv.is_vector() {
            return Err(Self::shape_err(
                "softmax",
                format!("needs a vector, got {}", xv.shape_string()),
            ));
        }
        let mut data = xv.data().to_vec();
        math::softmax_in_place(&mut data);
        Ok(self.push(Tensor::vector(data), Op::Softmax(x)))
    }

    /// Flattens and concatenates the inputs into one vector.
    pub fn concat(&mut self, inputs: &[NodeId]) -> Result<NodeId, TapeError> {
        if inputs.is_empty() {
            return Err(TapeError::EmptyInput { op: "concat" });
        }
        let mut data = Vec::new();
        for &id in inputs {
            data.extend_from_slice(self.val(id).data());
        }
        Ok(self.push(Tensor::vector(data), Op::Concat(inputs.to_vec())))
    }

    /// Stacks `m` vectors of length `n` into an `[n x m]` matrix whose
    /// j-th column is the j-th input.
    pub fn stack_cols(&mut self, inputs: &[NodeId]) -> Result<NodeId, TapeError> {
        if inputs.is_empty() {
            return Err(TapeError::EmptyInput { op: "stack_cols" });
        }
        let n = {
            let first = self.val(inputs[0]);
            if !first.is_vector() {
                return Err(Self::shape_err(
                    "stack_cols",
                    format!("needs vectors, got {}", first.shape_string()),
                ));
            }
            first.numel()
        };
        for &id in inputs {
            let v = self.val(id);
            if !v.is_vector() || v.numel() != n {
                return Err(Self::shape_err(
                    "stack_cols",
                    format!("expected vectors of length {n}, got {}", v.shape_string()),
                ));
            }
        }
        let m = inputs.len();
        let mut data = vec![0.0; n * m];
        for (j, &id) in inputs.iter().enumerate() {
            for (i, &v) in self.val(id).data().iter().enumerate() {
                data[i * m + j] = v;
            }
        }
        Ok(self.push(Tensor::matrix(n, m, data), Op::StackCols(inputs.to_vec())))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TapeError> {
        let (av, bv) = (self.val(a), self.val(b));
        if !av.is_vector() || !bv.is_vector() || av.numel() != bv.numel() {
            return Err(Self::shape_err(
                "dot",
                format!("{} · {}", av.shape_string(), bv.shape_string()),
            ));
        }
        let value: f64 = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).sum();
        Ok(self.push(Tensor::scalar(value), Op::Dot(a, b)))
    }

    /// Extracts element `index` of a vector as a scalar.
    pub fn pick(&mut self, x: NodeId, index: usize) -> Result<NodeId, TapeError> {
        let xv = self.val(x);
        if !xv.is_vector() {
            return Err(Self::shape_err(
                "pick",
                format!("needs a vector, got {}", xv.shape_string()),
            ));
        }
        if index >= xv.numel() {
            return Err(TapeError::IndexOutOfRange { op: "pick", index, len: xv.numel() });
        }
        let value = Tensor::scalar(xv.data()[index]);
        Ok(self.push(value, Op::Pick { x, index }))
    }

    /// Extracts row `index` of a matrix as a vector (embedding lookup).
    pub fn row(&mut self, x: NodeId, index: usize) -> Result<NodeId, TapeError> {
        let xv = self.val(x);
        if !xv.is_matrix() {
            return Err(Self::shape_err(
                "row",
                format!("needs a matrix, got {}", xv.shape_string()),
            ));
        }
        if index >= xv.rows() {
            return Err(TapeError::IndexOutOfRange { op: "row", index, len: xv.rows() });
        }
        let c = xv.cols();
        let data = xv.data()[index * c..(index + 1) * c].to_vec();
        Ok(self.push(Tensor::vector(data), Op::Row { x, index }))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let value = Tensor::scalar(self.val(x).data().iter().sum());
        self.push(value, Op::Sum(x))
    }

    /// One aggregation step of the state chain: given the incoming state
    /// message γ (posterior after the previous turn) and the current turn
    /// message β (turn-label distribution), produces the new posterior
    ///
    /// ```text
    /// μ(unknown) = γ(unknown) · β(unknown)
    /// μ(v)       = β(v) + γ(v) · β(unknown)      v ≠ unknown (index 0)
    /// ```
    ///
    /// which is the sum-product update with the deterministic ◁ factor
    /// marginalized out. Inputs must be same-length vectors, each summing
    /// to 1 within 1e-6 (softmax outputs and previous μ's always are; the
    /// check guards against caller mix-ups, the op does not renormalize).
    pub fn bp_step(&mut self, gamma: NodeId, beta: NodeId) -> Result<NodeId, TapeError> {
        let (gv, bv) = (self.val(gamma), self.val(beta));
        if !gv.is_vector() || !bv.is_vector() || gv.numel() != bv.numel() || gv.numel() == 0 {
            return Err(Self::shape_err(
                "bp_step",
                format!("{} vs {}", gv.shape_string(), bv.shape_string()),
            ));
        }
        for v in [gv, bv] {
            let sum: f64 = v.data().iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(TapeError::NotNormalized { op: "bp_step", sum });
            }
        }
        let value = Tensor::vector(bp_step_closed(gv.data(), bv.data()));
        Ok(self.push(value, Op::BpStep { gamma, beta }))
    }

    // ── reverse pass ──

    fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
        match &mut grads[id.0] {
            Some(g) => {
                for (gi, di) in g.data_mut().iter_mut().zip(delta.data()) {
                    *gi += di;
                }
            }
            slot @ None => *slot = Some(delta),
        }
    }

    /// Reverse pass from a scalar root. Gradients of all reachable nodes
    /// accumulate into the tape; read them with [`Tape::grad`]. Running it
    /// twice without [`Tape::zero_grads`] is an error (gradients would
    /// silently double).
    pub fn backward(&mut self, root: NodeId) -> Result<(), TapeError> {
        if self.backward_done {
            return Err(TapeError::RepeatedBackward);
        }
        {
            let rv = self.val(root);
            if !rv.is_scalar() {
                return Err(TapeError::NonScalarRoot { shape: rv.shape_string() });
            }
        }
        self.backward_done = true;
        self.grads[root.0] = Some(Tensor::scalar(1.0));

        for i in (0..=root.0).rev() {
            let g = match self.grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.dispatch_backward(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn dispatch_backward(&mut self, i: usize, g: &Tensor) {
        // Split borrows: values are read-only here, gradients are written.
        let nodes = &self.nodes;
        let grads = &mut self.grads;
        let val = |id: NodeId| &nodes[id.0].value;
        match &nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (r, k) = (av.rows(), av.cols());
                if bv.is_vector() {
                    // y = A·x: dA = g ⊗ x, dx = Aᵀ·g
                    let mut da = vec![0.0; r * k];
                    for i2 in 0..r {
                        for j in 0..k {
                            da[i2 * k + j] = g.data()[i2] * bv.data()[j];
                        }
                    }
                    let mut dx = vec![0.0; k];
                    for j in 0..k {
                        let mut acc = 0.0;
                        for i2 in 0..r {
                            acc += av.at(i2, j) * g.data()[i2];
                        }
                        dx[j] = acc;
                    }
                    Self::accumulate(grads, *a, Tensor::matrix(r, k, da));
                    Self::accumulate(grads, *b, Tensor::vector(dx));
                } else {
                    // C = A·B: dA = G·Bᵀ, dB = Aᵀ·G
                    let c = bv.cols();
                    let mut da = vec![0.0; r * k];
                    for i2 in 0..r {
                        for j in 0..k {
                            let mut acc = 0.0;
                            for l in 0..c {
                                acc += g.data()[i2 * c + l] * bv.at(j, l);
                            }
                            da[i2 * k + j] = acc;
                        }
                    }
                    let mut db = vec![0.0; k * c];
                    for j in 0..k {
                        for l in 0..c {
                            let mut acc = 0.0;
                            for i2 in 0..r {
                                acc += av.at(i2, j) * g.data()[i2 * c + l];
                            }
                            db[j * c + l] = acc;
                        }
                    }
                    Self::accumulate(grads, *a, Tensor::matrix(r, k, da));
                    Self::accumulate(grads, *b, Tensor::matrix(k, c, db));
                }
            }
            Op::Transpose(x) => {
                let (r, c) = (g.rows(), g.cols());
                let mut dx = vec![0.0; r * c];
                for i2 in 0..r {
                    for j in 0..c {
                        dx[j * r + i2] = g.at(i2, j);
                    }
                }
                Self::accumulate(grads, *x, Tensor::matrix(c, r, dx));
            }
            Op::Add(a, b) => {
                Self::accumulate(grads, *a, g.clone());
                Self::accumulate(grads, *b, g.clone());
            }
            Op::Hadamard(a, b) => {
                let da = zip_map(g, val(*b), |gi, bi| gi * bi);
                let db = zip_map(g, val(*a), |gi, ai| gi * ai);
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *b, db);
            }
            Op::Affine { x, mul } => {
                let mul = *mul;
                let dx = map_grad(g, |gi| mul * gi);
                Self::accumulate(grads, *x, dx);
            }
            Op::Sigmoid(x) => {
                let y = &nodes[i].value;
                let dx = zip_map(g, y, |gi, yi| gi * yi * (1.0 - yi));
                Self::accumulate(grads, *x, dx);
            }
            Op::Tanh(x) => {
                let y = &nodes[i].value;
                let dx = zip_map(g, y, |gi, yi| gi * (1.0 - yi * yi));
                Self::accumulate(grads, *x, dx);
            }
            Op::Log(x) => {
                let dx = zip_map(g, val(*x), |gi, xi| gi / xi);
                Self::accumulate(grads, *x, dx);
            }
            Op::MaxConst { x, floor } => {
                let floor = *floor;
                let dx = zip_map(g, val(*x), |gi, xi| if xi > floor { gi } else { 0.0 });
                Self::accumulate(grads, *x, dx);
            }
            Op::Softmax(x) => {
                // y = softmax(x): dx_i = y_i (g_i − Σ_j g_j y_j)
                let y = &nodes[i].value;
                let inner: f64 = g.data().iter().zip(y.data()).map(|(gi, yi)| gi * yi).sum();
                let dx = zip_map(g, y, |gi, yi| yi * (gi - inner));
                Self::accumulate(grads, *x, dx);
            }
            Op::Concat(inputs) => {
                let inputs = inputs.clone();
                let mut offset = 0;
                for id in inputs {
                    let part = val(id);
                    let n = part.numel();
                    let chunk = g.data()[offset..offset + n].to_vec();
                    offset += n;
                    Self::accumulate(
                        grads,
                        id,
                        Tensor::from_parts(part.dims().to_vec(), chunk),
                    );
                }
            }
            Op::StackCols(inputs) => {
                let inputs = inputs.clone();
                let m = inputs.len();
                let n = g.rows();
                for (j, id) in inputs.into_iter().enumerate() {
                    let mut dx = vec![0.0; n];
                    for (i2, d) in dx.iter_mut().enumerate() {
                        *d = g.data()[i2 * m + j];
                    }
                    Self::accumulate(grads, id, Tensor::vector(dx));
                }
            }
            Op::Dot(a, b) => {
                let gs = g.as_scalar();
                let da = map_grad(val(*b), |bi| gs * bi);
                let db = map_grad(val(*a), |ai| gs * ai);
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *b, db);
            }
            Op::Pick { x, index } => {
                let xv = val(*x);
                let mut dx = vec![0.0; xv.numel()];
                dx[*index] = g.as_scalar();
                Self::accumulate(grads, *x, Tensor::vector(dx));
            }
            Op::Row { x, index } => {
                let xv = val(*x);
                let (r, c) = (xv.rows(), xv.cols());
                let mut dx = vec![0.0; r * c];
                dx[*index * c..(*index + 1) * c].copy_from_slice(g.data());
                Self::accumulate(grads, *x, Tensor::matrix(r, c, dx));
            }
            Op::Sum(x) => {
                let gs = g.as_scalar();
                let dx = map_grad(val(*x), |_| gs);
                Self::accumulate(grads, *x, dx);
            }
            Op::BpStep { gamma, beta } => {
                // Forward: μ_0 = γ_0 β_0, μ_v = β_v + γ_v β_0 (v ≥ 1), so
                //   dγ_v = g_v β_0  for all v
                //   dβ_v = g_v      for v ≥ 1
                //   dβ_0 = Σ_v g_v γ_v
                let (gv, bv) = (val(*gamma), val(*beta));
                let beta0 = bv.data()[0];
                let dgamma = map_grad(g, |gi| gi * beta0);
                let mut dbeta = g.data().to_vec();
                dbeta[0] = g.data().iter().zip(gv.data()).map(|(gi, yi)| gi * yi).sum();
                Self::accumulate(grads, *gamma, dgamma);
                Self::accumulate(grads, *beta, Tensor::vector(dbeta));
            }
        }
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_parts(a.dims().to_vec(), data)
}

fn map_grad(like: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let data = like.data().iter().map(|&x| f(x)).collect();
    Tensor::from_parts(like.dims().to_vec(), data)
}
