//! Reverse-mode autodiff on an explicit tape.
//!
//! Each node caches its output eagerly. The backward pass does not compute
//! adjoint values directly; it emits new graph nodes for them. Gradients are
//! therefore themselves differentiable, which is what lets the verifier push
//! a meta-gradient through K unrolled SGD steps: the inner update
//! `theta' = theta - lr * g(theta, S)` records `g` as graph nodes, and a
//! second backward pass through those nodes picks up the second-order terms.
//!
//! Scalars are `[1, 1]` tensors. Reductions inherit the fixed index-ascending
//! order of [`DenseTensor`], so evaluation is bit-deterministic.

use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::{DenseTensor, ShapeError};

pub type NodeId = usize;

/// Default tape budget: total stored f64 elements before `GraphTooLarge`.
/// Generous for desk scale (roughly 400 MB of values).
pub const DEFAULT_BUDGET_ELEMENTS: usize = 50_000_000;

#[derive(Clone, Debug)]
pub enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId, f64),
    Matmul(NodeId, NodeId),
    Transpose(NodeId),
    Relu(NodeId),
    /// 1 where the input is positive, else 0. Not differentiated further:
    /// its derivative is zero almost everywhere.
    ReluMask(NodeId),
    Tanh(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    Sqrt(NodeId),
    /// `[n, m] -> [1, 1]`.
    SumAll(NodeId),
    /// `[1, 1] -> shape`.
    BroadcastAs(NodeId, Vec<usize>),
    /// `[n, m] -> [n, 1]`, sums each row.
    RowSum(NodeId),
    /// `[n, 1] -> [n, m]`.
    RepeatCols(NodeId, usize),
    /// `[n, m] -> [1, m]`, sums each column.
    ColSum(NodeId),
    /// `[1, m] -> [n, m]`.
    RepeatRows(NodeId, usize),
    /// Per-row maximum `[n, m] -> [n, 1]`, treated as a constant shift
    /// (zero derivative); used only to stabilize log-sum-exp.
    RowMaxDetached(NodeId),
    /// Select one column per row, `[n, m] -> [n, 1]`.
    PickPerRow(NodeId, Vec<usize>),
    /// Inverse of `PickPerRow`: place `[n, 1]` into columns of `[n, m]`.
    ScatterPerRow(NodeId, Vec<usize>, usize),
    /// Rank-1 `[p] -> [len]` starting at `start`.
    Slice(NodeId, usize, usize),
    /// Rank-1 `[len] -> [p]` placed at `start`, zeros elsewhere.
    ScatterSlice(NodeId, usize, usize),
    Reshape(NodeId, Vec<usize>),
    /// Row gather `[n, m] -> [k, m]` (indices may repeat).
    GatherRows(NodeId, Vec<usize>),
    /// Adjoint of `GatherRows`: scatter-add `[k, m] -> [n, m]`.
    ScatterRowsAdd(NodeId, Vec<usize>, usize),
}

/// One recorded operation: its kind (with input ids) and the cached output.
#[derive(Clone, Debug)]
pub struct DiffNode {
    pub op: Op,
    pub value: DenseTensor,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    Shape(ShapeError),
    NonScalarLoss { shape: Vec<usize> },
    UnknownNode { id: usize, len: usize },
    GraphTooLarge { elements: usize, budget: usize },
}

impl core::fmt::Display for Error {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Error::Shape(e) => write!(f, "{e}"),
            Error::NonScalarLoss { shape } => {
                write!(f, "loss node must be scalar, got shape {shape:?}")
            }
            Error::UnknownNode { id, len } => {
                write!(f, "node id {id} not on tape (len {len})")
            }
            Error::GraphTooLarge { elements, budget } => write!(
                f,
                "recorded graph holds {elements} elements, budget {budget}; lower K or the fragment size"
            ),
        }
    }
}

impl From<ShapeError> for Error {
    fn from(e: ShapeError) -> Self {
        Error::Shape(e)
    }
}

pub struct Tape {
    nodes: Vec<DiffNode>,
    elements: usize,
    budget: usize,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::with_budget(DEFAULT_BUDGET_ELEMENTS)
    }

    pub fn with_budget(budget: usize) -> Self {
        Self {
            nodes: Vec::new(),
            elements: 0,
            budget,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn value(&self, id: NodeId) -> &DenseTensor {
        &self.nodes[id].value
    }

    pub fn node(&self, id: NodeId) -> &DiffNode {
        &self.nodes[id]
    }

    fn check_id(&self, id: NodeId) -> Result<(), Error> {
        if id >= self.nodes.len() {
            return Err(Error::UnknownNode {
                id,
                len: self.nodes.len(),
            });
        }
        Ok(())
    }

    fn push(&mut self, op: Op, value: DenseTensor) -> NodeId {
        self.elements += value.numel();
        self.nodes.push(DiffNode { op, value });
        self.nodes.len() - 1
    }

    pub fn leaf(&mut self, value: DenseTensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    fn val(&self, id: NodeId) -> &DenseTensor {
        &self.nodes[id].value
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, Error> {
        self.check_id(a)?;
        self.check_id(b)?;
        let v = self.val(a).add(self.val(b))?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, Error> {
        self.check_id(a)?;
        self.check_id(b)?;
        let v = self.val(a).sub(self.val(b))?;
        Ok(self.push(Op::Sub(a, b), v))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, Error> {
        self.check_id(a)?;
        self.check_id(b)?;
        let v = self.val(a).mul(self.val(b))?;
        Ok(self.push(Op::Mul(a, b), v))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, Error> {
        self.check_id(a)?;
        self.check_id(b)?;
        let v = self.val(a).div(self.val(b))?;
        Ok(self.push(Op::Div(a, b), v))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let v = self.val(a).scale(c);
        Ok(self.push(Op::Scale(a, c), v))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let v = self.val(a).map(|x| x + c);
        Ok(self.push(Op::AddScalar(a, c), v))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, Error> {
        self.check_id(a)?;
        self.check_id(b)?;
        let v = self.val(a).matmul(self.val(b))?;
        Ok(self.push(Op::Matmul(a, b), v))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let v = self.val(a).transpose()?;
        Ok(self.push(Op::Transpose(a), v))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let v = self.val(a).map(|x| if x > 0.0 { x } else { 0.0 });
        Ok(self.push(Op::Relu(a), v))
    }

    pub fn relu_mask(&mut self, a: NodeId) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let v = self.val(a).map(|x| if x > 0.0 { 1.0 } else { 0.0 });
        Ok(self.push(Op::ReluMask(a), v))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let v = self.val(a).map(crate::fmath::tanh);
        Ok(self.push(Op::Tanh(a), v))
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let v = self.val(a).map(crate::fmath::exp);
        Ok(self.push(Op::Exp(a), v))
    }

    pub fn ln(&mut self, a: NodeId) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let v = self.val(a).map(crate::fmath::ln);
        Ok(self.push(Op::Ln(a), v))
    }

    pub fn sqrt(&mut self, a: NodeId) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let v = self.val(a).map(crate::fmath::sqrt);
        Ok(self.push(Op::Sqrt(a), v))
    }

    pub fn sum_all(&mut self, a: NodeId) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let v = DenseTensor::scalar(self.val(a).sum());
        Ok(self.push(Op::SumAll(a), v))
    }

    pub fn broadcast_as(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let av = self.val(a);
        if !av.is_scalar() {
            return Err(ShapeError {
                op: "broadcast_as",
                left: av.shape().to_vec(),
                right: shape,
            }
            .into());
        }
        let v = DenseTensor::filled(shape.clone(), av.scalar_value());
        Ok(self.push(Op::BroadcastAs(a, shape), v))
    }

    pub fn row_sum(&mut self, a: NodeId) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let av = self.val(a);
        if av.rank() != 2 {
            return Err(bad_rank("row_sum", av));
        }
        let (n, m) = (av.shape()[0], av.shape()[1]);
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..m {
                acc += av.values()[i * m + j];
            }
            out[i] = acc;
        }
        let v = DenseTensor::new(vec![n, 1], out).expect("sized above");
        Ok(self.push(Op::RowSum(a), v))
    }

    pub fn repeat_cols(&mut self, a: NodeId, m: usize) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let av = self.val(a);
        if av.rank() != 2 || av.shape()[1] != 1 {
            return Err(bad_rank("repeat_cols", av));
        }
        let n = av.shape()[0];
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let x = av.values()[i];
            for j in 0..m {
                out[i * m + j] = x;
            }
        }
        let v = DenseTensor::new(vec![n, m], out).expect("sized above");
        Ok(self.push(Op::RepeatCols(a, m), v))
    }

    pub fn col_sum(&mut self, a: NodeId) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let av = self.val(a);
        if av.rank() != 2 {
            return Err(bad_rank("col_sum", av));
        }
        let (n, m) = (av.shape()[0], av.shape()[1]);
        let mut out = vec![0.0; m];
        for i in 0..n {
            for j in 0..m {
                out[j] += av.values()[i * m + j];
            }
        }
        let v = DenseTensor::new(vec![1, m], out).expect("sized above");
        Ok(self.push(Op::ColSum(a), v))
    }

    pub fn repeat_rows(&mut self, a: NodeId, n: usize) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let av = self.val(a);
        if av.rank() != 2 || av.shape()[0] != 1 {
            return Err(bad_rank("repeat_rows", av));
        }
        let m = av.shape()[1];
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            out[i * m..(i + 1) * m].copy_from_slice(av.values());
        }
        let v = DenseTensor::new(vec![n, m], out).expect("sized above");
        Ok(self.push(Op::RepeatRows(a, n), v))
    }

    pub fn row_max_detached(&mut self, a: NodeId) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let av = self.val(a);
        if av.rank() != 2 {
            return Err(bad_rank("row_max_detached", av));
        }
        let (n, m) = (av.shape()[0], av.shape()[1]);
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut best = f64::NEG_INFINITY;
            for j in 0..m {
                best = best.max(av.values()[i * m + j]);
            }
            out[i] = best;
        }
        let v = DenseTensor::new(vec![n, 1], out).expect("sized above");
        Ok(self.push(Op::RowMaxDetached(a), v))
    }

    pub fn pick_per_row(&mut self, a: NodeId, cols: Vec<usize>) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let av = self.val(a);
        if av.rank() != 2 || av.shape()[0] != cols.len() {
            return Err(bad_rank("pick_per_row", av));
        }
        let m = av.shape()[1];
        let mut out = vec![0.0; cols.len()];
        for (i, &c) in cols.iter().enumerate() {
            out[i] = av.values()[i * m + c];
        }
        let v = DenseTensor::new(vec![cols.len(), 1], out).expect("sized above");
        Ok(self.push(Op::PickPerRow(a, cols), v))
    }

    pub fn scatter_per_row(&mut self, a: NodeId, cols: Vec<usize>, m: usize) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let av = self.val(a);
        if av.rank() != 2 || av.shape()[1] != 1 || av.shape()[0] != cols.len() {
            return Err(bad_rank("scatter_per_row", av));
        }
        let n = cols.len();
        let mut out = vec![0.0; n * m];
        for (i, &c) in cols.iter().enumerate() {
            out[i * m + c] = av.values()[i];
        }
        let v = DenseTensor::new(vec![n, m], out).expect("sized above");
        Ok(self.push(Op::ScatterPerRow(a, cols, m), v))
    }

    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let av = self.val(a);
        if av.rank() != 1 || start + len > av.numel() {
            return Err(bad_rank("slice", av));
        }
        let v = DenseTensor::vector(av.values()[start..start + len].to_vec());
        Ok(self.push(Op::Slice(a, start, len), v))
    }

    pub fn scatter_slice(&mut self, a: NodeId, start: usize, p: usize) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let av = self.val(a);
        if av.rank() != 1 || start + av.numel() > p {
            return Err(bad_rank("scatter_slice", av));
        }
        let mut out = vec![0.0; p];
        out[start..start + av.numel()].copy_from_slice(av.values());
        let v = DenseTensor::vector(out);
        Ok(self.push(Op::ScatterSlice(a, start, p), v))
    }

    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let v = self.val(a).reshaped(shape.clone())?;
        Ok(self.push(Op::Reshape(a, shape), v))
    }

    pub fn gather_rows(&mut self, a: NodeId, idx: Vec<usize>) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let av = self.val(a);
        if av.rank() != 2 || idx.iter().any(|&i| i >= av.shape()[0]) {
            return Err(bad_rank("gather_rows", av));
        }
        let m = av.shape()[1];
        let mut out = Vec::with_capacity(idx.len() * m);
        for &i in &idx {
            out.extend_from_slice(&av.values()[i * m..(i + 1) * m]);
        }
        let v = DenseTensor::new(vec![idx.len(), m], out).expect("sized above");
        Ok(self.push(Op::GatherRows(a, idx), v))
    }

    pub fn scatter_rows_add(&mut self, a: NodeId, idx: Vec<usize>, n: usize) -> Result<NodeId, Error> {
        self.check_id(a)?;
        let av = self.val(a);
        if av.rank() != 2 || av.shape()[0] != idx.len() || idx.iter().any(|&i| i >= n) {
            return Err(bad_rank("scatter_rows_add", av));
        }
        let m = av.shape()[1];
        let mut out = vec![0.0; n * m];
        for (r, &i) in idx.iter().enumerate() {
            for j in 0..m {
                out[i * m + j] += av.values()[r * m + j];
            }
        }
        let v = DenseTensor::new(vec![n, m], out).expect("sized above");
        Ok(self.push(Op::ScatterRowsAdd(a, idx, n), v))
    }

    // -- backward ----------------------------------------------------------

    /// Emits adjoint nodes for everything reachable from `root`, seeded with
    /// `seed` (ones for a plain gradient). Returns one adjoint id per node
    /// that existed when the call started; `None` where `root` does not
    /// depend on the node.
    pub fn backward_graph(
        &mut self,
        root: NodeId,
        seed: Option<NodeId>,
    ) -> Result<Vec<Option<NodeId>>, Error> {
        self.backward_graph_stopped(root, seed, &[])
    }

    /// `backward_graph` with cut points: nodes in `stop` receive their
    /// accumulated adjoints but are not propagated through, as if they were
    /// leaves. Repeated inner-gradient sweeps over a growing unrolled graph
    /// use this to stop at the current parameter node; without the cut each
    /// sweep would re-linearize every earlier sweep's adjoint subgraph and
    /// the tape would grow geometrically in the number of unrolled steps.
    /// The composed graph stays exact for higher-order differentiation: the
    /// emitted adjoints still reference their ancestors as inputs.
    pub fn backward_graph_stopped(
        &mut self,
        root: NodeId,
        seed: Option<NodeId>,
        stop: &[NodeId],
    ) -> Result<Vec<Option<NodeId>>, Error> {
        self.check_id(root)?;
        let frontier = self.nodes.len();
        let seed = match seed {
            Some(s) => {
                self.check_id(s)?;
                if self.val(s).shape() != self.val(root).shape() {
                    return Err(ShapeError {
                        op: "backward seed",
                        left: self.val(root).shape().to_vec(),
                        right: self.val(s).shape().to_vec(),
                    }
                    .into());
                }
                s
            }
            None => {
                let shape = self.val(root).shape().to_vec();
                self.leaf(DenseTensor::filled(shape, 1.0))
            }
        };
        let mut adj: Vec<Option<NodeId>> = vec![None; frontier];
        adj[root] = Some(seed);
        for id in (0..=root).rev() {
            let g = match adj[id] {
                Some(g) => g,
                None => continue,
            };
            if stop.contains(&id) {
                continue;
            }
            let op = self.nodes[id].op.clone();
            match op {
                Op::Leaf | Op::ReluMask(_) | Op::RowMaxDetached(_) => {}
                Op::Add(a, b) => {
                    self.accum(&mut adj, a, g)?;
                    self.accum(&mut adj, b, g)?;
                }
                Op::Sub(a, b) => {
                    self.accum(&mut adj, a, g)?;
                    let neg = self.scale(g, -1.0)?;
                    self.accum(&mut adj, b, neg)?;
                }
                Op::Mul(a, b) => {
                    let da = self.mul(g, b)?;
                    self.accum(&mut adj, a, da)?;
                    let db = self.mul(g, a)?;
                    self.accum(&mut adj, b, db)?;
                }
                Op::Div(a, b) => {
                    let da = self.div(g, b)?;
                    self.accum(&mut adj, a, da)?;
                    let ga = self.mul(g, a)?;
                    let bb = self.mul(b, b)?;
                    let q = self.div(ga, bb)?;
                    let db = self.scale(q, -1.0)?;
                    self.accum(&mut adj, b, db)?;
                }
                Op::Scale(a, c) => {
                    let da = self.scale(g, c)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::AddScalar(a, _) => {
                    self.accum(&mut adj, a, g)?;
                }
                Op::Matmul(a, b) => {
                    let bt = self.transpose(b)?;
                    let da = self.matmul(g, bt)?;
                    self.accum(&mut adj, a, da)?;
                    let at = self.transpose(a)?;
                    let db = self.matmul(at, g)?;
                    self.accum(&mut adj, b, db)?;
                }
                Op::Transpose(a) => {
                    let da = self.transpose(g)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::Relu(a) => {
                    let mask = self.relu_mask(a)?;
                    let da = self.mul(g, mask)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::Tanh(a) => {
                    let yy = self.mul(id, id)?;
                    let gyy = self.mul(g, yy)?;
                    let da = self.sub(g, gyy)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::Exp(a) => {
                    let da = self.mul(g, id)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::Ln(a) => {
                    let da = self.div(g, a)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::Sqrt(a) => {
                    let two = self.scale(id, 2.0)?;
                    let da = self.div(g, two)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::SumAll(a) => {
                    let shape = self.val(a).shape().to_vec();
                    let da = self.broadcast_as(g, shape)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::BroadcastAs(a, _) => {
                    let da = self.sum_all(g)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::RowSum(a) => {
                    let m = self.val(a).shape()[1];
                    let da = self.repeat_cols(g, m)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::RepeatCols(a, _) => {
                    let da = self.row_sum(g)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::ColSum(a) => {
                    let n = self.val(a).shape()[0];
                    let da = self.repeat_rows(g, n)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::RepeatRows(a, _) => {
                    let da = self.col_sum(g)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::PickPerRow(a, cols) => {
                    let m = self.val(a).shape()[1];
                    let da = self.scatter_per_row(g, cols, m)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::ScatterPerRow(a, cols, _) => {
                    let da = self.pick_per_row(g, cols)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::Slice(a, start, _) => {
                    let p = self.val(a).numel();
                    let da = self.scatter_slice(g, start, p)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::ScatterSlice(a, start, _) => {
                    let len = self.val(a).numel();
                    let da = self.slice(g, start, len)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::Reshape(a, _) => {
                    let shape = self.val(a).shape().to_vec();
                    let da = self.reshape(g, shape)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::GatherRows(a, idx) => {
                    let n = self.val(a).shape()[0];
                    let da = self.scatter_rows_add(g, idx, n)?;
                    self.accum(&mut adj, a, da)?;
                }
                Op::ScatterRowsAdd(a, idx, _) => {
                    let da = self.gather_rows(g, idx)?;
                    self.accum(&mut adj, a, da)?;
                }
            }
        }
        Ok(adj)
    }

    fn accum(&mut self, adj: &mut [Option<NodeId>], id: NodeId, g: NodeId) -> Result<(), Error> {
        if id >= adj.len() {
            // Node was emitted during this backward pass; nothing upstream
            // of the frontier depends on it.
            return Ok(());
        }
        adj[id] = Some(match adj[id] {
            None => g,
            Some(prev) => self.add(prev, g)?,
        });
        Ok(())
    }

    /// Adjoint nodes of `loss` with respect to `wrt`. Missing dependencies
    /// come back as zero-valued leaves of the right shape.
    pub fn grad_nodes(&mut self, loss: NodeId, wrt: &[NodeId]) -> Result<Vec<NodeId>, Error> {
        self.check_id(loss)?;
        if !self.val(loss).is_scalar() {
            return Err(Error::NonScalarLoss {
                shape: self.val(loss).shape().to_vec(),
            });
        }
        if self.elements > self.budget {
            return Err(Error::GraphTooLarge {
                elements: self.elements,
                budget: self.budget,
            });
        }
        let adj = self.backward_graph(loss, None)?;
        let mut out = Vec::with_capacity(wrt.len());
        for &w in wrt {
            self.check_id(w)?;
            match adj.get(w).copied().flatten() {
                Some(a) => out.push(a),
                None => {
                    let shape = self.val(w).shape().to_vec();
                    out.push(self.leaf(DenseTensor::zeros(shape)));
                }
            }
        }
        Ok(out)
    }

    /// Gradient values of a scalar `loss` with respect to `wrt` nodes.
    pub fn grad(&mut self, loss: NodeId, wrt: &[NodeId]) -> Result<Vec<DenseTensor>, Error> {
        let ids = self.grad_nodes(loss, wrt)?;
        Ok(ids.into_iter().map(|id| self.val(id).clone()).collect())
    }
}

fn bad_rank(op: &'static str, t: &DenseTensor) -> Error {
    ShapeError {
        op,
        left: t.shape().to_vec(),
        right: Vec::new(),
    }
    .into()
}

// ---------------------------------------------------------------------------
// Unrolled meta-gradient
// ---------------------------------------------------------------------------

/// How one inner update is recorded: `(tape, theta_k, leaf, k) -> theta_{k+1}`.
pub type RecordStep<'a> = dyn Fn(&mut Tape, NodeId, NodeId, usize) -> Result<NodeId, Error> + 'a;

/// How the terminal loss is recorded: `(tape, theta_final) -> scalar node`.
pub type RecordLoss<'a> = dyn Fn(&mut Tape, NodeId) -> Result<NodeId, Error> + 'a;

pub struct UnrollSpec<'a> {
    pub steps: usize,
    pub record_step: &'a RecordStep<'a>,
    pub record_loss: &'a RecordLoss<'a>,
}

#[derive(Clone, Copy, Debug)]
pub enum UnrollMode {
    /// Record the whole unrolled graph on one tape.
    StoreAll,
    /// Re-record segments of `segment` steps during the reverse sweep,
    /// trading compute for memory. Gradients match `StoreAll` up to
    /// floating-point accumulation order.
    Rematerialize { segment: usize },
}

/// Loss value and `d loss / d leaf` for `steps` recorded inner updates
/// starting from `theta0`, differentiating with respect to `leaf0`.
pub fn unrolled_grad(
    budget: usize,
    theta0: &DenseTensor,
    leaf0: &DenseTensor,
    spec: &UnrollSpec<'_>,
    mode: UnrollMode,
) -> Result<(f64, DenseTensor), Error> {
    match mode {
        UnrollMode::StoreAll => {
            let mut tape = Tape::with_budget(budget);
            let leaf = tape.leaf(leaf0.clone());
            let mut theta = tape.leaf(theta0.clone());
            for k in 0..spec.steps {
                theta = (spec.record_step)(&mut tape, theta, leaf, k)?;
            }
            let loss = (spec.record_loss)(&mut tape, theta)?;
            let loss_value = tape.value(loss).scalar_value();
            let g = tape.grad(loss, &[leaf])?.remove(0);
            Ok((loss_value, g))
        }
        UnrollMode::Rematerialize { segment } => {
            let segment = segment.max(1);
            // Forward sweep: keep only segment-boundary states.
            let mut boundaries = vec![theta0.clone()];
            let mut k = 0;
            while k < spec.steps {
                let take = segment.min(spec.steps - k);
                let mut tape = Tape::with_budget(budget);
                let leaf = tape.leaf(leaf0.clone());
                let mut theta = tape.leaf(boundaries.last().expect("nonempty").clone());
                for s in 0..take {
                    theta = (spec.record_step)(&mut tape, theta, leaf, k + s)?;
                }
                boundaries.push(tape.value(theta).clone());
                k += take;
            }
            // Terminal loss and its cotangent.
            let (loss_value, mut cotangent) = {
                let mut tape = Tape::with_budget(budget);
                let theta = tape.leaf(boundaries.last().expect("nonempty").clone());
                let loss = (spec.record_loss)(&mut tape, theta)?;
                let v = tape.value(loss).scalar_value();
                let g = tape.grad(loss, &[theta])?.remove(0);
                (v, g)
            };
            // Reverse sweep over segments.
            let mut leaf_grad = DenseTensor::zeros(leaf0.shape().to_vec());
            let mut seg_ends: Vec<(usize, usize)> = Vec::new();
            let mut k = 0;
            while k < spec.steps {
                let take = segment.min(spec.steps - k);
                seg_ends.push((k, take));
                k += take;
            }
            for (seg_idx, &(start, take)) in seg_ends.iter().enumerate().rev() {
                let mut tape = Tape::with_budget(budget);
                let leaf = tape.leaf(leaf0.clone());
                let theta_in = tape.leaf(boundaries[seg_idx].clone());
                let mut theta = theta_in;
                for s in 0..take {
                    theta = (spec.record_step)(&mut tape, theta, leaf, start + s)?;
                }
                let seed = tape.leaf(cotangent.clone());
                let adj = tape.backward_graph(theta, Some(seed))?;
                if let Some(gl) = adj[leaf] {
                    leaf_grad = leaf_grad.add(tape.value(gl))?;
                }
                cotangent = match adj[theta_in] {
                    Some(gt) => tape.value(gt).clone(),
                    None => DenseTensor::zeros(theta0.shape().to_vec()),
                };
            }
            Ok((loss_value, leaf_grad))
        }
    }
}

/// Central finite differences: `(f(x + h e_i) - f(x - h e_i)) / 2h` per
/// coordinate. The independent oracle the gradient tests are pinned to.
pub fn finite_difference(
    f: &mut dyn FnMut(&DenseTensor) -> f64,
    x: &DenseTensor,
    h: f64,
) -> DenseTensor {
    let mut grad = DenseTensor::zeros(x.shape().to_vec());
    for i in 0..x.numel() {
        let mut hi = x.clone();
        hi.values_mut()[i] += h;
        let mut lo = x.clone();
        lo.values_mut()[i] -= h;
        grad.values_mut()[i] = (f(&hi) - f(&lo)) / (2.0 * h);
    }
    grad
}
