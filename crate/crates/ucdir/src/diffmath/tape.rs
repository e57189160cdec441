//! Append-only arena tape with eager forward evaluation.

use crate::error::{Error, Result};

use super::array::{matmul, matmul_abt, matmul_atb, DenseArray, Shape};

/// Index of a node on a [`Tape`]. Only valid for the tape that minted it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(&self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf { trainable: bool },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    /// matrix + row vector, broadcast over rows
    AddRowBroadcast(NodeId, NodeId),
    /// matrix - column vector broadcast over columns; also vector - scalar
    SubColBroadcast(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    Tanh(NodeId),
    Sqrt(NodeId),
    Sum(NodeId),
    /// sum of the elementwise product of two same-shape arrays
    Dot(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Row(NodeId, usize),
    L2Normalize(NodeId),
    LogSumExp(NodeId),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf { .. } => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::AddRowBroadcast(..) => "add_row_broadcast",
            Op::SubColBroadcast(..) => "sub_col_broadcast",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Exp(..) => "exp",
            Op::Ln(..) => "ln",
            Op::Tanh(..) => "tanh",
            Op::Sqrt(..) => "sqrt",
            Op::Sum(..) => "sum",
            Op::Dot(..) => "dot",
            Op::MatMul(..) => "matmul",
            Op::Row(..) => "row",
            Op::L2Normalize(..) => "l2_normalize",
            Op::LogSumExp(..) => "log_sum_exp",
        }
    }
}

struct Node {
    op: Op,
    value: DenseArray,
    needs_grad: bool,
}

/// Gradients of a scalar root with respect to trainable leaves.
///
/// Trainable leaves that do not influence the root get explicit zeros, so a
/// caller can always read a gradient for every parameter it registered.
#[derive(Debug)]
pub struct Gradients {
    entries: Vec<Option<DenseArray>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&DenseArray> {
        self.entries.get(id.0).and_then(|e| e.as_ref())
    }

    /// Node ids that carry a gradient (exactly the trainable leaves).
    pub fn populated(&self) -> Vec<NodeId> {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.as_ref().map(|_| NodeId(i)))
            .collect()
    }
}

/// Wengert-list tape. Ops evaluate when recorded; `backward` replays them in
/// reverse construction order, which fixes the accumulation order and makes
/// gradients bit-reproducible.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Forward value of a node. Values are eager, so this is just a lookup.
    pub fn value(&self, id: NodeId) -> &DenseArray {
        &self.node(id).value
    }

    pub fn shape(&self, id: NodeId) -> Shape {
        self.node(id).value.shape()
    }

    /// Scalar forward value; panics if the node is not scalar (a caller bug).
    pub fn scalar_value(&self, id: NodeId) -> f64 {
        self.node(id)
            .value
            .as_scalar()
            .expect("scalar_value called on a non-scalar node")
    }

    fn node(&self, id: NodeId) -> &Node {
        assert!(id.0 < self.nodes.len(), "node id from a different tape");
        &self.nodes[id.0]
    }

    fn push(&mut self, op: Op, value: DenseArray, needs_grad: bool) -> Result<NodeId> {
        let id = NodeId(self.nodes.len());
        if !value.all_finite() {
            return Err(Error::NonFinite {
                node: id.0,
                op: op.name(),
            });
        }
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        Ok(id)
    }

    fn shape_err(&self, op: &'static str, detail: String) -> Error {
        Error::Shape {
            node: self.nodes.len(),
            op,
            detail,
        }
    }

    fn leaf(&mut self, value: DenseArray, trainable: bool) -> Result<NodeId> {
        if value.shape().is_empty() {
            return Err(self.shape_err("leaf", "leaf arrays must be non-empty".into()));
        }
        self.push(Op::Leaf { trainable }, value, trainable)
    }

    pub fn constant(&mut self, value: DenseArray) -> Result<NodeId> {
        self.leaf(value, false)
    }

    pub fn trainable(&mut self, value: DenseArray) -> Result<NodeId> {
        self.leaf(value, true)
    }

    pub fn scalar_const(&mut self, v: f64) -> Result<NodeId> {
        self.constant(DenseArray::scalar(v))
    }

    fn binary_same_shape(
        &mut self,
        op_name: &'static str,
        a: NodeId,
        b: NodeId,
    ) -> Result<(DenseArray, DenseArray)> {
        let (va, vb) = (self.node(a).value.clone(), self.node(b).value.clone());
        if va.shape() != vb.shape() {
            return Err(self.shape_err(
                op_name,
                format!("operands have shapes {} and {}", va.shape(), vb.shape()),
            ));
        }
        Ok((va, vb))
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.node(*id).needs_grad)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = self.binary_same_shape("add", a, b)?;
        let ng = self.needs(&[a, b]);
        self.push(Op::Add(a, b), va.zip_map(&vb, |x, y| x + y), ng)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = self.binary_same_shape("sub", a, b)?;
        let ng = self.needs(&[a, b]);
        self.push(Op::Sub(a, b), va.zip_map(&vb, |x, y| x - y), ng)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = self.binary_same_shape("mul", a, b)?;
        let ng = self.needs(&[a, b]);
        self.push(Op::Mul(a, b), va.zip_map(&vb, |x, y| x * y), ng)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = self.binary_same_shape("div", a, b)?;
        let ng = self.needs(&[a, b]);
        self.push(Op::Div(a, b), va.zip_map(&vb, |x, y| x / y), ng)
    }

    /// `matrix + row`: adds a length-`c` vector to every row of an `r x c` matrix.
    pub fn add_row_broadcast(&mut self, m: NodeId, v: NodeId) -> Result<NodeId> {
        let (vm, vv) = (self.node(m).value.clone(), self.node(v).value.clone());
        let ok = matches!(
            (vm.shape(), vv.shape()),
            (Shape::Matrix(_, c), Shape::Vector(n)) if c == n
        );
        if !ok {
            return Err(self.shape_err(
                "add_row_broadcast",
                format!("expected (r, c) matrix and (c,) vector, got {} and {}", vm.shape(), vv.shape()),
            ));
        }
        let cols = vm.cols();
        let mut data = vm.data().to_vec();
        for (i, x) in data.iter_mut().enumerate() {
            *x += vv.data()[i % cols];
        }
        let ng = self.needs(&[m, v]);
        self.push(
            Op::AddRowBroadcast(m, v),
            DenseArray::matrix(vm.rows(), cols, data),
            ng,
        )
    }

    /// `matrix - column`: subtracts `v[i]` from every entry of row `i`.
    /// A vector minus a length-1 vector broadcasts the same way.
    pub fn sub_col_broadcast(&mut self, m: NodeId, v: NodeId) -> Result<NodeId> {
        let (vm, vv) = (self.node(m).value.clone(), self.node(v).value.clone());
        let value = match (vm.shape(), vv.shape()) {
            (Shape::Matrix(r, c), Shape::Vector(n)) if r == n => {
                let mut data = vm.data().to_vec();
                for i in 0..r {
                    let s = vv.data()[i];
                    for x in &mut data[i * c..(i + 1) * c] {
                        *x -= s;
                    }
                }
                DenseArray::matrix(r, c, data)
            }
            (Shape::Vector(_), Shape::Vector(1)) => {
                let s = vv.data()[0];
                vm.map(|x| x - s)
            }
            (ms, vs) => {
                return Err(self.shape_err(
                    "sub_col_broadcast",
                    format!("expected (r, c) matrix with (r,) vector, got {ms} and {vs}"),
                ))
            }
        };
        let ng = self.needs(&[m, v]);
        self.push(Op::SubColBroadcast(m, v), value, ng)
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> Result<NodeId> {
        if !k.is_finite() {
            return Err(Error::InvalidInput(format!("scale factor {k} is not finite")));
        }
        let value = self.node(a).value.map(|x| k * x);
        let ng = self.needs(&[a]);
        self.push(Op::Scale(a, k), value, ng)
    }

    pub fn add_scalar(&mut self, a: NodeId, k: f64) -> Result<NodeId> {
        if !k.is_finite() {
            return Err(Error::InvalidInput(format!("added constant {k} is not finite")));
        }
        let value = self.node(a).value.map(|x| x + k);
        let ng = self.needs(&[a]);
        self.push(Op::AddScalar(a), value, ng)
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.node(a).value.map(f64::exp);
        let ng = self.needs(&[a]);
        self.push(Op::Exp(a), value, ng)
    }

    pub fn ln(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.node(a).value.map(f64::ln);
        let ng = self.needs(&[a]);
        self.push(Op::Ln(a), value, ng)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.node(a).value.map(f64::tanh);
        let ng = self.needs(&[a]);
        self.push(Op::Tanh(a), value, ng)
    }

    pub fn sqrt(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.node(a).value.map(f64::sqrt);
        let ng = self.needs(&[a]);
        self.push(Op::Sqrt(a), value, ng)
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let value = DenseArray::scalar(self.node(a).value.sum());
        let ng = self.needs(&[a]);
        self.push(Op::Sum(a), value, ng)
    }

    /// Sum of the elementwise product of two same-shape arrays, as a scalar.
    /// For vectors this is the usual dot product.
    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = self.binary_same_shape("dot", a, b)?;
        let ng = self.needs(&[a, b]);
        self.push(Op::Dot(a, b), DenseArray::scalar(va.dot(&vb)), ng)
    }

    /// `(m x k) . (k x n)` matrix product; a `(k,)` vector on the left acts as
    /// a single row and yields an `(n,)` vector.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.node(a).value.clone(), self.node(b).value.clone());
        let value = match (va.shape(), vb.shape()) {
            (Shape::Matrix(m, k), Shape::Matrix(k2, n)) if k == k2 => {
                DenseArray::matrix(m, n, matmul(va.data(), vb.data(), m, k, n))
            }
            (Shape::Vector(k), Shape::Matrix(k2, n)) if k == k2 => {
                DenseArray::vector(matmul(va.data(), vb.data(), 1, k, n))
            }
            (sa, sb) => {
                return Err(self.shape_err(
                    "matmul",
                    format!("inner dimensions do not match: {sa} . {sb}"),
                ))
            }
        };
        let ng = self.needs(&[a, b]);
        self.push(Op::MatMul(a, b), value, ng)
    }

    /// Copies row `i` of a matrix out as a vector.
    pub fn row(&mut self, a: NodeId, i: usize) -> Result<NodeId> {
        let va = self.node(a).value.clone();
        match va.shape() {
            Shape::Matrix(r, _) if i < r => {}
            s => {
                return Err(
                    self.shape_err("row", format!("row {i} out of bounds for shape {s}"))
                )
            }
        }
        let value = DenseArray::vector(va.row(i).to_vec());
        let ng = self.needs(&[a]);
        self.push(Op::Row(a, i), value, ng)
    }

    /// L2 normalization: a vector is scaled to unit norm, a matrix row-wise.
    /// Inputs with norm below 1e-8 are rejected instead of being nudged by an
    /// epsilon — a vanishing norm means the representation collapsed and the
    /// caller must know.
    pub fn l2_normalize(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.node(a).value.clone();
        let node = self.nodes.len();
        let cols = va.cols();
        let mut data = va.data().to_vec();
        for r in 0..va.rows() {
            let row = &mut data[r * cols..(r + 1) * cols];
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-8 {
                return Err(Error::DegenerateNorm { node, row: r, norm });
            }
            for x in row.iter_mut() {
                *x /= norm;
            }
        }
        let value = match va.shape() {
            Shape::Vector(_) => DenseArray::vector(data),
            Shape::Matrix(r, c) => DenseArray::matrix(r, c, data),
        };
        let ng = self.needs(&[a]);
        self.push(Op::L2Normalize(a), value, ng)
    }

    /// Row-wise log-sum-exp with max subtraction. A matrix `(r, c)` maps to an
    /// `(r,)` vector; a vector maps to a length-1 vector.
    pub fn log_sum_exp(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.node(a).value.clone();
        let cols = va.cols();
        let mut out = Vec::with_capacity(va.rows());
        for r in 0..va.rows() {
            out.push(log_sum_exp_slice(&va.data()[r * cols..(r + 1) * cols]));
        }
        let ng = self.needs(&[a]);
        self.push(Op::LogSumExp(a), DenseArray::vector(out), ng)
    }

    /// Reverse pass from a scalar root. Returns gradients for every trainable
    /// leaf; leaves the root does not depend on get zero gradients.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        let root_node = self.node(root);
        if !root_node.value.shape().is_scalar() {
            return Err(Error::NonScalarRoot {
                shape: root_node.value.shape().to_string(),
            });
        }

        let mut adj: Vec<Option<DenseArray>> = vec![None; self.nodes.len()];
        let mut out = Gradients {
            entries: vec![None; self.nodes.len()],
        };
        if root_node.needs_grad {
            adj[root.0] = Some(DenseArray::scalar(1.0));
        }

        // Inputs always precede the ops that consume them, so by the time we
        // visit node i every contribution to its adjoint has been added.
        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match node.op {
                Op::Leaf { trainable } => {
                    if trainable {
                        out.entries[i] = Some(g);
                    }
                }
                Op::Add(a, b) => {
                    self.accum(&mut adj, a, &g, 1.0);
                    self.accum(&mut adj, b, &g, 1.0);
                }
                Op::Sub(a, b) => {
                    self.accum(&mut adj, a, &g, 1.0);
                    self.accum(&mut adj, b, &g, -1.0);
                }
                Op::Mul(a, b) => {
                    if self.nodes[a.0].needs_grad {
                        let da = g.zip_map(&self.nodes[b.0].value, |gi, bi| gi * bi);
                        self.accum_owned(&mut adj, a, da);
                    }
                    if self.nodes[b.0].needs_grad {
                        let db = g.zip_map(&self.nodes[a.0].value, |gi, ai| gi * ai);
                        self.accum_owned(&mut adj, b, db);
                    }
                }
                Op::Div(a, b) => {
                    let vb = &self.nodes[b.0].value;
                    if self.nodes[a.0].needs_grad {
                        let da = g.zip_map(vb, |gi, bi| gi / bi);
                        self.accum_owned(&mut adj, a, da);
                    }
                    if self.nodes[b.0].needs_grad {
                        // d/db (a/b) = -a / b^2 = -out / b
                        let mut db = g.zip_map(&node.value, |gi, oi| gi * oi);
                        db = db.zip_map(vb, |x, bi| -x / bi);
                        self.accum_owned(&mut adj, b, db);
                    }
                }
                Op::AddRowBroadcast(m, v) => {
                    self.accum(&mut adj, m, &g, 1.0);
                    if self.nodes[v.0].needs_grad {
                        let cols = g.cols();
                        let mut dv = vec![0.0; cols];
                        for r in 0..g.rows() {
                            for (d, &x) in dv.iter_mut().zip(g.row(r)) {
                                *d += x;
                            }
                        }
                        self.accum_owned(&mut adj, v, DenseArray::vector(dv));
                    }
                }
                Op::SubColBroadcast(m, v) => {
                    self.accum(&mut adj, m, &g, 1.0);
                    if self.nodes[v.0].needs_grad {
                        let n = self.nodes[v.0].value.shape().len();
                        let mut dv = vec![0.0; n];
                        if n == g.rows() {
                            for (r, d) in dv.iter_mut().enumerate() {
                                *d -= g.row(r).iter().sum::<f64>();
                            }
                        } else {
                            dv[0] = -g.sum();
                        }
                        self.accum_owned(&mut adj, v, DenseArray::vector(dv));
                    }
                }
                Op::Scale(a, k) => self.accum(&mut adj, a, &g, k),
                Op::AddScalar(a) => self.accum(&mut adj, a, &g, 1.0),
                Op::Exp(a) => {
                    if self.nodes[a.0].needs_grad {
                        let da = g.zip_map(&node.value, |gi, oi| gi * oi);
                        self.accum_owned(&mut adj, a, da);
                    }
                }
                Op::Ln(a) => {
                    if self.nodes[a.0].needs_grad {
                        let da = g.zip_map(&self.nodes[a.0].value, |gi, ai| gi / ai);
                        self.accum_owned(&mut adj, a, da);
                    }
                }
                Op::Tanh(a) => {
                    if self.nodes[a.0].needs_grad {
                        let da = g.zip_map(&node.value, |gi, oi| gi * (1.0 - oi * oi));
                        self.accum_owned(&mut adj, a, da);
                    }
                }
                Op::Sqrt(a) => {
                    if self.nodes[a.0].needs_grad {
                        let da = g.zip_map(&node.value, |gi, oi| gi / (2.0 * oi));
                        self.accum_owned(&mut adj, a, da);
                    }
                }
                Op::Sum(a) => {
                    if self.nodes[a.0].needs_grad {
                        let gs = g.as_scalar().expect("sum output is scalar");
                        let da = self.nodes[a.0].value.map(|_| gs);
                        self.accum_owned(&mut adj, a, da);
                    }
                }
                Op::Dot(a, b) => {
                    let gs = g.as_scalar().expect("dot output is scalar");
                    if self.nodes[a.0].needs_grad {
                        let da = self.nodes[b.0].value.map(|x| gs * x);
                        self.accum_owned(&mut adj, a, da);
                    }
                    if self.nodes[b.0].needs_grad {
                        let db = self.nodes[a.0].value.map(|x| gs * x);
                        self.accum_owned(&mut adj, b, db);
                    }
                }
                Op::MatMul(a, b) => self.backward_matmul(&mut adj, a, b, &g),
                Op::Row(a, r) => {
                    if self.nodes[a.0].needs_grad {
                        let mut da = DenseArray::zeros(self.nodes[a.0].value.shape());
                        let cols = da.cols();
                        da.data_mut()[r * cols..(r + 1) * cols].copy_from_slice(g.data());
                        self.accum_owned(&mut adj, a, da);
                    }
                }
                Op::L2Normalize(a) => {
                    if self.nodes[a.0].needs_grad {
                        let va = &self.nodes[a.0].value;
                        let cols = va.cols();
                        let mut da = vec![0.0; va.shape().len()];
                        for r in 0..va.rows() {
                            let x = va.row(r);
                            let y = node.value.row(r);
                            let gr = g.row(r);
                            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                            let gy: f64 = gr.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                            for j in 0..cols {
                                da[r * cols + j] = (gr[j] - gy * y[j]) / norm;
                            }
                        }
                        let da = match va.shape() {
                            Shape::Vector(_) => DenseArray::vector(da),
                            Shape::Matrix(rr, cc) => DenseArray::matrix(rr, cc, da),
                        };
                        self.accum_owned(&mut adj, a, da);
                    }
                }
                Op::LogSumExp(a) => {
                    if self.nodes[a.0].needs_grad {
                        let va = &self.nodes[a.0].value;
                        let cols = va.cols();
                        let mut da = vec![0.0; va.shape().len()];
                        for r in 0..va.rows() {
                            let lse = node.value.data()[r];
                            let gr = g.data()[r];
                            for (d, &x) in da[r * cols..(r + 1) * cols]
                                .iter_mut()
                                .zip(va.row(r))
                            {
                                *d = gr * (x - lse).exp();
                            }
                        }
                        let da = match va.shape() {
                            Shape::Vector(_) => DenseArray::vector(da),
                            Shape::Matrix(rr, cc) => DenseArray::matrix(rr, cc, da),
                        };
                        self.accum_owned(&mut adj, a, da);
                    }
                }
            }
        }

        // Trainable leaves the root never touched still deserve an answer.
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { trainable: true } = node.op {
                if out.entries[i].is_none() {
                    out.entries[i] = Some(DenseArray::zeros(node.value.shape()));
                }
            }
        }
        Ok(out)
    }

    fn backward_matmul(
        &self,
        adj: &mut [Option<DenseArray>],
        a: NodeId,
        b: NodeId,
        g: &DenseArray,
    ) {
        let va = &self.nodes[a.0].value;
        let vb = &self.nodes[b.0].value;
        let (k, n) = (vb.rows(), vb.cols());
        let m = va.rows(); // 1 for the vector-times-matrix case
        if self.nodes[a.0].needs_grad {
            // dA = g . B^T
            let da = matmul_abt(g.data(), vb.data(), m, n, k);
            let da = match va.shape() {
                Shape::Vector(_) => DenseArray::vector(da),
                Shape::Matrix(..) => DenseArray::matrix(m, k, da),
            };
            self.accum_owned(adj, a, da);
        }
        if self.nodes[b.0].needs_grad {
            // dB = A^T . g
            let db = matmul_atb(va.data(), g.data(), m, k, n);
            self.accum_owned(adj, b, DenseArray::matrix(k, n, db));
        }
    }

    fn accum(&self, adj: &mut [Option<DenseArray>], id: NodeId, g: &DenseArray, scale: f64) {
        if !self.nodes[id.0].needs_grad {
            return;
        }
        match &mut adj[id.0] {
            Some(acc) => acc.add_scaled(g, scale),
            slot => {
                let mut v = DenseArray::zeros(self.nodes[id.0].value.shape());
                v.add_scaled(g, scale);
                *slot = Some(v);
            }
        }
    }

    fn accum_owned(&self, adj: &mut [Option<DenseArray>], id: NodeId, g: DenseArray) {
        if !self.nodes[id.0].needs_grad {
            return;
        }
        match &mut adj[id.0] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }
}

/// Numerically safe log-sum-exp of a slice via max subtraction.
pub fn log_sum_exp_slice(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}
