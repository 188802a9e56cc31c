//! Reverse-mode computation graph.
//!
//! Nodes are appended in construction order, which is also a valid
//! topological order since a node can only reference earlier nodes.
//! [`Graph::forward`] evaluates every node that has not been evaluated yet, so
//! a rollout can interleave construction, evaluation and sampling; the
//! recorded graph can later be replayed from scratch with different parameters
//! ([`Graph::forward_all`]), which is what the finite-difference check does.
//!
//! Every value is a row-major `rows × cols` matrix. Rows are independent
//! samples; no primitive mixes rows except [`Graph::sum`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::kernels::gemm;
use super::math;
use super::{Gradients, ParamId, ParamSet, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named input bindings for [`Graph::forward`].
pub type Inputs = BTreeMap<String, Tensor>;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("node {node} ({op}): shape mismatch, {detail}")]
    ShapeMismatch {
        node: usize,
        op: &'static str,
        detail: String,
    },
    #[error("input `{0}` is not bound")]
    UnboundInput(String),
    #[error("input `{0}` contains non-finite values")]
    NonFiniteInput(String),
    #[error("backward called before forward")]
    BackwardBeforeForward,
    #[error("backward output node {0} is not a scalar")]
    NonScalarOutput(usize),
    #[error("parameter set does not match the graph: {0}")]
    ParamMismatch(String),
}

#[derive(Clone, Debug)]
enum Op {
    Param(ParamId),
    Input(String),
    Constant(Vec<f64>),
    Affine { w: Var, x: Var, b: Option<Var> },
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Gather { table: Var, rows: Vec<usize> },
    Sigmoid(Var),
    Tanh(Var),
    Log(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Softmax(Var),
    LogSoftmax(Var),
    Pick { x: Var, cols: Vec<usize> },
    Sum(Var),
    Scale(Var, f64),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Param(_) => "param",
            Op::Input(_) => "input",
            Op::Constant(_) => "constant",
            Op::Affine { .. } => "affine",
            Op::Concat(_) => "concat",
            Op::Slice { .. } => "slice",
            Op::Gather { .. } => "gather",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Log(_) => "log",
            Op::Add(..) => "add",
            Op::Mul(..) => "mul",
            Op::Softmax(_) => "softmax",
            Op::LogSoftmax(_) => "log_softmax",
            Op::Pick { .. } => "pick",
            Op::Sum(_) => "sum",
            Op::Scale(..) => "scale",
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    rows: usize,
    cols: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    values: Vec<Vec<f64>>,
    param_nodes: BTreeMap<ParamId, Var>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    /// True once every node has a value.
    pub fn is_evaluated(&self) -> bool {
        self.values.len() == self.nodes.len()
    }

    /// Value of an evaluated node.
    ///
    /// Panics if the node has not been evaluated yet.
    pub fn value(&self, v: Var) -> &[f64] {
        assert!(
            v.0 < self.values.len(),
            "node {} read before forward evaluated it",
            v.0
        );
        &self.values[v.0]
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    /// One row of an evaluated node.
    pub fn row(&self, v: Var, r: usize) -> &[f64] {
        let cols = self.nodes[v.0].cols;
        &self.value(v)[r * cols..(r + 1) * cols]
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        let (rows, cols) = self.shape(v);
        let shape: &[usize] = if rows == 1 { &[cols] } else { &[rows, cols] };
        Tensor::new(shape, self.value(v).to_vec()).expect("node shape is consistent")
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize) -> Var {
        self.nodes.push(Node { op, rows, cols });
        Var(self.nodes.len() - 1)
    }

    fn mismatch(&self, op: &'static str, detail: String) -> GraphError {
        GraphError::ShapeMismatch {
            node: self.nodes.len(),
            op,
            detail,
        }
    }

    // ---- construction -------------------------------------------------

    /// Node reading parameter `id`. Repeated calls return the same node so
    /// gradient contributions meet before reaching the parameter.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Var {
        if let Some(&v) = self.param_nodes.get(&id) {
            return v;
        }
        let t = params.get(id);
        let v = self.push(Op::Param(id), t.rows(), t.cols());
        self.param_nodes.insert(id, v);
        v
    }

    pub fn input(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> Var {
        self.push(Op::Input(name.into()), rows, cols)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Result<Var, GraphError> {
        if data.len() != rows * cols {
            return Err(self.mismatch(
                "constant",
                format!("{rows}x{cols} needs {} values, got {}", rows * cols, data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(GraphError::NonFiniteInput(format!("constant node {}", self.nodes.len())));
        }
        Ok(self.push(Op::Constant(data), rows, cols))
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.push(Op::Constant(vec![0.0; rows * cols]), rows, cols)
    }

    /// `x · wᵀ + b` with `x: B×in`, `w: out×in`, `b: 1×out`.
    pub fn affine(&mut self, w: Var, x: Var, b: Option<Var>) -> Result<Var, GraphError> {
        let (out, win) = self.shape(w);
        let (rows, xin) = self.shape(x);
        if win != xin {
            return Err(self.mismatch("affine", format!("weight is {out}x{win}, input is {rows}x{xin}")));
        }
        if let Some(b) = b {
            let bs = self.shape(b);
            if bs != (1, out) {
                return Err(self.mismatch("affine", format!("bias is {}x{}, expected 1x{out}", bs.0, bs.1)));
            }
        }
        Ok(self.push(Op::Affine { w, x, b }, rows, out))
    }

    /// Column-wise concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, GraphError> {
        let Some(&first) = parts.first() else {
            return Err(self.mismatch("concat", "no inputs".into()));
        };
        let rows = self.shape(first).0;
        let mut cols = 0;
        for &p in parts {
            let (r, c) = self.shape(p);
            if r != rows {
                return Err(self.mismatch("concat", format!("row counts {rows} and {r} differ")));
            }
            cols += c;
        }
        Ok(self.push(Op::Concat(parts.to_vec()), rows, cols))
    }

    /// Columns `start..start+len`.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, GraphError> {
        let (rows, cols) = self.shape(x);
        if len == 0 || start + len > cols {
            return Err(self.mismatch("slice", format!("columns {start}..{} of {cols}", start + len)));
        }
        Ok(self.push(Op::Slice { x, start }, rows, len))
    }

    /// Embedding lookup: row `rows[r]` of `table` becomes output row `r`.
    pub fn gather(&mut self, table: Var, rows: &[usize]) -> Result<Var, GraphError> {
        let (trows, cols) = self.shape(table);
        if rows.is_empty() {
            return Err(self.mismatch("gather", "no rows requested".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= trows) {
            return Err(self.mismatch("gather", format!("row {bad} of a {trows}-row table")));
        }
        Ok(self.push(Op::Gather { table, rows: rows.to_vec() }, rows.len(), cols))
    }

    fn unary(&mut self, op: Op, x: Var) -> Var {
        let (r, c) = self.shape(x);
        self.push(op, r, c)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(Op::Sigmoid(x), x)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(Op::Tanh(x), x)
    }

    pub fn log(&mut self, x: Var) -> Var {
        self.unary(Op::Log(x), x)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, x: Var) -> Var {
        self.unary(Op::Softmax(x), x)
    }

    /// Row-wise log-softmax, stable for large logits.
    pub fn log_softmax(&mut self, x: Var) -> Var {
        self.unary(Op::LogSoftmax(x), x)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        self.unary(Op::Scale(x, factor), x)
    }

    fn binary(&mut self, name: &'static str, op: Op, a: Var, b: Var) -> Result<Var, GraphError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(self.mismatch(name, format!("{}x{} vs {}x{}", sa.0, sa.1, sb.0, sb.1)));
        }
        Ok(self.push(op, sa.0, sa.1))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, GraphError> {
        self.binary("add", Op::Add(a, b), a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, GraphError> {
        self.binary("mul", Op::Mul(a, b), a, b)
    }

    /// Element `cols[r]` of every row `r`, giving a `B×1` column.
    pub fn pick(&mut self, x: Var, cols: &[usize]) -> Result<Var, GraphError> {
        let (rows, xc) = self.shape(x);
        if cols.len() != rows {
            return Err(self.mismatch("pick", format!("{} indices for {rows} rows", cols.len())));
        }
        if let Some(&bad) = cols.iter().find(|&&c| c >= xc) {
            return Err(self.mismatch("pick", format!("column {bad} of {xc}")));
        }
        Ok(self.push(Op::Pick { x, cols: cols.to_vec() }, rows, 1))
    }

    /// Sum of every element, as a `1×1` scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        self.push(Op::Sum(x), 1, 1)
    }

    // ---- evaluation ---------------------------------------------------

    /// Drop all computed values so the next [`forward`](Self::forward)
    /// recomputes the whole graph.
    pub fn invalidate(&mut self) {
        self.values.clear();
    }

    /// Evaluate every node added since the last forward.
    pub fn forward(&mut self, params: &ParamSet, inputs: &Inputs) -> Result<(), GraphError> {
        while self.values.len() < self.nodes.len() {
            let i = self.values.len();
            let value = self.eval_node(i, params, inputs)?;
            self.values.push(value);
        }
        Ok(())
    }

    /// Recompute the whole graph, e.g. after parameters changed.
    pub fn forward_all(&mut self, params: &ParamSet, inputs: &Inputs) -> Result<(), GraphError> {
        self.invalidate();
        self.forward(params, inputs)
    }

    fn eval_node(&self, i: usize, params: &ParamSet, inputs: &Inputs) -> Result<Vec<f64>, GraphError> {
        let node = &self.nodes[i];
        let (rows, cols) = (node.rows, node.cols);
        let v = |x: &Var| self.values[x.0].as_slice();
        let out = match &node.op {
            Op::Param(id) => {
                if id.0 >= params.len() {
                    return Err(GraphError::ParamMismatch(format!("no parameter {}", id.0)));
                }
                let t = params.get(*id);
                if t.rows() != rows || t.cols() != cols {
                    return Err(GraphError::ParamMismatch(format!(
                        "parameter `{}` is {:?}, graph expects {rows}x{cols}",
                        params.name(*id),
                        t.shape
                    )));
                }
                t.data.clone()
            }
            Op::Input(name) => {
                let t = inputs.get(name).ok_or_else(|| GraphError::UnboundInput(name.clone()))?;
                if t.rows() * t.cols() != rows * cols || t.cols() != cols {
                    return Err(GraphError::ShapeMismatch {
                        node: i,
                        op: "input",
                        detail: format!("`{name}` bound to {:?}, declared {rows}x{cols}", t.shape),
                    });
                }
                if !t.is_finite() {
                    return Err(GraphError::NonFiniteInput(name.clone()));
                }
                t.data.clone()
            }
            Op::Constant(data) => data.clone(),
            Op::Affine { w, x, b } => {
                let (_, inner) = self.shape(*x);
                let mut y = match b {
                    Some(b) => {
                        let bv = v(b);
                        let mut y = Vec::with_capacity(rows * cols);
                        for _ in 0..rows {
                            y.extend_from_slice(bv);
                        }
                        y
                    }
                    None => vec![0.0; rows * cols],
                };
                // y += x · wᵀ
                gemm(rows, inner, cols, 1.0, v(x), (inner, 1), v(w), (1, inner), 1.0, &mut y, cols);
                y
            }
            Op::Concat(parts) => {
                let mut y = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    for p in parts {
                        let pc = self.nodes[p.0].cols;
                        y.extend_from_slice(&v(p)[r * pc..(r + 1) * pc]);
                    }
                }
                y
            }
            Op::Slice { x, start } => {
                let xc = self.nodes[x.0].cols;
                let xv = v(x);
                let mut y = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    y.extend_from_slice(&xv[r * xc + start..r * xc + start + cols]);
                }
                y
            }
            Op::Gather { table, rows: idx } => {
                let tv = v(table);
                let mut y = Vec::with_capacity(rows * cols);
                for &r in idx {
                    y.extend_from_slice(&tv[r * cols..(r + 1) * cols]);
                }
                y
            }
            Op::Sigmoid(x) => v(x).iter().map(|&a| math::sigmoid(a)).collect(),
            Op::Tanh(x) => v(x).iter().map(|&a| math::tanh(a)).collect(),
            Op::Log(x) => v(x).iter().map(|&a| math::ln(a)).collect(),
            Op::Add(a, b) => v(a).iter().zip(v(b)).map(|(x, y)| x + y).collect(),
            Op::Mul(a, b) => v(a).iter().zip(v(b)).map(|(x, y)| x * y).collect(),
            Op::Softmax(x) => {
                let mut y = v(x).to_vec();
                for row in y.chunks_mut(cols) {
                    softmax_in_place(row);
                }
                y
            }
            Op::LogSoftmax(x) => {
                let mut y = v(x).to_vec();
                for row in y.chunks_mut(cols) {
                    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lse = m + math::ln(row.iter().map(|&a| math::exp(a - m)).sum::<f64>());
                    row.iter_mut().for_each(|a| *a -= lse);
                }
                y
            }
            Op::Pick { x, cols: idx } => {
                let xc = self.nodes[x.0].cols;
                let xv = v(x);
                idx.iter().enumerate().map(|(r, &c)| xv[r * xc + c]).collect()
            }
            Op::Sum(x) => vec![v(x).iter().sum()],
            Op::Scale(x, f) => v(x).iter().map(|a| a * f).collect(),
        };
        Ok(out)
    }

    // ---- differentiation ----------------------------------------------

    /// Reverse pass from scalar `output`, adding `seed · ∂output/∂θ` into
    /// `grads` for every parameter node reachable from `output`.
    pub fn backward(&self, output: Var, seed: f64, grads: &mut Gradients) -> Result<(), GraphError> {
        if output.0 >= self.values.len() {
            return Err(GraphError::BackwardBeforeForward);
        }
        if self.shape(output) != (1, 1) {
            return Err(GraphError::NonScalarOutput(output.0));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
        adj[output.0] = Some(vec![seed]);

        for i in (0..=output.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            let (rows, cols) = (node.rows, node.cols);
            let y = &self.values[i];
            match &node.op {
                Op::Param(id) => {
                    if id.0 >= grads.len() || grads.get(*id).len() != g.len() {
                        return Err(GraphError::ParamMismatch(format!(
                            "gradient buffer for parameter {} has the wrong layout",
                            id.0
                        )));
                    }
                    for (a, b) in grads.get_mut(*id).iter_mut().zip(&g) {
                        *a += *b;
                    }
                }
                Op::Input(_) | Op::Constant(_) => {}
                Op::Affine { w, x, b } => {
                    let inner = self.nodes[x.0].cols;
                    let (wv, xv) = (&self.values[w.0], &self.values[x.0]);
                    // dx += dy · w
                    let dx = slot(&mut adj, *x, rows * inner);
                    gemm(rows, cols, inner, 1.0, &g, (cols, 1), wv, (inner, 1), 1.0, dx, inner);
                    // dw += dyᵀ · x
                    let dw = slot(&mut adj, *w, cols * inner);
                    gemm(cols, rows, inner, 1.0, &g, (1, cols), xv, (inner, 1), 1.0, dw, inner);
                    if let Some(b) = b {
                        let db = slot(&mut adj, *b, cols);
                        for row in g.chunks(cols) {
                            for (d, v) in db.iter_mut().zip(row) {
                                *d += *v;
                            }
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let pc = self.nodes[p.0].cols;
                        let dp = slot(&mut adj, *p, rows * pc);
                        for r in 0..rows {
                            let src = &g[r * cols + offset..r * cols + offset + pc];
                            for (d, s) in dp[r * pc..(r + 1) * pc].iter_mut().zip(src) {
                                *d += *s;
                            }
                        }
                        offset += pc;
                    }
                }
                Op::Slice { x, start } => {
                    let xc = self.nodes[x.0].cols;
                    let dx = slot(&mut adj, *x, rows * xc);
                    for r in 0..rows {
                        let dst = &mut dx[r * xc + start..r * xc + start + cols];
                        for (d, s) in dst.iter_mut().zip(&g[r * cols..(r + 1) * cols]) {
                            *d += *s;
                        }
                    }
                }
                Op::Gather { table, rows: idx } => {
                    let trows = self.nodes[table.0].rows;
                    let dt = slot(&mut adj, *table, trows * cols);
                    for (r, &t) in idx.iter().enumerate() {
                        let dst = &mut dt[t * cols..(t + 1) * cols];
                        for (d, s) in dst.iter_mut().zip(&g[r * cols..(r + 1) * cols]) {
                            *d += *s;
                        }
                    }
                }
                Op::Sigmoid(x) => {
                    let dx = slot(&mut adj, *x, g.len());
                    for ((d, gi), yi) in dx.iter_mut().zip(&g).zip(y) {
                        *d += gi * yi * (1.0 - yi);
                    }
                }
                Op::Tanh(x) => {
                    let dx = slot(&mut adj, *x, g.len());
                    for ((d, gi), yi) in dx.iter_mut().zip(&g).zip(y) {
                        *d += gi * (1.0 - yi * yi);
                    }
                }
                Op::Log(x) => {
                    let xv = &self.values[x.0];
                    let dx = slot(&mut adj, *x, g.len());
                    for ((d, gi), xi) in dx.iter_mut().zip(&g).zip(xv) {
                        *d += gi / xi;
                    }
                }
                Op::Add(a, b) => {
                    for t in [a, b] {
                        let dt = slot(&mut adj, *t, g.len());
                        for (d, gi) in dt.iter_mut().zip(&g) {
                            *d += *gi;
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.values[a.0], &self.values[b.0]);
                    let da = slot(&mut adj, *a, g.len());
                    for ((d, gi), bi) in da.iter_mut().zip(&g).zip(bv) {
                        *d += gi * bi;
                    }
                    let db = slot(&mut adj, *b, g.len());
                    for ((d, gi), ai) in db.iter_mut().zip(&g).zip(av) {
                        *d += gi * ai;
                    }
                }
                Op::Softmax(x) => {
                    let dx = slot(&mut adj, *x, g.len());
                    for r in 0..rows {
                        let (gr, yr) = (&g[r * cols..(r + 1) * cols], &y[r * cols..(r + 1) * cols]);
                        let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                        for ((d, gi), yi) in dx[r * cols..(r + 1) * cols].iter_mut().zip(gr).zip(yr) {
                            *d += yi * (gi - dot);
                        }
                    }
                }
                Op::LogSoftmax(x) => {
                    let dx = slot(&mut adj, *x, g.len());
                    for r in 0..rows {
                        let (gr, yr) = (&g[r * cols..(r + 1) * cols], &y[r * cols..(r + 1) * cols]);
                        let total: f64 = gr.iter().sum();
                        for ((d, gi), yi) in dx[r * cols..(r + 1) * cols].iter_mut().zip(gr).zip(yr) {
                            *d += gi - math::exp(*yi) * total;
                        }
                    }
                }
                Op::Pick { x, cols: idx } => {
                    let xc = self.nodes[x.0].cols;
                    let dx = slot(&mut adj, *x, rows * xc);
                    for (r, &c) in idx.iter().enumerate() {
                        dx[r * xc + c] += g[r];
                    }
                }
                Op::Sum(x) => {
                    let n = self.values[x.0].len();
                    let dx = slot(&mut adj, *x, n);
                    dx.iter_mut().for_each(|d| *d += g[0]);
                }
                Op::Scale(x, f) => {
                    let dx = slot(&mut adj, *x, g.len());
                    for (d, gi) in dx.iter_mut().zip(&g) {
                        *d += f * gi;
                    }
                }
            }
        }
        Ok(())
    }

    /// Name of the primitive behind `v`, for diagnostics.
    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }
}

fn slot(adj: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    adj[v.0].get_or_insert_with(|| vec![0.0; len])
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for a in row.iter_mut() {
        *a = math::exp(*a - m);
        total += *a;
    }
    row.iter_mut().for_each(|a| *a /= total);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(shape: &[usize], data: Vec<f64>) -> (ParamSet, ParamId) {
        let mut p = ParamSet::new();
        let id = p.add("w", Tensor::new(shape, data).unwrap());
        (p, id)
    }

    #[test]
    fn affine_identity() {
        let (params, id) = one_param(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let mut g = Graph::new();
        let w = g.param(&params, id);
        let x = g.constant(1, 2, vec![1.0, 2.0]).unwrap();
        let b = g.zeros(1, 2);
        let y = g.affine(w, x, Some(b)).unwrap();
        g.forward(&params, &Inputs::new()).unwrap();
        assert_eq!(g.value(y), &[1.0, 2.0]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let mut g = Graph::new();
        let x = g.constant(1, 4, vec![0.0; 4]).unwrap();
        let y = g.softmax(x);
        g.forward(&ParamSet::new(), &Inputs::new()).unwrap();
        assert_eq!(g.value(y), &[0.25; 4]);
    }

    #[test]
    fn gradient_of_summed_softmax_vanishes() {
        let (params, id) = one_param(&[3], vec![0.3, -1.2, 2.0]);
        let mut g = Graph::new();
        let x = g.param(&params, id);
        let s = g.softmax(x);
        let out = g.sum(s);
        g.forward(&params, &Inputs::new()).unwrap();
        let mut grads = Gradients::zeros_like(&params);
        g.backward(out, 1.0, &mut grads).unwrap();
        assert!(grads.get(id).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn linear_map_weight_gradient_is_input() {
        let (params, id) = one_param(&[3, 2], vec![0.5, -0.25, 1.0, 2.0, -3.0, 0.0]);
        let mut g = Graph::new();
        let w = g.param(&params, id);
        let x = g.constant(1, 2, vec![1.0, 2.0]).unwrap();
        let y = g.affine(w, x, None).unwrap();
        let out = g.sum(y);
        g.forward(&params, &Inputs::new()).unwrap();
        let mut grads = Gradients::zeros_like(&params);
        g.backward(out, 1.0, &mut grads).unwrap();
        for row in grads.get(id).chunks(2) {
            assert_eq!(row, &[1.0, 2.0]);
        }
    }

    #[test]
    fn gradients_accumulate_until_zeroed() {
        let (params, id) = one_param(&[1], vec![3.0]);
        let mut g = Graph::new();
        let x = g.param(&params, id);
        let y = g.mul(x, x).unwrap();
        let out = g.sum(y);
        g.forward(&params, &Inputs::new()).unwrap();
        let mut grads = Gradients::zeros_like(&params);
        g.backward(out, 1.0, &mut grads).unwrap();
        g.backward(out, 1.0, &mut grads).unwrap();
        assert_eq!(grads.get(id), &[12.0]);
        grads.zero();
        assert_eq!(grads.get(id), &[0.0]);
    }

    #[test]
    fn backward_before_forward_is_rejected() {
        let (params, id) = one_param(&[1], vec![1.0]);
        let mut g = Graph::new();
        let x = g.param(&params, id);
        let out = g.sum(x);
        let mut grads = Gradients::zeros_like(&params);
        assert_eq!(g.backward(out, 1.0, &mut grads), Err(GraphError::BackwardBeforeForward));
    }

    #[test]
    fn non_scalar_backward_is_rejected() {
        let (params, id) = one_param(&[2], vec![1.0, 2.0]);
        let mut g = Graph::new();
        let x = g.param(&params, id);
        let y = g.tanh(x);
        g.forward(&params, &Inputs::new()).unwrap();
        let mut grads = Gradients::zeros_like(&params);
        assert!(matches!(g.backward(y, 1.0, &mut grads), Err(GraphError::NonScalarOutput(_))));
    }

    #[test]
    fn shape_mismatch_names_the_node() {
        let (params, id) = one_param(&[2, 3], vec![0.0; 6]);
        let mut g = Graph::new();
        let w = g.param(&params, id);
        let x = g.constant(1, 2, vec![1.0, 1.0]).unwrap();
        match g.affine(w, x, None) {
            Err(GraphError::ShapeMismatch { node, op, .. }) => {
                assert_eq!((node, op), (2, "affine"));
            }
            other => panic!("expected mismatch, got {other:?}"),
        }
        let a = g.zeros(1, 3);
        assert!(g.add(a, x).is_err());
        assert!(g.gather(w, &[5]).is_err());
        assert!(g.pick(x, &[0, 1]).is_err());
    }

    #[test]
    fn inputs_must_be_bound_and_finite() {
        let mut g = Graph::new();
        let x = g.input("x", 1, 2);
        let _ = g.tanh(x);
        let params = ParamSet::new();
        assert_eq!(
            g.forward(&params, &Inputs::new()),
            Err(GraphError::UnboundInput("x".into()))
        );
        let mut inputs = Inputs::new();
        inputs.insert("x".into(), Tensor::vector(vec![1.0, f64::NAN]));
        assert_eq!(g.forward(&params, &inputs), Err(GraphError::NonFiniteInput("x".into())));
        inputs.insert("x".into(), Tensor::vector(vec![0.0, 1.0]));
        g.forward(&params, &inputs).unwrap();
    }

    #[test]
    fn log_softmax_matches_log_of_softmax() {
        let mut g = Graph::new();
        let x = g.constant(2, 3, vec![1.0, -2.0, 0.5, 10.0, 0.0, 0.0]).unwrap();
        let s = g.softmax(x);
        let ls = g.log(s);
        let lsm = g.log_softmax(x);
        g.forward(&ParamSet::new(), &Inputs::new()).unwrap();
        for (a, b) in g.value(ls).iter().zip(g.value(lsm)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
