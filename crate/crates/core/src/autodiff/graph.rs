use alloc::format;
use alloc::vec::Vec;

use super::param::{ParamId, ParamStore};
use super::tensor::{matmul, matmul_nt, matmul_tn, Tensor};
use super::AutodiffError;
use crate::math::{exp, sqrt};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Sigmoid(Var),
    Abs(Var),
    Sqrt(Var),
    SmoothL1(Var),
    Softmax(Var),
    Transpose(Var),
    Reshape(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    GroupMax(Var, Vec<usize>),
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    Broadcast(Var),
}

#[derive(Debug)]
struct Node {
    // `None` only for parameter nodes, whose value lives in the store
    value: Option<Tensor>,
    op: Op,
    needs_grad: bool,
}

/// A single-use reverse-mode tape.
///
/// Operations are appended in execution order, which is a topological order;
/// [`Graph::backward`] walks it once in reverse. Parameters are read from the
/// borrowed [`ParamStore`] without copying.
#[derive(Debug)]
pub struct Graph<'p> {
    nodes: Vec<Node>,
    params: Option<&'p ParamStore>,
    param_vars: Vec<Option<Var>>,
    consumed: bool,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    params: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to a recorded value; `None` if it does not
    /// influence the loss.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.nodes.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for a parameter; `None` when the parameter was unused.
    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params.get(id.index()).and_then(Option::as_ref)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Adds another pass's parameter gradients into this one.
    pub fn accumulate(&mut self, other: &Gradients) {
        if self.params.len() < other.params.len() {
            self.params.resize(other.params.len(), None);
        }
        for (mine, theirs) in self.params.iter_mut().zip(&other.params) {
            match (mine.as_mut(), theirs) {
                (Some(a), Some(b)) => a.add_assign(b),
                (None, Some(b)) => *mine = Some(b.clone()),
                _ => {}
            }
        }
    }

    /// Multiplies every parameter gradient by `s`.
    pub fn scale(&mut self, s: f64) {
        for t in self.params.iter_mut().flatten() {
            for x in t.data_mut() {
                *x *= s;
            }
        }
    }

    /// Euclidean norm over all parameter gradients.
    pub fn param_norm(&self) -> f64 {
        sqrt(
            self.params
                .iter()
                .flatten()
                .flat_map(|t| t.data().iter())
                .map(|x| x * x)
                .sum(),
        )
    }
}

fn shape_err(op: &'static str, detail: alloc::string::String) -> AutodiffError {
    AutodiffError::Shape { op, detail }
}

impl<'p> Graph<'p> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: None,
            param_vars: Vec::new(),
            consumed: false,
        }
    }

    /// A graph whose [`Graph::param`] reads from `params`.
    pub fn with_params(params: &'p ParamStore) -> Self {
        Self {
            nodes: Vec::new(),
            params: Some(params),
            param_vars: alloc::vec![None; params.len()],
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.expect("param graph").get(*id).value(),
            _ => unreachable!("only parameter nodes borrow their value"),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A constant input (no gradient).
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A leaf whose gradient is tracked.
    pub fn variable(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// The node for parameter `id`; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Result<Var, AutodiffError> {
        let store = self.params.ok_or(AutodiffError::NoParams)?;
        if id.index() >= store.len() {
            return Err(AutodiffError::UnknownParam(id.index()));
        }
        if let Some(v) = self.param_vars[id.index()] {
            return Ok(v);
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.index()] = Some(v);
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(shape_err(
                "matmul",
                format!("{:?} x {:?}", ta.shape(), tb.shape()),
            ));
        }
        let out = matmul(ta, tb);
        let g = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::MatMul(a, b), g))
    }

    /// Adds a `1×m` bias row to every row of an `n×m` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, AutodiffError> {
        let (tx, tb) = (self.value(x), self.value(bias));
        if tb.rows() != 1 || tb.cols() != tx.cols() {
            return Err(shape_err(
                "add_bias",
                format!("{:?} + {:?}", tx.shape(), tb.shape()),
            ));
        }
        let mut out = tx.clone();
        let m = tx.cols();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += tb.data()[i % m];
        }
        let g = self.needs(x) || self.needs(bias);
        Ok(self.push(out, Op::AddBias(x, bias), g))
    }

    fn zip(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var, AutodiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, format!("{:?} vs {:?}", ta.shape(), tb.shape())));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(ta.rows(), ta.cols(), data)?;
        let g = self.needs(a) || self.needs(b);
        Ok(self.push(out, op, g))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip(a, b, "div", |x, y| x / y, Op::Div(a, b))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.value(x).map(f);
        let g = self.needs(x);
        self.push(out, op, g)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        self.unary(x, |v| v * s, Op::Scale(x, s))
    }

    pub fn add_scalar(&mut self, x: Var, s: f64) -> Var {
        self.unary(x, |v| v + s, Op::AddScalar(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| if v > 0.0 { v } else { 0.0 }, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, f64::abs, Op::Abs(x))
    }

    pub fn sqrt(&mut self, x: Var) -> Var {
        self.unary(x, sqrt, Op::Sqrt(x))
    }

    /// Elementwise Huber function with threshold 1:
    /// `0.5 d²` for `|d| < 1`, `|d| - 0.5` otherwise.
    pub fn smooth_l1(&mut self, x: Var) -> Var {
        self.unary(
            x,
            |d| if d.abs() < 1.0 { 0.5 * d * d } else { d.abs() - 0.5 },
            Op::SmoothL1(x),
        )
    }

    /// Softmax over each row.
    pub fn softmax(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let (n, m) = t.shape();
        let mut data = t.data().to_vec();
        for r in 0..n {
            let row = &mut data[r * m..(r + 1) * m];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = exp(*v - max);
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        let out = Tensor::new(n, m, data).expect("same shape");
        let g = self.needs(x);
        self.push(out, Op::Softmax(x), g)
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let out = self.value(x).transpose();
        let g = self.needs(x);
        self.push(out, Op::Transpose(x), g)
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var, AutodiffError> {
        let t = self.value(x);
        if t.len() != rows * cols {
            return Err(shape_err("reshape", format!("{:?} -> ({rows}, {cols})", t.shape())));
        }
        let out = Tensor::new(rows, cols, t.data().to_vec())?;
        let g = self.needs(x);
        Ok(self.push(out, Op::Reshape(x), g))
    }

    /// Joins matrices with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let first = parts.first().ok_or_else(|| shape_err("concat_cols", "no inputs".into()))?;
        let n = self.shape(*first).0;
        let widths: Vec<usize> = parts.iter().map(|&p| self.shape(p).1).collect();
        if let Some(&bad) = parts.iter().find(|&&p| self.shape(p).0 != n) {
            return Err(shape_err("concat_cols", format!("rows {} vs {n}", self.shape(bad).0)));
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(n * total);
        for r in 0..n {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let out = Tensor::new(n, total, data)?;
        let g = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), g))
    }

    /// Stacks matrices with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let first = parts.first().ok_or_else(|| shape_err("concat_rows", "no inputs".into()))?;
        let m = self.shape(*first).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != m {
                return Err(shape_err("concat_rows", format!("cols {} vs {m}", t.cols())));
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let out = Tensor::new(rows, m, data)?;
        let g = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), g))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var, AutodiffError> {
        let t = self.value(x);
        if start >= end || end > t.cols() {
            return Err(shape_err("slice_cols", format!("{start}..{end} of {}", t.cols())));
        }
        let mut data = Vec::with_capacity(t.rows() * (end - start));
        for r in 0..t.rows() {
            data.extend_from_slice(&t.row_slice(r)[start..end]);
        }
        let out = Tensor::new(t.rows(), end - start, data)?;
        let g = self.needs(x);
        Ok(self.push(out, Op::SliceCols(x, start), g))
    }

    /// Row `i` of the output is row `index[i]` of `x`.
    pub fn gather_rows(&mut self, x: Var, index: &[usize]) -> Result<Var, AutodiffError> {
        let t = self.value(x);
        if let Some(&bad) = index.iter().find(|&&i| i >= t.rows()) {
            return Err(shape_err("gather_rows", format!("row {bad} of {}", t.rows())));
        }
        let mut data = Vec::with_capacity(index.len() * t.cols());
        for &i in index {
            data.extend_from_slice(t.row_slice(i));
        }
        let out = Tensor::new(index.len(), t.cols(), data)?;
        let g = self.needs(x);
        Ok(self.push(out, Op::GatherRows(x, index.to_vec()), g))
    }

    /// Channel-wise maximum over consecutive blocks of `group` rows:
    /// `(g·group)×c → g×c`. Gradient flows to the first maximal row.
    pub fn group_max(&mut self, x: Var, group: usize) -> Result<Var, AutodiffError> {
        let t = self.value(x);
        let (n, c) = t.shape();
        if group == 0 || n == 0 || n % group != 0 {
            return Err(shape_err("group_max", format!("{n} rows in groups of {group}")));
        }
        let groups = n / group;
        let mut data = Vec::with_capacity(groups * c);
        let mut arg = Vec::with_capacity(groups * c);
        for gi in 0..groups {
            for ch in 0..c {
                let mut best = (gi * group) * c + ch;
                for r in gi * group + 1..(gi + 1) * group {
                    let idx = r * c + ch;
                    if t.data()[idx] > t.data()[best] {
                        best = idx;
                    }
                }
                data.push(t.data()[best]);
                arg.push(best);
            }
        }
        let out = Tensor::new(groups, c, data)?;
        let g = self.needs(x);
        Ok(self.push(out, Op::GroupMax(x, arg), g))
    }

    /// Channel-wise maximum over all rows (`n×d → 1×d`).
    pub fn max_pool_points(&mut self, x: Var) -> Result<Var, AutodiffError> {
        let n = self.shape(x).0;
        if n == 0 {
            return Err(AutodiffError::Empty("max_pool_points"));
        }
        self.group_max(x, n)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let g = self.needs(x);
        self.push(Tensor::scalar(s), Op::Sum(x), g)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        let g = self.needs(x);
        self.push(Tensor::scalar(s), Op::Mean(x), g)
    }

    /// Sum of each row (`n×m → n×1`).
    pub fn row_sum(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let data: Vec<f64> = (0..t.rows()).map(|r| t.row_slice(r).iter().sum()).collect();
        let out = Tensor::new(t.rows(), 1, data).expect("row sums");
        let g = self.needs(x);
        self.push(out, Op::RowSum(x), g)
    }

    /// Repeats a `1×1` value into a `rows×cols` matrix.
    pub fn broadcast(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var, AutodiffError> {
        let t = self.value(x);
        if t.shape() != (1, 1) {
            return Err(shape_err("broadcast", format!("{:?} is not a scalar", t.shape())));
        }
        let out = Tensor::full(rows, cols, t.item());
        let g = self.needs(x);
        Ok(self.push(out, Op::Broadcast(x), g))
    }

    /// `softmax(q kᵀ / √d) v`.
    pub fn scaled_dot_attention(&mut self, q: Var, k: Var, v: Var) -> Result<Var, AutodiffError> {
        let (nq, d) = self.shape(q);
        let (nk, dk) = self.shape(k);
        let (nv, _) = self.shape(v);
        if d == 0 || d != dk || nk != nv {
            return Err(shape_err(
                "attention",
                format!("q {:?}, k {:?}, v {:?}", (nq, d), (nk, dk), self.shape(v)),
            ));
        }
        let kt = self.transpose(k);
        let logits = self.matmul(q, kt)?;
        let scaled = self.scale(logits, 1.0 / sqrt(d as f64));
        let weights = self.softmax(scaled);
        self.matmul(weights, v)
    }

    /// Reverse pass from a scalar `loss`. A graph can be differentiated once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, AutodiffError> {
        if self.consumed {
            return Err(AutodiffError::AlreadyBackpropagated);
        }
        if self.shape(loss) != (1, 1) {
            return Err(AutodiffError::NonScalarLoss(self.shape(loss)));
        }
        if !self.needs(loss) {
            return Err(AutodiffError::Detached);
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor>> = alloc::vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        let mut params = alloc::vec![None; self.param_vars.len()];
        for (slot, var) in params.iter_mut().zip(&self.param_vars) {
            if let Some(v) = var {
                *slot = grads[v.0].clone();
            }
        }
        Ok(Gradients { nodes: grads, params })
    }

    fn backprop_node(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = self.nodes[i].value.as_ref();
        let send = |v: Var, t: Tensor, grads: &mut [Option<Tensor>]| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&t),
                slot => *slot = Some(t),
            }
        };
        let zip = |a: &Tensor, f: &dyn Fn(f64, f64) -> f64| {
            Tensor::new(
                a.rows(),
                a.cols(),
                a.data().iter().zip(g.data()).map(|(&x, &gy)| f(x, gy)).collect(),
            )
            .expect("same shape")
        };
        match &self.nodes[i].op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    send(*a, matmul_nt(g, self.value(*b)), grads);
                }
                if self.needs(*b) {
                    send(*b, matmul_tn(self.value(*a), g), grads);
                }
            }
            Op::AddBias(x, b) => {
                send(*x, g.clone(), grads);
                if self.needs(*b) {
                    let m = g.cols();
                    let mut gb = Tensor::zeros(1, m);
                    for r in 0..g.rows() {
                        for (acc, v) in gb.data_mut().iter_mut().zip(g.row_slice(r)) {
                            *acc += v;
                        }
                    }
                    send(*b, gb, grads);
                }
            }
            Op::Add(a, b) => {
                send(*a, g.clone(), grads);
                send(*b, g.clone(), grads);
            }
            Op::Sub(a, b) => {
                send(*a, g.clone(), grads);
                send(*b, g.map(|x| -x), grads);
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                send(*a, zip(tb, &|y, gy| y * gy), grads);
                send(*b, zip(ta, &|x, gy| x * gy), grads);
            }
            Op::Div(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                send(*a, zip(tb, &|y, gy| gy / y), grads);
                let gb = Tensor::new(
                    ta.rows(),
                    ta.cols(),
                    ta.data()
                        .iter()
                        .zip(tb.data())
                        .zip(g.data())
                        .map(|((&x, &y), &gy)| -gy * x / (y * y))
                        .collect(),
                )
                .expect("same shape");
                send(*b, gb, grads);
            }
            Op::Scale(x, s) => send(*x, g.map(|v| v * s), grads),
            Op::AddScalar(x) => send(*x, g.clone(), grads),
            Op::Relu(x) => {
                let y = out.expect("owned");
                send(*x, zip(y, &|y, gy| if y > 0.0 { gy } else { 0.0 }), grads);
            }
            Op::Sigmoid(x) => {
                let y = out.expect("owned");
                send(*x, zip(y, &|y, gy| gy * y * (1.0 - y)), grads);
            }
            Op::Abs(x) => {
                let t = self.value(*x);
                send(*x, zip(t, &|v, gy| if v > 0.0 { gy } else if v < 0.0 { -gy } else { 0.0 }), grads);
            }
            Op::Sqrt(x) => {
                let y = out.expect("owned");
                send(*x, zip(y, &|y, gy| gy / (2.0 * y)), grads);
            }
            Op::SmoothL1(x) => {
                let t = self.value(*x);
                send(
                    *x,
                    zip(t, &|d, gy| if d.abs() < 1.0 { gy * d } else if d > 0.0 { gy } else { -gy }),
                    grads,
                );
            }
            Op::Softmax(x) => {
                let y = out.expect("owned");
                let (n, m) = y.shape();
                let mut gx = Tensor::zeros(n, m);
                for r in 0..n {
                    let yr = y.row_slice(r);
                    let gr = g.row_slice(r);
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for c in 0..m {
                        gx.data_mut()[r * m + c] = yr[c] * (gr[c] - dot);
                    }
                }
                send(*x, gx, grads);
            }
            Op::Transpose(x) => send(*x, g.transpose(), grads),
            Op::Reshape(x) => {
                let (r, c) = self.shape(*x);
                send(*x, Tensor::new(r, c, g.data().to_vec()).expect("reshape"), grads);
            }
            Op::ConcatCols(parts) => {
                let n = g.rows();
                let mut offset = 0;
                for &p in parts {
                    let w = self.shape(p).1;
                    if self.needs(p) {
                        let mut data = Vec::with_capacity(n * w);
                        for r in 0..n {
                            data.extend_from_slice(&g.row_slice(r)[offset..offset + w]);
                        }
                        send(p, Tensor::new(n, w, data).expect("slice"), grads);
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let m = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let h = self.shape(p).0;
                    if self.needs(p) {
                        let data = g.data()[offset * m..(offset + h) * m].to_vec();
                        send(p, Tensor::new(h, m, data).expect("slice"), grads);
                    }
                    offset += h;
                }
            }
            Op::SliceCols(x, start) => {
                let (n, m) = self.shape(*x);
                let w = g.cols();
                let mut gx = Tensor::zeros(n, m);
                for r in 0..n {
                    gx.data_mut()[r * m + start..r * m + start + w].copy_from_slice(g.row_slice(r));
                }
                send(*x, gx, grads);
            }
            Op::GatherRows(x, index) => {
                let (n, m) = self.shape(*x);
                let mut gx = Tensor::zeros(n, m);
                for (r, &src) in index.iter().enumerate() {
                    let dst = &mut gx.data_mut()[src * m..(src + 1) * m];
                    for (d, v) in dst.iter_mut().zip(g.row_slice(r)) {
                        *d += v;
                    }
                }
                send(*x, gx, grads);
            }
            Op::GroupMax(x, arg) => {
                let (n, m) = self.shape(*x);
                let mut gx = Tensor::zeros(n, m);
                for (e, &src) in arg.iter().enumerate() {
                    gx.data_mut()[src] += g.data()[e];
                }
                send(*x, gx, grads);
            }
            Op::Sum(x) => {
                let (n, m) = self.shape(*x);
                send(*x, Tensor::full(n, m, g.item()), grads);
            }
            Op::Mean(x) => {
                let (n, m) = self.shape(*x);
                send(*x, Tensor::full(n, m, g.item() / (n * m) as f64), grads);
            }
            Op::RowSum(x) => {
                let (n, m) = self.shape(*x);
                let mut gx = Tensor::zeros(n, m);
                for r in 0..n {
                    let gr = g.data()[r];
                    for v in &mut gx.data_mut()[r * m..(r + 1) * m] {
                        *v = gr;
                    }
                }
                send(*x, gx, grads);
            }
            Op::Broadcast(x) => {
                let s: f64 = g.data().iter().sum();
                send(*x, Tensor::scalar(s), grads);
            }
        }
    }
}

/// Logistic function, stable for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}
