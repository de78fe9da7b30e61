//! Reverse-mode gradient tape over dense matrices.
//!
//! Every primitive appends one node holding its output. Parameters are
//! referenced by id and read from the borrowed [`ParamStore`], never copied.
//! [`Tape::backward`] walks the nodes in exact reverse order of recording.

use std::sync::Arc;

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Precomputed edge lists for [`Tape::neighbor_mean`].
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregation {
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub n_out: usize,
    /// `1 / in-degree` per output row (0 for rows without edges).
    pub inv_deg: Vec<f64>,
}

impl Aggregation {
    pub fn new(src: Vec<usize>, dst: Vec<usize>, n_out: usize) -> Self {
        assert_eq!(src.len(), dst.len());
        let mut deg = vec![0usize; n_out];
        for &d in &dst {
            deg[d] += 1;
        }
        let inv_deg = deg.iter().map(|&d| if d == 0 { 0.0 } else { 1.0 / d as f64 }).collect();
        Aggregation { src, dst, n_out, inv_deg }
    }

    pub fn num_edges(&self) -> usize {
        self.src.len()
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param { id: ParamId, frozen: bool },
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Log(Var),
    Exp(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    Column(Var, usize),
    ConcatCols(Var, Var),
    ConcatRows(Var, Var),
    GatherRows(Var, Arc<Vec<usize>>),
    NeighborMean(Var, Arc<Aggregation>),
    PickPerRow(Var, Arc<Vec<usize>>),
    Sum(Var),
    Mean(Var),
}

/// Deliberately wrong backward rules, for mutation tests of the gradient
/// checker.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackwardFault {
    /// `d log(x) / dx` computed as `x` instead of `1/x`.
    LogDerivative,
    /// LeakyReLU backward uses slope 1 everywhere.
    LeakySlope,
}

struct Node {
    op: Op,
    value: Option<Tensor>,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    fault: Option<BackwardFault>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape { params, nodes: Vec::new(), fault: None }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    #[doc(hidden)]
    pub fn inject_fault(&mut self, fault: BackwardFault) {
        self.fault = Some(fault);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        resolve(self.params, &self.nodes, v)
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let t = self.value(v);
        assert_eq!(t.len(), 1, "scalar() on a {}x{} tensor", t.rows, t.cols);
        t.data[0]
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node { op: Op::Constant, value: Some(t) });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node { op: Op::Param { id, frozen: false }, value: None });
        Var(self.nodes.len() - 1)
    }

    /// Reads a parameter without accumulating a gradient for it.
    pub fn param_frozen(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node { op: Op::Param { id, frozen: true }, value: None });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, op: Op) -> Result<Var> {
        check_shapes(&op, &|v| resolve(self.params, &self.nodes, v))?;
        let value = compute(&op, &|v| resolve(self.params, &self.nodes, v));
        self.nodes.push(Node { op, value: Some(value) });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::MatMul(a, b))
    }

    /// `a + b` with `b` a 1×cols row broadcast over rows.
    pub fn add_bias(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::AddBias(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Sub(a, b))
    }

    /// Elementwise product of equal shapes.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.record(Op::Scale(a, s))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.record(Op::LeakyRelu(a, slope))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Sigmoid(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Log(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Exp(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        self.record(Op::SoftmaxRows(a))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Result<Var> {
        self.record(Op::LogSoftmaxRows(a))
    }

    /// Column `j` as an n×1 tensor.
    pub fn column(&mut self, a: Var, j: usize) -> Result<Var> {
        self.record(Op::Column(a, j))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::ConcatCols(a, b))
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::ConcatRows(a, b))
    }

    pub fn gather_rows(&mut self, a: Var, idx: Vec<usize>) -> Result<Var> {
        self.record(Op::GatherRows(a, Arc::new(idx)))
    }

    /// Row `d` of the output is the mean of input rows `src[e]` over edges
    /// `e` with `dst[e] == d`; rows without edges are zero.
    pub fn neighbor_mean(&mut self, a: Var, agg: Arc<Aggregation>) -> Result<Var> {
        self.record(Op::NeighborMean(a, agg))
    }

    /// `out[i] = a[i, idx[i]]`, an n×1 tensor.
    pub fn pick_per_row(&mut self, a: Var, idx: Vec<usize>) -> Result<Var> {
        self.record(Op::PickPerRow(a, Arc::new(idx)))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Mean(a))
    }

    /// Recomputes every node from the recorded ops and leaves.
    pub fn replay(&self) -> Vec<Tensor> {
        let mut out: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let t = match &node.op {
                Op::Constant => node.value.clone().unwrap(),
                Op::Param { id, .. } => self.params.get(*id).clone(),
                op => compute(op, &|v: Var| &out[v.0]),
            };
            out.push(t);
        }
        out
    }

    /// Gradients of the scalar `loss` with respect to every parameter read on
    /// this tape, added into `grads`.
    pub fn backward_into(&self, loss: Var, grads: &mut Gradients) -> Result<()> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got {}x{}",
                lv.rows, lv.cols
            )));
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param { id, frozen } => {
                    if !frozen {
                        grads.accumulate(*id, &g);
                    }
                }
                op => self.propagate(op, node.value.as_ref().unwrap(), &g, &mut adj),
            }
        }
        Ok(())
    }

    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let mut grads = Gradients::new(self.params);
        self.backward_into(loss, &mut grads)?;
        Ok(grads)
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &Tensor, adj: &mut [Option<Tensor>]) {
        let val = |v: Var| self.value(v);
        match *op {
            Op::Constant | Op::Param { .. } => unreachable!(),
            Op::MatMul(a, b) => {
                let (av, bv) = (val(a), val(b));
                let (m, k, n) = (av.rows, av.cols, bv.cols);
                let mut ga = Tensor::zeros(m, k);
                gemm(m, n, k, &g.data, false, &bv.data, true, &mut ga.data, 0.0);
                acc(adj, a, ga);
                let mut gb = Tensor::zeros(k, n);
                gemm(k, m, n, &av.data, true, &g.data, false, &mut gb.data, 0.0);
                acc(adj, b, gb);
            }
            Op::AddBias(a, b) => {
                acc(adj, a, g.clone());
                let mut gb = Tensor::zeros(1, g.cols);
                for r in 0..g.rows {
                    for (x, y) in gb.data.iter_mut().zip(g.row(r)) {
                        *x += y;
                    }
                }
                acc(adj, b, gb);
            }
            Op::Add(a, b) => {
                acc(adj, a, g.clone());
                acc(adj, b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(adj, a, g.clone());
                let mut gb = g.clone();
                gb.scale(-1.0);
                acc(adj, b, gb);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(a), val(b));
                acc(adj, a, zip_map(g, bv, |x, y| x * y));
                acc(adj, b, zip_map(g, av, |x, y| x * y));
            }
            Op::Scale(a, s) => {
                let mut ga = g.clone();
                ga.scale(s);
                acc(adj, a, ga);
            }
            Op::LeakyRelu(a, slope) => {
                let slope = if self.fault == Some(BackwardFault::LeakySlope) { 1.0 } else { slope };
                acc(adj, a, zip_map(g, val(a), |gi, x| if x > 0.0 { gi } else { gi * slope }));
            }
            Op::Sigmoid(a) => acc(adj, a, zip_map(g, out, |gi, y| gi * y * (1.0 - y))),
            Op::Log(a) => {
                let ga = if self.fault == Some(BackwardFault::LogDerivative) {
                    zip_map(g, val(a), |gi, x| gi * x)
                } else {
                    zip_map(g, val(a), |gi, x| gi / x)
                };
                acc(adj, a, ga);
            }
            Op::Exp(a) => acc(adj, a, zip_map(g, out, |gi, y| gi * y)),
            Op::SoftmaxRows(a) => {
                let mut ga = Tensor::zeros(out.rows, out.cols);
                for r in 0..out.rows {
                    let (y, gr) = (out.row(r), g.row(r));
                    let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for c in 0..out.cols {
                        ga.data[r * out.cols + c] = y[c] * (gr[c] - dot);
                    }
                }
                acc(adj, a, ga);
            }
            Op::LogSoftmaxRows(a) => {
                let mut ga = Tensor::zeros(out.rows, out.cols);
                for r in 0..out.rows {
                    let (y, gr) = (out.row(r), g.row(r));
                    let total: f64 = gr.iter().sum();
                    for c in 0..out.cols {
                        ga.data[r * out.cols + c] = gr[c] - y[c].exp() * total;
                    }
                }
                acc(adj, a, ga);
            }
            Op::Column(a, j) => {
                let (rows, cols) = val(a).shape();
                let mut ga = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    ga.data[r * cols + j] = g.data[r];
                }
                acc(adj, a, ga);
            }
            Op::ConcatCols(a, b) => {
                let ca = val(a).cols;
                let cb = val(b).cols;
                let mut ga = Tensor::zeros(g.rows, ca);
                let mut gb = Tensor::zeros(g.rows, cb);
                for r in 0..g.rows {
                    let row = g.row(r);
                    ga.data[r * ca..(r + 1) * ca].copy_from_slice(&row[..ca]);
                    gb.data[r * cb..(r + 1) * cb].copy_from_slice(&row[ca..]);
                }
                acc(adj, a, ga);
                acc(adj, b, gb);
            }
            Op::ConcatRows(a, b) => {
                let (ra, c) = val(a).shape();
                let split = ra * c;
                acc(adj, a, Tensor::from_vec(ra, c, g.data[..split].to_vec()));
                acc(adj, b, Tensor::from_vec(g.rows - ra, c, g.data[split..].to_vec()));
            }
            Op::GatherRows(a, ref idx) => {
                let (rows, cols) = val(a).shape();
                let mut ga = Tensor::zeros(rows, cols);
                for (i, &src) in idx.iter().enumerate() {
                    for c in 0..cols {
                        ga.data[src * cols + c] += g.data[i * cols + c];
                    }
                }
                acc(adj, a, ga);
            }
            Op::NeighborMean(a, ref agg) => {
                let (rows, cols) = val(a).shape();
                let mut ga = Tensor::zeros(rows, cols);
                for (&s, &d) in agg.src.iter().zip(&agg.dst) {
                    let w = agg.inv_deg[d];
                    for c in 0..cols {
                        ga.data[s * cols + c] += w * g.data[d * cols + c];
                    }
                }
                acc(adj, a, ga);
            }
            Op::PickPerRow(a, ref idx) => {
                let (rows, cols) = val(a).shape();
                let mut ga = Tensor::zeros(rows, cols);
                for (r, &j) in idx.iter().enumerate() {
                    ga.data[r * cols + j] = g.data[r];
                }
                acc(adj, a, ga);
            }
            Op::Sum(a) => {
                let (rows, cols) = val(a).shape();
                acc(adj, a, Tensor::from_vec(rows, cols, vec![g.data[0]; rows * cols]));
            }
            Op::Mean(a) => {
                let (rows, cols) = val(a).shape();
                let n = (rows * cols).max(1) as f64;
                acc(adj, a, Tensor::from_vec(rows, cols, vec![g.data[0] / n; rows * cols]));
            }
        }
    }
}

fn resolve<'a>(params: &'a ParamStore, nodes: &'a [Node], v: Var) -> &'a Tensor {
    let node = &nodes[v.0];
    match node.op {
        Op::Param { id, .. } => params.get(id),
        _ => node.value.as_ref().expect("recorded value"),
    }
}

fn acc(adj: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut adj[v.0] {
        Some(t) => t.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    }
}

fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor { rows: a.rows, cols: a.cols, data: a.data.iter().map(|&x| f(x)).collect() }
}

fn check_shapes<'a>(op: &Op, val: &dyn Fn(Var) -> &'a Tensor) -> Result<()> {
    let same = |a: Var, b: Var, what: &str| -> Result<()> {
        let (sa, sb) = (val(a).shape(), val(b).shape());
        if sa != sb {
            return Err(Error::Contract(format!("{what}: shape {sa:?} vs {sb:?}")));
        }
        Ok(())
    };
    match *op {
        Op::MatMul(a, b) => {
            let (ka, kb) = (val(a).cols, val(b).rows);
            if ka != kb {
                return Err(Error::dim("matmul inner dimension", ka, kb));
            }
        }
        Op::AddBias(a, b) => {
            let (t, bias) = (val(a), val(b));
            if bias.rows != 1 || bias.cols != t.cols {
                return Err(Error::dim("bias width", t.cols, bias.cols));
            }
        }
        Op::Add(a, b) => same(a, b, "add")?,
        Op::Sub(a, b) => same(a, b, "sub")?,
        Op::Mul(a, b) => same(a, b, "mul")?,
        Op::Column(a, j) => {
            if j >= val(a).cols {
                return Err(Error::dim("column index", val(a).cols, j));
            }
        }
        Op::ConcatCols(a, b) => {
            if val(a).rows != val(b).rows {
                return Err(Error::dim("concat_cols rows", val(a).rows, val(b).rows));
            }
        }
        Op::ConcatRows(a, b) => {
            if val(a).cols != val(b).cols {
                return Err(Error::dim("concat_rows cols", val(a).cols, val(b).cols));
            }
        }
        Op::GatherRows(a, ref idx) => {
            let rows = val(a).rows;
            if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
                return Err(Error::dim("gather row index", rows, bad));
            }
        }
        Op::NeighborMean(a, ref agg) => {
            let rows = val(a).rows;
            if agg.src.iter().any(|&s| s >= rows) || agg.dst.iter().any(|&d| d >= agg.n_out) {
                return Err(Error::Contract("neighbor_mean index out of range".into()));
            }
        }
        Op::PickPerRow(a, ref idx) => {
            let (rows, cols) = val(a).shape();
            if idx.len() != rows || idx.iter().any(|&j| j >= cols) {
                return Err(Error::Contract("pick_per_row index out of range".into()));
            }
        }
        _ => {}
    }
    Ok(())
}

fn compute<'a>(op: &Op, val: &dyn Fn(Var) -> &'a Tensor) -> Tensor {
    match *op {
        Op::Constant | Op::Param { .. } => unreachable!("leaves are not computed"),
        Op::MatMul(a, b) => {
            let (av, bv) = (val(a), val(b));
            let mut out = Tensor::zeros(av.rows, bv.cols);
            gemm(av.rows, av.cols, bv.cols, &av.data, false, &bv.data, false, &mut out.data, 0.0);
            out
        }
        Op::AddBias(a, b) => {
            let (av, bv) = (val(a), val(b));
            let mut out = av.clone();
            for r in 0..out.rows {
                for (x, y) in out.data[r * out.cols..(r + 1) * out.cols].iter_mut().zip(&bv.data) {
                    *x += y;
                }
            }
            out
        }
        Op::Add(a, b) => zip_map(val(a), val(b), |x, y| x + y),
        Op::Sub(a, b) => zip_map(val(a), val(b), |x, y| x - y),
        Op::Mul(a, b) => zip_map(val(a), val(b), |x, y| x * y),
        Op::Scale(a, s) => map(val(a), |x| x * s),
        Op::LeakyRelu(a, slope) => map(val(a), |x| if x > 0.0 { x } else { x * slope }),
        Op::Sigmoid(a) => map(val(a), sigmoid),
        Op::Log(a) => map(val(a), f64::ln),
        Op::Exp(a) => map(val(a), f64::exp),
        Op::SoftmaxRows(a) => {
            let mut out = val(a).clone();
            for r in 0..out.rows {
                let row = &mut out.data[r * out.cols..(r + 1) * out.cols];
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for x in row.iter_mut() {
                    *x = (*x - max).exp();
                    total += *x;
                }
                for x in row.iter_mut() {
                    *x /= total;
                }
            }
            out
        }
        Op::LogSoftmaxRows(a) => {
            let mut out = val(a).clone();
            for r in 0..out.rows {
                let row = &mut out.data[r * out.cols..(r + 1) * out.cols];
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
                for x in row.iter_mut() {
                    *x -= lse;
                }
            }
            out
        }
        Op::Column(a, j) => {
            let av = val(a);
            Tensor::column((0..av.rows).map(|r| av.get(r, j)).collect())
        }
        Op::ConcatCols(a, b) => {
            let (av, bv) = (val(a), val(b));
            let cols = av.cols + bv.cols;
            let mut data = Vec::with_capacity(av.rows * cols);
            for r in 0..av.rows {
                data.extend_from_slice(av.row(r));
                data.extend_from_slice(bv.row(r));
            }
            Tensor::from_vec(av.rows, cols, data)
        }
        Op::ConcatRows(a, b) => {
            let (av, bv) = (val(a), val(b));
            let mut data = Vec::with_capacity(av.len() + bv.len());
            data.extend_from_slice(&av.data);
            data.extend_from_slice(&bv.data);
            Tensor::from_vec(av.rows + bv.rows, av.cols, data)
        }
        Op::GatherRows(a, ref idx) => {
            let av = val(a);
            let mut data = Vec::with_capacity(idx.len() * av.cols);
            for &i in idx.iter() {
                data.extend_from_slice(av.row(i));
            }
            Tensor::from_vec(idx.len(), av.cols, data)
        }
        Op::NeighborMean(a, ref agg) => {
            let av = val(a);
            let cols = av.cols;
            let mut out = Tensor::zeros(agg.n_out, cols);
            for (&s, &d) in agg.src.iter().zip(&agg.dst) {
                let w = agg.inv_deg[d];
                for c in 0..cols {
                    out.data[d * cols + c] += w * av.data[s * cols + c];
                }
            }
            out
        }
        Op::PickPerRow(a, ref idx) => {
            let av = val(a);
            Tensor::column(idx.iter().enumerate().map(|(r, &j)| av.get(r, j)).collect())
        }
        Op::Sum(a) => Tensor::scalar(val(a).data.iter().sum()),
        Op::Mean(a) => {
            let av = val(a);
            Tensor::scalar(av.data.iter().sum::<f64>() / av.len().max(1) as f64)
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
