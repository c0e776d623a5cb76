//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! Every operation appends a node holding its forward value and enough saved
//! state to run its backward rule. Nodes are only ever appended, so a node's
//! inputs always precede it and a single reverse sweep visits them in
//! topological order.
//!
//! ```
//! use csiauth::tensor::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let w = tape.param(Tensor::new(&[1, 2], vec![3.0, -1.0]).unwrap());
//! let x = tape.constant(Tensor::new(&[2, 1], vec![2.0, 5.0]).unwrap());
//! let y = tape.matmul(w, x).unwrap();
//! let loss = tape.sum(y);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(w).unwrap().data(), &[2.0, 5.0]);
//! ```

use super::dense::{gemm, Tensor};
use crate::error::{Error, Result};

/// Additive mask value for blocked attention positions.
pub const MASKED: f64 = f64::NEG_INFINITY;

/// Epsilon inside the layer-norm square root.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Transpose(Var),
    Relu(Var),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Tensor,
        inv_std: Vec<f64>,
    },
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    BlockMatMulNt {
        a: Var,
        b: Var,
        a_rows: usize,
        b_rows: usize,
    },
    BlockMatMul {
        a: Var,
        b: Var,
        a_rows: usize,
        b_rows: usize,
    },
    Sum(Var),
    WeightedSumSquares(Var, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recorded computation graph.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for a leaf. Every trainable leaf has one (zeros if the loss
    /// does not reach it); constants and intermediate nodes give `None`.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drops every recorded node so the tape can be reused.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    /// Adds a length-`c` vector to every row of an `r×c` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, bias) = (self.value(a), self.value(row));
        x.expect_matrix("add_row")?;
        if bias.len() != x.cols() {
            return Err(Error::Shape(format!(
                "add_row: bias {:?} does not match {:?}",
                bias.shape(),
                x.shape()
            )));
        }
        let mut out = x.clone();
        let c = x.cols();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += bias.data()[i % c];
        }
        let rg = self.needs(&[a, row]);
        Ok(self.push(out, Op::AddRow(a, row), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x * s);
        let rg = self.needs(&[a]);
        self.push(out, Op::Scale(a, s), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose()?;
        let rg = self.needs(&[a]);
        Ok(self.push(out, Op::Transpose(a), rg))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        let rg = self.needs(&[a]);
        self.push(out, Op::Relu(a), rg)
    }

    /// Row-wise softmax of `x + mask`, with max subtraction.
    ///
    /// Mask entries must be `0` or [`MASKED`]. A row with every entry masked
    /// is rejected.
    pub fn softmax_masked(&mut self, x: Var, mask: Option<&Tensor>) -> Result<Var> {
        let xv = self.value(x);
        xv.expect_matrix("softmax_masked")?;
        if let Some(m) = mask {
            xv.expect_same_shape(m, "softmax_masked mask")?;
            if m.data().iter().any(|&v| v != 0.0 && v != MASKED) {
                return Err(Error::InvalidArgument(
                    "softmax mask entries must be 0 or -inf".into(),
                ));
            }
        }
        let (r, c) = (xv.rows(), xv.cols());
        let mut out = xv.clone();
        for i in 0..r {
            let row = &mut out.data_mut()[i * c..(i + 1) * c];
            if let Some(m) = mask {
                for (v, mv) in row.iter_mut().zip(m.row(i)) {
                    *v += mv;
                }
            }
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::InvalidArgument(format!(
                    "softmax row {i} is fully masked"
                )));
            }
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        let rg = self.needs(&[x]);
        Ok(self.push(out, Op::Softmax(x), rg))
    }

    /// Per-row normalization (biased variance, [`LAYER_NORM_EPS`]) followed by
    /// `gain ⊙ x̂ + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let xv = self.value(x);
        xv.expect_matrix("layer_norm")?;
        let (r, c) = (xv.rows(), xv.cols());
        if c < 2 {
            return Err(Error::Shape(format!(
                "layer_norm needs at least 2 columns, got {c}"
            )));
        }
        let (g, b) = (self.value(gain), self.value(bias));
        if g.len() != c || b.len() != c {
            return Err(Error::Shape(format!(
                "layer_norm affine shapes {:?}/{:?} do not match width {c}",
                g.shape(),
                b.shape()
            )));
        }
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(r);
        for i in 0..r {
            let row = &mut xhat.data_mut()[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * s;
            }
            inv_std.push(s);
        }
        let mut out = xhat.clone();
        for (k, v) in out.data_mut().iter_mut().enumerate() {
            let j = k % c;
            *v = *v * g.data()[j] + b.data()[j];
        }
        let rg = self.needs(&[x, gain, bias]);
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Shape("concat_cols of nothing".into()));
        }
        let rows = {
            let first = self.value(parts[0]);
            first.expect_matrix("concat_cols")?;
            first.rows()
        };
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let v = self.value(p);
            v.expect_matrix("concat_cols")?;
            if v.rows() != rows {
                return Err(Error::Shape(format!(
                    "concat_cols row mismatch: {rows} vs {:?}",
                    v.shape()
                )));
            }
            widths.push(v.cols());
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        let out = Tensor::new(&[rows, total], data)?;
        let rg = self.needs(parts);
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let xv = self.value(x);
        xv.expect_matrix("slice_cols")?;
        if start >= end || end > xv.cols() {
            return Err(Error::Shape(format!(
                "slice_cols {start}..{end} out of range for {:?}",
                xv.shape()
            )));
        }
        let out = Tensor::from_fn(xv.rows(), end - start, |r, c| xv.get(r, start + c));
        let rg = self.needs(&[x]);
        Ok(self.push(out, Op::SliceCols(x, start), rg))
    }

    /// Rows `start..end` of a matrix.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        if start >= end {
            return Err(Error::Shape(format!("empty row slice {start}..{end}")));
        }
        self.gather_rows(x, (start..end).collect())
    }

    /// Picks rows by index (repeats allowed).
    pub fn gather_rows(&mut self, x: Var, rows: Vec<usize>) -> Result<Var> {
        let xv = self.value(x);
        xv.expect_matrix("gather_rows")?;
        if let Some(&bad) = rows.iter().find(|&&r| r >= xv.rows()) {
            return Err(Error::Shape(format!(
                "gather_rows index {bad} out of range for {:?}",
                xv.shape()
            )));
        }
        let c = xv.cols();
        let mut data = Vec::with_capacity(rows.len() * c);
        for &r in &rows {
            data.extend_from_slice(xv.row(r));
        }
        let out = Tensor::new(&[rows.len(), c], data)?;
        let rg = self.needs(&[x]);
        Ok(self.push(out, Op::GatherRows(x, rows), rg))
    }

    /// Block-diagonal `A·Bᵀ`: `a` stacks `n` blocks of `a_rows × d`, `b` stacks
    /// `n` blocks of `b_rows × d`; the result stacks the `n` products
    /// `a_i · b_iᵀ` (`a_rows × b_rows` each).
    pub fn block_matmul_nt(&mut self, a: Var, b: Var, a_rows: usize, b_rows: usize) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let blocks = check_blocks("block_matmul_nt", av, bv, a_rows, b_rows)?;
        if av.cols() != bv.cols() {
            return Err(Error::Shape(format!(
                "block_matmul_nt width mismatch: {:?} vs {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let d = av.cols();
        let mut out = vec![0.0; blocks * a_rows * b_rows];
        for n in 0..blocks {
            gemm(
                a_rows,
                d,
                b_rows,
                &av.data()[n * a_rows * d..(n + 1) * a_rows * d],
                false,
                &bv.data()[n * b_rows * d..(n + 1) * b_rows * d],
                true,
                &mut out[n * a_rows * b_rows..(n + 1) * a_rows * b_rows],
                0.0,
            );
        }
        let out = Tensor::new(&[blocks * a_rows, b_rows], out)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(
            out,
            Op::BlockMatMulNt {
                a,
                b,
                a_rows,
                b_rows,
            },
            rg,
        ))
    }

    /// Block-diagonal `A·B`: `a` stacks blocks of `a_rows × b_rows`, `b` stacks
    /// blocks of `b_rows × d`; the result stacks `a_i · b_i`.
    pub fn block_matmul(&mut self, a: Var, b: Var, a_rows: usize, b_rows: usize) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let blocks = check_blocks("block_matmul", av, bv, a_rows, b_rows)?;
        if av.cols() != b_rows {
            return Err(Error::Shape(format!(
                "block_matmul: left blocks need {b_rows} columns, got {:?}",
                av.shape()
            )));
        }
        let d = bv.cols();
        let mut out = vec![0.0; blocks * a_rows * d];
        for n in 0..blocks {
            gemm(
                a_rows,
                b_rows,
                d,
                &av.data()[n * a_rows * b_rows..(n + 1) * a_rows * b_rows],
                false,
                &bv.data()[n * b_rows * d..(n + 1) * b_rows * d],
                false,
                &mut out[n * a_rows * d..(n + 1) * a_rows * d],
                0.0,
            );
        }
        let out = Tensor::new(&[blocks * a_rows, d], out)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(
            out,
            Op::BlockMatMul {
                a,
                b,
                a_rows,
                b_rows,
            },
            rg,
        ))
    }

    /// Scalar sum of all entries.
    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum());
        let rg = self.needs(&[x]);
        self.push(out, Op::Sum(x), rg)
    }

    /// `Σ_r w_r Σ_c x[r,c]²`, one weight per row.
    pub fn weighted_sum_squares(&mut self, x: Var, row_weights: Vec<f64>) -> Result<Var> {
        let xv = self.value(x);
        xv.expect_matrix("weighted_sum_squares")?;
        if row_weights.len() != xv.rows() {
            return Err(Error::Shape(format!(
                "weighted_sum_squares: {} weights for {:?}",
                row_weights.len(),
                xv.shape()
            )));
        }
        let total = row_weights
            .iter()
            .enumerate()
            .map(|(r, w)| w * xv.row(r).iter().map(|v| v * v).sum::<f64>())
            .sum();
        let rg = self.needs(&[x]);
        Ok(self.push(
            Tensor::scalar(total),
            Op::WeightedSumSquares(x, row_weights),
            rg,
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// The tape may only be differentiated once; call [`Tape::reset`] before
    /// recording the next step.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::Tape(
                "backward already ran on this tape; reset it first".into(),
            ));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Tape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else {
                continue;
            };
            if !self.nodes[id].requires_grad {
                continue;
            }
            self.backprop_node(id, &g, &mut grads)?;
            if matches!(self.nodes[id].op, Op::Leaf) {
                grads[id] = Some(g);
            }
        }

        for (id, node) in self.nodes.iter().enumerate() {
            match node.op {
                Op::Leaf if node.requires_grad => {
                    if grads[id].is_none() {
                        grads[id] = Some(Tensor::zeros(node.value.shape()));
                    }
                }
                Op::Leaf => grads[id] = None,
                _ => {}
            }
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[id];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                if self.wants(*a) {
                    let ga = slot(grads, *a, av.shape());
                    gemm(m, n, k, g.data(), false, bv.data(), true, ga.data_mut(), 1.0);
                }
                if self.wants(*b) {
                    let gb = slot(grads, *b, bv.shape());
                    gemm(k, m, n, av.data(), true, g.data(), false, gb.data_mut(), 1.0);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g, 1.0)?;
                self.accumulate(grads, *b, g, 1.0)?;
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g, 1.0)?;
                self.accumulate(grads, *b, g, -1.0)?;
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    let d = g.zip_map(self.value(*b), |x, y| x * y)?;
                    self.accumulate(grads, *a, &d, 1.0)?;
                }
                if self.wants(*b) {
                    let d = g.zip_map(self.value(*a), |x, y| x * y)?;
                    self.accumulate(grads, *b, &d, 1.0)?;
                }
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, g, 1.0)?;
                if self.wants(*row) {
                    let rv = self.value(*row);
                    let c = g.cols();
                    let gr = slot(grads, *row, rv.shape());
                    for (k, v) in g.data().iter().enumerate() {
                        gr.data_mut()[k % c] += v;
                    }
                }
            }
            Op::Scale(a, s) => self.accumulate(grads, *a, g, *s)?,
            Op::Transpose(a) => {
                let gt = g.transpose()?;
                self.accumulate(grads, *a, &gt, 1.0)?;
            }
            Op::Relu(a) => {
                let d = g.zip_map(self.value(*a), |gv, x| if x > 0.0 { gv } else { 0.0 })?;
                self.accumulate(grads, *a, &d, 1.0)?;
            }
            Op::Softmax(x) => {
                let y = &node.value;
                let c = y.cols();
                let mut d = g.clone();
                for i in 0..y.rows() {
                    let yr = y.row(i);
                    let gr = &mut d.data_mut()[i * c..(i + 1) * c];
                    let dot: f64 = yr.iter().zip(gr.iter()).map(|(a, b)| a * b).sum();
                    for (gv, yv) in gr.iter_mut().zip(yr) {
                        *gv = yv * (*gv - dot);
                    }
                }
                self.accumulate(grads, *x, &d, 1.0)?;
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let c = xhat.cols();
                let gv = self.value(*gain);
                if self.wants(*gain) {
                    let gg = slot(grads, *gain, gv.shape());
                    for (k, (dy, xh)) in g.data().iter().zip(xhat.data()).enumerate() {
                        gg.data_mut()[k % c] += dy * xh;
                    }
                }
                if self.wants(*bias) {
                    let gb = slot(grads, *bias, self.value(*bias).shape());
                    for (k, dy) in g.data().iter().enumerate() {
                        gb.data_mut()[k % c] += dy;
                    }
                }
                if self.wants(*x) {
                    let mut dx = Tensor::zeros(xhat.shape());
                    let mut dxhat = vec![0.0; c];
                    for (i, s) in inv_std.iter().enumerate() {
                        let gr = g.row(i);
                        let xr = xhat.row(i);
                        for j in 0..c {
                            dxhat[j] = gr[j] * gv.data()[j];
                        }
                        let mean_d = dxhat.iter().sum::<f64>() / c as f64;
                        let mean_dx =
                            dxhat.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                        let out = &mut dx.data_mut()[i * c..(i + 1) * c];
                        for j in 0..c {
                            out[j] = s * (dxhat[j] - mean_d - xr[j] * mean_dx);
                        }
                    }
                    self.accumulate(grads, *x, &dx, 1.0)?;
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if self.wants(p) {
                        let gp = slot(grads, p, self.value(p).shape());
                        for r in 0..g.rows() {
                            let src = &g.row(r)[offset..offset + w];
                            for (dst, s) in gp.data_mut()[r * w..(r + 1) * w].iter_mut().zip(src) {
                                *dst += s;
                            }
                        }
                    }
                    offset += w;
                }
            }
            Op::SliceCols(x, start) => {
                if self.wants(*x) {
                    let xv = self.value(*x);
                    let xc = xv.cols();
                    let w = g.cols();
                    let gx = slot(grads, *x, xv.shape());
                    for r in 0..g.rows() {
                        let dst = &mut gx.data_mut()[r * xc + start..r * xc + start + w];
                        for (d, s) in dst.iter_mut().zip(g.row(r)) {
                            *d += s;
                        }
                    }
                }
            }
            Op::GatherRows(x, rows) => {
                if self.wants(*x) {
                    let xv = self.value(*x);
                    let c = xv.cols();
                    let gx = slot(grads, *x, xv.shape());
                    for (k, &r) in rows.iter().enumerate() {
                        let dst = &mut gx.data_mut()[r * c..(r + 1) * c];
                        for (d, s) in dst.iter_mut().zip(g.row(k)) {
                            *d += s;
                        }
                    }
                }
            }
            Op::BlockMatMulNt {
                a,
                b,
                a_rows,
                b_rows,
            } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (ar, br, d) = (*a_rows, *b_rows, av.cols());
                let blocks = av.rows() / ar;
                // out_i = a_i b_iᵀ: da_i = g_i b_i, db_i = g_iᵀ a_i
                if self.wants(*a) {
                    let ga = slot(grads, *a, av.shape());
                    for n in 0..blocks {
                        gemm(
                            ar,
                            br,
                            d,
                            &g.data()[n * ar * br..(n + 1) * ar * br],
                            false,
                            &bv.data()[n * br * d..(n + 1) * br * d],
                            false,
                            &mut ga.data_mut()[n * ar * d..(n + 1) * ar * d],
                            1.0,
                        );
                    }
                }
                if self.wants(*b) {
                    let gb = slot(grads, *b, bv.shape());
                    for n in 0..blocks {
                        gemm(
                            br,
                            ar,
                            d,
                            &g.data()[n * ar * br..(n + 1) * ar * br],
                            true,
                            &av.data()[n * ar * d..(n + 1) * ar * d],
                            false,
                            &mut gb.data_mut()[n * br * d..(n + 1) * br * d],
                            1.0,
                        );
                    }
                }
            }
            Op::BlockMatMul {
                a,
                b,
                a_rows,
                b_rows,
            } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (ar, br, d) = (*a_rows, *b_rows, bv.cols());
                let blocks = av.rows() / ar;
                // out_i = a_i b_i: da_i = g_i b_iᵀ, db_i = a_iᵀ g_i
                if self.wants(*a) {
                    let ga = slot(grads, *a, av.shape());
                    for n in 0..blocks {
                        gemm(
                            ar,
                            d,
                            br,
                            &g.data()[n * ar * d..(n + 1) * ar * d],
                            false,
                            &bv.data()[n * br * d..(n + 1) * br * d],
                            true,
                            &mut ga.data_mut()[n * ar * br..(n + 1) * ar * br],
                            1.0,
                        );
                    }
                }
                if self.wants(*b) {
                    let gb = slot(grads, *b, bv.shape());
                    for n in 0..blocks {
                        gemm(
                            br,
                            ar,
                            d,
                            &av.data()[n * ar * br..(n + 1) * ar * br],
                            true,
                            &g.data()[n * ar * d..(n + 1) * ar * d],
                            false,
                            &mut gb.data_mut()[n * br * d..(n + 1) * br * d],
                            1.0,
                        );
                    }
                }
            }
            Op::Sum(x) => {
                let xv = self.value(*x);
                let d = Tensor::full(xv.shape(), g.item());
                self.accumulate(grads, *x, &d, 1.0)?;
            }
            Op::WeightedSumSquares(x, weights) => {
                if self.wants(*x) {
                    let xv = self.value(*x);
                    let c = xv.cols();
                    let gi = g.item();
                    let gx = slot(grads, *x, xv.shape());
                    for (k, (d, v)) in gx.data_mut().iter_mut().zip(xv.data()).enumerate() {
                        *d += 2.0 * gi * weights[k / c] * v;
                    }
                }
            }
        }
        Ok(())
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: &Tensor, s: f64) -> Result<()> {
        if !self.wants(v) {
            return Ok(());
        }
        let dst = slot(grads, v, self.value(v).shape());
        dst.expect_same_shape(g, "gradient accumulation")?;
        for (d, x) in dst.data_mut().iter_mut().zip(g.data()) {
            *d += s * x;
        }
        Ok(())
    }
}

fn slot<'g>(grads: &'g mut [Option<Tensor>], v: Var, shape: &[usize]) -> &'g mut Tensor {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(shape))
}

fn check_blocks(op: &str, a: &Tensor, b: &Tensor, a_rows: usize, b_rows: usize) -> Result<usize> {
    a.expect_matrix(op)?;
    b.expect_matrix(op)?;
    if a_rows == 0 || b_rows == 0 || !a.rows().is_multiple_of(a_rows) || !b.rows().is_multiple_of(b_rows) {
        return Err(Error::Shape(format!(
            "{op}: block sizes {a_rows}/{b_rows} do not tile {:?}/{:?}",
            a.shape(),
            b.shape()
        )));
    }
    let blocks = a.rows() / a_rows;
    if blocks != b.rows() / b_rows {
        return Err(Error::Shape(format!(
            "{op}: block counts differ for {:?}/{:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(blocks)
}
