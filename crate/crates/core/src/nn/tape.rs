//! Reverse-mode automatic differentiation over dense 2D tensors.
//!
//! A `Tape` is rebuilt every training step (define-by-run). Forward values are
//! computed eagerly as nodes are pushed; `backward` walks the recorded ops in
//! reverse and accumulates gradients for every node that requires them.
//! Matrix products hit GEMM; everything else is a single pass over the data.

use std::rc::Rc;

use super::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub usize);

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum BinKind {
    Add,
    Sub,
    Mul,
    Div,
}

/// Shape relationship of the right operand in a binary op.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Bcast {
    Same,
    /// rhs is 1x1.
    Scalar,
    /// rhs is 1xC, broadcast down rows.
    Row,
    /// rhs is Nx1, broadcast across columns.
    Col,
}

#[derive(Clone)]
enum UnaryKind<S> {
    Neg,
    Scale(S),
    AddConst(S),
    LeakyRelu(S),
    Sigmoid,
    Exp,
    Ln,
    /// sqrt(x + eps)
    SqrtEps(S),
    Square,
    Abs,
}

enum Op<S> {
    Leaf,
    /// act(x . w + b); `slope` enables LeakyReLU on the output.
    Linear {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        slope: Option<S>,
    },
    Matmul {
        a: NodeId,
        b: NodeId,
    },
    Bin {
        a: NodeId,
        b: NodeId,
        kind: BinKind,
        bcast: Bcast,
    },
    Unary {
        x: NodeId,
        kind: UnaryKind<S>,
    },
    ConcatCols {
        a: NodeId,
        b: NodeId,
    },
    ConcatRows {
        a: NodeId,
        b: NodeId,
    },
    SliceCols {
        x: NodeId,
        start: usize,
    },
    SliceRows {
        x: NodeId,
        start: usize,
    },
    GatherRows {
        x: NodeId,
        idx: Rc<Vec<u32>>,
    },
    SegmentSum {
        x: NodeId,
        seg: Rc<Vec<u32>>,
    },
    SumCols {
        x: NodeId,
    },
    /// Column-wise max or min: NxC -> 1xC; subgradient routes to the first
    /// extremal row.
    ColExtreme {
        x: NodeId,
        is_max: bool,
    },
    /// Max over all elements -> 1x1; subgradient to the first argmax.
    ReduceMax {
        x: NodeId,
    },
    SumAll {
        x: NodeId,
    },
    MeanAll {
        x: NodeId,
    },
    /// Elementwise product with a detached constant mask.
    MulMask {
        x: NodeId,
        mask: Rc<Tensor<S>>,
    },
}

struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    needs_grad: bool,
}

pub struct Tape<S: Scalar> {
    nodes: Vec<Node<S>>,
}

pub struct Grads<S> {
    g: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Grads<S> {
    pub fn get(&self, id: NodeId) -> Option<&Tensor<S>> {
        self.g[id.0].as_ref()
    }
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Tape<S> {
        Tape { nodes: Vec::new() }
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    // Temporary debugging helper.
    pub fn op_name(&self, id: NodeId) -> String {
        match &self.nodes[id.0].op {
            Op::Leaf => "leaf".into(),
            Op::Linear { slope, .. } => format!("linear(act={})", slope.is_some()),
            Op::Matmul { .. } => "matmul".into(),
            Op::Bin { kind, .. } => match kind {
                BinKind::Add => "add".into(),
                BinKind::Sub => "sub".into(),
                BinKind::Mul => "mul".into(),
                BinKind::Div => "div".into(),
            },
            Op::Unary { kind, .. } => match kind {
                UnaryKind::Neg => "neg".into(),
                UnaryKind::Scale(_) => "scale".into(),
                UnaryKind::AddConst(_) => "add_const".into(),
                UnaryKind::LeakyRelu(_) => "leaky_relu".into(),
                UnaryKind::Sigmoid => "sigmoid".into(),
                UnaryKind::Exp => "exp".into(),
                UnaryKind::Ln => "ln".into(),
                UnaryKind::SqrtEps(_) => "sqrt_eps".into(),
                UnaryKind::Square => "square".into(),
                UnaryKind::Abs => "abs".into(),
            },
            Op::ConcatCols { .. } => "concat".into(),
            Op::ConcatRows { .. } => "concat_rows".into(),
            Op::SliceCols { .. } => "slice".into(),
            Op::SliceRows { .. } => "slice_rows".into(),
            Op::GatherRows { .. } => "gather".into(),
            Op::SegmentSum { .. } => "segment_sum".into(),
            Op::SumCols { .. } => "sum_cols".into(),
            Op::ColExtreme { is_max, .. } => if *is_max { "col_max".into() } else { "col_min".into() },
            Op::ReduceMax { .. } => "reduce_max".into(),
            Op::SumAll { .. } => "sum_all".into(),
            Op::MeanAll { .. } => "mean_all".into(),
            Op::MulMask { .. } => "mul_mask".into(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn ng(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Constant input.
    pub fn constant(&mut self, value: Tensor<S>) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// Trainable input; `backward` will produce a gradient for it.
    pub fn parameter(&mut self, value: Tensor<S>) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    pub fn scalar_const(&mut self, v: S) -> NodeId {
        self.constant(Tensor::from_vec(1, 1, vec![v]))
    }

    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId, slope: Option<S>) -> NodeId {
        let (xv, wv, bv) = (
            &self.nodes[x.0].value,
            &self.nodes[w.0].value,
            &self.nodes[b.0].value,
        );
        assert_eq!(xv.cols, wv.rows);
        assert_eq!(bv.rows, 1);
        assert_eq!(bv.cols, wv.cols);
        let mut out = Tensor::zeros(xv.rows, wv.cols);
        for r in 0..out.rows {
            out.data[r * out.cols..(r + 1) * out.cols].copy_from_slice(&bv.data);
        }
        Tensor::matmul_into(xv, false, wv, false, S::ONE, &mut out);
        if let Some(s) = slope {
            for v in &mut out.data {
                if *v < S::ZERO {
                    *v = *v * s;
                }
            }
        }
        let needs = self.ng(x) || self.ng(w) || self.ng(b);
        self.push(out, Op::Linear { x, w, b, slope }, needs)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let mut out = Tensor::zeros(av.rows, bv.cols);
        Tensor::matmul_into(av, false, bv, false, S::ZERO, &mut out);
        let needs = self.ng(a) || self.ng(b);
        self.push(out, Op::Matmul { a, b }, needs)
    }

    fn bin(&mut self, a: NodeId, b: NodeId, kind: BinKind) -> NodeId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let bcast = if bv.rows == av.rows && bv.cols == av.cols {
            Bcast::Same
        } else if bv.rows == 1 && bv.cols == 1 {
            Bcast::Scalar
        } else if bv.rows == 1 && bv.cols == av.cols {
            Bcast::Row
        } else if bv.cols == 1 && bv.rows == av.rows {
            Bcast::Col
        } else {
            panic!(
                "incompatible shapes {}x{} vs {}x{}",
                av.rows, av.cols, bv.rows, bv.cols
            );
        };
        let mut out = Tensor::zeros(av.rows, av.cols);
        let cols = av.cols;
        for r in 0..av.rows {
            for c in 0..cols {
                let x = av.data[r * cols + c];
                let y = match bcast {
                    Bcast::Same => bv.data[r * cols + c],
                    Bcast::Scalar => bv.data[0],
                    Bcast::Row => bv.data[c],
                    Bcast::Col => bv.data[r],
                };
                out.data[r * cols + c] = match kind {
                    BinKind::Add => x + y,
                    BinKind::Sub => x - y,
                    BinKind::Mul => x * y,
                    BinKind::Div => x / y,
                };
            }
        }
        let needs = self.ng(a) || self.ng(b);
        self.push(out, Op::Bin { a, b, kind, bcast }, needs)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.bin(a, b, BinKind::Add)
    }
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.bin(a, b, BinKind::Sub)
    }
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.bin(a, b, BinKind::Mul)
    }
    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.bin(a, b, BinKind::Div)
    }

    fn unary(&mut self, x: NodeId, kind: UnaryKind<S>) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let data: Vec<S> = match &kind {
            UnaryKind::Neg => xv.data.iter().map(|&v| -v).collect(),
            UnaryKind::Scale(c) => xv.data.iter().map(|&v| v * *c).collect(),
            UnaryKind::AddConst(c) => xv.data.iter().map(|&v| v + *c).collect(),
            UnaryKind::LeakyRelu(s) => xv
                .data
                .iter()
                .map(|&v| if v < S::ZERO { v * *s } else { v })
                .collect(),
            UnaryKind::Sigmoid => xv.data.iter().map(|&v| sigmoid(v)).collect(),
            UnaryKind::Exp => xv.data.iter().map(|&v| v.exp()).collect(),
            UnaryKind::Ln => xv.data.iter().map(|&v| v.ln()).collect(),
            UnaryKind::SqrtEps(e) => xv.data.iter().map(|&v| (v + *e).sqrt()).collect(),
            UnaryKind::Square => xv.data.iter().map(|&v| v * v).collect(),
            UnaryKind::Abs => xv.data.iter().map(|&v| v.abs()).collect(),
        };
        let t = Tensor::from_vec(xv.rows, xv.cols, data);
        let needs = self.ng(x);
        self.push(t, Op::Unary { x, kind }, needs)
    }

    pub fn neg(&mut self, x: NodeId) -> NodeId {
        self.unary(x, UnaryKind::Neg)
    }
    pub fn scale(&mut self, x: NodeId, c: S) -> NodeId {
        self.unary(x, UnaryKind::Scale(c))
    }
    pub fn add_const(&mut self, x: NodeId, c: S) -> NodeId {
        self.unary(x, UnaryKind::AddConst(c))
    }
    pub fn leaky_relu(&mut self, x: NodeId, slope: S) -> NodeId {
        self.unary(x, UnaryKind::LeakyRelu(slope))
    }
    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.unary(x, UnaryKind::LeakyRelu(S::ZERO))
    }
    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.unary(x, UnaryKind::Sigmoid)
    }
    pub fn exp(&mut self, x: NodeId) -> NodeId {
        self.unary(x, UnaryKind::Exp)
    }
    pub fn ln(&mut self, x: NodeId) -> NodeId {
        self.unary(x, UnaryKind::Ln)
    }
    pub fn sqrt_eps(&mut self, x: NodeId, eps: S) -> NodeId {
        self.unary(x, UnaryKind::SqrtEps(eps))
    }
    pub fn square(&mut self, x: NodeId) -> NodeId {
        self.unary(x, UnaryKind::Square)
    }
    pub fn abs(&mut self, x: NodeId) -> NodeId {
        self.unary(x, UnaryKind::Abs)
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.rows, bv.rows);
        let cols = av.cols + bv.cols;
        let mut out = Tensor::zeros(av.rows, cols);
        for r in 0..av.rows {
            out.data[r * cols..r * cols + av.cols]
                .copy_from_slice(&av.data[r * av.cols..(r + 1) * av.cols]);
            out.data[r * cols + av.cols..(r + 1) * cols]
                .copy_from_slice(&bv.data[r * bv.cols..(r + 1) * bv.cols]);
        }
        let needs = self.ng(a) || self.ng(b);
        self.push(out, Op::ConcatCols { a, b }, needs)
    }

    pub fn concat_rows(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.cols, bv.cols);
        let mut data = Vec::with_capacity(av.len() + bv.len());
        data.extend_from_slice(&av.data);
        data.extend_from_slice(&bv.data);
        let t = Tensor::from_vec(av.rows + bv.rows, av.cols, data);
        let needs = self.ng(a) || self.ng(b);
        self.push(t, Op::ConcatRows { a, b }, needs)
    }

    pub fn slice_rows(&mut self, x: NodeId, start: usize, end: usize) -> NodeId {
        let xv = &self.nodes[x.0].value;
        assert!(start < end && end <= xv.rows);
        let cols = xv.cols;
        let data = xv.data[start * cols..end * cols].to_vec();
        let t = Tensor::from_vec(end - start, cols, data);
        let needs = self.ng(x);
        self.push(t, Op::SliceRows { x, start }, needs)
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, end: usize) -> NodeId {
        let xv = &self.nodes[x.0].value;
        assert!(start < end && end <= xv.cols);
        let w = end - start;
        let mut out = Tensor::zeros(xv.rows, w);
        for r in 0..xv.rows {
            out.data[r * w..(r + 1) * w]
                .copy_from_slice(&xv.data[r * xv.cols + start..r * xv.cols + end]);
        }
        let needs = self.ng(x);
        self.push(out, Op::SliceCols { x, start }, needs)
    }

    pub fn gather_rows(&mut self, x: NodeId, idx: Rc<Vec<u32>>) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let cols = xv.cols;
        let mut out = Tensor::zeros(idx.len(), cols);
        for (r, &i) in idx.iter().enumerate() {
            out.data[r * cols..(r + 1) * cols]
                .copy_from_slice(&xv.data[i as usize * cols..(i as usize + 1) * cols]);
        }
        let needs = self.ng(x);
        self.push(out, Op::GatherRows { x, idx }, needs)
    }

    /// Sums rows of `x` into `n_out` segment rows: `out[seg[r]] += x[r]`.
    pub fn segment_sum(&mut self, x: NodeId, seg: Rc<Vec<u32>>, n_out: usize) -> NodeId {
        let xv = &self.nodes[x.0].value;
        assert_eq!(seg.len(), xv.rows);
        let cols = xv.cols;
        let mut out = Tensor::zeros(n_out, cols);
        for (r, &s) in seg.iter().enumerate() {
            for c in 0..cols {
                out.data[s as usize * cols + c] += xv.data[r * cols + c];
            }
        }
        let needs = self.ng(x);
        self.push(out, Op::SegmentSum { x, seg }, needs)
    }

    /// Row-wise sum: NxC -> Nx1.
    pub fn sum_cols(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let mut out = Tensor::zeros(xv.rows, 1);
        for r in 0..xv.rows {
            let mut acc = S::ZERO;
            for c in 0..xv.cols {
                acc += xv.data[r * xv.cols + c];
            }
            out.data[r] = acc;
        }
        let needs = self.ng(x);
        self.push(out, Op::SumCols { x }, needs)
    }

    fn col_extreme(&mut self, x: NodeId, is_max: bool) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let mut out = Tensor::zeros(1, xv.cols);
        for c in 0..xv.cols {
            let mut best = xv.data[c];
            for r in 1..xv.rows {
                let v = xv.data[r * xv.cols + c];
                if (is_max && v > best) || (!is_max && v < best) {
                    best = v;
                }
            }
            out.data[c] = best;
        }
        let needs = self.ng(x);
        self.push(out, Op::ColExtreme { x, is_max }, needs)
    }

    /// Column-wise max: NxC -> 1xC.
    pub fn col_max(&mut self, x: NodeId) -> NodeId {
        self.col_extreme(x, true)
    }

    /// Column-wise min: NxC -> 1xC.
    pub fn col_min(&mut self, x: NodeId) -> NodeId {
        self.col_extreme(x, false)
    }

    /// Max over all elements -> 1x1.
    pub fn reduce_max(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let mut best = xv.data[0];
        for &v in &xv.data[1..] {
            if v > best {
                best = v;
            }
        }
        let needs = self.ng(x);
        self.push(Tensor::from_vec(1, 1, vec![best]), Op::ReduceMax { x }, needs)
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let mut acc = S::ZERO;
        for &v in &xv.data {
            acc += v;
        }
        let needs = self.ng(x);
        self.push(Tensor::from_vec(1, 1, vec![acc]), Op::SumAll { x }, needs)
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let mut acc = S::ZERO;
        for &v in &xv.data {
            acc += v;
        }
        let n = S::from_f64(xv.len() as f64);
        let needs = self.ng(x);
        self.push(
            Tensor::from_vec(1, 1, vec![acc / n]),
            Op::MeanAll { x },
            needs,
        )
    }

    pub fn mul_mask(&mut self, x: NodeId, mask: Rc<Tensor<S>>) -> NodeId {
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.rows, mask.rows);
        assert_eq!(xv.cols, mask.cols);
        let data = xv
            .data
            .iter()
            .zip(&mask.data)
            .map(|(&a, &m)| a * m)
            .collect();
        let t = Tensor::from_vec(xv.rows, xv.cols, data);
        let needs = self.ng(x);
        self.push(t, Op::MulMask { x, mask }, needs)
    }

    /// Detached LeakyReLU derivative mask of a node's output (valid because
    /// the activation preserves sign).
    pub fn lrelu_mask_of(&self, id: NodeId, slope: S) -> Rc<Tensor<S>> {
        let v = &self.nodes[id.0].value;
        let data = v
            .data
            .iter()
            .map(|&x| if x < S::ZERO { slope } else { S::ONE })
            .collect();
        Rc::new(Tensor::from_vec(v.rows, v.cols, data))
    }

    /// Like [`Tape::lrelu_mask_of`] but restricted to a row range, vertically
    /// tiled `tiles` times (for stacked directional derivatives).
    pub fn lrelu_mask_rows(
        &self,
        id: NodeId,
        slope: S,
        start: usize,
        end: usize,
        tiles: usize,
    ) -> Rc<Tensor<S>> {
        let v = &self.nodes[id.0].value;
        let cols = v.cols;
        let one: Vec<S> = v.data[start * cols..end * cols]
            .iter()
            .map(|&x| if x < S::ZERO { slope } else { S::ONE })
            .collect();
        let mut data = Vec::with_capacity(one.len() * tiles);
        for _ in 0..tiles {
            data.extend_from_slice(&one);
        }
        Rc::new(Tensor::from_vec((end - start) * tiles, cols, data))
    }

    /// Squared L2 norm per row: NxC -> Nx1.
    pub fn row_sq_norm(&mut self, x: NodeId) -> NodeId {
        let sq = self.square(x);
        self.sum_cols(sq)
    }

    /// L2 norm per row with an epsilon inside the square root so the gradient
    /// stays finite at zero.
    pub fn row_norm(&mut self, x: NodeId, eps: S) -> NodeId {
        let sq = self.row_sq_norm(x);
        self.sqrt_eps(sq, eps)
    }

    /// Row-wise cosine similarity of two NxC nodes: Nx1. The norms carry a
    /// small epsilon inside the square root so zero rows keep finite (zero)
    /// gradients.
    pub fn cosine_rows(&mut self, a: NodeId, b: NodeId, eps: S) -> NodeId {
        let norm_eps = S::from_f64(1e-12);
        let prod = self.mul(a, b);
        let dot = self.sum_cols(prod);
        let na = self.row_norm(a, norm_eps);
        let nb = self.row_norm(b, norm_eps);
        let denom = self.mul(na, nb);
        let denom = self.add_const(denom, eps);
        self.div(dot, denom)
    }

    /// Reverse pass from a scalar node. Returns per-node gradients for every
    /// node with `needs_grad`.
    pub fn backward(&self, root: NodeId) -> Grads<S> {
        assert_eq!(self.nodes[root.0].value.len(), 1, "backward needs a scalar");
        let mut g: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        g[root.0] = Some(Tensor::from_vec(1, 1, vec![S::ONE]));

        for id in (0..=root.0).rev() {
            if !self.nodes[id].needs_grad {
                continue;
            }
            let Some(gout) = g[id].take() else { continue };
            self.backprop_node(id, &gout, &mut g);
            g[id] = Some(gout);
        }
        Grads { g }
    }

    fn ensure<'a>(
        g: &'a mut Vec<Option<Tensor<S>>>,
        id: NodeId,
        rows: usize,
        cols: usize,
    ) -> &'a mut Tensor<S> {
        if g[id.0].is_none() {
            g[id.0] = Some(Tensor::zeros(rows, cols));
        }
        g[id.0].as_mut().unwrap()
    }

    fn backprop_node(&self, id: usize, gout: &Tensor<S>, g: &mut Vec<Option<Tensor<S>>>) {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Linear { x, w, b, slope } => {
                let xv = &self.nodes[x.0].value;
                let wv = &self.nodes[w.0].value;
                // dZ: activation mask applied to incoming gradient.
                let dz = if let Some(s) = slope {
                    let yv = &self.nodes[id].value;
                    let data = gout
                        .data
                        .iter()
                        .zip(&yv.data)
                        .map(|(&gv, &y)| if y < S::ZERO { gv * *s } else { gv })
                        .collect();
                    Tensor::from_vec(gout.rows, gout.cols, data)
                } else {
                    gout.clone()
                };
                if self.ng(*x) {
                    let gx = Self::ensure(g, *x, xv.rows, xv.cols);
                    Tensor::matmul_into(&dz, false, wv, true, S::ONE, gx);
                }
                if self.ng(*w) {
                    let gw = Self::ensure(g, *w, wv.rows, wv.cols);
                    Tensor::matmul_into(xv, true, &dz, false, S::ONE, gw);
                }
                if self.ng(*b) {
                    let gb = Self::ensure(g, *b, 1, dz.cols);
                    for r in 0..dz.rows {
                        for c in 0..dz.cols {
                            gb.data[c] += dz.data[r * dz.cols + c];
                        }
                    }
                }
            }
            Op::Matmul { a, b } => {
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                if self.ng(*a) {
                    let ga = Self::ensure(g, *a, av.rows, av.cols);
                    Tensor::matmul_into(gout, false, bv, true, S::ONE, ga);
                }
                if self.ng(*b) {
                    let gb = Self::ensure(g, *b, bv.rows, bv.cols);
                    Tensor::matmul_into(av, true, gout, false, S::ONE, gb);
                }
            }
            Op::Bin { a, b, kind, bcast } => {
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                let cols = av.cols;
                let bval = |r: usize, c: usize| match bcast {
                    Bcast::Same => bv.data[r * cols + c],
                    Bcast::Scalar => bv.data[0],
                    Bcast::Row => bv.data[c],
                    Bcast::Col => bv.data[r],
                };
                if self.ng(*a) {
                    let ga = Self::ensure(g, *a, av.rows, av.cols);
                    for r in 0..av.rows {
                        for c in 0..cols {
                            let gv = gout.data[r * cols + c];
                            ga.data[r * cols + c] += match kind {
                                BinKind::Add | BinKind::Sub => gv,
                                BinKind::Mul => gv * bval(r, c),
                                BinKind::Div => gv / bval(r, c),
                            };
                        }
                    }
                }
                if self.ng(*b) {
                    let gb = Self::ensure(g, *b, bv.rows, bv.cols);
                    for r in 0..av.rows {
                        for c in 0..cols {
                            let gv = gout.data[r * cols + c];
                            let contrib = match kind {
                                BinKind::Add => gv,
                                BinKind::Sub => -gv,
                                BinKind::Mul => gv * av.data[r * cols + c],
                                BinKind::Div => {
                                    let bb = bval(r, c);
                                    -gv * av.data[r * cols + c] / (bb * bb)
                                }
                            };
                            let slot = match bcast {
                                Bcast::Same => r * cols + c,
                                Bcast::Scalar => 0,
                                Bcast::Row => c,
                                Bcast::Col => r,
                            };
                            gb.data[slot] += contrib;
                        }
                    }
                }
            }
            Op::Unary { x, kind } => {
                if !self.ng(*x) {
                    return;
                }
                let xv = &self.nodes[x.0].value;
                let yv = &self.nodes[id].value;
                let gx = Self::ensure(g, *x, xv.rows, xv.cols);
                for i in 0..xv.len() {
                    let gv = gout.data[i];
                    gx.data[i] += match kind {
                        UnaryKind::Neg => -gv,
                        UnaryKind::Scale(c) => gv * *c,
                        UnaryKind::AddConst(_) => gv,
                        UnaryKind::LeakyRelu(s) => {
                            if xv.data[i] < S::ZERO {
                                gv * *s
                            } else {
                                gv
                            }
                        }
                        UnaryKind::Sigmoid => {
                            let y = yv.data[i];
                            gv * y * (S::ONE - y)
                        }
                        UnaryKind::Exp => gv * yv.data[i],
                        UnaryKind::Ln => gv / xv.data[i],
                        UnaryKind::SqrtEps(_) => {
                            let y = yv.data[i];
                            gv / (y + y)
                        }
                        UnaryKind::Square => {
                            let two = S::ONE + S::ONE;
                            gv * two * xv.data[i]
                        }
                        UnaryKind::Abs => {
                            let v = xv.data[i];
                            if v > S::ZERO {
                                gv
                            } else if v < S::ZERO {
                                -gv
                            } else {
                                S::ZERO
                            }
                        }
                    };
                }
            }
            Op::ConcatCols { a, b } => {
                let (ac, bc) = (self.nodes[a.0].value.cols, self.nodes[b.0].value.cols);
                let rows = gout.rows;
                let cols = ac + bc;
                if self.ng(*a) {
                    let ga = Self::ensure(g, *a, rows, ac);
                    for r in 0..rows {
                        for c in 0..ac {
                            ga.data[r * ac + c] += gout.data[r * cols + c];
                        }
                    }
                }
                if self.ng(*b) {
                    let gb = Self::ensure(g, *b, rows, bc);
                    for r in 0..rows {
                        for c in 0..bc {
                            gb.data[r * bc + c] += gout.data[r * cols + ac + c];
                        }
                    }
                }
            }
            Op::ConcatRows { a, b } => {
                let ar = self.nodes[a.0].value.rows;
                let cols = gout.cols;
                if self.ng(*a) {
                    let av = &self.nodes[a.0].value;
                    let ga = Self::ensure(g, *a, av.rows, av.cols);
                    for i in 0..ar * cols {
                        ga.data[i] += gout.data[i];
                    }
                }
                if self.ng(*b) {
                    let bv = &self.nodes[b.0].value;
                    let gb = Self::ensure(g, *b, bv.rows, bv.cols);
                    let off = ar * cols;
                    for i in 0..bv.len() {
                        gb.data[i] += gout.data[off + i];
                    }
                }
            }
            Op::SliceCols { x, start, .. } => {
                if !self.ng(*x) {
                    return;
                }
                let xv = &self.nodes[x.0].value;
                let w = gout.cols;
                let gx = Self::ensure(g, *x, xv.rows, xv.cols);
                for r in 0..gout.rows {
                    for c in 0..w {
                        gx.data[r * xv.cols + start + c] += gout.data[r * w + c];
                    }
                }
            }
            Op::SliceRows { x, start, .. } => {
                if !self.ng(*x) {
                    return;
                }
                let xv = &self.nodes[x.0].value;
                let cols = xv.cols;
                let gx = Self::ensure(g, *x, xv.rows, xv.cols);
                let off = start * cols;
                for i in 0..gout.len() {
                    gx.data[off + i] += gout.data[i];
                }
            }
            Op::GatherRows { x, idx } => {
                if !self.ng(*x) {
                    return;
                }
                let xv = &self.nodes[x.0].value;
                let cols = xv.cols;
                let gx = Self::ensure(g, *x, xv.rows, xv.cols);
                for (r, &i) in idx.iter().enumerate() {
                    for c in 0..cols {
                        gx.data[i as usize * cols + c] += gout.data[r * cols + c];
                    }
                }
            }
            Op::SegmentSum { x, seg } => {
                if !self.ng(*x) {
                    return;
                }
                let xv = &self.nodes[x.0].value;
                let cols = xv.cols;
                let gx = Self::ensure(g, *x, xv.rows, xv.cols);
                for (r, &s) in seg.iter().enumerate() {
                    for c in 0..cols {
                        gx.data[r * cols + c] += gout.data[s as usize * cols + c];
                    }
                }
            }
            Op::SumCols { x } => {
                if !self.ng(*x) {
                    return;
                }
                let xv = &self.nodes[x.0].value;
                let gx = Self::ensure(g, *x, xv.rows, xv.cols);
                for r in 0..xv.rows {
                    let gv = gout.data[r];
                    for c in 0..xv.cols {
                        gx.data[r * xv.cols + c] += gv;
                    }
                }
            }
            Op::ColExtreme { x, is_max } => {
                if !self.ng(*x) {
                    return;
                }
                let xv = &self.nodes[x.0].value;
                let gx = Self::ensure(g, *x, xv.rows, xv.cols);
                for c in 0..xv.cols {
                    let mut best_r = 0usize;
                    let mut best = xv.data[c];
                    for r in 1..xv.rows {
                        let v = xv.data[r * xv.cols + c];
                        if (*is_max && v > best) || (!*is_max && v < best) {
                            best = v;
                            best_r = r;
                        }
                    }
                    gx.data[best_r * xv.cols + c] += gout.data[c];
                }
            }
            Op::ReduceMax { x } => {
                if !self.ng(*x) {
                    return;
                }
                let xv = &self.nodes[x.0].value;
                let mut best_i = 0usize;
                for (i, &v) in xv.data.iter().enumerate() {
                    if v > xv.data[best_i] {
                        best_i = i;
                    }
                }
                let gx = Self::ensure(g, *x, xv.rows, xv.cols);
                gx.data[best_i] += gout.data[0];
            }
            Op::SumAll { x } => {
                if !self.ng(*x) {
                    return;
                }
                let xv = &self.nodes[x.0].value;
                let gv = gout.data[0];
                let gx = Self::ensure(g, *x, xv.rows, xv.cols);
                for v in &mut gx.data {
                    *v += gv;
                }
            }
            Op::MeanAll { x } => {
                if !self.ng(*x) {
                    return;
                }
                let xv = &self.nodes[x.0].value;
                let gv = gout.data[0] / S::from_f64(xv.len() as f64);
                let gx = Self::ensure(g, *x, xv.rows, xv.cols);
                for v in &mut gx.data {
                    *v += gv;
                }
            }
            Op::MulMask { x, mask } => {
                if !self.ng(*x) {
                    return;
                }
                let xv = &self.nodes[x.0].value;
                let gx = Self::ensure(g, *x, xv.rows, xv.cols);
                for i in 0..xv.len() {
                    gx.data[i] += gout.data[i] * mask.data[i];
                }
            }
        }
    }
}

fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::ZERO {
        S::ONE / (S::ONE + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::ONE + e)
    }
}
