//! Expression nodes and their shape-checked constructors.
//!
//! An [`Expr`] is an immutable, reference-counted node of an acyclic
//! computation graph. Nodes are numbered from a global counter at
//! construction, and since every input exists before its consumer, sorting
//! by id yields a topological order.

use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::array::{numel, Tensor};
use crate::error::{Result, TensorError};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Leaf(String),
    Constant(Tensor),
    Add,
    Sub,
    Mul,
    /// `scale * x + shift`.
    Affine {
        scale: f64,
        shift: f64,
    },
    Square,
    /// `a / b`, or 0 wherever `b == 0`.
    SafeDiv,
    Tanh,
    Sigmoid,
    Log,
    LeakyRelu {
        slope: f64,
    },
    /// Derivative of leaky-ReLU: 1 for `x >= 0`, `slope` otherwise.
    LeakyReluSlope {
        slope: f64,
    },
    Clamp {
        lo: f64,
        hi: f64,
    },
    /// 1 inside `[lo, hi]`, 0 outside.
    ClampMask {
        lo: f64,
        hi: f64,
    },
    MatMul {
        ta: bool,
        tb: bool,
    },
    Reshape,
    Broadcast,
    /// Inputs `(x, y)`: `x + y` with `y` broadcast to the shape of `x`.
    AddBroadcast,
    SumTo,
    TransposeLast2,
    ConcatLast,
    SliceLast {
        start: usize,
    },
    PadLast {
        start: usize,
    },
    ConvCausal {
        dilation: usize,
    },
    ConvTranspose {
        dilation: usize,
    },
    ConvWeightGrad {
        dilation: usize,
    },
    SegmentMax {
        bins: usize,
    },
    /// Inputs `(g, x)`: routes `g` to the per-segment argmax positions of `x`.
    SegmentScatter {
        bins: usize,
    },
    /// Inputs `(v, x)`: reads `v` at the per-segment argmax positions of `x`.
    SegmentGather {
        bins: usize,
    },
    L2NormRows,
}

impl Op {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            Op::Leaf(_) => "leaf",
            Op::Constant(_) => "constant",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Affine { .. } => "affine",
            Op::Square => "square",
            Op::SafeDiv => "safe_div",
            Op::Tanh => "tanh",
            Op::Sigmoid => "sigmoid",
            Op::Log => "log",
            Op::LeakyRelu { .. } => "leaky_relu",
            Op::LeakyReluSlope { .. } => "leaky_relu_slope",
            Op::Clamp { .. } => "clamp",
            Op::ClampMask { .. } => "clamp_mask",
            Op::MatMul { .. } => "matmul",
            Op::Reshape => "reshape",
            Op::Broadcast => "broadcast",
            Op::AddBroadcast => "add_broadcast",
            Op::SumTo => "sum_to",
            Op::TransposeLast2 => "transpose",
            Op::ConcatLast => "concat",
            Op::SliceLast { .. } => "slice",
            Op::PadLast { .. } => "pad",
            Op::ConvCausal { .. } => "conv_causal",
            Op::ConvTranspose { .. } => "conv_transpose",
            Op::ConvWeightGrad { .. } => "conv_weight_grad",
            Op::SegmentMax { .. } => "segment_max",
            Op::SegmentScatter { .. } => "segment_scatter",
            Op::SegmentGather { .. } => "segment_gather",
            Op::L2NormRows => "l2_norm_rows",
        }
    }
}

pub(crate) struct Node {
    pub(crate) id: u64,
    pub(crate) op: Op,
    pub(crate) inputs: Vec<Expr>,
    pub(crate) shape: Vec<usize>,
}

/// A node in a differentiable computation graph.
///
/// Cloning is cheap and shares the node. Values are not stored on the node;
/// they are produced by [`crate::evaluate`] from leaf bindings.
#[derive(Clone)]
pub struct Expr(pub(crate) Rc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.op {
            Op::Leaf(name) => write!(f, "leaf#{}({name}, {:?})", self.0.id, self.0.shape),
            op => write!(f, "{}#{}{:?}", op.name(), self.0.id, self.0.shape),
        }
    }
}

fn same_shape(op: &'static str, a: &Expr, b: &Expr) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(TensorError::shape(
            op,
            format!("operands have shapes {:?} and {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

fn rank_is(op: &'static str, e: &Expr, rank: usize, what: &str) -> Result<()> {
    if e.shape().len() != rank {
        return Err(TensorError::shape(
            op,
            format!("{what} must have rank {rank}, got shape {:?}", e.shape()),
        ));
    }
    Ok(())
}

pub(crate) fn broadcastable(from: &[usize], to: &[usize]) -> bool {
    if from.len() > to.len() {
        return false;
    }
    let pad = to.len() - from.len();
    from.iter().enumerate().all(|(i, &d)| d == 1 || d == to[pad + i])
}

impl Expr {
    pub(crate) fn raw(op: Op, inputs: Vec<Expr>, shape: Vec<usize>) -> Expr {
        let id = NEXT_ID.fetch_add(1, Ordering::Relaxed);
        Expr(Rc::new(Node { id, op, inputs, shape }))
    }

    /// A named input whose value is supplied at evaluation time.
    pub fn leaf(name: impl Into<String>, shape: &[usize]) -> Expr {
        Expr::raw(Op::Leaf(name.into()), Vec::new(), shape.to_vec())
    }

    pub fn constant(value: Tensor) -> Expr {
        let shape = value.shape().to_vec();
        Expr::raw(Op::Constant(value), Vec::new(), shape)
    }

    pub fn scalar(value: f64) -> Expr {
        Expr::constant(Tensor::scalar(value))
    }

    pub(crate) fn zeros(shape: &[usize]) -> Expr {
        Expr::constant(Tensor::zeros(shape))
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn numel(&self) -> usize {
        numel(&self.0.shape)
    }

    pub fn op_name(&self) -> &'static str {
        self.0.op.name()
    }

    /// Leaf name, if this node is a leaf.
    pub fn leaf_name(&self) -> Option<&str> {
        match &self.0.op {
            Op::Leaf(name) => Some(name),
            _ => None,
        }
    }

    pub fn inputs(&self) -> &[Expr] {
        &self.0.inputs
    }

    pub(crate) fn op(&self) -> &Op {
        &self.0.op
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }

    // ---- elementwise -------------------------------------------------------

    pub fn add(&self, other: &Expr) -> Result<Expr> {
        same_shape("add", self, other)?;
        Ok(Expr::raw(
            Op::Add,
            vec![self.clone(), other.clone()],
            self.shape().to_vec(),
        ))
    }

    pub fn sub(&self, other: &Expr) -> Result<Expr> {
        same_shape("sub", self, other)?;
        Ok(Expr::raw(
            Op::Sub,
            vec![self.clone(), other.clone()],
            self.shape().to_vec(),
        ))
    }

    pub fn mul(&self, other: &Expr) -> Result<Expr> {
        same_shape("mul", self, other)?;
        Ok(Expr::raw(
            Op::Mul,
            vec![self.clone(), other.clone()],
            self.shape().to_vec(),
        ))
    }

    /// Elementwise `a / b`, defined as 0 where `b == 0`.
    pub fn safe_div(&self, other: &Expr) -> Result<Expr> {
        same_shape("safe_div", self, other)?;
        Ok(Expr::raw(
            Op::SafeDiv,
            vec![self.clone(), other.clone()],
            self.shape().to_vec(),
        ))
    }

    pub fn affine(&self, scale: f64, shift: f64) -> Expr {
        Expr::raw(Op::Affine { scale, shift }, vec![self.clone()], self.shape().to_vec())
    }

    pub fn scale(&self, factor: f64) -> Expr {
        self.affine(factor, 0.0)
    }

    pub fn neg(&self) -> Expr {
        self.affine(-1.0, 0.0)
    }

    pub fn add_scalar(&self, shift: f64) -> Expr {
        self.affine(1.0, shift)
    }

    pub fn square(&self) -> Expr {
        self.unary(Op::Square)
    }

    pub fn tanh(&self) -> Expr {
        self.unary(Op::Tanh)
    }

    pub fn sigmoid(&self) -> Expr {
        self.unary(Op::Sigmoid)
    }

    pub fn log(&self) -> Expr {
        self.unary(Op::Log)
    }

    /// `max(x, slope * x)` for `0 <= slope <= 1`.
    pub fn leaky_relu(&self, slope: f64) -> Expr {
        self.unary(Op::LeakyRelu { slope })
    }

    pub(crate) fn leaky_relu_slope(&self, slope: f64) -> Expr {
        self.unary(Op::LeakyReluSlope { slope })
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Expr {
        self.unary(Op::Clamp { lo, hi })
    }

    pub(crate) fn clamp_mask(&self, lo: f64, hi: f64) -> Expr {
        self.unary(Op::ClampMask { lo, hi })
    }

    fn unary(&self, op: Op) -> Expr {
        Expr::raw(op, vec![self.clone()], self.shape().to_vec())
    }

    // ---- linear algebra ------------------------------------------------------

    pub fn matmul(&self, other: &Expr) -> Result<Expr> {
        self.matmul_t(other, false, false)
    }

    /// `op(self) · op(other)` where `op` transposes when the flag is set.
    pub fn matmul_t(&self, other: &Expr, ta: bool, tb: bool) -> Result<Expr> {
        rank_is("matmul", self, 2, "left operand")?;
        rank_is("matmul", other, 2, "right operand")?;
        let (a, b) = (self.shape(), other.shape());
        let (m, ka) = if ta { (a[1], a[0]) } else { (a[0], a[1]) };
        let (kb, n) = if tb { (b[1], b[0]) } else { (b[0], b[1]) };
        if ka != kb {
            return Err(TensorError::shape(
                "matmul",
                format!("inner dimensions differ: {a:?} (t={ta}) x {b:?} (t={tb})"),
            ));
        }
        Ok(Expr::raw(
            Op::MatMul { ta, tb },
            vec![self.clone(), other.clone()],
            vec![m, n],
        ))
    }

    // ---- shape manipulation ------------------------------------------------

    pub fn reshape(&self, shape: &[usize]) -> Result<Expr> {
        if numel(shape) != self.numel() {
            return Err(TensorError::shape(
                "reshape",
                format!("cannot reshape {:?} into {shape:?}", self.shape()),
            ));
        }
        Ok(Expr::raw(Op::Reshape, vec![self.clone()], shape.to_vec()))
    }

    /// Numpy-style broadcast: dimensions are aligned on the right and each
    /// source dimension must be 1 or equal to the target.
    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Expr> {
        if !broadcastable(self.shape(), shape) {
            return Err(TensorError::shape(
                "broadcast",
                format!("cannot broadcast {:?} to {shape:?}", self.shape()),
            ));
        }
        Ok(Expr::raw(Op::Broadcast, vec![self.clone()], shape.to_vec()))
    }

    /// `self + other` with `other` broadcast to the shape of `self`, without
    /// materialising the broadcast.
    pub fn add_broadcast(&self, other: &Expr) -> Result<Expr> {
        if !broadcastable(other.shape(), self.shape()) {
            return Err(TensorError::shape(
                "add_broadcast",
                format!("cannot broadcast {:?} to {:?}", other.shape(), self.shape()),
            ));
        }
        Ok(Expr::raw(
            Op::AddBroadcast,
            vec![self.clone(), other.clone()],
            self.shape().to_vec(),
        ))
    }

    /// Sums over the axes that [`Expr::broadcast_to`] would expand, so that
    /// the result has `shape`.
    pub fn sum_to(&self, shape: &[usize]) -> Result<Expr> {
        if !broadcastable(shape, self.shape()) {
            return Err(TensorError::shape(
                "sum_to",
                format!("cannot reduce {:?} to {shape:?}", self.shape()),
            ));
        }
        Ok(Expr::raw(Op::SumTo, vec![self.clone()], shape.to_vec()))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&self) -> Expr {
        Expr::raw(Op::SumTo, vec![self.clone()], Vec::new())
    }

    /// Mean of all entries, as a scalar.
    pub fn mean(&self) -> Expr {
        let n = self.numel().max(1) as f64;
        self.sum().scale(1.0 / n)
    }

    pub fn transpose_last2(&self) -> Result<Expr> {
        let s = self.shape();
        if s.len() < 2 {
            return Err(TensorError::shape("transpose", format!("rank < 2: {s:?}")));
        }
        let mut out = s.to_vec();
        out.swap(s.len() - 2, s.len() - 1);
        Ok(Expr::raw(Op::TransposeLast2, vec![self.clone()], out))
    }

    /// Concatenates along the last axis; all leading axes must agree.
    pub fn concat_last(parts: &[Expr]) -> Result<Expr> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::shape("concat", "no operands"))?;
        let lead = &first.shape()[..first.shape().len().saturating_sub(1)];
        if first.shape().is_empty() {
            return Err(TensorError::shape("concat", "operands must have rank >= 1"));
        }
        let mut total = 0;
        for p in parts {
            let s = p.shape();
            if s.is_empty() || &s[..s.len() - 1] != lead {
                return Err(TensorError::shape(
                    "concat",
                    format!("shape {s:?} incompatible with leading axes {lead:?}"),
                ));
            }
            total += s[s.len() - 1];
        }
        let mut shape = lead.to_vec();
        shape.push(total);
        Ok(Expr::raw(Op::ConcatLast, parts.to_vec(), shape))
    }

    pub fn slice_last(&self, start: usize, len: usize) -> Result<Expr> {
        let s = self.shape();
        match s.last() {
            Some(&n) if start + len <= n => {
                let mut out = s.to_vec();
                *out.last_mut().unwrap() = len;
                Ok(Expr::raw(Op::SliceLast { start }, vec![self.clone()], out))
            }
            _ => Err(TensorError::shape(
                "slice",
                format!("range {start}..{} out of bounds for {s:?}", start + len),
            )),
        }
    }

    /// Zero-embeds the last axis into a wider axis of length `total`.
    pub fn pad_last(&self, start: usize, total: usize) -> Result<Expr> {
        let s = self.shape();
        match s.last() {
            Some(&n) if start + n <= total => {
                let mut out = s.to_vec();
                *out.last_mut().unwrap() = total;
                Ok(Expr::raw(Op::PadLast { start }, vec![self.clone()], out))
            }
            _ => Err(TensorError::shape(
                "pad",
                format!("cannot place {s:?} at {start} within {total}"),
            )),
        }
    }

    // ---- temporal convolution ----------------------------------------------

    /// Causal dilated convolution.
    ///
    /// `self` is `(batch, time, in)`, `weight` is `(kernel, in, out)`, and the
    /// output is `(batch, time, out)` with
    /// `y[b, t] = sum_j x[b, t - j * dilation] · w[j]`, reading zeros before
    /// the start of the sequence. Tap `j = 0` is the current step.
    pub fn conv_causal(&self, weight: &Expr, dilation: usize) -> Result<Expr> {
        let (x, w) = (self.shape(), weight.shape());
        rank_is("conv_causal", self, 3, "input")?;
        rank_is("conv_causal", weight, 3, "weight")?;
        if dilation == 0 || w[0] == 0 {
            return Err(TensorError::shape("conv_causal", "kernel and dilation must be >= 1"));
        }
        if x[2] != w[1] {
            return Err(TensorError::shape(
                "conv_causal",
                format!("input has {} channels, weight expects {}", x[2], w[1]),
            ));
        }
        Ok(Expr::raw(
            Op::ConvCausal { dilation },
            vec![self.clone(), weight.clone()],
            vec![x[0], x[1], w[2]],
        ))
    }

    /// Adjoint of [`Expr::conv_causal`] with respect to its input.
    pub fn conv_transpose(&self, weight: &Expr, dilation: usize) -> Result<Expr> {
        let (g, w) = (self.shape(), weight.shape());
        rank_is("conv_transpose", self, 3, "input")?;
        rank_is("conv_transpose", weight, 3, "weight")?;
        if g[2] != w[2] {
            return Err(TensorError::shape(
                "conv_transpose",
                format!("input has {} channels, weight produces {}", g[2], w[2]),
            ));
        }
        Ok(Expr::raw(
            Op::ConvTranspose { dilation },
            vec![self.clone(), weight.clone()],
            vec![g[0], g[1], w[1]],
        ))
    }

    /// Adjoint of [`Expr::conv_causal`] with respect to its weight:
    /// `w[j, c, o] = sum_{b,t} x[b, t - j * dilation, c] * g[b, t, o]`.
    pub fn conv_weight_grad(&self, grad: &Expr, dilation: usize, kernel: usize) -> Result<Expr> {
        let (x, g) = (self.shape(), grad.shape());
        rank_is("conv_weight_grad", self, 3, "input")?;
        rank_is("conv_weight_grad", grad, 3, "gradient")?;
        if x[0] != g[0] || x[1] != g[1] {
            return Err(TensorError::shape(
                "conv_weight_grad",
                format!("input {x:?} and gradient {g:?} disagree on batch/time"),
            ));
        }
        Ok(Expr::raw(
            Op::ConvWeightGrad { dilation },
            vec![self.clone(), grad.clone()],
            vec![kernel, x[2], g[2]],
        ))
    }

    // ---- pooling and norms -------------------------------------------------

    /// Adaptive max pooling of each row of a `(batch, len)` array into `bins`
    /// values. Segment `i` spans `floor(i*len/bins) .. ceil((i+1)*len/bins)`.
    pub fn segment_max(&self, bins: usize) -> Result<Expr> {
        let (b, _) = segment_check("segment_max", self, bins)?;
        Ok(Expr::raw(Op::SegmentMax { bins }, vec![self.clone()], vec![b, bins]))
    }

    pub(crate) fn segment_scatter(&self, argsrc: &Expr, bins: usize) -> Expr {
        Expr::raw(
            Op::SegmentScatter { bins },
            vec![self.clone(), argsrc.clone()],
            argsrc.shape().to_vec(),
        )
    }

    pub(crate) fn segment_gather(&self, argsrc: &Expr, bins: usize) -> Expr {
        Expr::raw(
            Op::SegmentGather { bins },
            vec![self.clone(), argsrc.clone()],
            vec![argsrc.shape()[0], bins],
        )
    }

    /// Euclidean norm of each row of a `(batch, len)` array.
    ///
    /// The gradient at an all-zero row is defined as zero.
    pub fn l2_norm_rows(&self) -> Result<Expr> {
        rank_is("l2_norm_rows", self, 2, "input")?;
        Ok(Expr::raw(Op::L2NormRows, vec![self.clone()], vec![self.shape()[0]]))
    }
}

fn segment_check(op: &'static str, e: &Expr, bins: usize) -> Result<(usize, usize)> {
    rank_is(op, e, 2, "input")?;
    let (b, len) = (e.shape()[0], e.shape()[1]);
    if bins == 0 || len < bins {
        return Err(TensorError::shape(
            op,
            format!("cannot pool length {len} into {bins} bins"),
        ));
    }
    Ok((b, len))
}
