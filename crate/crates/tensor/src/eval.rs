use std::collections::{HashMap, HashSet};
use std::ops::Deref;

use crate::array::Tensor;
use crate::error::{Result, TensorError};
use crate::expr::{Expr, Op};
use crate::kernels;

/// Values for the named leaves of a graph. Values are borrowed, not copied.
#[derive(Default, Clone)]
pub struct Bindings<'a> {
    map: HashMap<String, &'a Tensor>,
}

impl<'a> Bindings<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, name: impl Into<String>, value: &'a Tensor) -> &mut Self {
        self.map.insert(name.into(), value);
        self
    }

    pub fn with(mut self, name: impl Into<String>, value: &'a Tensor) -> Self {
        self.bind(name, value);
        self
    }

    pub fn get(&self, name: &str) -> Option<&'a Tensor> {
        self.map.get(name).copied()
    }
}

enum Val<'a> {
    Borrowed(&'a Tensor),
    Owned(Tensor),
}

impl Deref for Val<'_> {
    type Target = Tensor;
    fn deref(&self) -> &Tensor {
        match self {
            Val::Borrowed(t) => t,
            Val::Owned(t) => t,
        }
    }
}

/// All nodes reachable from `roots`, in topological (id) order.
pub(crate) fn topo_order(roots: &[Expr]) -> Vec<Expr> {
    let mut seen = HashSet::new();
    let mut stack: Vec<Expr> = roots.to_vec();
    let mut nodes = Vec::new();
    while let Some(e) = stack.pop() {
        if !seen.insert(e.id()) {
            continue;
        }
        stack.extend(e.inputs().iter().cloned());
        nodes.push(e);
    }
    nodes.sort_by_key(Expr::id);
    nodes
}

/// Evaluates several roots in one pass, computing shared subgraphs once.
///
/// Intermediate values are released as soon as their last consumer has run.
/// Evaluation is single-threaded and uses a fixed operation order, so equal
/// bindings give bit-identical results.
pub fn evaluate(roots: &[Expr], bindings: &Bindings<'_>) -> Result<Vec<Tensor>> {
    crate::alloc::tune_once();
    let order = topo_order(roots);
    let pos: HashMap<u64, usize> = order.iter().enumerate().map(|(i, e)| (e.id(), i)).collect();

    let mut remaining = vec![0usize; order.len()];
    for e in &order {
        for inp in e.inputs() {
            remaining[pos[&inp.id()]] += 1;
        }
    }
    let mut is_root = vec![false; order.len()];
    for r in roots {
        is_root[pos[&r.id()]] = true;
    }

    let mut vals: Vec<Option<Val<'_>>> = (0..order.len()).map(|_| None).collect();
    for (i, e) in order.iter().enumerate() {
        let v = match e.op() {
            Op::Leaf(name) => {
                let t = bindings.get(name).ok_or_else(|| TensorError::Unbound(name.clone()))?;
                if t.shape() != e.shape() {
                    return Err(TensorError::BindingShape {
                        name: name.clone(),
                        expected: e.shape().to_vec(),
                        actual: t.shape().to_vec(),
                    });
                }
                Val::Borrowed(t)
            }
            Op::Constant(t) => Val::Borrowed(t),
            op => {
                let inputs: Vec<&Tensor> = e
                    .inputs()
                    .iter()
                    .map(|inp| &**vals[pos[&inp.id()]].as_ref().expect("input evaluated"))
                    .collect();
                Val::Owned(compute(op, &inputs, e.shape()))
            }
        };
        vals[i] = Some(v);
        for inp in e.inputs() {
            let j = pos[&inp.id()];
            remaining[j] -= 1;
            if remaining[j] == 0 && !is_root[j] {
                vals[j] = None;
            }
        }
    }

    Ok(roots
        .iter()
        .map(|r| match vals[pos[&r.id()]].as_ref().unwrap() {
            Val::Borrowed(t) => (*t).clone(),
            Val::Owned(t) => t.clone(),
        })
        .collect())
}

impl Expr {
    /// Evaluates this expression alone.
    pub fn eval(&self, bindings: &Bindings<'_>) -> Result<Tensor> {
        Ok(evaluate(std::slice::from_ref(self), bindings)?.remove(0))
    }
}

fn compute(op: &Op, x: &[&Tensor], shape: &[usize]) -> Tensor {
    use kernels::*;
    match *op {
        Op::Leaf(_) | Op::Constant(_) => unreachable!("handled by caller"),
        Op::Add => zip(x[0], x[1], |a, b| a + b),
        Op::Sub => zip(x[0], x[1], |a, b| a - b),
        Op::Mul => zip(x[0], x[1], |a, b| a * b),
        Op::SafeDiv => zip(x[0], x[1], safe_div),
        Op::Affine { scale, shift } => x[0].map(|v| scale * v + shift),
        Op::Square => x[0].map(|v| v * v),
        Op::Tanh => Tensor::from_parts(x[0].shape().to_vec(), kernels::tanh_all(x[0].data())),
        Op::Sigmoid => x[0].map(sigmoid),
        Op::Log => x[0].map(f64::ln),
        Op::LeakyRelu { slope } => x[0].map(|v| if v >= 0.0 { v } else { slope * v }),
        Op::LeakyReluSlope { slope } => x[0].map(|v| if v >= 0.0 { 1.0 } else { slope }),
        Op::Clamp { lo, hi } => x[0].map(|v| v.clamp(lo, hi)),
        Op::ClampMask { lo, hi } => x[0].map(|v| if (lo..=hi).contains(&v) { 1.0 } else { 0.0 }),
        Op::MatMul { ta, tb } => matmul(x[0], x[1], ta, tb, shape),
        Op::Reshape => Tensor::from_parts(shape.to_vec(), x[0].data().to_vec()),
        Op::Broadcast => broadcast(x[0], shape),
        Op::AddBroadcast => add_broadcast(x[0], x[1]),
        Op::SumTo => sum_to(x[0], shape),
        Op::TransposeLast2 => transpose_last2(x[0], shape),
        Op::ConcatLast => concat_last(x, shape),
        Op::SliceLast { start } => slice_last(x[0], start, shape),
        Op::PadLast { start } => pad_last(x[0], start, shape),
        Op::ConvCausal { dilation } => conv_causal(x[0], x[1], dilation),
        Op::ConvTranspose { dilation } => conv_transpose(x[0], x[1], dilation),
        Op::ConvWeightGrad { dilation } => conv_weight_grad(x[0], x[1], dilation, shape[0]),
        Op::SegmentMax { bins } => segment_max(x[0], bins),
        Op::SegmentScatter { bins } => segment_scatter(x[0], x[1], bins),
        Op::SegmentGather { bins } => segment_gather(x[0], x[1], bins),
        Op::L2NormRows => l2_norm_rows(x[0]),
    }
}
