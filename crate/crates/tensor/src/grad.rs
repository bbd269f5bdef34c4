//! Reverse-mode differentiation that emits gradient *expressions*.
//!
//! The backward pass of every op is written in terms of other graph ops, so
//! a gradient can itself be differentiated. Piecewise-constant helpers
//! (leaky-ReLU slope, clamp mask, argmax routing) contribute no gradient to
//! the array they are computed from.

use std::collections::{HashMap, HashSet};

use crate::error::{Result, TensorError};
use crate::eval::topo_order;
use crate::expr::{Expr, Op};

/// Gradients of a one-element `root` with respect to each node in `wrt`.
///
/// Each target is treated as an independent input, so `wrt` may name leaves,
/// constants or intermediate nodes. A target that `root` does not depend on
/// gets an all-zero gradient of the target's shape.
pub fn gradient(root: &Expr, wrt: &[Expr]) -> Result<Vec<Expr>> {
    if root.numel() != 1 {
        return Err(TensorError::NonScalarRoot(root.shape().to_vec()));
    }
    let order = topo_order(std::slice::from_ref(root));
    let targets: HashSet<u64> = wrt.iter().map(Expr::id).collect();

    // nodes through which some target influences the root
    let mut relevant: HashSet<u64> = HashSet::new();
    for e in &order {
        if targets.contains(&e.id()) || e.inputs().iter().any(|i| relevant.contains(&i.id())) {
            relevant.insert(e.id());
        }
    }

    let mut grads: HashMap<u64, Expr> = HashMap::new();
    if relevant.contains(&root.id()) {
        let seed = Expr::scalar(1.0).broadcast_to(root.shape())?;
        grads.insert(root.id(), seed);
    }

    for node in order.iter().rev() {
        if !relevant.contains(&node.id()) {
            continue;
        }
        let Some(g) = grads.get(&node.id()).cloned() else {
            continue;
        };
        let wanted: Vec<bool> = node.inputs().iter().map(|i| relevant.contains(&i.id())).collect();
        if !wanted.iter().any(|&w| w) {
            continue;
        }
        for (k, contrib) in vjp(node, &g, &wanted)? {
            let input = &node.inputs()[k];
            let acc = match grads.remove(&input.id()) {
                Some(prev) => prev.add(&contrib)?,
                None => contrib,
            };
            grads.insert(input.id(), acc);
        }
    }

    Ok(wrt
        .iter()
        .map(|w| grads.get(&w.id()).cloned().unwrap_or_else(|| Expr::zeros(w.shape())))
        .collect())
}

/// Vector-Jacobian products of `node` for the inputs flagged in `wanted`.
fn vjp(node: &Expr, g: &Expr, wanted: &[bool]) -> Result<Vec<(usize, Expr)>> {
    let x = node.inputs();
    let mut out = Vec::with_capacity(x.len());
    let mut push = |k: usize, f: &dyn Fn() -> Result<Expr>| -> Result<()> {
        if wanted[k] {
            out.push((k, f()?));
        }
        Ok(())
    };
    match *node.op() {
        Op::Leaf(_) | Op::Constant(_) => {}
        Op::Add => {
            push(0, &|| Ok(g.clone()))?;
            push(1, &|| Ok(g.clone()))?;
        }
        Op::Sub => {
            push(0, &|| Ok(g.clone()))?;
            push(1, &|| Ok(g.neg()))?;
        }
        Op::Mul => {
            push(0, &|| g.mul(&x[1]))?;
            push(1, &|| g.mul(&x[0]))?;
        }
        Op::SafeDiv => {
            push(0, &|| g.safe_div(&x[1]))?;
            // d(a/b)/db = -(a/b)/b
            push(1, &|| Ok(g.mul(node)?.safe_div(&x[1])?.neg()))?;
        }
        Op::Affine { scale, .. } => push(0, &|| Ok(g.scale(scale)))?,
        Op::Square => push(0, &|| g.mul(&x[0].scale(2.0)))?,
        Op::Tanh => push(0, &|| g.mul(&node.square().affine(-1.0, 1.0)))?,
        Op::Sigmoid => push(0, &|| g.mul(&node.mul(&node.affine(-1.0, 1.0))?))?,
        Op::Log => push(0, &|| g.safe_div(&x[0]))?,
        Op::LeakyRelu { slope } => push(0, &|| g.mul(&x[0].leaky_relu_slope(slope)))?,
        Op::Clamp { lo, hi } => push(0, &|| g.mul(&x[0].clamp_mask(lo, hi)))?,
        Op::LeakyReluSlope { .. } | Op::ClampMask { .. } => {}
        Op::MatMul { ta, tb } => {
            let (a, b) = (&x[0], &x[1]);
            push(0, &|| {
                if ta {
                    b.matmul_t(g, tb, true)
                } else {
                    g.matmul_t(b, false, !tb)
                }
            })?;
            push(1, &|| {
                if tb {
                    g.matmul_t(a, true, ta)
                } else {
                    a.matmul_t(g, !ta, false)
                }
            })?;
        }
        Op::Reshape => push(0, &|| g.reshape(x[0].shape()))?,
        Op::Broadcast => push(0, &|| g.sum_to(x[0].shape()))?,
        Op::AddBroadcast => {
            push(0, &|| Ok(g.clone()))?;
            push(1, &|| g.sum_to(x[1].shape()))?;
        }
        Op::SumTo => push(0, &|| g.broadcast_to(x[0].shape()))?,
        Op::TransposeLast2 => push(0, &|| g.transpose_last2())?,
        Op::ConcatLast => {
            let mut start = 0;
            for (k, part) in x.iter().enumerate() {
                let len = *part.shape().last().unwrap();
                let s = start;
                push(k, &|| g.slice_last(s, len))?;
                start += len;
            }
        }
        Op::SliceLast { start } => push(0, &|| g.pad_last(start, *x[0].shape().last().unwrap()))?,
        Op::PadLast { start } => push(0, &|| g.slice_last(start, *x[0].shape().last().unwrap()))?,
        Op::ConvCausal { dilation } => {
            let kernel = x[1].shape()[0];
            push(0, &|| g.conv_transpose(&x[1], dilation))?;
            push(1, &|| x[0].conv_weight_grad(g, dilation, kernel))?;
        }
        Op::ConvTranspose { dilation } => {
            // node = conv_transpose(h, w); g has the shape of conv input
            let kernel = x[1].shape()[0];
            push(0, &|| g.conv_causal(&x[1], dilation))?;
            push(1, &|| g.conv_weight_grad(&x[0], dilation, kernel))?;
        }
        Op::ConvWeightGrad { dilation } => {
            // node = conv_weight_grad(a, h); g has the shape of a weight
            push(0, &|| x[1].conv_transpose(g, dilation))?;
            push(1, &|| x[0].conv_causal(g, dilation))?;
        }
        Op::SegmentMax { bins } => push(0, &|| Ok(g.segment_scatter(&x[0], bins)))?,
        Op::SegmentScatter { bins } => push(0, &|| Ok(g.segment_gather(&x[1], bins)))?,
        Op::SegmentGather { bins } => push(0, &|| Ok(g.segment_scatter(&x[1], bins)))?,
        Op::L2NormRows => push(0, &|| {
            let (rows, len) = (x[0].shape()[0], x[0].shape()[1]);
            let coef = g.safe_div(node)?.reshape(&[rows, 1])?.broadcast_to(&[rows, len])?;
            x[0].mul(&coef)
        })?,
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Bindings, Tensor};

    #[test]
    fn derivative_of_square() {
        let x = Expr::leaf("x", &[]);
        let y = x.square();
        let g = gradient(&y, std::slice::from_ref(&x)).unwrap().remove(0);
        let three = Tensor::scalar(3.0);
        assert_eq!(g.eval(&Bindings::new().with("x", &three)).unwrap().item(), 6.0);
    }

    #[test]
    fn second_derivative_of_cube() {
        let x = Expr::leaf("x", &[]);
        let y = x.square().mul(&x).unwrap();
        let g = gradient(&y, std::slice::from_ref(&x)).unwrap().remove(0);
        let h = gradient(&g, std::slice::from_ref(&x)).unwrap().remove(0);
        let v = Tensor::scalar(2.0);
        let b = Bindings::new().with("x", &v);
        assert_eq!(g.eval(&b).unwrap().item(), 12.0);
        assert_eq!(h.eval(&b).unwrap().item(), 12.0);
    }

    #[test]
    fn non_scalar_root_rejected() {
        let x = Expr::leaf("x", &[3]);
        assert!(matches!(
            gradient(&x.square(), std::slice::from_ref(&x)),
            Err(TensorError::NonScalarRoot(_))
        ));
    }

    #[test]
    fn unrelated_target_gets_zero() {
        let x = Expr::leaf("x", &[]);
        let z = Expr::leaf("z", &[2, 2]);
        let g = gradient(&x.square(), &[z]).unwrap().remove(0);
        let v = Tensor::scalar(1.0);
        let out = g.eval(&Bindings::new().with("x", &v)).unwrap();
        assert_eq!(out.shape(), &[2, 2]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn leaky_relu_kink_uses_positive_slope() {
        let x = Expr::leaf("x", &[]);
        let g = gradient(&x.leaky_relu(0.01), std::slice::from_ref(&x))
            .unwrap()
            .remove(0);
        let zero = Tensor::scalar(0.0);
        assert_eq!(g.eval(&Bindings::new().with("x", &zero)).unwrap().item(), 1.0);
    }

    #[test]
    fn norm_gradient_at_zero_is_zero() {
        let x = Expr::leaf("x", &[1, 3]);
        let n = x.l2_norm_rows().unwrap().sum();
        let g = gradient(&n, std::slice::from_ref(&x)).unwrap().remove(0);
        let zero = Tensor::zeros(&[1, 3]);
        let out = g.eval(&Bindings::new().with("x", &zero)).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn norm_gradient_of_scaled_vector() {
        // d/da |a * x| at a = (1, 0), x = 2 is x^2 a / |a x| = (2, 0)
        let a = Expr::leaf("a", &[1, 2]);
        let x = Tensor::full(&[1, 2], 2.0);
        let ax = a.mul(&Expr::constant(x)).unwrap();
        let n = ax.l2_norm_rows().unwrap().sum();
        let g = gradient(&n, std::slice::from_ref(&a)).unwrap().remove(0);
        let av = Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        let out = g.eval(&Bindings::new().with("a", &av)).unwrap();
        assert_eq!(out.data(), &[2.0, 0.0]);
    }
}
