//! Analytic gradients against central finite differences.

use genboot_tensor::{evaluate, gradient, Bindings, Expr, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

fn random(shape: &[usize], rng: &mut ChaCha8Rng, scale: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Values at least `margin` away from zero, for inputs feeding a kink.
fn away_from_zero(t: Tensor, margin: f64) -> Tensor {
    t.map(|v| if v.abs() < margin { v.signum() * margin + v } else { v })
}

/// Relative error with gradient entries below 1e-3 compared absolutely.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Central differences of the scalar `root` with respect to the leaf `name`.
fn finite_diff(root: &Expr, leaves: &[(&str, Tensor)], name: &str) -> Vec<f64> {
    let idx = leaves.iter().position(|(n, _)| *n == name).unwrap();
    let eval = |vals: &[(&str, Tensor)]| {
        let mut b = Bindings::new();
        for (n, t) in vals {
            b.bind(*n, t);
        }
        root.eval(&b).unwrap().item()
    };
    let n = leaves[idx].1.len();
    (0..n)
        .map(|i| {
            let mut plus = leaves.to_vec();
            plus[idx].1.data_mut()[i] += H;
            let mut minus = leaves.to_vec();
            minus[idx].1.data_mut()[i] -= H;
            (eval(&plus) - eval(&minus)) / (2.0 * H)
        })
        .collect()
}

fn check(root: &Expr, leaves: &[(&str, Tensor)], wrt: &[Expr], tol: f64) {
    let grads = gradient(root, wrt).unwrap();
    let mut b = Bindings::new();
    for (n, t) in leaves {
        b.bind(*n, t);
    }
    let values = evaluate(&grads, &b).unwrap();
    for (leaf, analytic) in wrt.iter().zip(&values) {
        let name = leaf.leaf_name().unwrap();
        let numeric = finite_diff(root, leaves, name);
        for (i, (&a, &n)) in analytic.data().iter().zip(&numeric).enumerate() {
            let e = rel_err(a, n);
            assert!(e <= tol, "d/d{name}[{i}]: analytic {a} vs numeric {n} (rel err {e:e})");
        }
    }
}

fn elementwise_graph(seed: u64) -> (Expr, Vec<(&'static str, Tensor)>, Vec<Expr>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = [2, 3];
    let a = Expr::leaf("a", &shape);
    let b = Expr::leaf("b", &shape);
    let av = away_from_zero(random(&shape, &mut rng, 1.0), 1e-3);
    let bv = random(&shape, &mut rng, 1.0);

    let t = a.tanh().mul(&b.sigmoid()).unwrap();
    let lr = a.leaky_relu(0.01).add(&b.square()).unwrap();
    // denominator 1.5 + sigmoid is bounded away from zero
    let ratio = lr.safe_div(&b.sigmoid().add_scalar(1.5)).unwrap();
    let logged = b.sigmoid().add_scalar(0.5).log();
    // clamp bounds chosen well outside the operand range near the kinks
    let clamped = t.affine(3.0, 0.1).clamp(-5.0, 5.0);
    let out = ratio
        .sub(&logged)
        .unwrap()
        .add(&clamped)
        .unwrap()
        .mul(&t)
        .unwrap()
        .mean();
    (out, vec![("a", av), ("b", bv)], vec![a, b])
}

fn shape_graph(seed: u64) -> (Expr, Vec<(&'static str, Tensor)>, Vec<Expr>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Expr::leaf("x", &[3, 4]);
    let w = Expr::leaf("w", &[4, 2]);
    let v = Expr::leaf("v", &[3, 2]);
    let bias = Expr::leaf("bias", &[2]);
    let vals = vec![
        ("x", random(&[3, 4], &mut rng, 1.0)),
        ("w", random(&[4, 2], &mut rng, 1.0)),
        ("v", random(&[3, 2], &mut rng, 1.0)),
        ("bias", random(&[2], &mut rng, 1.0)),
    ];
    let h = x.matmul(&w).unwrap().add(&bias.broadcast_to(&[3, 2]).unwrap()).unwrap();
    // x^T v : (4, 2) and v^T x : (2, 4), both via transpose flags
    let xtv = x.matmul_t(&v, true, false).unwrap();
    let vtx = v.matmul_t(&x, true, false).unwrap().transpose_last2().unwrap();
    let cross = xtv.mul(&vtx).unwrap().tanh();
    let wide = Expr::concat_last(&[h.clone(), v.clone(), h.tanh()]).unwrap();
    let mid = wide.slice_last(1, 3).unwrap().pad_last(2, 6).unwrap();
    let rows = mid.sum_to(&[3, 1]).unwrap().reshape(&[3]).unwrap();
    let wt = w.matmul_t(&w, false, true).unwrap(); // w w^T : (4, 4)
    let shifted = x
        .add_broadcast(&bias.reshape(&[2, 1]).unwrap().sum_to(&[1, 1]).unwrap())
        .unwrap();
    let cols = wt
        .add_broadcast(&bias.slice_last(0, 1).unwrap().broadcast_to(&[4, 1]).unwrap())
        .unwrap();
    let out = rows
        .square()
        .sum()
        .add(&cross.sum())
        .unwrap()
        .add(&wt.tanh().mean())
        .unwrap()
        .add(&shifted.tanh().sum())
        .unwrap()
        .add(&cols.square().mean())
        .unwrap();
    (out, vals, vec![x, w, v, bias])
}

fn conv_graph(seed: u64) -> (Expr, Vec<(&'static str, Tensor)>, Vec<Expr>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (batch, time) = (2, 9);
    let x = Expr::leaf("x", &[batch, time, 2]);
    let w1 = Expr::leaf("w1", &[2, 2, 3]);
    let w2 = Expr::leaf("w2", &[3, 3, 2]);
    let vals = vec![
        ("x", random(&[batch, time, 2], &mut rng, 1.0)),
        ("w1", random(&[2, 2, 3], &mut rng, 0.7)),
        ("w2", random(&[3, 3, 2], &mut rng, 0.7)),
    ];
    let h = x.conv_causal(&w1, 1).unwrap().tanh();
    let y = h.conv_causal(&w2, 2).unwrap();
    let flat = y.transpose_last2().unwrap().reshape(&[batch, 2 * time]).unwrap();
    let pooled = flat.segment_max(5).unwrap();
    let norms = flat.l2_norm_rows().unwrap();
    let out = pooled.square().sum().add(&norms.sum()).unwrap();
    (out, vals, vec![x, w1, w2])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn elementwise_primitives(seed in any::<u64>()) {
        let (root, leaves, wrt) = elementwise_graph(seed);
        check(&root, &leaves, &wrt, 1e-5);
    }

    #[test]
    fn linear_and_shape_primitives(seed in any::<u64>()) {
        let (root, leaves, wrt) = shape_graph(seed);
        check(&root, &leaves, &wrt, 1e-5);
    }

    #[test]
    fn convolution_pooling_and_norm(seed in any::<u64>()) {
        let (root, leaves, wrt) = conv_graph(seed);
        // max pooling has kinks where two entries of a segment tie
        check(&root, &leaves, &wrt, 1e-3);
    }

    #[test]
    fn gradient_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (f, leaves, wrt) = elementwise_graph(seed);
        let g = f.tanh();
        let combo = f.scale(a).add(&g.scale(b)).unwrap();
        let mut bind = Bindings::new();
        for (n, t) in &leaves {
            bind.bind(*n, t);
        }
        let gc = evaluate(&gradient(&combo, &wrt).unwrap(), &bind).unwrap();
        let gf = evaluate(&gradient(&f, &wrt).unwrap(), &bind).unwrap();
        let gg = evaluate(&gradient(&g, &wrt).unwrap(), &bind).unwrap();
        for k in 0..wrt.len() {
            for i in 0..gc[k].len() {
                let expect = a * gf[k].data()[i] + b * gg[k].data()[i];
                let got = gc[k].data()[i];
                prop_assert!((got - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }
    }
}

/// Builds `f(x; θ)`: conv → leaky-ReLU → flatten → pool → dense, with the
/// input kept as a separate node so its gradient can be taken.
fn toy_critic(x: &Expr, w: &Expr, v: &Expr, batch: usize, time: usize) -> Expr {
    let h = x
        .reshape(&[batch, time, 1])
        .unwrap()
        .conv_causal(w, 2)
        .unwrap()
        .leaky_relu(0.2);
    let pooled = h
        .transpose_last2()
        .unwrap()
        .reshape(&[batch, 3 * time])
        .unwrap()
        .segment_max(4)
        .unwrap()
        .leaky_relu(0.2);
    pooled.matmul(v).unwrap().reshape(&[batch]).unwrap()
}

#[test]
fn penalty_gradient_matches_finite_differences() {
    for seed in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (batch, time) = (3, 8);
        let w = Expr::leaf("w", &[2, 1, 3]);
        let v = Expr::leaf("v", &[4, 1]);
        let xv = random(&[batch, time], &mut rng, 1.0);
        let x = Expr::constant(xv);
        let f = toy_critic(&x, &w, &v, batch, time);
        let dx = gradient(&f.sum(), std::slice::from_ref(&x)).unwrap().remove(0);
        let g = dx.l2_norm_rows().unwrap().add_scalar(-1.0).square().mean();
        let leaves = vec![
            ("w", random(&[2, 1, 3], &mut rng, 1.0)),
            ("v", away_from_zero(random(&[4, 1], &mut rng, 1.0), 1e-2)),
        ];
        check(&g, &leaves, &[w, v], 1e-4);
    }
}

#[test]
fn evaluation_is_bit_identical() {
    let (root, leaves, wrt) = conv_graph(7);
    let grads = gradient(&root, &wrt).unwrap();
    let mut b = Bindings::new();
    for (n, t) in &leaves {
        b.bind(*n, t);
    }
    let first = evaluate(&grads, &b).unwrap();
    for _ in 0..3 {
        assert_eq!(evaluate(&grads, &b).unwrap(), first);
    }
}

#[test]
fn norm_gradient_finite_difference() {
    // ‖a·x‖₂ with x = 2 at a = (1, 0)
    let a = Expr::leaf("a", &[1, 2]);
    let root = a
        .mul(&Expr::constant(Tensor::full(&[1, 2], 2.0)))
        .unwrap()
        .l2_norm_rows()
        .unwrap()
        .sum();
    let at = Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
    let numeric = finite_diff(&root, &[("a", at.clone())], "a");
    assert!((numeric[0] - 2.0).abs() < 1e-8);
    assert!(numeric[1].abs() < 1e-4);
    check(&root, &[("a", at)], &[a], 1e-4);
}
