//! Numeric kernels behind each graph op. Shapes have already been validated
//! by the expression constructors.

use crate::array::{numel, Tensor};

/// `C = alpha * A · B + beta * C` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
    rsc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        assert!((m - 1) * rsa + (k - 1) * csa < a.len());
        assert!((k - 1) * rsb + (n - 1) * csb < b.len());
    }
    assert!((m - 1) * rsc + n - 1 < c.len());
    // SAFETY: every index touched by the product lies within the bounds
    // asserted above, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

pub(crate) fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_parts(a.shape().to_vec(), data)
}

pub(crate) fn safe_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// `exp(x)` for `0 <= x <= 40`, branch-free so loops over it vectorise.
/// Relative error is below 1e-15.
#[inline(always)]
fn exp_nonneg(x: f64) -> f64 {
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    // adding and subtracting 1.5 * 2^52 rounds to the nearest integer
    const ROUND: f64 = 6_755_399_441_055_744.0;
    let shifted = x * std::f64::consts::LOG2_E + ROUND;
    let k = shifted - ROUND;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    // Taylor series of exp on |r| <= ln(2) / 2, Horner form
    let mut p = 1.0 / 479_001_600.0;
    for c in [
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        p = p * r + c;
    }
    // the low mantissa bits of `shifted` hold k; build 2^k from them directly
    p * f64::from_bits(shifted.to_bits().wrapping_add(1023) << 52)
}

/// Hyperbolic tangent, about twice as fast as `f64::tanh` on wide inputs
/// with absolute error below 1e-15.
#[inline(always)]
pub(crate) fn tanh(x: f64) -> f64 {
    let e = exp_nonneg(2.0 * x.abs().min(20.0));
    (1.0 - 2.0 / (e + 1.0)).copysign(x)
}

/// Elementwise [`tanh`], using 256-bit vectors when the CPU has them.
/// FMA is not enabled, so both paths give identical bits.
pub(crate) fn tanh_all(src: &[f64]) -> Vec<f64> {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the feature was detected at runtime
        return unsafe { tanh_all_avx2(src) };
    }
    src.iter().map(|&v| tanh(v)).collect()
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn tanh_all_avx2(src: &[f64]) -> Vec<f64> {
    src.iter().map(|&v| tanh(v)).collect()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn matmul(a: &Tensor, b: &Tensor, ta: bool, tb: bool, out_shape: &[usize]) -> Tensor {
    let (m, n) = (out_shape[0], out_shape[1]);
    let k = if ta { a.shape()[0] } else { a.shape()[1] };
    let ac = a.shape()[1];
    let bc = b.shape()[1];
    let (rsa, csa) = if ta { (1, ac) } else { (ac, 1) };
    let (rsb, csb) = if tb { (1, bc) } else { (bc, 1) };
    let mut out = vec![0.0; m * n];
    gemm(m, k, n, a.data(), rsa, csa, b.data(), rsb, csb, 0.0, &mut out, n);
    Tensor::from_parts(out_shape.to_vec(), out)
}

/// Strides of `small` (right-aligned, with 0 on broadcast axes) in the
/// index space of `big`.
fn broadcast_strides(small: &[usize], big: &[usize]) -> Vec<usize> {
    let pad = big.len() - small.len();
    let mut strides = vec![0; big.len()];
    let mut acc = 1;
    for i in (0..small.len()).rev() {
        if small[i] != 1 {
            strides[pad + i] = acc;
        }
        acc *= small[i];
    }
    strides
}

/// Calls `f(big_index, small_index)` for every element of `big` in
/// row-major order.
fn for_each_broadcast(small: &[usize], big: &[usize], mut f: impl FnMut(usize, usize)) {
    let total = numel(big);
    if total == 0 {
        return;
    }
    let strides = broadcast_strides(small, big);
    let rank = big.len();
    if rank == 0 {
        f(0, 0);
        return;
    }
    let inner = big[rank - 1];
    let inner_stride = strides[rank - 1];
    let mut idx = vec![0usize; rank - 1];
    let mut base = 0usize;
    let mut pos = 0usize;
    while pos < total {
        for j in 0..inner {
            f(pos + j, base + j * inner_stride);
        }
        pos += inner;
        // advance the odometer over the leading axes
        let mut d = rank - 1;
        while d > 0 {
            d -= 1;
            idx[d] += 1;
            base += strides[d];
            if idx[d] < big[d] {
                break;
            }
            base -= strides[d] * big[d];
            idx[d] = 0;
        }
    }
}

/// Length of the repeated unit when `small` broadcasts to `big` only along
/// leading axes, i.e. `small` (minus leading ones) is a suffix of `big`.
fn leading_repeat(small: &[usize], big: &[usize]) -> Option<usize> {
    let trimmed: &[usize] = match small.iter().position(|&d| d != 1) {
        Some(i) => &small[i..],
        None => &[],
    };
    big.ends_with(trimmed).then(|| numel(trimmed)).filter(|&n| n > 0)
}

pub(crate) fn broadcast(x: &Tensor, shape: &[usize]) -> Tensor {
    let mut out = vec![0.0; numel(shape)];
    let src = x.data();
    if src.len() == 1 {
        out.fill(src[0]);
        return Tensor::from_parts(shape.to_vec(), out);
    }
    if let Some(unit) = leading_repeat(x.shape(), shape) {
        for chunk in out.chunks_exact_mut(unit) {
            chunk.copy_from_slice(src);
        }
        return Tensor::from_parts(shape.to_vec(), out);
    }
    for_each_broadcast(x.shape(), shape, |o, i| out[o] = src[i]);
    Tensor::from_parts(shape.to_vec(), out)
}

pub(crate) fn add_broadcast(x: &Tensor, y: &Tensor) -> Tensor {
    let mut out = x.data().to_vec();
    let src = y.data();
    if let Some(unit) = leading_repeat(y.shape(), x.shape()) {
        for chunk in out.chunks_exact_mut(unit) {
            for (o, v) in chunk.iter_mut().zip(src) {
                *o += v;
            }
        }
    } else {
        for_each_broadcast(y.shape(), x.shape(), |o, i| out[o] += src[i]);
    }
    Tensor::from_parts(x.shape().to_vec(), out)
}

pub(crate) fn sum_to(x: &Tensor, shape: &[usize]) -> Tensor {
    let mut out = vec![0.0; numel(shape)];
    let src = x.data();
    if let Some(unit) = leading_repeat(shape, x.shape()) {
        for chunk in src.chunks_exact(unit) {
            for (o, v) in out.iter_mut().zip(chunk) {
                *o += v;
            }
        }
        return Tensor::from_parts(shape.to_vec(), out);
    }
    for_each_broadcast(shape, x.shape(), |i, o| out[o] += src[i]);
    Tensor::from_parts(shape.to_vec(), out)
}

pub(crate) fn transpose_last2(x: &Tensor, out_shape: &[usize]) -> Tensor {
    let r = x.rank();
    let (m, n) = (x.shape()[r - 2], x.shape()[r - 1]);
    let mut out = vec![0.0; x.len()];
    let src = x.data();
    for (blk, chunk) in out.chunks_mut(m * n).enumerate() {
        let s = &src[blk * m * n..(blk + 1) * m * n];
        for i in 0..m {
            for j in 0..n {
                chunk[j * m + i] = s[i * n + j];
            }
        }
    }
    Tensor::from_parts(out_shape.to_vec(), out)
}

pub(crate) fn concat_last(parts: &[&Tensor], out_shape: &[usize]) -> Tensor {
    let total = *out_shape.last().unwrap();
    let rows = numel(out_shape) / total.max(1);
    let mut out = Vec::with_capacity(numel(out_shape));
    for r in 0..rows {
        for p in parts {
            let w = *p.shape().last().unwrap();
            out.extend_from_slice(&p.data()[r * w..(r + 1) * w]);
        }
    }
    Tensor::from_parts(out_shape.to_vec(), out)
}

pub(crate) fn slice_last(x: &Tensor, start: usize, out_shape: &[usize]) -> Tensor {
    let n = *x.shape().last().unwrap();
    let len = *out_shape.last().unwrap();
    let mut out = Vec::with_capacity(numel(out_shape));
    for row in x.data().chunks(n.max(1)) {
        out.extend_from_slice(&row[start..start + len]);
    }
    Tensor::from_parts(out_shape.to_vec(), out)
}

pub(crate) fn pad_last(x: &Tensor, start: usize, out_shape: &[usize]) -> Tensor {
    let n = *x.shape().last().unwrap();
    let total = *out_shape.last().unwrap();
    let mut out = vec![0.0; numel(out_shape)];
    if n > 0 {
        for (row, dst) in x.data().chunks(n).zip(out.chunks_mut(total)) {
            dst[start..start + n].copy_from_slice(row);
        }
    }
    Tensor::from_parts(out_shape.to_vec(), out)
}

// Shifted taps are computed as one product over the whole batch into a
// scratch buffer, then added at the shifted rows of each sample. Per-sample
// products are too small to keep the GEMM kernel busy when channels are few.

/// `y[b, t] = sum_j x[b, t - j*d] · w[j]`.
pub(crate) fn conv_causal(x: &Tensor, w: &Tensor, dilation: usize) -> Tensor {
    let (batch, time, cin) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (kernel, cout) = (w.shape()[0], w.shape()[2]);
    let rows = batch * time;
    let mut out = vec![0.0; rows * cout];
    gemm(
        rows,
        cin,
        cout,
        x.data(),
        cin,
        1,
        w.data(),
        cout,
        1,
        0.0,
        &mut out,
        cout,
    );
    let mut tap = Vec::new();
    for j in 1..kernel {
        let shift = j * dilation;
        if shift >= time {
            break;
        }
        let wj = &w.data()[j * cin * cout..(j + 1) * cin * cout];
        tap.resize(rows * cout, 0.0);
        gemm(rows, cin, cout, x.data(), cin, 1, wj, cout, 1, 0.0, &mut tap, cout);
        let span = (time - shift) * cout;
        for b in 0..batch {
            let base = b * time * cout;
            let dst = &mut out[base + shift * cout..base + time * cout];
            for (o, &v) in dst.iter_mut().zip(&tap[base..base + span]) {
                *o += v;
            }
        }
    }
    Tensor::from_parts(vec![batch, time, cout], out)
}

/// `x[b, s] = sum_j g[b, s + j*d] · w[j]^T`.
pub(crate) fn conv_transpose(g: &Tensor, w: &Tensor, dilation: usize) -> Tensor {
    let (batch, time, cout) = (g.shape()[0], g.shape()[1], g.shape()[2]);
    let (kernel, cin) = (w.shape()[0], w.shape()[1]);
    let rows = batch * time;
    let mut out = vec![0.0; rows * cin];
    gemm(
        rows,
        cout,
        cin,
        g.data(),
        cout,
        1,
        w.data(),
        1,
        cout,
        0.0,
        &mut out,
        cin,
    );
    let mut tap = Vec::new();
    for j in 1..kernel {
        let shift = j * dilation;
        if shift >= time {
            break;
        }
        let wj = &w.data()[j * cin * cout..(j + 1) * cin * cout];
        tap.resize(rows * cin, 0.0);
        gemm(rows, cout, cin, g.data(), cout, 1, wj, 1, cout, 0.0, &mut tap, cin);
        let span = (time - shift) * cin;
        for b in 0..batch {
            let base = b * time * cin;
            let src = &tap[base + shift * cin..base + time * cin];
            for (o, &v) in out[base..base + span].iter_mut().zip(src) {
                *o += v;
            }
        }
    }
    Tensor::from_parts(vec![batch, time, cin], out)
}

/// `w[j, c, o] = sum_{b,t} x[b, t - j*d, c] * g[b, t, o]`.
pub(crate) fn conv_weight_grad(x: &Tensor, g: &Tensor, dilation: usize, kernel: usize) -> Tensor {
    let (batch, time, cin) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let cout = g.shape()[2];
    let rows = batch * time;
    let mut out = vec![0.0; kernel * cin * cout];
    if kernel > 0 {
        gemm(
            cin,
            rows,
            cout,
            x.data(),
            1,
            cin,
            g.data(),
            cout,
            1,
            0.0,
            &mut out[..cin * cout],
            cout,
        );
    }
    let mut shifted = Vec::new();
    for j in 1..kernel {
        let shift = j * dilation;
        if shift >= time {
            break;
        }
        // g moved back by `shift` rows within each sample, zero filled
        shifted.clear();
        shifted.resize(rows * cout, 0.0);
        let span = (time - shift) * cout;
        for b in 0..batch {
            let base = b * time * cout;
            shifted[base..base + span].copy_from_slice(&g.data()[base + shift * cout..base + time * cout]);
        }
        gemm(
            cin,
            rows,
            cout,
            x.data(),
            1,
            cin,
            &shifted,
            cout,
            1,
            0.0,
            &mut out[j * cin * cout..(j + 1) * cin * cout],
            cout,
        );
    }
    Tensor::from_parts(vec![kernel, cin, cout], out)
}

/// Half-open bounds of pooling segment `i` out of `bins` over length `len`.
pub fn segment_bounds(len: usize, bins: usize, i: usize) -> (usize, usize) {
    let start = i * len / bins;
    let end = ((i + 1) * len).div_ceil(bins);
    (start, end)
}

/// Argmax (first occurrence) of every segment of every row.
fn segment_argmax(x: &Tensor, bins: usize) -> Vec<usize> {
    let (rows, len) = (x.shape()[0], x.shape()[1]);
    let mut idx = Vec::with_capacity(rows * bins);
    for r in 0..rows {
        let row = &x.data()[r * len..(r + 1) * len];
        for i in 0..bins {
            let (s, e) = segment_bounds(len, bins, i);
            let mut best = s;
            for k in s + 1..e {
                if row[k] > row[best] {
                    best = k;
                }
            }
            idx.push(best);
        }
    }
    idx
}

pub(crate) fn segment_max(x: &Tensor, bins: usize) -> Tensor {
    segment_gather(x, x, bins)
}

pub(crate) fn segment_gather(v: &Tensor, argsrc: &Tensor, bins: usize) -> Tensor {
    let (rows, len) = (argsrc.shape()[0], argsrc.shape()[1]);
    let idx = segment_argmax(argsrc, bins);
    let mut out = Vec::with_capacity(rows * bins);
    for r in 0..rows {
        for i in 0..bins {
            out.push(v.data()[r * len + idx[r * bins + i]]);
        }
    }
    Tensor::from_parts(vec![rows, bins], out)
}

pub(crate) fn segment_scatter(g: &Tensor, argsrc: &Tensor, bins: usize) -> Tensor {
    let (rows, len) = (argsrc.shape()[0], argsrc.shape()[1]);
    let idx = segment_argmax(argsrc, bins);
    let mut out = vec![0.0; rows * len];
    for r in 0..rows {
        for i in 0..bins {
            out[r * len + idx[r * bins + i]] += g.data()[r * bins + i];
        }
    }
    Tensor::from_parts(vec![rows, len], out)
}

pub(crate) fn l2_norm_rows(x: &Tensor) -> Tensor {
    let (rows, len) = (x.shape()[0], x.shape()[1]);
    let out = (0..rows)
        .map(|r| {
            x.data()[r * len..(r + 1) * len]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Tensor::from_parts(vec![rows], out)
}
