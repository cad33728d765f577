//! Differentiable operations.
//!
//! Exactly the op set the keyword-spotting model needs; shapes are validated
//! eagerly with the offending dimensions named. Convolutions are causal
//! along time (left padding only), so no output row ever depends on future
//! input — the property the streaming-style model tests rely on.

use crate::error::{Error, Result};

use super::tensor::Tensor;

fn want2(t: &Tensor, op: &'static str, what: &str) -> Result<(usize, usize)> {
    let s = t.shape();
    if s.len() != 2 {
        return Err(Error::ShapeMismatch {
            op,
            details: format!("{what} must be 2-D, got {s:?}"),
        });
    }
    Ok((s[0], s[1]))
}

fn want3(t: &Tensor, op: &'static str, what: &str) -> Result<(usize, usize, usize)> {
    let s = t.shape();
    if s.len() != 3 {
        return Err(Error::ShapeMismatch {
            op,
            details: format!("{what} must be 3-D, got {s:?}"),
        });
    }
    Ok((s[0], s[1], s[2]))
}

/// Elementwise sum of two same-shape tensors.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op: "add",
            details: format!("{:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    let av = a.values_vec();
    let bv = b.values_vec();
    let values: Vec<f64> = av.iter().zip(&bv).map(|(x, y)| x + y).collect();
    Ok(Tensor::from_op(
        a.shape(),
        values,
        vec![a.clone(), b.clone()],
        Box::new(|_, out_grad, parents| {
            for p in parents {
                let mut pi = p.0.borrow_mut();
                if pi.requires_grad {
                    for (g, og) in pi.grad.iter_mut().zip(out_grad) {
                        *g += og;
                    }
                }
            }
        }),
    ))
}

/// a - b, elementwise.
pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    add(a, &scale(b, -1.0))
}

/// Adds a length-n bias vector to every row of an m x n matrix.
pub fn add_row(a: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (m, n) = want2(a, "add_row", "input")?;
    let bs = bias.shape();
    if bs != [n] {
        return Err(Error::ShapeMismatch {
            op: "add_row",
            details: format!("bias {bs:?} vs row width {n}"),
        });
    }
    let av = a.values_vec();
    let bv = bias.values_vec();
    let mut values = av;
    for r in 0..m {
        for c in 0..n {
            values[r * n + c] += bv[c];
        }
    }
    Ok(Tensor::from_op(
        vec![m, n],
        values,
        vec![a.clone(), bias.clone()],
        Box::new(move |_, out_grad, parents| {
            {
                let mut pa = parents[0].0.borrow_mut();
                if pa.requires_grad {
                    for (g, og) in pa.grad.iter_mut().zip(out_grad) {
                        *g += og;
                    }
                }
            }
            let mut pb = parents[1].0.borrow_mut();
            if pb.requires_grad {
                for r in 0..m {
                    for c in 0..n {
                        pb.grad[c] += out_grad[r * n + c];
                    }
                }
            }
        }),
    ))
}

/// Elementwise product of two same-shape tensors.
pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op: "mul",
            details: format!("{:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    let av = a.values_vec();
    let bv = b.values_vec();
    let values: Vec<f64> = av.iter().zip(&bv).map(|(x, y)| x * y).collect();
    Ok(Tensor::from_op(
        a.shape(),
        values,
        vec![a.clone(), b.clone()],
        Box::new(move |_, out_grad, parents| {
            {
                let mut pa = parents[0].0.borrow_mut();
                if pa.requires_grad {
                    for ((g, og), y) in pa.grad.iter_mut().zip(out_grad).zip(&bv) {
                        *g += og * y;
                    }
                }
            }
            let mut pb = parents[1].0.borrow_mut();
            if pb.requires_grad {
                for ((g, og), x) in pb.grad.iter_mut().zip(out_grad).zip(&av) {
                    *g += og * x;
                }
            }
        }),
    ))
}

/// Multiplication by a compile-time constant.
pub fn scale(a: &Tensor, c: f64) -> Tensor {
    let values: Vec<f64> = a.values().iter().map(|x| x * c).collect();
    Tensor::from_op(
        a.shape(),
        values,
        vec![a.clone()],
        Box::new(move |_, out_grad, parents| {
            let mut pa = parents[0].0.borrow_mut();
            if pa.requires_grad {
                for (g, og) in pa.grad.iter_mut().zip(out_grad) {
                    *g += og * c;
                }
            }
        }),
    )
}

/// Matrix product of [m,k] and [k,n].
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = want2(a, "matmul", "lhs")?;
    let (k2, n) = want2(b, "matmul", "rhs")?;
    if k != k2 {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            details: format!("inner dims {k} vs {k2} ([{m},{k}] x [{k2},{n}])"),
        });
    }
    let av = a.values_vec();
    let bv = b.values_vec();
    let mut values = vec![0.0; m * n];
    for i in 0..m {
        for kk in 0..k {
            let x = av[i * k + kk];
            if x == 0.0 {
                continue;
            }
            let brow = &bv[kk * n..(kk + 1) * n];
            let orow = &mut values[i * n..(i + 1) * n];
            for (o, y) in orow.iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
    Ok(Tensor::from_op(
        vec![m, n],
        values,
        vec![a.clone(), b.clone()],
        Box::new(move |_, out_grad, parents| {
            {
                let mut pa = parents[0].0.borrow_mut();
                if pa.requires_grad {
                    // dA = dOut . B^T
                    for i in 0..m {
                        for kk in 0..k {
                            let mut acc = 0.0;
                            let orow = &out_grad[i * n..(i + 1) * n];
                            let brow = &bv[kk * n..(kk + 1) * n];
                            for (og, y) in orow.iter().zip(brow) {
                                acc += og * y;
                            }
                            pa.grad[i * k + kk] += acc;
                        }
                    }
                }
            }
            let mut pb = parents[1].0.borrow_mut();
            if pb.requires_grad {
                // dB = A^T . dOut
                for kk in 0..k {
                    for i in 0..m {
                        let x = av[i * k + kk];
                        if x == 0.0 {
                            continue;
                        }
                        let orow = &out_grad[i * n..(i + 1) * n];
                        let grow = &mut pb.grad[kk * n..(kk + 1) * n];
                        for (g, og) in grow.iter_mut().zip(orow) {
                            *g += x * og;
                        }
                    }
                }
            }
        }),
    ))
}

/// Logistic function, elementwise.
pub fn sigmoid(a: &Tensor) -> Tensor {
    let values: Vec<f64> = a
        .values()
        .iter()
        .map(|&x| 1.0 / (1.0 + (-x).exp()))
        .collect();
    Tensor::from_op(
        a.shape(),
        values,
        vec![a.clone()],
        Box::new(|out_values, out_grad, parents| {
            let mut pa = parents[0].0.borrow_mut();
            if pa.requires_grad {
                for ((g, og), s) in pa.grad.iter_mut().zip(out_grad).zip(out_values) {
                    *g += og * s * (1.0 - s);
                }
            }
        }),
    )
}

/// max(x, 0), elementwise.
pub fn relu(a: &Tensor) -> Tensor {
    let values: Vec<f64> = a.values().iter().map(|&x| x.max(0.0)).collect();
    Tensor::from_op(
        a.shape(),
        values,
        vec![a.clone()],
        Box::new(|out_values, out_grad, parents| {
            let mut pa = parents[0].0.borrow_mut();
            if pa.requires_grad {
                for ((g, og), v) in pa.grad.iter_mut().zip(out_grad).zip(out_values) {
                    if *v > 0.0 {
                        *g += og;
                    }
                }
            }
        }),
    )
}

/// Hyperbolic tangent, elementwise.
pub fn tanh(a: &Tensor) -> Tensor {
    let values: Vec<f64> = a.values().iter().map(|&x| x.tanh()).collect();
    Tensor::from_op(
        a.shape(),
        values,
        vec![a.clone()],
        Box::new(|out_values, out_grad, parents| {
            let mut pa = parents[0].0.borrow_mut();
            if pa.requires_grad {
                for ((g, og), t) in pa.grad.iter_mut().zip(out_grad).zip(out_values) {
                    *g += og * (1.0 - t * t);
                }
            }
        }),
    )
}

/// Row-wise softmax of `a + mask` for an optional additive mask (no gradient
/// flows into the mask; use -1e30 entries to zero positions out exactly —
/// their shifted exponentials underflow to 0.0 and the row renormalizes over
/// what survives).
pub fn masked_softmax(a: &Tensor, mask: Option<&Tensor>) -> Result<Tensor> {
    let (m, n) = want2(a, "softmax", "input")?;
    let mut z = a.values_vec();
    if let Some(mk) = mask {
        if mk.shape() != [m, n] {
            return Err(Error::ShapeMismatch {
                op: "softmax",
                details: format!("mask {:?} vs input [{m},{n}]", mk.shape()),
            });
        }
        for (zi, mi) in z.iter_mut().zip(mk.values().iter()) {
            *zi += mi;
        }
    }
    let mut values = vec![0.0; m * n];
    for r in 0..m {
        let row = &z[r * n..(r + 1) * n];
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut s = 0.0;
        for c in 0..n {
            let e = (row[c] - max).exp();
            values[r * n + c] = e;
            s += e;
        }
        for c in 0..n {
            values[r * n + c] /= s;
        }
    }
    Ok(Tensor::from_op(
        vec![m, n],
        values,
        vec![a.clone()],
        Box::new(move |out_values, out_grad, parents| {
            let mut pa = parents[0].0.borrow_mut();
            if pa.requires_grad {
                for r in 0..m {
                    let o = &out_values[r * n..(r + 1) * n];
                    let og = &out_grad[r * n..(r + 1) * n];
                    let dot: f64 = o.iter().zip(og).map(|(x, y)| x * y).sum();
                    for c in 0..n {
                        pa.grad[r * n + c] += o[c] * (og[c] - dot);
                    }
                }
            }
        }),
    ))
}

/// Concatenation of two 2-D tensors along rows (axis 0) or columns (axis 1).
pub fn concat(a: &Tensor, b: &Tensor, axis: usize) -> Result<Tensor> {
    let (ma, na) = want2(a, "concat", "lhs")?;
    let (mb, nb) = want2(b, "concat", "rhs")?;
    let (shape, values) = match axis {
        0 => {
            if na != nb {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    details: format!("axis 0 needs equal widths: {na} vs {nb}"),
                });
            }
            let mut v = a.values_vec();
            v.extend_from_slice(&b.values_vec());
            (vec![ma + mb, na], v)
        }
        1 => {
            if ma != mb {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    details: format!("axis 1 needs equal heights: {ma} vs {mb}"),
                });
            }
            let av = a.values_vec();
            let bv = b.values_vec();
            let mut v = Vec::with_capacity(ma * (na + nb));
            for r in 0..ma {
                v.extend_from_slice(&av[r * na..(r + 1) * na]);
                v.extend_from_slice(&bv[r * nb..(r + 1) * nb]);
            }
            (vec![ma, na + nb], v)
        }
        _ => {
            return Err(Error::ShapeMismatch {
                op: "concat",
                details: format!("axis {axis} out of range for 2-D"),
            })
        }
    };
    Ok(Tensor::from_op(
        shape,
        values,
        vec![a.clone(), b.clone()],
        Box::new(move |_, out_grad, parents| {
            if axis == 0 {
                {
                    let mut pa = parents[0].0.borrow_mut();
                    if pa.requires_grad {
                        for (g, og) in pa.grad.iter_mut().zip(&out_grad[..ma * na]) {
                            *g += og;
                        }
                    }
                }
                let mut pb = parents[1].0.borrow_mut();
                if pb.requires_grad {
                    for (g, og) in pb.grad.iter_mut().zip(&out_grad[ma * na..]) {
                        *g += og;
                    }
                }
            } else {
                let w = na + nb;
                {
                    let mut pa = parents[0].0.borrow_mut();
                    if pa.requires_grad {
                        for r in 0..ma {
                            for c in 0..na {
                                pa.grad[r * na + c] += out_grad[r * w + c];
                            }
                        }
                    }
                }
                let mut pb = parents[1].0.borrow_mut();
                if pb.requires_grad {
                    for r in 0..ma {
                        for c in 0..nb {
                            pb.grad[r * nb + c] += out_grad[r * w + na + c];
                        }
                    }
                }
            }
        }),
    ))
}

/// Rows [lo, hi) of a 2-D tensor.
pub fn slice_rows(a: &Tensor, lo: usize, hi: usize) -> Result<Tensor> {
    let (m, n) = want2(a, "slice_rows", "input")?;
    if lo > hi || hi > m {
        return Err(Error::ShapeMismatch {
            op: "slice_rows",
            details: format!("range {lo}..{hi} outside 0..{m}"),
        });
    }
    let values = a.values()[lo * n..hi * n].to_vec();
    Ok(Tensor::from_op(
        vec![hi - lo, n],
        values,
        vec![a.clone()],
        Box::new(move |_, out_grad, parents| {
            let mut pa = parents[0].0.borrow_mut();
            if pa.requires_grad {
                for (g, og) in pa.grad[lo * n..hi * n].iter_mut().zip(out_grad) {
                    *g += og;
                }
            }
        }),
    ))
}

/// Rows of a 2-D tensor selected by index, in order (embedding lookup).
pub fn gather_rows(a: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let (m, n) = want2(a, "gather_rows", "input")?;
    if let Some(&bad) = idx.iter().find(|&&i| i >= m) {
        return Err(Error::ShapeMismatch {
            op: "gather_rows",
            details: format!("row index {bad} out of range 0..{m}"),
        });
    }
    let av = a.values();
    let mut values = Vec::with_capacity(idx.len() * n);
    for &i in idx {
        values.extend_from_slice(&av[i * n..(i + 1) * n]);
    }
    drop(av);
    let idx = idx.to_vec();
    Ok(Tensor::from_op(
        vec![idx.len(), n],
        values,
        vec![a.clone()],
        Box::new(move |_, out_grad, parents| {
            let mut pa = parents[0].0.borrow_mut();
            if pa.requires_grad {
                for (k, &i) in idx.iter().enumerate() {
                    for c in 0..n {
                        pa.grad[i * n + c] += out_grad[k * n + c];
                    }
                }
            }
        }),
    ))
}

/// Causal depthwise 1-D convolution: out[c,t] = b[c] + sum_k x[c,t-k] w[c,k]
/// (left-padded with zeros, so output length equals input length and no
/// output sample reads the future).
pub fn conv1d_depthwise(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ch, t_len) = want2(x, "conv1d_depthwise", "input")?;
    let (ch_w, k) = want2(w, "conv1d_depthwise", "kernel")?;
    if ch != ch_w || b.shape() != [ch] {
        return Err(Error::ShapeMismatch {
            op: "conv1d_depthwise",
            details: format!(
                "channels: input {ch}, kernel {ch_w}, bias {:?}",
                b.shape()
            ),
        });
    }
    let xv = x.values_vec();
    let wv = w.values_vec();
    let bv = b.values_vec();
    let mut values = vec![0.0; ch * t_len];
    for c in 0..ch {
        for t in 0..t_len {
            let mut acc = bv[c];
            for kk in 0..k.min(t + 1) {
                acc += xv[c * t_len + t - kk] * wv[c * k + kk];
            }
            values[c * t_len + t] = acc;
        }
    }
    Ok(Tensor::from_op(
        vec![ch, t_len],
        values,
        vec![x.clone(), w.clone(), b.clone()],
        Box::new(move |_, out_grad, parents| {
            {
                let mut px = parents[0].0.borrow_mut();
                if px.requires_grad {
                    for c in 0..ch {
                        for t in 0..t_len {
                            let og = out_grad[c * t_len + t];
                            for kk in 0..k.min(t + 1) {
                                px.grad[c * t_len + t - kk] += og * wv[c * k + kk];
                            }
                        }
                    }
                }
            }
            {
                let mut pw = parents[1].0.borrow_mut();
                if pw.requires_grad {
                    for c in 0..ch {
                        for t in 0..t_len {
                            let og = out_grad[c * t_len + t];
                            for kk in 0..k.min(t + 1) {
                                pw.grad[c * k + kk] += og * xv[c * t_len + t - kk];
                            }
                        }
                    }
                }
            }
            let mut pb = parents[2].0.borrow_mut();
            if pb.requires_grad {
                for c in 0..ch {
                    for t in 0..t_len {
                        pb.grad[c] += out_grad[c * t_len + t];
                    }
                }
            }
        }),
    ))
}

/// Causal full 1-D convolution: out[co,t] = b[co] + sum_{ci,k} x[ci,t-k]
/// w[co,ci,k], left-padded.
pub fn conv1d(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (c_in, t_len) = want2(x, "conv1d", "input")?;
    let (c_out, c_in_w, k) = want3(w, "conv1d", "kernel")?;
    if c_in != c_in_w || b.shape() != [c_out] {
        return Err(Error::ShapeMismatch {
            op: "conv1d",
            details: format!(
                "channels: input {c_in}, kernel wants {c_in_w}, bias {:?} wants [{c_out}]",
                b.shape()
            ),
        });
    }
    let xv = x.values_vec();
    let wv = w.values_vec();
    let bv = b.values_vec();
    let widx = move |co: usize, ci: usize, kk: usize| (co * c_in + ci) * k + kk;
    let mut values = vec![0.0; c_out * t_len];
    for co in 0..c_out {
        for t in 0..t_len {
            let mut acc = bv[co];
            for ci in 0..c_in {
                for kk in 0..k.min(t + 1) {
                    acc += xv[ci * t_len + t - kk] * wv[widx(co, ci, kk)];
                }
            }
            values[co * t_len + t] = acc;
        }
    }
    Ok(Tensor::from_op(
        vec![c_out, t_len],
        values,
        vec![x.clone(), w.clone(), b.clone()],
        Box::new(move |_, out_grad, parents| {
            {
                let mut px = parents[0].0.borrow_mut();
                if px.requires_grad {
                    for co in 0..c_out {
                        for t in 0..t_len {
                            let og = out_grad[co * t_len + t];
                            for ci in 0..c_in {
                                for kk in 0..k.min(t + 1) {
                                    px.grad[ci * t_len + t - kk] += og * wv[widx(co, ci, kk)];
                                }
                            }
                        }
                    }
                }
            }
            {
                let mut pw = parents[1].0.borrow_mut();
                if pw.requires_grad {
                    for co in 0..c_out {
                        for t in 0..t_len {
                            let og = out_grad[co * t_len + t];
                            for ci in 0..c_in {
                                for kk in 0..k.min(t + 1) {
                                    pw.grad[widx(co, ci, kk)] += og * xv[ci * t_len + t - kk];
                                }
                            }
                        }
                    }
                }
            }
            let mut pb = parents[2].0.borrow_mut();
            if pb.requires_grad {
                for co in 0..c_out {
                    for t in 0..t_len {
                        pb.grad[co] += out_grad[co * t_len + t];
                    }
                }
            }
        }),
    ))
}

/// Strided 2-D convolution over [channels, time, freq] input, causal along
/// time (left pad kt-1) and centered along frequency (same padding). Output
/// is [c_out, ceil(T/st), ceil(F/sf)].
pub fn conv2d(
    x: &Tensor,
    w: &Tensor,
    b: &Tensor,
    stride: (usize, usize),
) -> Result<Tensor> {
    let (c_in, t_len, f_len) = want3(x, "conv2d", "input")?;
    let ws = w.shape();
    if ws.len() != 4 || ws[1] != c_in {
        return Err(Error::ShapeMismatch {
            op: "conv2d",
            details: format!("kernel {ws:?} vs input channels {c_in}"),
        });
    }
    let (c_out, kt, kf) = (ws[0], ws[2], ws[3]);
    if b.shape() != [c_out] {
        return Err(Error::ShapeMismatch {
            op: "conv2d",
            details: format!("bias {:?} wants [{c_out}]", b.shape()),
        });
    }
    let (st, sf) = stride;
    if st == 0 || sf == 0 {
        return Err(Error::ShapeMismatch {
            op: "conv2d",
            details: "stride must be >= 1".into(),
        });
    }
    let t_out = t_len.div_ceil(st);
    let f_out = f_len.div_ceil(sf);
    let pad_t = kt - 1; // causal: all of it on the left
    let pad_f = (kf - 1) / 2;

    let xv = x.values_vec();
    let wv = w.values_vec();
    let bv = b.values_vec();
    let xi = move |ci: usize, t: usize, f: usize| (ci * t_len + t) * f_len + f;
    let wi = move |co: usize, ci: usize, a: usize, c: usize| ((co * c_in + ci) * kt + a) * kf + c;

    let mut values = vec![0.0; c_out * t_out * f_out];
    for co in 0..c_out {
        for to in 0..t_out {
            for fo in 0..f_out {
                let mut acc = bv[co];
                for ci in 0..c_in {
                    for a in 0..kt {
                        let ti = (to * st + a) as isize - pad_t as isize;
                        if ti < 0 || ti as usize >= t_len {
                            continue;
                        }
                        for c in 0..kf {
                            let fi = (fo * sf + c) as isize - pad_f as isize;
                            if fi < 0 || fi as usize >= f_len {
                                continue;
                            }
                            acc += xv[xi(ci, ti as usize, fi as usize)] * wv[wi(co, ci, a, c)];
                        }
                    }
                }
                values[(co * t_out + to) * f_out + fo] = acc;
            }
        }
    }
    Ok(Tensor::from_op(
        vec![c_out, t_out, f_out],
        values,
        vec![x.clone(), w.clone(), b.clone()],
        Box::new(move |_, out_grad, parents| {
            let oi = |co: usize, to: usize, fo: usize| (co * t_out + to) * f_out + fo;
            {
                let mut px = parents[0].0.borrow_mut();
                if px.requires_grad {
                    for co in 0..c_out {
                        for to in 0..t_out {
                            for fo in 0..f_out {
                                let og = out_grad[oi(co, to, fo)];
                                for ci in 0..c_in {
                                    for a in 0..kt {
                                        let ti = (to * st + a) as isize - pad_t as isize;
                                        if ti < 0 || ti as usize >= t_len {
                                            continue;
                                        }
                                        for c in 0..kf {
                                            let fi = (fo * sf + c) as isize - pad_f as isize;
                                            if fi < 0 || fi as usize >= f_len {
                                                continue;
                                            }
                                            px.grad[xi(ci, ti as usize, fi as usize)] +=
                                                og * wv[wi(co, ci, a, c)];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            {
                let mut pw = parents[1].0.borrow_mut();
                if pw.requires_grad {
                    for co in 0..c_out {
                        for to in 0..t_out {
                            for fo in 0..f_out {
                                let og = out_grad[oi(co, to, fo)];
                                for ci in 0..c_in {
                                    for a in 0..kt {
                                        let ti = (to * st + a) as isize - pad_t as isize;
                                        if ti < 0 || ti as usize >= t_len {
                                            continue;
                                        }
                                        for c in 0..kf {
                                            let fi = (fo * sf + c) as isize - pad_f as isize;
                                            if fi < 0 || fi as usize >= f_len {
                                                continue;
                                            }
                                            pw.grad[wi(co, ci, a, c)] +=
                                                og * xv[xi(ci, ti as usize, fi as usize)];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            let mut pb = parents[2].0.borrow_mut();
            if pb.requires_grad {
                for co in 0..c_out {
                    for to in 0..t_out {
                        for fo in 0..f_out {
                            pb.grad[co] += out_grad[oi(co, to, fo)];
                        }
                    }
                }
            }
        }),
    ))
}

/// Strided 1-D transposed convolution (upsampling): input [c_in, T], kernel
/// [c_in, c_out, K], output [c_out, (T-1)*stride + K]. With K = stride the
/// output length is exactly T * stride.
pub fn transposed_conv1d(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize) -> Result<Tensor> {
    let (c_in, t_len) = want2(x, "transposed_conv1d", "input")?;
    let (c_in_w, c_out, k) = want3(w, "transposed_conv1d", "kernel")?;
    if c_in != c_in_w || b.shape() != [c_out] {
        return Err(Error::ShapeMismatch {
            op: "transposed_conv1d",
            details: format!(
                "channels: input {c_in}, kernel wants {c_in_w}, bias {:?} wants [{c_out}]",
                b.shape()
            ),
        });
    }
    if stride == 0 || t_len == 0 {
        return Err(Error::ShapeMismatch {
            op: "transposed_conv1d",
            details: format!("stride {stride}, input length {t_len}: both must be >= 1"),
        });
    }
    let out_len = (t_len - 1) * stride + k;
    let xv = x.values_vec();
    let wv = w.values_vec();
    let bv = b.values_vec();
    let wi = move |ci: usize, co: usize, kk: usize| (ci * c_out + co) * k + kk;

    let mut values = vec![0.0; c_out * out_len];
    for co in 0..c_out {
        for v in &mut values[co * out_len..(co + 1) * out_len] {
            *v = bv[co];
        }
    }
    for ci in 0..c_in {
        for t in 0..t_len {
            let xval = xv[ci * t_len + t];
            for co in 0..c_out {
                for kk in 0..k {
                    values[co * out_len + t * stride + kk] += xval * wv[wi(ci, co, kk)];
                }
            }
        }
    }
    Ok(Tensor::from_op(
        vec![c_out, out_len],
        values,
        vec![x.clone(), w.clone(), b.clone()],
        Box::new(move |_, out_grad, parents| {
            {
                let mut px = parents[0].0.borrow_mut();
                if px.requires_grad {
                    for ci in 0..c_in {
                        for t in 0..t_len {
                            let mut acc = 0.0;
                            for co in 0..c_out {
                                for kk in 0..k {
                                    acc += out_grad[co * out_len + t * stride + kk]
                                        * wv[wi(ci, co, kk)];
                                }
                            }
                            px.grad[ci * t_len + t] += acc;
                        }
                    }
                }
            }
            {
                let mut pw = parents[1].0.borrow_mut();
                if pw.requires_grad {
                    for ci in 0..c_in {
                        for t in 0..t_len {
                            let xval = xv[ci * t_len + t];
                            for co in 0..c_out {
                                for kk in 0..k {
                                    pw.grad[wi(ci, co, kk)] +=
                                        xval * out_grad[co * out_len + t * stride + kk];
                                }
                            }
                        }
                    }
                }
            }
            let mut pb = parents[2].0.borrow_mut();
            if pb.requires_grad {
                for co in 0..c_out {
                    for og in &out_grad[co * out_len..(co + 1) * out_len] {
                        pb.grad[co] += og;
                    }
                }
            }
        }),
    ))
}

/// Transpose of a 2-D tensor.
pub fn transpose2d(a: &Tensor) -> Result<Tensor> {
    let (m, n) = want2(a, "transpose2d", "input")?;
    let av = a.values();
    let mut values = vec![0.0; m * n];
    for r in 0..m {
        for c in 0..n {
            values[c * m + r] = av[r * n + c];
        }
    }
    drop(av);
    Ok(Tensor::from_op(
        vec![n, m],
        values,
        vec![a.clone()],
        Box::new(move |_, out_grad, parents| {
            let mut pa = parents[0].0.borrow_mut();
            if pa.requires_grad {
                for r in 0..m {
                    for c in 0..n {
                        pa.grad[r * n + c] += out_grad[c * m + r];
                    }
                }
            }
        }),
    ))
}

/// Reorders a channel-major [c, t, f] tensor into a time-major matrix
/// [t, c*f], the layout a per-frame linear layer consumes.
pub fn time_major(a: &Tensor) -> Result<Tensor> {
    let (ch, t_len, f_len) = want3(a, "time_major", "input")?;
    let av = a.values();
    let w = ch * f_len;
    let mut values = vec![0.0; t_len * w];
    for c in 0..ch {
        for t in 0..t_len {
            for f in 0..f_len {
                values[t * w + c * f_len + f] = av[(c * t_len + t) * f_len + f];
            }
        }
    }
    drop(av);
    Ok(Tensor::from_op(
        vec![t_len, w],
        values,
        vec![a.clone()],
        Box::new(move |_, out_grad, parents| {
            let mut pa = parents[0].0.borrow_mut();
            if pa.requires_grad {
                for c in 0..ch {
                    for t in 0..t_len {
                        for f in 0..f_len {
                            pa.grad[(c * t_len + t) * f_len + f] +=
                                out_grad[t * w + c * f_len + f];
                        }
                    }
                }
            }
        }),
    ))
}

/// Mean binary cross-entropy of predictions in (0,1) against fixed 0/1
/// targets. Predictions are clamped to [1e-12, 1-1e-12]; no gradient flows
/// through a clamped coordinate.
pub fn bce(p: &Tensor, y: &[f64]) -> Result<Tensor> {
    const CLAMP: f64 = 1e-12;
    if p.len() != y.len() {
        return Err(Error::LengthMismatch {
            what: "bce predictions vs targets",
            left: p.len(),
            right: y.len(),
        });
    }
    if p.is_empty() {
        return Err(Error::DegenerateSignal("bce on empty prediction".into()));
    }
    let pv = p.values_vec();
    let n = pv.len() as f64;
    let mut loss = 0.0;
    for (&pi, &yi) in pv.iter().zip(y) {
        let q = pi.clamp(CLAMP, 1.0 - CLAMP);
        loss -= yi * q.ln() + (1.0 - yi) * (1.0 - q).ln();
    }
    loss /= n;
    let y = y.to_vec();
    Ok(Tensor::from_op(
        vec![1],
        vec![loss],
        vec![p.clone()],
        Box::new(move |_, out_grad, parents| {
            let mut pp = parents[0].0.borrow_mut();
            if pp.requires_grad {
                for (i, (&pi, &yi)) in pv.iter().zip(&y).enumerate() {
                    if pi <= CLAMP || pi >= 1.0 - CLAMP {
                        continue;
                    }
                    pp.grad[i] += out_grad[0] * (pi - yi) / (pi * (1.0 - pi)) / n;
                }
            }
        }),
    ))
}

/// Sum of all entries, as a scalar.
pub fn sum(a: &Tensor) -> Tensor {
    let s: f64 = a.values().iter().sum();
    Tensor::from_op(
        vec![1],
        vec![s],
        vec![a.clone()],
        Box::new(|_, out_grad, parents| {
            let mut pa = parents[0].0.borrow_mut();
            if pa.requires_grad {
                for g in pa.grad.iter_mut() {
                    *g += out_grad[0];
                }
            }
        }),
    )
}

/// Mean of all entries, as a scalar.
pub fn mean(a: &Tensor) -> Tensor {
    let n = a.len().max(1) as f64;
    scale(&sum(a), 1.0 / n)
}

/// One GRU step as a composite of primitive ops (update/reset/candidate
/// gates, separate biases on the input and recurrent paths):
///
/// z = sig(x Wz + bz_x + h Uz + bz_h)
/// r = sig(x Wr + br_x + h Ur + br_h)
/// n = tanh(x Wn + bn_x + r * (h Un + bn_h))
/// h' = (1 - z) * n + z * h
///
/// `x` is [batch, n_in], `h` is [batch, n_hidden]; weights are stored
/// input-major ([n_in, n_hidden] / [n_hidden, n_hidden]).
pub struct GruCell {
    pub wz: Tensor,
    pub uz: Tensor,
    pub bz_x: Tensor,
    pub bz_h: Tensor,
    pub wr: Tensor,
    pub ur: Tensor,
    pub br_x: Tensor,
    pub br_h: Tensor,
    pub wn: Tensor,
    pub un: Tensor,
    pub bn_x: Tensor,
    pub bn_h: Tensor,
}

impl GruCell {
    pub fn step(&self, x: &Tensor, h: &Tensor) -> Result<Tensor> {
        let gate = |w: &Tensor, bx: &Tensor, u: &Tensor, bh: &Tensor| -> Result<Tensor> {
            add(
                &add_row(&matmul(x, w)?, bx)?,
                &add_row(&matmul(h, u)?, bh)?,
            )
        };
        let z = sigmoid(&gate(&self.wz, &self.bz_x, &self.uz, &self.bz_h)?);
        let r = sigmoid(&gate(&self.wr, &self.br_x, &self.ur, &self.br_h)?);
        let rec = mul(&r, &add_row(&matmul(h, &self.un)?, &self.bn_h)?)?;
        let n = tanh(&add(&add_row(&matmul(x, &self.wn)?, &self.bn_x)?, &rec)?);
        // h' = n - z*n + z*h
        add(&sub(&n, &mul(&z, &n)?)?, &mul(&z, h)?)
    }
}
