//! Forward and backward kernels. Stride-1 convolution takes a row-slice
//! AXPY path (the training hot spot); everything else is written for
//! clarity at desk-scale sizes.

use super::{GatherPoint, Tensor4};
use crate::scalar::Real;

pub fn zip<S: Real>(a: &Tensor4<S>, b: &Tensor4<S>, f: impl Fn(S, S) -> S) -> Tensor4<S> {
    assert_eq!(a.shape(), b.shape(), "elementwise shape mismatch");
    Tensor4 {
        n: a.n,
        c: a.c,
        h: a.h,
        w: a.w,
        data: a
            .data
            .iter()
            .zip(&b.data)
            .map(|(&x, &y)| f(x, y))
            .collect(),
    }
}

pub fn sigmoid_scalar<S: Real>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// max(z, 0) - z*q + ln(1 + exp(-|z|))
pub fn bce_scalar<S: Real>(z: S, q: S) -> S {
    z.max(S::zero()) - z * q + (-z.abs()).exp().ln_1p()
}

pub fn smooth_l1_scalar<S: Real>(r: S) -> S {
    let a = r.abs();
    if a <= S::one() {
        r * r * S::of(0.5)
    } else {
        a - S::of(0.5)
    }
}

fn conv_out_dim(h: usize, k: usize, stride: usize, pad: usize) -> usize {
    (h + 2 * pad).checked_sub(k).expect("kernel larger than padded input") / stride + 1
}

pub fn conv2d_forward<S: Real>(
    x: &Tensor4<S>,
    w: &Tensor4<S>,
    b: &Tensor4<S>,
    stride: usize,
    pad: usize,
) -> Tensor4<S> {
    assert!(stride >= 1);
    assert_eq!(x.c, w.c, "conv input channels mismatch");
    assert_eq!(b.numel(), w.n, "conv bias length mismatch");
    let (oh, ow) = (
        conv_out_dim(x.h, w.h, stride, pad),
        conv_out_dim(x.w, w.w, stride, pad),
    );
    let mut y = Tensor4::zeros(x.n, w.n, oh, ow);
    for n in 0..x.n {
        for co in 0..w.n {
            let bias = b.data[co];
            let y0 = y.idx(n, co, 0, 0);
            y.data[y0..y0 + oh * ow].fill(bias);
        }
    }
    if stride == 1 {
        conv2d_forward_s1(x, w, &mut y, pad);
        return y;
    }
    for n in 0..x.n {
        for co in 0..w.n {
            for r in 0..oh {
                for c in 0..ow {
                    let mut acc = S::zero();
                    for ci in 0..x.c {
                        for ki in 0..w.h {
                            let ih = (r * stride + ki) as isize - pad as isize;
                            if ih < 0 || ih >= x.h as isize {
                                continue;
                            }
                            for kj in 0..w.w {
                                let iw = (c * stride + kj) as isize - pad as isize;
                                if iw < 0 || iw >= x.w as isize {
                                    continue;
                                }
                                acc += x.at(n, ci, ih as usize, iw as usize)
                                    * w.at(co, ci, ki, kj);
                            }
                        }
                    }
                    let i = y.idx(n, co, r, c);
                    y.data[i] += acc;
                }
            }
        }
    }
    y
}

fn conv2d_forward_s1<S: Real>(x: &Tensor4<S>, w: &Tensor4<S>, y: &mut Tensor4<S>, pad: usize) {
    let (oh, ow) = (y.h, y.w);
    let p = pad as isize;
    // Row-blocked: accumulate one output row in a hot buffer so the y row
    // is loaded and stored once instead of once per (ci, ki, kj). The
    // per-element addition order (ci-, ki-, kj-ascending) is unchanged.
    let mut acc = vec![S::zero(); ow];
    for n in 0..x.n {
        for co in 0..w.n {
            for r in 0..oh {
                let y0 = y.idx(n, co, r, 0);
                acc.copy_from_slice(&y.data[y0..y0 + ow]);
                for ci in 0..x.c {
                    for ki in 0..w.h {
                        let ih = r as isize + ki as isize - p;
                        if ih < 0 || ih >= x.h as isize {
                            continue;
                        }
                        let x0 = x.idx(n, ci, ih as usize, 0);
                        let xrow = &x.data[x0..x0 + x.w];
                        let w0 = w.idx(co, ci, ki, 0);
                        for kj in 0..w.w {
                            let wv = w.data[w0 + kj];
                            let dj = kj as isize - p;
                            let c0 = (-dj).max(0) as usize;
                            let c1 = (ow as isize).min(x.w as isize - dj).max(0) as usize;
                            if c0 >= c1 {
                                continue;
                            }
                            let xs = &xrow[(c0 as isize + dj) as usize..(c1 as isize + dj) as usize];
                            for (yv, &xv) in acc[c0..c1].iter_mut().zip(xs) {
                                *yv += wv * xv;
                            }
                        }
                    }
                }
                y.data[y0..y0 + ow].copy_from_slice(&acc);
            }
        }
    }
}

pub fn conv2d_backward<S: Real>(
    x: &Tensor4<S>,
    w: &Tensor4<S>,
    gy: &Tensor4<S>,
    stride: usize,
    pad: usize,
    need_dx: bool,
) -> (Tensor4<S>, Tensor4<S>, Tensor4<S>) {
    let mut dx = Tensor4::zeros_like(x);
    let mut dw = Tensor4::zeros_like(w);
    let mut db = Tensor4::zeros(w.n, 1, 1, 1);
    for n in 0..gy.n {
        for co in 0..gy.c {
            let g0 = gy.idx(n, co, 0, 0);
            db.data[co] += gy.data[g0..g0 + gy.h * gy.w].iter().copied().sum();
        }
    }
    if stride == 1 {
        conv2d_backward_s1(x, w, gy, &mut dx, &mut dw, pad, need_dx);
        return (dx, dw, db);
    }
    let p = pad as isize;
    for n in 0..x.n {
        for co in 0..w.n {
            for r in 0..gy.h {
                for c in 0..gy.w {
                    let g = gy.at(n, co, r, c);
                    for ci in 0..x.c {
                        for ki in 0..w.h {
                            let ih = (r * stride + ki) as isize - p;
                            if ih < 0 || ih >= x.h as isize {
                                continue;
                            }
                            for kj in 0..w.w {
                                let iw = (c * stride + kj) as isize - p;
                                if iw < 0 || iw >= x.w as isize {
                                    continue;
                                }
                                let xi = x.idx(n, ci, ih as usize, iw as usize);
                                let wi = w.idx(co, ci, ki, kj);
                                dw.data[wi] += x.data[xi] * g;
                                if need_dx {
                                    dx.data[xi] += w.data[wi] * g;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

fn conv2d_backward_s1<S: Real>(
    x: &Tensor4<S>,
    w: &Tensor4<S>,
    gy: &Tensor4<S>,
    dx: &mut Tensor4<S>,
    dw: &mut Tensor4<S>,
    pad: usize,
    need_dx: bool,
) {
    let (oh, ow) = (gy.h, gy.w);
    let p = pad as isize;
    for n in 0..x.n {
        for co in 0..w.n {
            for ci in 0..x.c {
                for ki in 0..w.h {
                    for kj in 0..w.w {
                        let dj = kj as isize - p;
                        let c0 = (-dj).max(0) as usize;
                        let c1 = (ow as isize).min(x.w as isize - dj).max(0) as usize;
                        if c0 >= c1 {
                            continue;
                        }
                        let len = c1 - c0;
                        let mut wacc = S::zero();
                        let wv = w.at(co, ci, ki, kj);
                        for r in 0..oh {
                            let ih = r as isize + ki as isize - p;
                            if ih < 0 || ih >= x.h as isize {
                                continue;
                            }
                            let xi = x.idx(n, ci, ih as usize, (c0 as isize + dj) as usize);
                            let gi = gy.idx(n, co, r, c0);
                            let xs = &x.data[xi..xi + len];
                            let gs = &gy.data[gi..gi + len];
                            for (&xv, &gv) in xs.iter().zip(gs) {
                                wacc += xv * gv;
                            }
                            if need_dx {
                                let ds = &mut dx.data[xi..xi + len];
                                for (dv, &gv) in ds.iter_mut().zip(gs) {
                                    *dv += wv * gv;
                                }
                            }
                        }
                        let wi = dw.idx(co, ci, ki, kj);
                        dw.data[wi] += wacc;
                    }
                }
            }
        }
    }
}

/// Transposed convolution. Weight layout (C_in, C_out, kh, kw); output
/// spatial size (H-1)*stride + k - 2*pad + out_pad.
pub fn deconv2d_forward<S: Real>(
    x: &Tensor4<S>,
    w: &Tensor4<S>,
    b: &Tensor4<S>,
    stride: usize,
    pad: usize,
    out_pad: usize,
) -> Tensor4<S> {
    assert!(stride >= 1);
    assert!(out_pad < stride, "output padding must be < stride");
    assert_eq!(x.c, w.n, "deconv input channels mismatch");
    assert_eq!(b.numel(), w.c, "deconv bias length mismatch");
    let oh = (x.h - 1) * stride + w.h + out_pad;
    let ow = (x.w - 1) * stride + w.w + out_pad;
    let oh = oh.checked_sub(2 * pad).expect("deconv padding too large");
    let ow = ow.checked_sub(2 * pad).expect("deconv padding too large");
    let mut y = Tensor4::zeros(x.n, w.c, oh, ow);
    for n in 0..x.n {
        for co in 0..w.c {
            let bias = b.data[co];
            let y0 = y.idx(n, co, 0, 0);
            y.data[y0..y0 + oh * ow].fill(bias);
        }
    }
    let p = pad as isize;
    // Gather per output row. Iterating ki descending makes the source row
    // index ascend, matching the scatter formulation's per-element
    // accumulation order (ci, ih ascending) bit for bit.
    let mut acc = vec![S::zero(); ow];
    for n in 0..x.n {
        for co in 0..w.c {
            for r in 0..oh {
                let y0 = y.idx(n, co, r, 0);
                acc.copy_from_slice(&y.data[y0..y0 + ow]);
                for ci in 0..x.c {
                    for ki in (0..w.h).rev() {
                        let ihs = r as isize + p - ki as isize;
                        if ihs < 0 || ihs % stride as isize != 0 {
                            continue;
                        }
                        let ih = (ihs / stride as isize) as usize;
                        if ih >= x.h {
                            continue;
                        }
                        let x0 = x.idx(n, ci, ih, 0);
                        let xrow = &x.data[x0..x0 + x.w];
                        let w0 = w.idx(ci, co, ki, 0);
                        for kj in 0..w.w {
                            let wv = w.data[w0 + kj];
                            let off = kj as isize - p;
                            // Valid input columns: 0 <= iw*stride + off < ow.
                            let iw0 = ((-off + stride as isize - 1).max(0) / stride as isize) as usize;
                            let iw1 = (((ow as isize - 1 - off) / stride as isize) + 1)
                                .clamp(0, x.w as isize) as usize;
                            if iw0 >= iw1 {
                                continue;
                            }
                            let mut c = (iw0 * stride) as isize + off;
                            for &xv in &xrow[iw0..iw1] {
                                acc[c as usize] += wv * xv;
                                c += stride as isize;
                            }
                        }
                    }
                }
                y.data[y0..y0 + ow].copy_from_slice(&acc);
            }
        }
    }
    y
}

pub fn deconv2d_backward<S: Real>(
    x: &Tensor4<S>,
    w: &Tensor4<S>,
    gy: &Tensor4<S>,
    stride: usize,
    pad: usize,
) -> (Tensor4<S>, Tensor4<S>, Tensor4<S>) {
    let mut dx = Tensor4::zeros_like(x);
    let mut dw = Tensor4::zeros_like(w);
    let mut db = Tensor4::zeros(w.c, 1, 1, 1);
    for n in 0..gy.n {
        for co in 0..gy.c {
            let g0 = gy.idx(n, co, 0, 0);
            db.data[co] += gy.data[g0..g0 + gy.h * gy.w].iter().copied().sum();
        }
    }
    let p = pad as isize;
    // Two row-sliced passes. Per-element accumulation orders match the
    // fused scalar form: dx sums (co, ki, kj) ascending, dw sums source
    // positions (ih, iw) ascending.
    for n in 0..x.n {
        for ci in 0..x.c {
            for ih in 0..x.h {
                let x0 = x.idx(n, ci, ih, 0);
                let dxrow = &mut dx.data[x0..x0 + x.w];
                for co in 0..w.c {
                    for ki in 0..w.h {
                        let r = (ih * stride + ki) as isize - p;
                        if r < 0 || r >= gy.h as isize {
                            continue;
                        }
                        let g0 = gy.idx(n, co, r as usize, 0);
                        let grow = &gy.data[g0..g0 + gy.w];
                        let w0 = w.idx(ci, co, ki, 0);
                        for kj in 0..w.w {
                            let wv = w.data[w0 + kj];
                            let off = kj as isize - p;
                            let iw0 = ((-off + stride as isize - 1).max(0) / stride as isize)
                                as usize;
                            let iw1 = (((gy.w as isize - 1 - off) / stride as isize) + 1)
                                .clamp(0, x.w as isize) as usize;
                            if iw0 >= iw1 {
                                continue;
                            }
                            let mut c = (iw0 * stride) as isize + off;
                            for dv in &mut dxrow[iw0..iw1] {
                                *dv += wv * grow[c as usize];
                                c += stride as isize;
                            }
                        }
                    }
                }
            }
        }
    }
    for n in 0..x.n {
        for ci in 0..x.c {
            for co in 0..w.c {
                for ki in 0..w.h {
                    for kj in 0..w.w {
                        let off = kj as isize - p;
                        let iw0 =
                            ((-off + stride as isize - 1).max(0) / stride as isize) as usize;
                        let iw1 = (((gy.w as isize - 1 - off) / stride as isize) + 1)
                            .clamp(0, x.w as isize) as usize;
                        if iw0 >= iw1 {
                            continue;
                        }
                        let mut wacc = S::zero();
                        for ih in 0..x.h {
                            let r = (ih * stride + ki) as isize - p;
                            if r < 0 || r >= gy.h as isize {
                                continue;
                            }
                            let x0 = x.idx(n, ci, ih, 0);
                            let g0 = gy.idx(n, co, r as usize, 0);
                            let xs = &x.data[x0 + iw0..x0 + iw1];
                            let mut c = (iw0 * stride) as isize + off;
                            for &xv in xs {
                                wacc += xv * gy.data[g0 + c as usize];
                                c += stride as isize;
                            }
                        }
                        let wi = w.idx(ci, co, ki, kj);
                        dw.data[wi] += wacc;
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

/// Max pooling without padding; ties keep the first element scanned.
/// Returns the pooled tensor and flat input argmax per output element.
pub fn maxpool2d_forward<S: Real>(x: &Tensor4<S>, k: usize, s: usize) -> (Tensor4<S>, Vec<usize>) {
    assert!(k >= 1 && s >= 1);
    assert!(x.h >= k && x.w >= k, "pool window exceeds input");
    let oh = (x.h - k) / s + 1;
    let ow = (x.w - k) / s + 1;
    let mut y = Tensor4::zeros(x.n, x.c, oh, ow);
    let mut argmax = vec![0usize; y.numel()];
    for n in 0..x.n {
        for c in 0..x.c {
            for r in 0..oh {
                for q in 0..ow {
                    let mut best_i = x.idx(n, c, r * s, q * s);
                    let mut best = x.data[best_i];
                    for ki in 0..k {
                        for kj in 0..k {
                            let i = x.idx(n, c, r * s + ki, q * s + kj);
                            if x.data[i] > best {
                                best = x.data[i];
                                best_i = i;
                            }
                        }
                    }
                    let yi = y.idx(n, c, r, q);
                    y.data[yi] = best;
                    argmax[yi] = best_i;
                }
            }
        }
    }
    (y, argmax)
}

/// Align-corners-false bilinear resize with replicated borders.
pub fn bilinear_resize_forward<S: Real>(x: &Tensor4<S>, out_h: usize, out_w: usize) -> Tensor4<S> {
    assert!(out_h >= 1 && out_w >= 1);
    let mut y = Tensor4::zeros(x.n, x.c, out_h, out_w);
    let taps_h = resize_taps(x.h, out_h);
    let taps_w = resize_taps(x.w, out_w);
    for n in 0..x.n {
        for c in 0..x.c {
            for (r, &(r0, r1, fr)) in taps_h.iter().enumerate() {
                for (q, &(c0, c1, fc)) in taps_w.iter().enumerate() {
                    let v00 = x.at(n, c, r0, c0).as_f64();
                    let v01 = x.at(n, c, r0, c1).as_f64();
                    let v10 = x.at(n, c, r1, c0).as_f64();
                    let v11 = x.at(n, c, r1, c1).as_f64();
                    let v = v00 * (1.0 - fr) * (1.0 - fc)
                        + v01 * (1.0 - fr) * fc
                        + v10 * fr * (1.0 - fc)
                        + v11 * fr * fc;
                    y.set(n, c, r, q, S::of(v));
                }
            }
        }
    }
    y
}

pub fn bilinear_resize_backward<S: Real>(x: &Tensor4<S>, gy: &Tensor4<S>) -> Tensor4<S> {
    let mut dx = Tensor4::zeros_like(x);
    let taps_h = resize_taps(x.h, gy.h);
    let taps_w = resize_taps(x.w, gy.w);
    for n in 0..x.n {
        for c in 0..x.c {
            for (r, &(r0, r1, fr)) in taps_h.iter().enumerate() {
                for (q, &(c0, c1, fc)) in taps_w.iter().enumerate() {
                    let g = gy.at(n, c, r, q);
                    let add = |dx: &mut Tensor4<S>, rr: usize, cc: usize, wgt: f64| {
                        let i = dx.idx(n, c, rr, cc);
                        dx.data[i] += g * S::of(wgt);
                    };
                    add(&mut dx, r0, c0, (1.0 - fr) * (1.0 - fc));
                    add(&mut dx, r0, c1, (1.0 - fr) * fc);
                    add(&mut dx, r1, c0, fr * (1.0 - fc));
                    add(&mut dx, r1, c1, fr * fc);
                }
            }
        }
    }
    dx
}

/// Source taps (lo index, hi index, fraction) per output position.
fn resize_taps(in_dim: usize, out_dim: usize) -> Vec<(usize, usize, f64)> {
    let scale = in_dim as f64 / out_dim as f64;
    (0..out_dim)
        .map(|i| {
            let src = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(in_dim - 1);
            let hi = (lo + 1).min(in_dim - 1);
            let f = if hi > lo { src - lo as f64 } else { 0.0 };
            (lo, hi, f)
        })
        .collect()
}

pub fn concat_channels_forward<S: Real>(parts: &[&Tensor4<S>]) -> Tensor4<S> {
    let (n, h, w) = (parts[0].n, parts[0].h, parts[0].w);
    let c: usize = parts.iter().map(|p| p.c).sum();
    for p in parts {
        assert_eq!((p.n, p.h, p.w), (n, h, w), "concat shape mismatch");
    }
    let mut y = Tensor4::zeros(n, c, h, w);
    for b in 0..n {
        let mut c_off = 0;
        for p in parts {
            let src0 = p.idx(b, 0, 0, 0);
            let dst0 = y.idx(b, c_off, 0, 0);
            let len = p.c * h * w;
            y.data[dst0..dst0 + len].copy_from_slice(&p.data[src0..src0 + len]);
            c_off += p.c;
        }
    }
    y
}

pub fn slice_channels<S: Real>(x: &Tensor4<S>, c0: usize, c_len: usize) -> Tensor4<S> {
    let mut y = Tensor4::zeros(x.n, c_len, x.h, x.w);
    for n in 0..x.n {
        let src0 = x.idx(n, c0, 0, 0);
        let dst0 = y.idx(n, 0, 0, 0);
        let len = c_len * x.h * x.w;
        y.data[dst0..dst0 + len].copy_from_slice(&x.data[src0..src0 + len]);
    }
    y
}

pub fn bilinear_taps(x: f64, dim: usize) -> Option<(usize, usize, f64)> {
    if !(0.0..=(dim - 1) as f64).contains(&x) {
        return None;
    }
    let lo = (x.floor() as usize).min(dim - 1);
    let hi = (lo + 1).min(dim - 1);
    let f = if hi > lo { x - lo as f64 } else { 0.0 };
    Some((lo, hi, f))
}

pub fn gather_bilinear_forward<S: Real>(
    x: &Tensor4<S>,
    points: &[GatherPoint],
    oob_value: S,
) -> Tensor4<S> {
    assert_eq!(x.n, 1, "gather expects a unit batch");
    let mut y = Tensor4::zeros(1, 1, 1, points.len());
    for (i, p) in points.iter().enumerate() {
        assert!(p.channel < x.c, "gather channel out of range");
        let v = match (bilinear_taps(p.row, x.h), bilinear_taps(p.col, x.w)) {
            (Some((r0, r1, fr)), Some((c0, c1, fc))) => {
                let v00 = x.at(0, p.channel, r0, c0).as_f64();
                let v01 = x.at(0, p.channel, r0, c1).as_f64();
                let v10 = x.at(0, p.channel, r1, c0).as_f64();
                let v11 = x.at(0, p.channel, r1, c1).as_f64();
                S::of(
                    v00 * (1.0 - fr) * (1.0 - fc)
                        + v01 * (1.0 - fr) * fc
                        + v10 * fr * (1.0 - fc)
                        + v11 * fr * fc,
                )
            }
            _ => oob_value,
        };
        y.data[i] = v;
    }
    y
}

pub fn gather_bilinear_backward<S: Real>(
    x: &Tensor4<S>,
    points: &[GatherPoint],
    gy: &Tensor4<S>,
) -> Tensor4<S> {
    let mut dx = Tensor4::zeros_like(x);
    gather_bilinear_scatter(&mut dx, points, gy);
    dx
}

/// Scatter a gather's gradient into an existing full-size buffer, so many
/// gathers against one tensor share a single allocation.
pub fn gather_bilinear_scatter<S: Real>(
    dx: &mut Tensor4<S>,
    points: &[GatherPoint],
    gy: &Tensor4<S>,
) {
    for (i, p) in points.iter().enumerate() {
        let g = gy.data[i];
        if let (Some((r0, r1, fr)), Some((c0, c1, fc))) =
            (bilinear_taps(p.row, dx.h), bilinear_taps(p.col, dx.w))
        {
            let mut add = |rr: usize, cc: usize, wgt: f64| {
                let idx = dx.idx(0, p.channel, rr, cc);
                dx.data[idx] += g * S::of(wgt);
            };
            add(r0, c0, (1.0 - fr) * (1.0 - fc));
            add(r0, c1, (1.0 - fr) * fc);
            add(r1, c0, fr * (1.0 - fc));
            add(r1, c1, fr * fc);
        }
    }
}
