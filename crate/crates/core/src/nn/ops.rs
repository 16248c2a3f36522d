//! Forward and reverse-mode kernels. Batched `[N, H, W, C]`, channel-major
//! inner loops. Parallel paths split work per example (or in fixed-size
//! example chunks for reductions) so results are identical at any thread
//! count.

use super::tensor::{Scalar, Tensor};
use super::NnError;
use rayon::prelude::*;

/// Examples per partial accumulator in parallel reductions. Fixed so the
/// summation order does not depend on the thread count.
const REDUCE_CHUNK: usize = 16;

fn shape4(t: &Tensor<impl Scalar>, op: &'static str) -> Result<[usize; 4], NnError> {
    match t.shape() {
        &[a, b, c, d] => Ok([a, b, c, d]),
        other => Err(NnError::ShapeMismatch {
            op,
            detail: format!("expected rank-4 tensor, got shape {other:?}"),
        }),
    }
}

pub fn conv_out_dim(input: usize, k: usize, stride: usize, pad: usize) -> usize {
    (input + 2 * pad - k) / stride + 1
}

/// Convolution of `[N,H,W,C]` with filters `[k,k,C,CO]`.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    filters: &Tensor<T>,
    stride: usize,
    pad: usize,
    par: bool,
) -> Result<Tensor<T>, NnError> {
    let [n, h, w, c] = shape4(input, "conv2d")?;
    let [kh, kw, fc, co] = shape4(filters, "conv2d")?;
    if kh != kw {
        return Err(NnError::ShapeMismatch {
            op: "conv2d",
            detail: format!("filters must be square, got {kh}x{kw}"),
        });
    }
    if fc != c {
        return Err(NnError::ShapeMismatch {
            op: "conv2d",
            detail: format!("input has {c} channels but filters expect {fc}"),
        });
    }
    if kh > h + 2 * pad || kw > w + 2 * pad {
        return Err(NnError::ShapeMismatch {
            op: "conv2d",
            detail: format!("{kh}x{kw} filter exceeds padded input {h}x{w} (pad {pad})"),
        });
    }
    let ho = conv_out_dim(h, kh, stride, pad);
    let wo = conv_out_dim(w, kw, stride, pad);
    let mut out = vec![T::zero(); n * ho * wo * co];
    let x = input.data();
    let f = filters.data();

    let work = |ni: usize, out_n: &mut [T]| {
        for oy in 0..ho {
            for ox in 0..wo {
                let out_px = &mut out_n[(oy * wo + ox) * co..(oy * wo + ox) * co + co];
                for i in 0..kh {
                    let iy = (oy * stride + i) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for j in 0..kw {
                        let ix = (ox * stride + j) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let in_base = ((ni * h + iy as usize) * w + ix as usize) * c;
                        let f_base = (i * kw + j) * c * co;
                        for ch in 0..c {
                            let v = x[in_base + ch];
                            let frow = &f[f_base + ch * co..f_base + ch * co + co];
                            for (o, fk) in out_px.iter_mut().zip(frow) {
                                *o += v * *fk;
                            }
                        }
                    }
                }
            }
        }
    };

    let chunk = ho * wo * co;
    if par && n > 1 {
        out.par_chunks_mut(chunk).enumerate().for_each(|(ni, o)| work(ni, o));
    } else {
        out.chunks_mut(chunk).enumerate().for_each(|(ni, o)| work(ni, o));
    }
    Ok(Tensor::from_vec(&[n, ho, wo, co], out))
}

/// Gradients of `conv2d` w.r.t. input and filters.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    filters: &Tensor<T>,
    gout: &Tensor<T>,
    stride: usize,
    pad: usize,
    par: bool,
) -> (Tensor<T>, Tensor<T>) {
    let [n, h, w, c] = shape4(input, "conv2d_backward").unwrap();
    let [kh, kw, _, co] = shape4(filters, "conv2d_backward").unwrap();
    let [gn, ho, wo, gco] = shape4(gout, "conv2d_backward").unwrap();
    assert_eq!((gn, gco), (n, co), "gradient batch/channels");

    let x = input.data();
    let f = filters.data();
    let g = gout.data();

    // d input: each example's rows are disjoint.
    let mut gin = vec![T::zero(); x.len()];
    let gin_work = |ni: usize, gin_n: &mut [T]| {
        for oy in 0..ho {
            for ox in 0..wo {
                let g_px = &g[((ni * ho + oy) * wo + ox) * co..((ni * ho + oy) * wo + ox) * co + co];
                for i in 0..kh {
                    let iy = (oy * stride + i) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for j in 0..kw {
                        let ix = (ox * stride + j) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let gin_base = (iy as usize * w + ix as usize) * c;
                        let f_base = (i * kw + j) * c * co;
                        for ch in 0..c {
                            let frow = &f[f_base + ch * co..f_base + ch * co + co];
                            let mut acc = T::zero();
                            for (gv, fk) in g_px.iter().zip(frow) {
                                acc += *gv * *fk;
                            }
                            gin_n[gin_base + ch] += acc;
                        }
                    }
                }
            }
        }
    };
    let gin_chunk = h * w * c;
    if par && n > 1 {
        gin.par_chunks_mut(gin_chunk).enumerate().for_each(|(ni, o)| gin_work(ni, o));
    } else {
        gin.chunks_mut(gin_chunk).enumerate().for_each(|(ni, o)| gin_work(ni, o));
    }

    // d filters: reduce over examples in fixed-size chunks, then fold the
    // partials in chunk order.
    let flen = filters.len();
    let gfilt_for = |examples: std::ops::Range<usize>| {
        let mut gf = vec![T::zero(); flen];
        for ni in examples {
            for oy in 0..ho {
                for ox in 0..wo {
                    let g_px =
                        &g[((ni * ho + oy) * wo + ox) * co..((ni * ho + oy) * wo + ox) * co + co];
                    for i in 0..kh {
                        let iy = (oy * stride + i) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for j in 0..kw {
                            let ix = (ox * stride + j) as isize - pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let in_base = ((ni * h + iy as usize) * w + ix as usize) * c;
                            let f_base = (i * kw + j) * c * co;
                            for ch in 0..c {
                                let v = x[in_base + ch];
                                let grow = &mut gf[f_base + ch * co..f_base + ch * co + co];
                                for (gf_v, gv) in grow.iter_mut().zip(g_px) {
                                    *gf_v += v * *gv;
                                }
                            }
                        }
                    }
                }
            }
        }
        gf
    };

    let ranges: Vec<std::ops::Range<usize>> = (0..n)
        .step_by(REDUCE_CHUNK)
        .map(|start| start..(start + REDUCE_CHUNK).min(n))
        .collect();
    let partials: Vec<Vec<T>> = if par && ranges.len() > 1 {
        ranges.into_par_iter().map(gfilt_for).collect()
    } else {
        ranges.into_iter().map(gfilt_for).collect()
    };
    let mut gfilt = vec![T::zero(); flen];
    for part in partials {
        for (a, b) in gfilt.iter_mut().zip(part) {
            *a += b;
        }
    }

    (
        Tensor::from_vec(&[n, h, w, c], gin),
        Tensor::from_vec(filters.shape(), gfilt),
    )
}

/// Elementwise `max(x, 0)`.
pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient of ReLU: pass where the forward input was strictly positive.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, gout: &Tensor<T>) -> Tensor<T> {
    assert_eq!(input.shape(), gout.shape());
    let data = input
        .data()
        .iter()
        .zip(gout.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(input.shape(), data)
}

/// Windowed maximum with argmax capture for the backward pass. Ties pick the
/// first element in scan order.
pub fn maxpool<T: Scalar>(
    input: &Tensor<T>,
    k: usize,
    stride: usize,
    pad: usize,
) -> (Tensor<T>, Vec<u32>) {
    let [n, h, w, c] = shape4(input, "maxpool").unwrap();
    let ho = conv_out_dim(h, k, stride, pad);
    let wo = conv_out_dim(w, k, stride, pad);
    let x = input.data();
    let mut out = Vec::with_capacity(n * ho * wo * c);
    let mut arg = Vec::with_capacity(n * ho * wo * c);
    for ni in 0..n {
        for oy in 0..ho {
            for ox in 0..wo {
                for ch in 0..c {
                    let mut best = T::neg_infinity();
                    let mut best_at = u32::MAX;
                    for i in 0..k {
                        let iy = (oy * stride + i) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for j in 0..k {
                            let ix = (ox * stride + j) as isize - pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let at = ((ni * h + iy as usize) * w + ix as usize) * c + ch;
                            if x[at] > best {
                                best = x[at];
                                best_at = at as u32;
                            }
                        }
                    }
                    out.push(best);
                    arg.push(best_at);
                }
            }
        }
    }
    (Tensor::from_vec(&[n, ho, wo, c], out), arg)
}

/// Route pooled gradients back to the argmax positions.
pub fn maxpool_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[u32],
    gout: &Tensor<T>,
) -> Tensor<T> {
    let mut gin = Tensor::zeros(input_shape);
    let gd = gin.data_mut();
    for (&at, &g) in argmax.iter().zip(gout.data()) {
        gd[at as usize] += g;
    }
    gin
}

/// Per-channel mean over all spatial positions: `[N,H,W,C] -> [N,C]`.
pub fn avgpool_global<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let [n, h, w, c] = shape4(input, "avgpool_global").unwrap();
    let x = input.data();
    let inv = T::one() / T::of((h * w) as f64);
    let mut out = vec![T::zero(); n * c];
    for ni in 0..n {
        let acc = &mut out[ni * c..(ni + 1) * c];
        for px in x[ni * h * w * c..(ni + 1) * h * w * c].chunks_exact(c) {
            for (a, &v) in acc.iter_mut().zip(px) {
                *a += v;
            }
        }
        for a in acc.iter_mut() {
            *a *= inv;
        }
    }
    Tensor::from_vec(&[n, c], out)
}

/// Gradient of the global average pool: spread evenly over positions.
pub fn avgpool_global_backward<T: Scalar>(input_shape: &[usize], gout: &Tensor<T>) -> Tensor<T> {
    let (n, h, w, c) = (input_shape[0], input_shape[1], input_shape[2], input_shape[3]);
    let inv = T::one() / T::of((h * w) as f64);
    let g = gout.data();
    let mut gin = Vec::with_capacity(n * h * w * c);
    for ni in 0..n {
        for _ in 0..h * w {
            for ch in 0..c {
                gin.push(g[ni * c + ch] * inv);
            }
        }
    }
    Tensor::from_vec(input_shape, gin)
}

/// Classifier head: `scores = A x + b` for each row of `x: [N,C]`,
/// `A: [K,C]`, `b: [K]`.
pub fn linear<T: Scalar>(x: &Tensor<T>, a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let (n, c) = (x.shape()[0], x.shape()[1]);
    let k = a.shape()[0];
    assert_eq!(a.shape()[1], c, "weight columns vs features");
    assert_eq!(b.shape(), &[k]);
    let mut out = Vec::with_capacity(n * k);
    for ni in 0..n {
        let row = &x.data()[ni * c..(ni + 1) * c];
        for j in 0..k {
            let wrow = &a.data()[j * c..(j + 1) * c];
            let mut acc = b.data()[j];
            for (xv, wv) in row.iter().zip(wrow) {
                acc += *xv * *wv;
            }
            out.push(acc);
        }
    }
    Tensor::from_vec(&[n, k], out)
}

/// Gradients of [`linear`]: returns `(d x, d A, d b)`.
pub fn linear_backward<T: Scalar>(
    x: &Tensor<T>,
    a: &Tensor<T>,
    gout: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (n, c) = (x.shape()[0], x.shape()[1]);
    let k = a.shape()[0];
    let mut gx = vec![T::zero(); n * c];
    let mut ga = vec![T::zero(); k * c];
    let mut gb = vec![T::zero(); k];
    for ni in 0..n {
        let xrow = &x.data()[ni * c..(ni + 1) * c];
        let grow = &gout.data()[ni * k..(ni + 1) * k];
        for j in 0..k {
            let g = grow[j];
            gb[j] += g;
            let warow = &a.data()[j * c..(j + 1) * c];
            let garow = &mut ga[j * c..(j + 1) * c];
            let gxrow = &mut gx[ni * c..(ni + 1) * c];
            for ch in 0..c {
                garow[ch] += g * xrow[ch];
                gxrow[ch] += g * warow[ch];
            }
        }
    }
    (
        Tensor::from_vec(&[n, c], gx),
        Tensor::from_vec(a.shape(), ga),
        Tensor::from_vec(&[k], gb),
    )
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Scalar>(scores: &Tensor<T>) -> Tensor<T> {
    let (n, k) = (scores.shape()[0], scores.shape()[1]);
    let mut out = Vec::with_capacity(n * k);
    for ni in 0..n {
        let row = &scores.data()[ni * k..(ni + 1) * k];
        let m = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&v| (v - m).exp()).collect();
        let z = exps.iter().fold(T::zero(), |acc, &e| acc + e);
        out.extend(exps.into_iter().map(|e| e / z));
    }
    Tensor::from_vec(&[n, k], out)
}

/// Batch-normalization training forward. Returns the output, the cached
/// normalized activations, and the per-channel batch mean/variance.
pub struct BnCache<T> {
    pub xhat: Tensor<T>,
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

pub const BN_EPS: f64 = 1e-5;

pub fn batchnorm_train<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
) -> (Tensor<T>, BnCache<T>) {
    let [n, h, w, c] = shape4(input, "batchnorm").unwrap();
    let m = T::of((n * h * w) as f64);
    let x = input.data();
    let mut mean = vec![T::zero(); c];
    for px in x.chunks_exact(c) {
        for (a, &v) in mean.iter_mut().zip(px) {
            *a += v;
        }
    }
    for a in mean.iter_mut() {
        *a = *a / m;
    }
    let mut var = vec![T::zero(); c];
    for px in x.chunks_exact(c) {
        for ((a, &v), &mu) in var.iter_mut().zip(px).zip(&mean) {
            let d = v - mu;
            *a += d * d;
        }
    }
    for a in var.iter_mut() {
        *a = *a / m;
    }
    let eps = T::of(BN_EPS);
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = Vec::with_capacity(x.len());
    let mut out = Vec::with_capacity(x.len());
    for px in x.chunks_exact(c) {
        for ch in 0..c {
            let xh = (px[ch] - mean[ch]) * inv_std[ch];
            xhat.push(xh);
            out.push(gamma.data()[ch] * xh + beta.data()[ch]);
        }
    }
    (
        Tensor::from_vec(&[n, h, w, c], out),
        BnCache { xhat: Tensor::from_vec(&[n, h, w, c], xhat), mean, var },
    )
}

/// Inference-mode batch norm using running statistics.
pub fn batchnorm_eval<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &[T],
    running_var: &[T],
) -> Tensor<T> {
    let c = *input.shape().last().unwrap();
    let eps = T::of(BN_EPS);
    let inv_std: Vec<T> = running_var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut data = Vec::with_capacity(input.len());
    for px in input.data().chunks_exact(c) {
        for ch in 0..c {
            data.push(
                gamma.data()[ch] * (px[ch] - running_mean[ch]) * inv_std[ch] + beta.data()[ch],
            );
        }
    }
    Tensor::from_vec(input.shape(), data)
}

/// Gradients of batch norm: `(d input, d gamma, d beta)`.
pub fn batchnorm_backward<T: Scalar>(
    cache: &BnCache<T>,
    gamma: &Tensor<T>,
    gout: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let shape = cache.xhat.shape().to_vec();
    let c = *shape.last().unwrap();
    let m = T::of(shape.iter().product::<usize>() as f64 / c as f64);
    let eps = T::of(BN_EPS);
    let g = gout.data();
    let xhat = cache.xhat.data();
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for (gpx, xpx) in g.chunks_exact(c).zip(xhat.chunks_exact(c)) {
        for ch in 0..c {
            dgamma[ch] += gpx[ch] * xpx[ch];
            dbeta[ch] += gpx[ch];
        }
    }
    let inv_std: Vec<T> = cache.var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut gin = Vec::with_capacity(g.len());
    for (gpx, xpx) in g.chunks_exact(c).zip(xhat.chunks_exact(c)) {
        for ch in 0..c {
            let term = gpx[ch] - dbeta[ch] / m - xpx[ch] * dgamma[ch] / m;
            gin.push(gamma.data()[ch] * inv_std[ch] * term);
        }
    }
    (
        Tensor::from_vec(&shape, gin),
        Tensor::from_vec(&[c], dgamma),
        Tensor::from_vec(&[c], dbeta),
    )
}
