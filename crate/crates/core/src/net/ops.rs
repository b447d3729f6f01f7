//! Forward and backward kernels on NCHW tensors.
//!
//! Batch-parallel kernels give each sample its own output slice. Weight
//! gradients are accumulated per fixed-size chunk of samples and the chunk
//! partials are summed in order, so results do not depend on the number of
//! worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{NetError, Scalar, Tensor};

pub const BN_EPS: f64 = 1e-5;

/// Samples per weight-gradient partial sum.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeom {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl ConvGeom {
    pub fn dense(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self { in_channels, out_channels, kernel, stride, padding, groups: 1 }
    }

    pub fn depthwise(channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self { in_channels: channels, out_channels: channels, kernel, stride, padding, groups: channels }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let ok = self.kernel > 0
            && self.stride > 0
            && self.in_channels > 0
            && self.out_channels > 0
            && (self.groups == 1 || (self.groups == self.in_channels && self.groups == self.out_channels));
        if ok {
            Ok(())
        } else {
            Err(NetError::Config(format!("unsupported convolution {self:?}: only dense or depthwise")))
        }
    }

    pub fn is_depthwise(&self) -> bool {
        self.groups > 1
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.padding == 0 && self.groups == 1
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels / self.groups, self.kernel, self.kernel]
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        let f = |d: usize| (d + 2 * self.padding - self.kernel) / self.stride + 1;
        (f(h), f(w))
    }

    pub fn macs(&self, h: usize, w: usize) -> u64 {
        let (ho, wo) = self.out_size(h, w);
        (self.out_channels * ho * wo * (self.in_channels / self.groups) * self.kernel * self.kernel) as u64
    }

    /// Output columns `ox` whose input column `ox·s + kx − p` lies in `0..w`.
    #[inline]
    fn valid_cols(&self, kx: usize, w: usize, wo: usize) -> (usize, usize) {
        let (s, p) = (self.stride, self.padding);
        let lo = if kx >= p { 0 } else { (p - kx).div_ceil(s) };
        if w + p <= kx {
            return (0, 0);
        }
        let hi = ((w - 1 + p - kx) / s + 1).min(wo);
        (lo.min(hi), hi)
    }
}

fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, g: &ConvGeom, ho: usize, wo: usize, col: &mut [T]) {
    let (k, s, p) = (g.kernel, g.stride, g.padding);
    let plane = ho * wo;
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut col[((ci * k + ky) * k + kx) * plane..][..plane];
                let (lo, hi) = g.valid_cols(kx, w, wo);
                for oy in 0..ho {
                    let out = &mut row[oy * wo..(oy + 1) * wo];
                    let iy = (oy * s + ky) as isize - p as isize;
                    if iy < 0 || iy >= h as isize {
                        out.fill(T::zero());
                        continue;
                    }
                    let src = &x[ci * h * w + iy as usize * w..][..w];
                    out[..lo].fill(T::zero());
                    out[hi..].fill(T::zero());
                    for ox in lo..hi {
                        out[ox] = src[ox * s + kx - p];
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(col: &[T], c: usize, h: usize, w: usize, g: &ConvGeom, ho: usize, wo: usize, x: &mut [T]) {
    let (k, s, p) = (g.kernel, g.stride, g.padding);
    let plane = ho * wo;
    x.fill(T::zero());
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = &col[((ci * k + ky) * k + kx) * plane..][..plane];
                let (lo, hi) = g.valid_cols(kx, w, wo);
                for oy in 0..ho {
                    let iy = (oy * s + ky) as isize - p as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut x[ci * h * w + iy as usize * w..][..w];
                    for ox in lo..hi {
                        dst[ox * s + kx - p] += row[oy * wo + ox];
                    }
                }
            }
        }
    }
}

fn depthwise_sample<T: Scalar>(x: &[T], wgt: &[T], g: &ConvGeom, h: usize, w: usize, ho: usize, wo: usize, y: &mut [T]) {
    let (k, s, p) = (g.kernel, g.stride, g.padding);
    for c in 0..g.in_channels {
        let xs = &x[c * h * w..][..h * w];
        let ys = &mut y[c * ho * wo..][..ho * wo];
        let wk = &wgt[c * k * k..][..k * k];
        for oy in 0..ho {
            let yrow = &mut ys[oy * wo..(oy + 1) * wo];
            for ky in 0..k {
                let iy = (oy * s + ky) as isize - p as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                let xrow = &xs[iy as usize * w..][..w];
                for kx in 0..k {
                    let wv = wk[ky * k + kx];
                    let (lo, hi) = g.valid_cols(kx, w, wo);
                    for ox in lo..hi {
                        yrow[ox] += wv * xrow[ox * s + kx - p];
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn depthwise_sample_backward<T: Scalar>(
    x: &[T],
    wgt: &[T],
    dy: &[T],
    g: &ConvGeom,
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
    dx: Option<&mut [T]>,
    dw: &mut [T],
) {
    let (k, s, p) = (g.kernel, g.stride, g.padding);
    let mut dx = dx;
    if let Some(d) = dx.as_deref_mut() {
        d.fill(T::zero());
    }
    for c in 0..g.in_channels {
        let xs = &x[c * h * w..][..h * w];
        let dys = &dy[c * ho * wo..][..ho * wo];
        let wk = &wgt[c * k * k..][..k * k];
        for oy in 0..ho {
            let dyrow = &dys[oy * wo..(oy + 1) * wo];
            for ky in 0..k {
                let iy = (oy * s + ky) as isize - p as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                let iy = iy as usize;
                let xrow = &xs[iy * w..][..w];
                for kx in 0..k {
                    let (lo, hi) = g.valid_cols(kx, w, wo);
                    let mut acc = T::zero();
                    for ox in lo..hi {
                        acc += dyrow[ox] * xrow[ox * s + kx - p];
                    }
                    dw[(c * k + ky) * k + kx] += acc;
                    if let Some(d) = dx.as_deref_mut() {
                        let wv = wk[ky * k + kx];
                        let dxrow = &mut d[c * h * w + iy * w..][..w];
                        for ox in lo..hi {
                            dxrow[ox * s + kx - p] += wv * dyrow[ox];
                        }
                    }
                }
            }
        }
    }
}

fn check_conv_input<T: Scalar>(x: &Tensor<T>, g: &ConvGeom) {
    let (_, c, _, _) = x.dims4();
    assert_eq!(c, g.in_channels, "conv input has {c} channels, geometry expects {}", g.in_channels);
}

/// 2-D cross-correlation without bias.
pub fn conv2d<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, g: &ConvGeom) -> Tensor<T> {
    check_conv_input(x, g);
    let (n, c, h, w) = x.dims4();
    let (ho, wo) = g.out_size(h, w);
    let mut y = Tensor::zeros(&[n, g.out_channels, ho, wo]);
    let (in_len, out_len) = (c * h * w, g.out_channels * ho * wo);
    let wd = weight.data();
    let ckk = c * g.kernel * g.kernel;
    y.data_mut().par_chunks_mut(out_len).zip(x.data().par_chunks(in_len)).for_each(|(ys, xs)| {
        if g.is_depthwise() {
            depthwise_sample(xs, wd, g, h, w, ho, wo, ys);
        } else if g.is_pointwise() {
            T::gemm(g.out_channels, c, h * w, T::one(), wd, (c, 1), xs, (h * w, 1), T::zero(), ys, (h * w, 1));
        } else {
            let mut col = vec![T::zero(); ckk * ho * wo];
            im2col(xs, c, h, w, g, ho, wo, &mut col);
            T::gemm(g.out_channels, ckk, ho * wo, T::one(), wd, (ckk, 1), &col, (ho * wo, 1), T::zero(), ys, (ho * wo, 1));
        }
    });
    y
}

/// Returns `(d input, d weight)`; the input gradient is skipped when not needed.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    dy: &Tensor<T>,
    g: &ConvGeom,
    need_input_grad: bool,
) -> (Option<Tensor<T>>, Tensor<T>) {
    check_conv_input(x, g);
    let (n, c, h, w) = x.dims4();
    let (ho, wo) = g.out_size(h, w);
    assert_eq!(dy.shape(), &[n, g.out_channels, ho, wo], "conv output gradient shape");
    let (in_len, out_len) = (c * h * w, g.out_channels * ho * wo);
    let wd = weight.data();
    let wlen = weight.numel();
    let ckk = c * g.kernel * g.kernel;
    let plane = ho * wo;
    let out_c = g.out_channels;

    let mut dx = need_input_grad.then(|| Tensor::<T>::zeros(x.shape()));
    let chunk_samples = |xs: &[T], dys: &[T], mut dxs: Option<&mut [T]>| -> Vec<T> {
        let mut dw = vec![T::zero(); wlen];
        let mut col = if g.is_depthwise() || g.is_pointwise() { Vec::new() } else { vec![T::zero(); ckk * plane] };
        for i in 0..xs.len() / in_len {
            let xn = &xs[i * in_len..][..in_len];
            let dyn_ = &dys[i * out_len..][..out_len];
            let dxn = dxs.as_deref_mut().map(|d| &mut d[i * in_len..][..in_len]);
            if g.is_depthwise() {
                depthwise_sample_backward(xn, wd, dyn_, g, h, w, ho, wo, dxn, &mut dw);
            } else if g.is_pointwise() {
                let hw = h * w;
                T::gemm(out_c, hw, c, T::one(), dyn_, (hw, 1), xn, (1, hw), T::one(), &mut dw, (c, 1));
                if let Some(d) = dxn {
                    T::gemm(c, out_c, hw, T::one(), wd, (1, c), dyn_, (hw, 1), T::zero(), d, (hw, 1));
                }
            } else {
                im2col(xn, c, h, w, g, ho, wo, &mut col);
                T::gemm(out_c, plane, ckk, T::one(), dyn_, (plane, 1), &col, (1, plane), T::one(), &mut dw, (ckk, 1));
                if let Some(d) = dxn {
                    T::gemm(ckk, out_c, plane, T::one(), wd, (1, ckk), dyn_, (plane, 1), T::zero(), &mut col, (plane, 1));
                    col2im(&col, c, h, w, g, ho, wo, d);
                }
            }
        }
        dw
    };

    let xs_chunks = x.data().par_chunks(GRAD_CHUNK * in_len);
    let dy_chunks = dy.data().par_chunks(GRAD_CHUNK * out_len);
    let partials: Vec<Vec<T>> = match dx.as_mut() {
        Some(d) => xs_chunks
            .zip(dy_chunks)
            .zip(d.data_mut().par_chunks_mut(GRAD_CHUNK * in_len))
            .map(|((xs, dys), dxs)| chunk_samples(xs, dys, Some(dxs)))
            .collect(),
        None => xs_chunks.zip(dy_chunks).map(|(xs, dys)| chunk_samples(xs, dys, None)).collect(),
    };
    let mut dw = Tensor::zeros(weight.shape());
    for part in partials {
        for (a, b) in dw.data_mut().iter_mut().zip(part) {
            *a += b;
        }
    }
    (dx, dw)
}

/// Per-channel statistics of a training-mode normalization pass.
pub struct BatchNormStats<T> {
    pub xhat: Tensor<T>,
    pub inv_std: Vec<T>,
    pub mean: Vec<T>,
    /// Unbiased variance, used for the running estimate.
    pub var_unbiased: Vec<T>,
}

pub fn batch_norm_train<T: Scalar>(x: &Tensor<T>, gamma: &[T], beta: &[T]) -> (Tensor<T>, BatchNormStats<T>) {
    let (n, c, h, w) = x.dims4();
    let hw = h * w;
    let m = (n * hw) as f64;
    let xd = x.data();
    let mut y = Tensor::zeros(x.shape());
    let mut xhat = Tensor::zeros(x.shape());
    let (mut inv_std, mut means, mut vars) = (vec![T::zero(); c], vec![T::zero(); c], vec![T::zero(); c]);
    for ch in 0..c {
        let mut sum = 0.0;
        for i in 0..n {
            sum += xd[(i * c + ch) * hw..][..hw].iter().map(|v| v.to_f64_lossy()).sum::<f64>();
        }
        let mean = sum / m;
        let mut sq = 0.0;
        for i in 0..n {
            sq += xd[(i * c + ch) * hw..][..hw].iter().map(|v| (v.to_f64_lossy() - mean).powi(2)).sum::<f64>();
        }
        let var = sq / m;
        let istd = 1.0 / (var + BN_EPS).sqrt();
        let (mean_t, istd_t) = (T::from_f64_lossy(mean), T::from_f64_lossy(istd));
        let (gm, bt) = (gamma[ch], beta[ch]);
        for i in 0..n {
            let off = (i * c + ch) * hw;
            let src = &xd[off..off + hw];
            let xh = &mut xhat.data_mut()[off..off + hw];
            for (o, &v) in xh.iter_mut().zip(src) {
                *o = (v - mean_t) * istd_t;
            }
            let xh = &xhat.data()[off..off + hw];
            for (o, &v) in y.data_mut()[off..off + hw].iter_mut().zip(xh) {
                *o = gm * v + bt;
            }
        }
        inv_std[ch] = istd_t;
        means[ch] = mean_t;
        vars[ch] = T::from_f64_lossy(if m > 1.0 { sq / (m - 1.0) } else { var });
    }
    (y, BatchNormStats { xhat, inv_std, mean: means, var_unbiased: vars })
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn batch_norm_train_backward<T: Scalar>(
    dy: &Tensor<T>,
    xhat: &Tensor<T>,
    inv_std: &[T],
    gamma: &[T],
) -> (Tensor<T>, Vec<T>, Vec<T>) {
    let (n, c, h, w) = dy.dims4();
    let hw = h * w;
    let m = (n * hw) as f64;
    let (dyd, xh) = (dy.data(), xhat.data());
    let mut dx = Tensor::zeros(dy.shape());
    let (mut dgamma, mut dbeta) = (vec![T::zero(); c], vec![T::zero(); c]);
    for ch in 0..c {
        let (mut sg, mut sb) = (0.0, 0.0);
        for i in 0..n {
            let off = (i * c + ch) * hw;
            for (&d, &x) in dyd[off..off + hw].iter().zip(&xh[off..off + hw]) {
                let d = d.to_f64_lossy();
                sg += d * x.to_f64_lossy();
                sb += d;
            }
        }
        let scale = T::from_f64_lossy(gamma[ch].to_f64_lossy() * inv_std[ch].to_f64_lossy() / m);
        let (mt, sgt, sbt) = (T::from_f64_lossy(m), T::from_f64_lossy(sg), T::from_f64_lossy(sb));
        for i in 0..n {
            let off = (i * c + ch) * hw;
            for j in off..off + hw {
                dx.data_mut()[j] = scale * (mt * dyd[j] - sbt - xh[j] * sgt);
            }
        }
        dgamma[ch] = sgt;
        dbeta[ch] = sbt;
    }
    (dx, dgamma, dbeta)
}

pub fn batch_norm_eval<T: Scalar>(x: &Tensor<T>, gamma: &[T], beta: &[T], mean: &[T], var: &[T]) -> Tensor<T> {
    let (n, c, h, w) = x.dims4();
    let hw = h * w;
    let mut y = x.clone();
    let eps = T::from_f64_lossy(BN_EPS);
    for i in 0..n {
        for ch in 0..c {
            let scale = gamma[ch] / (var[ch] + eps).sqrt();
            let shift = beta[ch] - mean[ch] * scale;
            for v in &mut y.data_mut()[(i * c + ch) * hw..][..hw] {
                *v = *v * scale + shift;
            }
        }
    }
    y
}

/// In-place ReLU; returns the mask of positive outputs.
pub fn relu_inplace<T: Scalar>(x: &mut Tensor<T>) -> Vec<bool> {
    x.data_mut()
        .iter_mut()
        .map(|v| {
            let pos = *v > T::zero();
            if !pos {
                *v = T::zero();
            }
            pos
        })
        .collect()
}

pub fn relu_backward<T: Scalar>(mut dy: Tensor<T>, mask: &[bool]) -> Tensor<T> {
    for (d, &m) in dy.data_mut().iter_mut().zip(mask) {
        if !m {
            *d = T::zero();
        }
    }
    dy
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolGeom {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl PoolGeom {
    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        let f = |d: usize| (d + 2 * self.padding - self.kernel) / self.stride + 1;
        (f(h), f(w))
    }
}

/// Max pooling with implicit `-inf` padding; also returns the in-plane
/// argmax of every output.
pub fn max_pool<T: Scalar>(x: &Tensor<T>, g: &PoolGeom) -> (Tensor<T>, Vec<u32>) {
    let (n, c, h, w) = x.dims4();
    let (ho, wo) = g.out_size(h, w);
    let mut y = Tensor::zeros(&[n, c, ho, wo]);
    let mut arg = vec![0u32; n * c * ho * wo];
    let xd = x.data();
    for plane in 0..n * c {
        let src = &xd[plane * h * w..][..h * w];
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = T::neg_infinity();
                let mut best_i = 0usize;
                for ky in 0..g.kernel {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..g.kernel {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let i = iy as usize * w + ix as usize;
                        if src[i] > best {
                            best = src[i];
                            best_i = i;
                        }
                    }
                }
                let o = plane * ho * wo + oy * wo + ox;
                y.data_mut()[o] = best;
                arg[o] = best_i as u32;
            }
        }
    }
    (y, arg)
}

pub fn max_pool_backward<T: Scalar>(dy: &Tensor<T>, argmax: &[u32], input_shape: &[usize]) -> Tensor<T> {
    let (n, c, ho, wo) = dy.dims4();
    let (h, w) = (input_shape[2], input_shape[3]);
    let mut dx = Tensor::zeros(input_shape);
    for plane in 0..n * c {
        for o in 0..ho * wo {
            let idx = plane * ho * wo + o;
            dx.data_mut()[plane * h * w + argmax[idx] as usize] += dy.data()[idx];
        }
    }
    dx
}

/// N×C×H×W → N×C.
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (n, c, h, w) = x.dims4();
    let hw = h * w;
    let inv = T::from_f64_lossy(1.0 / hw as f64);
    let data = x.data().chunks(hw).map(|p| p.iter().copied().sum::<T>() * inv).collect();
    Tensor::from_vec(&[n, c], data).expect("pooled shape")
}

pub fn global_avg_pool_backward<T: Scalar>(dy: &Tensor<T>, h: usize, w: usize) -> Tensor<T> {
    let (n, c) = dy.dims2();
    let inv = T::from_f64_lossy(1.0 / (h * w) as f64);
    let mut dx = Tensor::zeros(&[n, c, h, w]);
    for (plane, &d) in dx.data_mut().chunks_mut(h * w).zip(dy.data()) {
        plane.fill(d * inv);
    }
    dx
}

/// `y = x · Wᵀ + b` with `W` stored out×in.
pub fn linear<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: &[T]) -> Tensor<T> {
    let (n, fin) = x.dims2();
    let (fout, win) = weight.dims2();
    assert_eq!(fin, win, "linear input width");
    let mut y = Tensor::zeros(&[n, fout]);
    T::gemm(n, fin, fout, T::one(), x.data(), (fin, 1), weight.data(), (1, fin), T::zero(), y.data_mut(), (fout, 1));
    for row in y.data_mut().chunks_mut(fout) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
    y
}

/// Returns `(dx, dW, db)`.
pub fn linear_backward<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, dy: &Tensor<T>) -> (Tensor<T>, Tensor<T>, Vec<T>) {
    let (n, fin) = x.dims2();
    let (fout, _) = weight.dims2();
    let mut dx = Tensor::zeros(&[n, fin]);
    T::gemm(n, fout, fin, T::one(), dy.data(), (fout, 1), weight.data(), (fin, 1), T::zero(), dx.data_mut(), (fin, 1));
    let mut dw = Tensor::zeros(&[fout, fin]);
    T::gemm(fout, n, fin, T::one(), dy.data(), (1, fout), x.data(), (fin, 1), T::zero(), dw.data_mut(), (fin, 1));
    let mut db = vec![T::zero(); fout];
    for row in dy.data().chunks(fout) {
        for (b, &d) in db.iter_mut().zip(row) {
            *b += d;
        }
    }
    (dx, dw, db)
}

/// Splits channels into `[0, first)` and `[first, C)`.
pub fn split_channels<T: Scalar>(x: &Tensor<T>, first: usize) -> (Tensor<T>, Tensor<T>) {
    let (n, c, h, w) = x.dims4();
    let hw = h * w;
    let mut a = Vec::with_capacity(n * first * hw);
    let mut b = Vec::with_capacity(n * (c - first) * hw);
    for s in x.data().chunks(c * hw) {
        a.extend_from_slice(&s[..first * hw]);
        b.extend_from_slice(&s[first * hw..]);
    }
    (
        Tensor::from_vec(&[n, first, h, w], a).expect("split shape"),
        Tensor::from_vec(&[n, c - first, h, w], b).expect("split shape"),
    )
}

pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let (n, ca, h, w) = a.dims4();
    let (nb, cb, hb, wb) = b.dims4();
    assert_eq!((n, h, w), (nb, hb, wb), "concat spatial mismatch");
    let hw = h * w;
    let mut out = Vec::with_capacity(n * (ca + cb) * hw);
    for (sa, sb) in a.data().chunks(ca * hw).zip(b.data().chunks(cb * hw)) {
        out.extend_from_slice(sa);
        out.extend_from_slice(sb);
    }
    Tensor::from_vec(&[n, ca + cb, h, w], out).expect("concat shape")
}

/// Interleaves channel groups: channel `i` of group `j` moves to `i·g + j`.
pub fn channel_shuffle<T: Scalar>(x: &Tensor<T>, groups: usize) -> Result<Tensor<T>, NetError> {
    let (_, c, h, w) = x.dims4();
    if groups == 0 || c % groups != 0 {
        return Err(NetError::Config(format!("{c} channels are not divisible into {groups} groups")));
    }
    let per = c / groups;
    let hw = h * w;
    let mut y = Tensor::zeros(x.shape());
    for (src, dst) in x.data().chunks(c * hw).zip(y.data_mut().chunks_mut(c * hw)) {
        for ch in 0..c {
            let (j, i) = (ch / per, ch % per);
            let to = i * groups + j;
            dst[to * hw..(to + 1) * hw].copy_from_slice(&src[ch * hw..(ch + 1) * hw]);
        }
    }
    Ok(y)
}

/// Inverse of [`channel_shuffle`] with the same `groups`.
pub fn channel_unshuffle<T: Scalar>(x: &Tensor<T>, groups: usize) -> Result<Tensor<T>, NetError> {
    let (_, c, _, _) = x.dims4();
    if groups == 0 || c % groups != 0 {
        return Err(NetError::Config(format!("{c} channels are not divisible into {groups} groups")));
    }
    channel_shuffle(x, c / groups)
}

pub fn add<T: Scalar>(mut a: Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    a.add_assign(b);
    a
}
