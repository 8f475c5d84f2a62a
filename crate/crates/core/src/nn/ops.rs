//! Differentiable kernels.
//!
//! Public functions operate on [`Grid2D`] and plain vectors and are the
//! reference surface for gradient checks. The `pub(crate)` slice kernels are
//! the same math laid out for the batched model code in `model.rs`.

use rand::Rng;

use super::grid::Grid2D;
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

/// Softmax output: one probability per category.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates that entries lie in [0, 1] and sum to one within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::shape("empty probability vector"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::usage("probability outside [0, 1]"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::usage(format!("probabilities sum to {sum}")));
        }
        Ok(Self(probs))
    }

    /// Wraps softmax output without re-validating it.
    pub(crate) fn new_unchecked(probs: Vec<f64>) -> Self {
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self(probs)
    }

    pub fn uniform(c: usize) -> Self {
        Self(vec![1.0 / c as f64; c])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax_first(&self.0)
    }
}

pub(crate) fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// A single `s × t` filter of the first convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFilter {
    pub weights: Grid2D,
    pub bias: f64,
}

impl ConvFilter {
    pub fn new(weights: Grid2D, bias: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::shape("filter window must be at least 1x1"));
        }
        Ok(Self { weights, bias })
    }

    /// Window height (sensors).
    pub fn s(&self) -> usize {
        self.weights.rows()
    }

    /// Window width (timesteps).
    pub fn t(&self) -> usize {
        self.weights.cols()
    }
}

/// Geometry of a valid multi-channel 2-D cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub s: usize,
    pub t: usize,
}

impl ConvGeom {
    pub fn ho(&self) -> usize {
        self.h - self.s + 1
    }
    pub fn wo(&self) -> usize {
        self.w - self.t + 1
    }
    pub fn in_len(&self) -> usize {
        self.cin * self.h * self.w
    }
    pub fn out_len(&self) -> usize {
        self.cout * self.ho() * self.wo()
    }
    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * self.s * self.t
    }
}

/// Unrolls the receptive fields into a `(cin·s·t) × (ho·wo)` matrix:
/// row `(c, di, dj)` holds `x[c, i + di, j + dj]` over all output positions.
fn im2col(g: &ConvGeom, input: &[f64]) -> Vec<f64> {
    let (ho, wo) = (g.ho(), g.wo());
    let p = ho * wo;
    let mut col = Vec::with_capacity(g.cin * g.s * g.t * p);
    for c in 0..g.cin {
        let in_c = &input[c * g.h * g.w..(c + 1) * g.h * g.w];
        for di in 0..g.s {
            for dj in 0..g.t {
                for i in 0..ho {
                    let src = (i + di) * g.w + dj;
                    col.extend_from_slice(&in_c[src..src + wo]);
                }
            }
        }
    }
    col
}

/// `c = alpha·a·b + beta·c` on row-major operands described by strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(m == 0 || k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(k == 0 || n == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above keep every strided access inside the
    // slices, and `c` does not alias `a` or `b` (distinct borrows).
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
            n as isize,
            1,
        );
    }
}

/// `out[o, i, j] = b[o] + Σ_{c, di, dj} w[o, c, di, dj] · x[c, i + di, j + dj]`.
///
/// Weight layout is `[cout][cin][s][t]`, tensors are channel-major.
pub(crate) fn conv_multi_forward(
    g: &ConvGeom,
    input: &[f64],
    weights: &[f64],
    bias: &[f64],
    out: &mut [f64],
) {
    debug_assert_eq!(input.len(), g.in_len());
    debug_assert_eq!(out.len(), g.out_len());
    let p = g.ho() * g.wo();
    let k = g.cin * g.s * g.t;
    for o in 0..g.cout {
        out[o * p..(o + 1) * p].fill(bias[o]);
    }
    let col = im2col(g, input);
    gemm(g.cout, k, p, weights, (k, 1), &col, (p, 1), 1.0, out);
}

/// Accumulates weight and bias gradients into `dweights`/`dbias` and, when
/// requested, writes the input gradient into `dinput` (overwriting it).
pub(crate) fn conv_multi_backward(
    g: &ConvGeom,
    input: &[f64],
    weights: &[f64],
    dout: &[f64],
    dweights: &mut [f64],
    dbias: &mut [f64],
    dinput: Option<&mut [f64]>,
) {
    let (ho, wo) = (g.ho(), g.wo());
    let p = ho * wo;
    let k = g.cin * g.s * g.t;
    for o in 0..g.cout {
        dbias[o] += dout[o * p..(o + 1) * p].iter().sum::<f64>();
    }
    let col = im2col(g, input);
    // dW += dout · colᵀ
    gemm(g.cout, p, k, dout, (p, 1), &col, (1, p), 1.0, dweights);
    if let Some(din) = dinput {
        // dcol = Wᵀ · dout, then scatter back onto the input grid.
        let mut dcol = col;
        gemm(k, g.cout, p, weights, (1, k), dout, (p, 1), 0.0, &mut dcol);
        din.fill(0.0);
        let mut row = 0;
        for c in 0..g.cin {
            let din_c = &mut din[c * g.h * g.w..(c + 1) * g.h * g.w];
            for di in 0..g.s {
                for dj in 0..g.t {
                    let src = &dcol[row * p..(row + 1) * p];
                    for i in 0..ho {
                        let dst = &mut din_c[(i + di) * g.w + dj..(i + di) * g.w + dj + wo];
                        for (x, y) in dst.iter_mut().zip(&src[i * wo..(i + 1) * wo]) {
                            *x += y;
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators keep the loop vectorisable.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Convolution followed by ReLU: `f[i,j] = ReLU(w · x[i..i+s, j..j+t] + b)`.
///
/// Output shape is `(N − s + 1) × (L − t + 1)`.
pub fn conv_forward(x: &Grid2D, filter: &ConvFilter) -> Result<Grid2D> {
    let g = single_geom(x, filter)?;
    let mut out = vec![0.0; g.out_len()];
    conv_multi_forward(
        &g,
        x.as_slice(),
        filter.weights.as_slice(),
        &[filter.bias],
        &mut out,
    );
    for v in &mut out {
        *v = v.max(0.0);
    }
    Grid2D::from_vec(g.ho(), g.wo(), out)
}

/// Gradients of [`conv_forward`] given the upstream gradient `dout` of its
/// (post-ReLU) output. Returns `(dW, db, dx)`.
pub fn conv_backward(
    x: &Grid2D,
    filter: &ConvFilter,
    dout: &Grid2D,
) -> Result<(Grid2D, f64, Grid2D)> {
    let g = single_geom(x, filter)?;
    if dout.shape() != (g.ho(), g.wo()) {
        return Err(Error::shape("upstream gradient does not match conv output"));
    }
    let mut pre = vec![0.0; g.out_len()];
    conv_multi_forward(
        &g,
        x.as_slice(),
        filter.weights.as_slice(),
        &[filter.bias],
        &mut pre,
    );
    let gated: Vec<f64> = pre
        .iter()
        .zip(dout.as_slice())
        .map(|(&z, &d)| if z > 0.0 { d } else { 0.0 })
        .collect();
    let mut dw = vec![0.0; g.weight_len()];
    let mut db = [0.0];
    let mut dx = vec![0.0; g.in_len()];
    conv_multi_backward(
        &g,
        x.as_slice(),
        filter.weights.as_slice(),
        &gated,
        &mut dw,
        &mut db,
        Some(&mut dx),
    );
    Ok((
        Grid2D::from_vec(g.s, g.t, dw)?,
        db[0],
        Grid2D::from_vec(x.rows(), x.cols(), dx)?,
    ))
}

fn single_geom(x: &Grid2D, filter: &ConvFilter) -> Result<ConvGeom> {
    let (s, t) = (filter.s(), filter.t());
    if s == 0 || t == 0 || s > x.rows() || t > x.cols() {
        return Err(Error::shape(format!(
            "filter window {s}x{t} does not fit input {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    Ok(ConvGeom {
        cin: 1,
        h: x.rows(),
        w: x.cols(),
        cout: 1,
        s,
        t,
    })
}

/// Maximum of a grid together with its row-major position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxPick {
    pub value: f64,
    pub row: usize,
    pub col: usize,
}

/// `m = max(f)`; ties resolve to the first position in row-major order.
pub fn global_max_pool(f: &Grid2D) -> Result<MaxPick> {
    if f.is_empty() {
        return Err(Error::shape("global max pool of an empty grid"));
    }
    let k = argmax_first(f.as_slice());
    Ok(MaxPick {
        value: f.as_slice()[k],
        row: k / f.cols(),
        col: k % f.cols(),
    })
}

/// Pooled grid plus, for each output cell, the flat input index it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled {
    pub grid: Grid2D,
    pub argmax: Vec<usize>,
}

pub(crate) fn pool_out_dim(input: usize, window: usize, stride: usize) -> Option<usize> {
    if window == 0 || stride == 0 || window > input {
        None
    } else {
        Some((input - window) / stride + 1)
    }
}

/// Windowed max pooling, output dims `floor((in − window) / stride) + 1`.
pub fn local_max_pool(
    f: &Grid2D,
    window: (usize, usize),
    stride: (usize, usize),
) -> Result<Grid2D> {
    local_max_pool_indexed(f, window, stride).map(|p| p.grid)
}

pub fn local_max_pool_indexed(
    f: &Grid2D,
    window: (usize, usize),
    stride: (usize, usize),
) -> Result<Pooled> {
    let (oh, ow) = match (
        pool_out_dim(f.rows(), window.0, stride.0),
        pool_out_dim(f.cols(), window.1, stride.1),
    ) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::shape(format!(
                "pool window {:?} does not fit {}x{}",
                window,
                f.rows(),
                f.cols()
            )))
        }
    };
    let mut out = vec![0.0; oh * ow];
    let mut idx = vec![0usize; oh * ow];
    pool_channel(
        f.as_slice(),
        f.rows(),
        f.cols(),
        window,
        stride,
        &mut out,
        &mut idx,
    );
    Ok(Pooled {
        grid: Grid2D::from_vec(oh, ow, out)?,
        argmax: idx,
    })
}

/// Max pool of one `h × w` channel; `idx` receives flat input positions.
pub(crate) fn pool_channel(
    input: &[f64],
    h: usize,
    w: usize,
    window: (usize, usize),
    stride: (usize, usize),
    out: &mut [f64],
    idx: &mut [usize],
) {
    let oh = (h - window.0) / stride.0 + 1;
    let ow = (w - window.1) / stride.1 + 1;
    for oi in 0..oh {
        for oj in 0..ow {
            let (r0, c0) = (oi * stride.0, oj * stride.1);
            let mut best = r0 * w + c0;
            for r in r0..r0 + window.0 {
                for c in c0..c0 + window.1 {
                    let k = r * w + c;
                    if input[k] > input[best] {
                        best = k;
                    }
                }
            }
            out[oi * ow + oj] = input[best];
            idx[oi * ow + oj] = best;
        }
    }
}

/// `activation(W · v + b)` with `W` shaped `out × in`.
pub fn dense_forward(
    v: &[f64],
    weights: &Grid2D,
    bias: &[f64],
    activation: Activation,
) -> Result<Vec<f64>> {
    check_dense(v.len(), weights, bias)?;
    let mut out = vec![0.0; weights.rows()];
    dense_raw(v, weights.as_slice(), bias, &mut out);
    if activation == Activation::Relu {
        relu_inplace(&mut out);
    }
    Ok(out)
}

/// Returns `(dW, db, dv)` for [`dense_forward`].
pub fn dense_backward(
    v: &[f64],
    weights: &Grid2D,
    bias: &[f64],
    activation: Activation,
    dout: &[f64],
) -> Result<(Grid2D, Vec<f64>, Vec<f64>)> {
    check_dense(v.len(), weights, bias)?;
    if dout.len() != weights.rows() {
        return Err(Error::shape("upstream gradient length mismatch"));
    }
    let mut pre = vec![0.0; weights.rows()];
    dense_raw(v, weights.as_slice(), bias, &mut pre);
    let d: Vec<f64> = match activation {
        Activation::Relu => pre
            .iter()
            .zip(dout)
            .map(|(&z, &g)| if z > 0.0 { g } else { 0.0 })
            .collect(),
        Activation::Identity => dout.to_vec(),
    };
    let mut dw = vec![0.0; weights.rows() * weights.cols()];
    let mut db = vec![0.0; bias.len()];
    let mut dv = vec![0.0; v.len()];
    dense_raw_backward(v, weights.as_slice(), &d, &mut dw, &mut db, &mut dv);
    Ok((Grid2D::from_vec(weights.rows(), weights.cols(), dw)?, db, dv))
}

fn check_dense(n: usize, weights: &Grid2D, bias: &[f64]) -> Result<()> {
    if weights.cols() != n {
        return Err(Error::shape(format!(
            "dense weights have {} columns, input has {n}",
            weights.cols()
        )));
    }
    if bias.len() != weights.rows() {
        return Err(Error::shape("dense bias length mismatch"));
    }
    Ok(())
}

pub(crate) fn dense_raw(v: &[f64], w: &[f64], b: &[f64], out: &mut [f64]) {
    let n = v.len();
    for (o, y) in out.iter_mut().enumerate() {
        *y = b[o] + dot(&w[o * n..(o + 1) * n], v);
    }
}

/// Accumulates into `dw`/`db`; overwrites `dv`.
pub(crate) fn dense_raw_backward(
    v: &[f64],
    w: &[f64],
    dout: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dv: &mut [f64],
) {
    let n = v.len();
    dv.fill(0.0);
    for (o, &g) in dout.iter().enumerate() {
        db[o] += g;
        if g == 0.0 {
            continue;
        }
        let row = &w[o * n..(o + 1) * n];
        for ((dwi, &vi), (dvi, &wi)) in dw[o * n..(o + 1) * n]
            .iter_mut()
            .zip(v)
            .zip(dv.iter_mut().zip(row))
        {
            *dwi += g * vi;
            *dvi += g * wi;
        }
    }
}

/// [`dense_raw`] for the `m` rows of `x` at once; `out` is `m × outputs`.
pub(crate) fn dense_batch(x: &[f64], m: usize, w: &[f64], b: &[f64], out: &mut [f64]) {
    let n = x.len() / m;
    let o = b.len();
    for row in out.chunks_mut(o) {
        row.copy_from_slice(b);
    }
    gemm(m, n, o, x, (n, 1), w, (1, n), 1.0, out);
}

/// [`dense_raw_backward`] for `m` rows: accumulates `dw += dᵀ·x` and
/// `db += Σ d`, overwrites `dx = d·w`.
pub(crate) fn dense_batch_backward(
    x: &[f64],
    m: usize,
    w: &[f64],
    d: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: &mut [f64],
) {
    let n = x.len() / m;
    let o = db.len();
    for row in d.chunks(o) {
        for (a, g) in db.iter_mut().zip(row) {
            *a += g;
        }
    }
    gemm(o, m, n, d, (1, o), x, (n, 1), 1.0, dw);
    gemm(m, o, n, d, (o, 1), w, (n, 1), 0.0, dx);
}

pub(crate) fn relu_inplace(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

/// Running mean/variance for inference-mode batch normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(features: usize) -> Self {
        Self {
            mean: vec![0.0; features],
            var: vec![1.0; features],
        }
    }

    /// Exponential update with momentum [`BN_MOMENTUM`].
    pub fn update(&mut self, batch_mean: &[f64], batch_var: &[f64]) {
        for (r, &m) in self.mean.iter_mut().zip(batch_mean) {
            *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * m;
        }
        for (r, &v) in self.var.iter_mut().zip(batch_var) {
            *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * v;
        }
    }
}

/// Result of [`batchnorm_forward`]. `xhat` is the standardized batch before
/// scale and shift; `mean`/`var` are the statistics that were applied.
#[derive(Debug, Clone)]
pub struct BatchNormOutput {
    pub out: Vec<Grid2D>,
    pub xhat: Vec<Grid2D>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Batch normalization over a batch of `features × positions` grids.
///
/// Each row is one feature; train-mode statistics pool every example and
/// column. Train mode also folds the batch statistics into `running`.
pub fn batchnorm_forward(
    batch: &[Grid2D],
    gamma: &[f64],
    beta: &[f64],
    mode: Mode,
    running: &mut RunningStats,
) -> Result<BatchNormOutput> {
    let features = gamma.len();
    if beta.len() != features || running.mean.len() != features || running.var.len() != features
    {
        return Err(Error::shape("batch-norm parameter lengths differ"));
    }
    if mode == Mode::Train && batch.is_empty() {
        return Err(Error::usage("batch normalization of an empty batch in train mode"));
    }
    if batch.iter().any(|g| g.rows() != features) {
        return Err(Error::shape("batch rows must equal feature count"));
    }
    let (mean, var) = match mode {
        Mode::Train => {
            let mut mean = vec![0.0; features];
            let mut var = vec![0.0; features];
            let count: usize = batch.iter().map(Grid2D::cols).sum();
            for f in 0..features {
                let s: f64 = batch.iter().map(|g| g.row(f).iter().sum::<f64>()).sum();
                mean[f] = s / count as f64;
                let q: f64 = batch
                    .iter()
                    .map(|g| g.row(f).iter().map(|x| (x - mean[f]).powi(2)).sum::<f64>())
                    .sum();
                var[f] = q / count as f64;
            }
            running.update(&mean, &var);
            (mean, var)
        }
        Mode::Infer => (running.mean.clone(), running.var.clone()),
    };
    let mut out = Vec::with_capacity(batch.len());
    let mut xhat = Vec::with_capacity(batch.len());
    for g in batch {
        let mut xh = g.clone();
        let mut y = g.clone();
        for f in 0..features {
            let inv = 1.0 / (var[f] + BN_EPS).sqrt();
            for (a, b) in xh.row_mut(f).iter_mut().zip(y.row_mut(f)) {
                *a = (*a - mean[f]) * inv;
                *b = gamma[f] * *a + beta[f];
            }
        }
        out.push(y);
        xhat.push(xh);
    }
    Ok(BatchNormOutput {
        out,
        xhat,
        mean,
        var,
    })
}

/// Gradients of [`batchnorm_forward`] in train mode (batch statistics).
/// Returns `(dγ, dβ, dx)`.
pub fn batchnorm_backward(
    xhat: &[Grid2D],
    var: &[f64],
    gamma: &[f64],
    dout: &[Grid2D],
) -> Result<(Vec<f64>, Vec<f64>, Vec<Grid2D>)> {
    let features = gamma.len();
    if xhat.len() != dout.len() || xhat.is_empty() {
        return Err(Error::shape("batch-norm backward batch mismatch"));
    }
    let count: usize = xhat.iter().map(Grid2D::cols).sum();
    let mut dgamma = vec![0.0; features];
    let mut dbeta = vec![0.0; features];
    for (xh, d) in xhat.iter().zip(dout) {
        for f in 0..features {
            dgamma[f] += dot(xh.row(f), d.row(f));
            dbeta[f] += d.row(f).iter().sum::<f64>();
        }
    }
    let mut dx = Vec::with_capacity(xhat.len());
    for (xh, d) in xhat.iter().zip(dout) {
        let mut g = d.clone();
        for f in 0..features {
            let inv = 1.0 / (var[f] + BN_EPS).sqrt();
            let k = gamma[f] * inv / count as f64;
            for (gi, &xi) in g.row_mut(f).iter_mut().zip(xh.row(f)) {
                *gi = k * (count as f64 * *gi - dbeta[f] - xi * dgamma[f]);
            }
        }
        dx.push(g);
    }
    Ok((dgamma, dbeta, dx))
}

/// Inverted-dropout scale factors: `0` with probability `rate`, otherwise
/// `1 / (1 − rate)`.
pub fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(vec![1.0; len]);
    }
    let keep = 1.0 / (1.0 - rate);
    Ok((0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect())
}

pub fn dropout<R: Rng + ?Sized>(v: &[f64], rate: f64, mode: Mode, rng: &mut R) -> Result<Vec<f64>> {
    check_rate(rate)?;
    if mode == Mode::Infer || rate == 0.0 {
        return Ok(v.to_vec());
    }
    let mask = dropout_mask(v.len(), rate, rng)?;
    Ok(v.iter().zip(&mask).map(|(x, m)| x * m).collect())
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::usage(format!("dropout rate {rate} outside [0, 1)")));
    }
    Ok(())
}

/// Max-subtracted exponential normalization.
pub fn softmax(logits: &[f64]) -> ProbVector {
    ProbVector(softmax_raw(logits))
}

pub(crate) fn softmax_raw(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}
