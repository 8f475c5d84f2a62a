//! The fixed architecture family: a conv → batch-norm → ReLU → pool stack
//! with a global max pool per filter, followed by dense layers and softmax.
//! With no conv layers the same code is a plain multilayer perceptron over
//! the flattened input.
//!
//! Trainable values live in one flat vector (see [`ParamLayout`]) so that
//! gradients, Adam moments and finite-difference probes share one shape.
//!
//! Batched passes split the batch into `workers` contiguous sub-batches.
//! Every cross-example reduction (batch-norm statistics, batch-norm backward
//! sums, parameter gradients) is computed per worker and then summed in
//! ascending worker order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;

use super::grid::Grid2D;
use super::ops::{
    argmax_first, conv_multi_backward, conv_multi_forward, dense_batch, dense_batch_backward, dense_raw,
    dropout_mask, pool_channel, pool_out_dim, softmax_raw, ConvGeom, Mode, ProbVector, BN_EPS,
    BN_MOMENTUM,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvLayerSpec {
    pub filters: usize,
    /// `(s, t)`: sensor rows × timesteps.
    pub window: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub input_channels: usize,
    pub seq_len: usize,
    /// Empty for the MLP; otherwise 2 to 5 layers.
    pub conv: Vec<ConvLayerSpec>,
    /// Local max pool between conv layers (window = stride).
    pub pool: (usize, usize),
    pub hidden: Vec<usize>,
    pub num_categories: usize,
}

pub const MIN_CONV_LAYERS: usize = 2;
pub const MAX_CONV_LAYERS: usize = 5;

impl Architecture {
    /// Default CNN: three conv layers of 16 filters, first window 3×25
    /// (sensor rows clamped to the channel count), deeper windows 1×9, 1×4
    /// pooling between layers, one 64-unit hidden layer.
    pub fn cnn(input_channels: usize, seq_len: usize, num_categories: usize) -> Self {
        Self::cnn_with(input_channels, seq_len, num_categories, 3, 16, (3, 25), 9)
    }

    pub fn cnn_with(
        input_channels: usize,
        seq_len: usize,
        num_categories: usize,
        layers: usize,
        filters: usize,
        first_window: (usize, usize),
        deep_width: usize,
    ) -> Self {
        let mut conv = vec![ConvLayerSpec {
            filters,
            window: (first_window.0.min(input_channels.max(1)), first_window.1),
        }];
        for _ in 1..layers {
            conv.push(ConvLayerSpec {
                filters,
                window: (1, deep_width),
            });
        }
        Self {
            input_channels,
            seq_len,
            conv,
            pool: (1, 4),
            hidden: vec![64],
            num_categories,
        }
    }

    /// Four dense layers: three ReLU hidden layers and the softmax output.
    pub fn mlp(input_channels: usize, seq_len: usize, num_categories: usize) -> Self {
        Self {
            input_channels,
            seq_len,
            conv: Vec::new(),
            pool: (1, 1),
            hidden: vec![256, 128, 64],
            num_categories,
        }
    }

    pub fn is_mlp(&self) -> bool {
        self.conv.is_empty()
    }

    /// Number of dense layers including the output layer.
    pub fn dense_layer_count(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        self.plan().map(|_| ())
    }

    pub(crate) fn plan(&self) -> Result<Plan> {
        if self.input_channels == 0 || self.seq_len == 0 {
            return Err(Error::shape("input must have at least one channel and timestep"));
        }
        if self.num_categories < 2 {
            return Err(Error::shape("need at least two categories"));
        }
        if !self.conv.is_empty()
            && !(MIN_CONV_LAYERS..=MAX_CONV_LAYERS).contains(&self.conv.len())
        {
            return Err(Error::shape(format!(
                "conv layer count {} outside {MIN_CONV_LAYERS}..={MAX_CONV_LAYERS}",
                self.conv.len()
            )));
        }
        let mut stages = Vec::with_capacity(self.conv.len());
        let (mut cin, mut h, mut w) = (1, self.input_channels, self.seq_len);
        for (l, spec) in self.conv.iter().enumerate() {
            let (s, t) = spec.window;
            if spec.filters == 0 || s == 0 || t == 0 || s > h || t > w {
                return Err(Error::shape(format!(
                    "conv layer {l}: window {s}x{t} with {} filters does not fit {h}x{w}",
                    spec.filters
                )));
            }
            let geom = ConvGeom {
                cin,
                h,
                w,
                cout: spec.filters,
                s,
                t,
            };
            let last = l + 1 == self.conv.len();
            let pooled = if last {
                None
            } else {
                match (
                    pool_out_dim(geom.ho(), self.pool.0, self.pool.0),
                    pool_out_dim(geom.wo(), self.pool.1, self.pool.1),
                ) {
                    (Some(a), Some(b)) => Some((a, b)),
                    _ => {
                        return Err(Error::shape(format!(
                            "pool {:?} does not fit conv layer {l} output {}x{}",
                            self.pool,
                            geom.ho(),
                            geom.wo()
                        )))
                    }
                }
            };
            if let Some((a, b)) = pooled {
                h = a;
                w = b;
            }
            cin = spec.filters;
            stages.push(ConvStage { geom, pooled });
        }
        let feature_len = match self.conv.last() {
            Some(spec) => spec.filters,
            None => self.input_channels * self.seq_len,
        };
        let mut dense = Vec::new();
        let mut prev = feature_len;
        for &width in self.hidden.iter().chain(std::iter::once(&self.num_categories)) {
            if width == 0 {
                return Err(Error::shape("dense layer of width zero"));
            }
            dense.push((prev, width));
            prev = width;
        }
        Ok(Plan { stages, dense })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ConvStage {
    pub geom: ConvGeom,
    pub pooled: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub stages: Vec<ConvStage>,
    /// `(in, out)` per dense layer.
    pub dense: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvOffsets {
    pub weights: usize,
    pub bias: usize,
    pub gamma: usize,
    pub beta: usize,
    pub filters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseOffsets {
    pub weights: usize,
    pub bias: usize,
    pub inputs: usize,
    pub outputs: usize,
}

/// Where each layer's tensors sit in the flat parameter vector.
///
/// Conv layer: weights `[filters][cin][s][t]`, bias, γ, β. Dense layer:
/// weights `[out][in]`, bias. Running batch-norm statistics are kept in a
/// separate buffer, `[mean; filters]` then `[var; filters]` per conv layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub conv: Vec<ConvOffsets>,
    pub dense: Vec<DenseOffsets>,
    pub total: usize,
    pub running_total: usize,
}

impl ParamLayout {
    fn from_plan(plan: &Plan) -> Self {
        let mut at = 0;
        let mut conv = Vec::new();
        for st in &plan.stages {
            let g = &st.geom;
            let weights = at;
            at += g.weight_len();
            let bias = at;
            at += g.cout;
            let gamma = at;
            at += g.cout;
            let beta = at;
            at += g.cout;
            conv.push(ConvOffsets {
                weights,
                bias,
                gamma,
                beta,
                filters: g.cout,
            });
        }
        let mut dense = Vec::new();
        for &(i, o) in &plan.dense {
            let weights = at;
            at += i * o;
            let bias = at;
            at += o;
            dense.push(DenseOffsets {
                weights,
                bias,
                inputs: i,
                outputs: o,
            });
        }
        let running_total = plan.stages.iter().map(|s| 2 * s.geom.cout).sum();
        Self {
            conv,
            dense,
            total: at,
            running_total,
        }
    }
}

/// Gradient with the same flat layout as [`ModelParams::values`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl Gradient {
    pub fn zeros(len: usize) -> Self {
        Gradient(vec![0.0; len])
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

    pub fn add_assign(&mut self, other: &Gradient) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for a in &mut self.0 {
            *a *= k;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// All trainable values of one model plus its batch-norm running statistics.
#[derive(Debug, Clone)]
pub struct ModelParams {
    arch: Architecture,
    plan: Plan,
    layout: ParamLayout,
    pub values: Vec<f64>,
    pub running: Vec<f64>,
}

impl PartialEq for ModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch && self.values == other.values && self.running == other.running
    }
}

impl ModelParams {
    /// He-uniform initialization by fan-in for conv and hidden layers,
    /// Glorot-uniform for the output layer; biases and β zero, γ one.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        let mut p = Self::zeroed(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (st, off) in p.plan.stages.iter().zip(&p.layout.conv) {
            let g = &st.geom;
            let fan_in = (g.cin * g.s * g.t) as f64;
            let bound = (6.0 / fan_in).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            for v in &mut p.values[off.weights..off.weights + g.weight_len()] {
                *v = dist.sample(&mut rng);
            }
            p.values[off.gamma..off.gamma + g.cout].fill(1.0);
        }
        let n_dense = p.layout.dense.len();
        for (k, off) in p.layout.dense.iter().enumerate() {
            let bound = if k + 1 == n_dense {
                (6.0 / (off.inputs + off.outputs) as f64).sqrt()
            } else {
                (6.0 / off.inputs as f64).sqrt()
            };
            let dist = Uniform::new_inclusive(-bound, bound);
            for v in &mut p.values[off.weights..off.weights + off.inputs * off.outputs] {
                *v = dist.sample(&mut rng);
            }
        }
        Ok(p)
    }

    /// All-zero values (γ included) with unit running variance.
    pub fn zeroed(arch: Architecture) -> Result<Self> {
        let plan = arch.plan()?;
        let layout = ParamLayout::from_plan(&plan);
        let mut running = vec![0.0; layout.running_total];
        let mut at = 0;
        for off in &layout.conv {
            running[at + off.filters..at + 2 * off.filters].fill(1.0);
            at += 2 * off.filters;
        }
        Ok(Self {
            values: vec![0.0; layout.total],
            running,
            arch,
            plan,
            layout,
        })
    }

    pub fn from_parts(arch: Architecture, values: Vec<f64>, running: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeroed(arch)?;
        if values.len() != p.layout.total || running.len() != p.layout.running_total {
            return Err(Error::shape(format!(
                "parameter counts {}/{} do not match architecture ({}/{})",
                values.len(),
                running.len(),
                p.layout.total,
                p.layout.running_total
            )));
        }
        p.values = values;
        p.running = running;
        Ok(p)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.values.len()
    }

    pub fn num_categories(&self) -> usize {
        self.arch.num_categories
    }

    fn running_slices(&self, layer: usize) -> (&[f64], &[f64]) {
        let at: usize = self.layout.conv[..layer].iter().map(|o| 2 * o.filters).sum();
        let f = self.layout.conv[layer].filters;
        (
            &self.running[at..at + f],
            &self.running[at + f..at + 2 * f],
        )
    }

    /// Folds the batch statistics of a train-mode pass into the running
    /// statistics (momentum 0.9).
    pub fn absorb_batch_stats(&mut self, trace: &BatchTrace) {
        self.absorb_stats(&trace.bn_stats);
    }

    /// Same as [`ModelParams::absorb_batch_stats`] from detached statistics.
    pub fn absorb_stats(&mut self, stats: &[(Vec<f64>, Vec<f64>)]) {
        let mut at = 0;
        for (layer, off) in self.layout.conv.iter().enumerate() {
            let f = off.filters;
            if let Some((mean, var)) = stats.get(layer) {
                for k in 0..f {
                    let rm = &mut self.running[at + k];
                    *rm = BN_MOMENTUM * *rm + (1.0 - BN_MOMENTUM) * mean[k];
                }
                for k in 0..f {
                    let rv = &mut self.running[at + f + k];
                    *rv = BN_MOMENTUM * *rv + (1.0 - BN_MOMENTUM) * var[k];
                }
            }
            at += 2 * f;
        }
    }

    fn check_input(&self, x: &Grid2D) -> Result<()> {
        if x.shape() != (self.arch.input_channels, self.arch.seq_len) {
            return Err(Error::shape(format!(
                "input {}x{} does not match architecture {}x{}",
                x.rows(),
                x.cols(),
                self.arch.input_channels,
                self.arch.seq_len
            )));
        }
        Ok(())
    }

    /// Inference-mode logits for one input, without caching intermediates.
    pub fn logits(&self, x: &Grid2D) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.as_slice().to_vec();
        for (l, st) in self.plan.stages.iter().enumerate() {
            let g = &st.geom;
            let off = &self.layout.conv[l];
            let (rm, rv) = self.running_slices(l);
            let mut z = vec![0.0; g.out_len()];
            conv_multi_forward(
                g,
                &cur,
                &self.values[off.weights..off.weights + g.weight_len()],
                &self.values[off.bias..off.bias + g.cout],
                &mut z,
            );
            let plane = g.ho() * g.wo();
            for f in 0..g.cout {
                let inv = 1.0 / (rv[f] + BN_EPS).sqrt();
                let (ga, be) = (self.values[off.gamma + f], self.values[off.beta + f]);
                for v in &mut z[f * plane..(f + 1) * plane] {
                    *v = (ga * (*v - rm[f]) * inv + be).max(0.0);
                }
            }
            cur = match st.pooled {
                Some((ph, pw)) => {
                    let mut out = vec![0.0; g.cout * ph * pw];
                    let mut idx = vec![0; ph * pw];
                    for f in 0..g.cout {
                        pool_channel(
                            &z[f * plane..(f + 1) * plane],
                            g.ho(),
                            g.wo(),
                            self.arch.pool,
                            self.arch.pool,
                            &mut out[f * ph * pw..(f + 1) * ph * pw],
                            &mut idx,
                        );
                    }
                    out
                }
                None => (0..g.cout)
                    .map(|f| {
                        let ch = &z[f * plane..(f + 1) * plane];
                        ch[argmax_first(ch)]
                    })
                    .collect(),
            };
        }
        let n_dense = self.layout.dense.len();
        for (k, off) in self.layout.dense.iter().enumerate() {
            let mut out = vec![0.0; off.outputs];
            dense_raw(
                &cur,
                &self.values[off.weights..off.weights + off.inputs * off.outputs],
                &self.values[off.bias..off.bias + off.outputs],
                &mut out,
            );
            if k + 1 < n_dense {
                for v in &mut out {
                    *v = v.max(0.0);
                }
            }
            cur = out;
        }
        Ok(cur)
    }

    /// Inference-mode class probabilities for one input.
    pub fn predict(&self, x: &Grid2D) -> Result<ProbVector> {
        Ok(ProbVector::new_unchecked(softmax_raw(&self.logits(x)?)))
    }

    /// Inference over many inputs; per-example work is spread over the
    /// rayon pool, results keep input order.
    pub fn predict_many(&self, xs: &[&Grid2D]) -> Result<Vec<ProbVector>> {
        xs.par_iter().map(|x| self.predict(x)).collect()
    }

    /// Forward pass over a batch, keeping every intermediate needed by
    /// [`ModelParams::backward_batch`].
    pub fn forward_batch(&self, xs: &[&Grid2D], opts: &ForwardOptions) -> Result<BatchTrace> {
        if xs.is_empty() {
            return Err(Error::usage("empty batch"));
        }
        if !(0.0..1.0).contains(&opts.dropout) {
            return Err(Error::usage(format!("dropout rate {} outside [0, 1)", opts.dropout)));
        }
        for x in xs {
            self.check_input(x)?;
        }
        let workers = opts.workers.clamp(1, xs.len());
        let chunk = xs.len().div_ceil(workers);
        let mut ex: Vec<ExampleTrace> = xs
            .iter()
            .map(|x| ExampleTrace {
                cur: x.as_slice().to_vec(),
                ..ExampleTrace::default()
            })
            .collect();
        let mut bn_stats = Vec::with_capacity(self.plan.stages.len());

        for (l, st) in self.plan.stages.iter().enumerate() {
            let g = st.geom;
            let off = self.layout.conv[l];
            let w = &self.values[off.weights..off.weights + g.weight_len()];
            let b = &self.values[off.bias..off.bias + g.cout];
            let plane = g.ho() * g.wo();

            ex.par_chunks_mut(chunk).for_each(|part| {
                for e in part.iter_mut() {
                    let mut z = vec![0.0; g.out_len()];
                    conv_multi_forward(&g, &e.cur, w, b, &mut z);
                    e.conv.push(ConvCache {
                        input: std::mem::take(&mut e.cur),
                        xhat: z,
                        pool_idx: Vec::new(),
                    });
                }
            });

            let (mean, var) = match opts.mode {
                Mode::Train => {
                    let count = (xs.len() * plane) as f64;
                    let sums = reduce_workers(&ex, chunk, g.cout, |e, acc| {
                        let z = &e.conv[l].xhat;
                        for f in 0..g.cout {
                            acc[f] += z[f * plane..(f + 1) * plane].iter().sum::<f64>();
                        }
                    });
                    let mean: Vec<f64> = sums.iter().map(|s| s / count).collect();
                    let sq = reduce_workers(&ex, chunk, g.cout, |e, acc| {
                        let z = &e.conv[l].xhat;
                        for f in 0..g.cout {
                            acc[f] += z[f * plane..(f + 1) * plane]
                                .iter()
                                .map(|v| (v - mean[f]) * (v - mean[f]))
                                .sum::<f64>();
                        }
                    });
                    let var: Vec<f64> = sq.iter().map(|s| s / count).collect();
                    (mean, var)
                }
                Mode::Infer => {
                    let (rm, rv) = self.running_slices(l);
                    (rm.to_vec(), rv.to_vec())
                }
            };

            let gamma = &self.values[off.gamma..off.gamma + g.cout];
            let beta = &self.values[off.beta..off.beta + g.cout];
            let pool = self.arch.pool;
            ex.par_chunks_mut(chunk).for_each(|part| {
                for e in part.iter_mut() {
                    let cache = &mut e.conv[l];
                    let mut a = vec![0.0; g.out_len()];
                    for f in 0..g.cout {
                        let inv = 1.0 / (var[f] + BN_EPS).sqrt();
                        let zs = &mut cache.xhat[f * plane..(f + 1) * plane];
                        let ys = &mut a[f * plane..(f + 1) * plane];
                        for (zv, yv) in zs.iter_mut().zip(ys.iter_mut()) {
                            *zv = (*zv - mean[f]) * inv;
                            *yv = (gamma[f] * *zv + beta[f]).max(0.0);
                        }
                    }
                    match st.pooled {
                        Some((ph, pw)) => {
                            let mut out = vec![0.0; g.cout * ph * pw];
                            let mut idx = vec![0usize; g.cout * ph * pw];
                            for f in 0..g.cout {
                                pool_channel(
                                    &a[f * plane..(f + 1) * plane],
                                    g.ho(),
                                    g.wo(),
                                    pool,
                                    pool,
                                    &mut out[f * ph * pw..(f + 1) * ph * pw],
                                    &mut idx[f * ph * pw..(f + 1) * ph * pw],
                                );
                            }
                            e.cur = out;
                            cache.pool_idx = idx;
                        }
                        None => {
                            let mut feat = vec![0.0; g.cout];
                            let mut idx = vec![0usize; g.cout];
                            for f in 0..g.cout {
                                let ch = &a[f * plane..(f + 1) * plane];
                                let k = argmax_first(ch);
                                feat[f] = ch[k];
                                idx[f] = k;
                            }
                            e.cur = feat;
                            cache.pool_idx = idx;
                        }
                    }
                }
            });
            bn_stats.push((mean, var));
        }

        let n_dense = self.layout.dense.len();
        let values = &self.values;
        let layout = &self.layout;
        ex.par_chunks_mut(chunk)
            .enumerate()
            .try_for_each(|(wk, part)| -> Result<()> {
                let m = part.len();
                let mut rngs: Vec<ChaCha8Rng> = (0..m)
                    .map(|j| {
                        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                        rng.set_stream((wk * chunk + j) as u64);
                        rng
                    })
                    .collect();
                for (k, off) in layout.dense.iter().enumerate() {
                    let x: Vec<f64> = part.iter().flat_map(|e| e.cur.iter().copied()).collect();
                    let mut out = vec![0.0; m * off.outputs];
                    dense_batch(
                        &x,
                        m,
                        &values[off.weights..off.weights + off.inputs * off.outputs],
                        &values[off.bias..off.bias + off.outputs],
                        &mut out,
                    );
                    for ((e, rng), row) in part.iter_mut().zip(&mut rngs).zip(out.chunks(off.outputs)) {
                        let mut row = row.to_vec();
                        e.dense_inputs.push(std::mem::take(&mut e.cur));
                        if k + 1 < n_dense {
                            let mask = if opts.mode == Mode::Train && opts.dropout > 0.0 {
                                dropout_mask(off.outputs, opts.dropout, rng)?
                            } else {
                                Vec::new()
                            };
                            e.dense_pre.push(row.clone());
                            for (i, v) in row.iter_mut().enumerate() {
                                *v = v.max(0.0);
                                if !mask.is_empty() {
                                    *v *= mask[i];
                                }
                            }
                            e.masks.push(mask);
                        }
                        e.cur = row;
                    }
                }
                for e in part.iter_mut() {
                    e.probs = softmax_raw(&e.cur);
                }
                Ok(())
            })?;

        Ok(BatchTrace {
            mode: opts.mode,
            workers,
            chunk,
            params_len: self.values.len(),
            arch: self.arch.clone(),
            examples: ex,
            bn_stats,
        })
    }

    /// Reverse pass. `dlogits[n]` is the loss gradient with respect to the
    /// logits of example `n`; the returned gradient is summed over the batch.
    pub fn backward_batch(&self, trace: &BatchTrace, dlogits: &[Vec<f64>]) -> Result<Gradient> {
        if trace.arch != self.arch || trace.params_len != self.values.len() {
            return Err(Error::usage("trace was produced by a different architecture"));
        }
        if dlogits.len() != trace.examples.len() {
            return Err(Error::usage(format!(
                "{} output gradients for a batch of {}",
                dlogits.len(),
                trace.examples.len()
            )));
        }
        if dlogits.iter().any(|d| d.len() != self.arch.num_categories) {
            return Err(Error::shape("output gradient length must equal category count"));
        }
        let chunk = trace.chunk;
        let n_workers = trace.examples.len().div_ceil(chunk);
        let mut grads: Vec<Vec<f64>> = vec![vec![0.0; self.values.len()]; n_workers];
        // Gradient flowing into the current layer's output, per example.
        let mut flow: Vec<Vec<f64>> = vec![Vec::new(); trace.examples.len()];

        let values = &self.values;
        let layout = &self.layout;
        let n_dense = layout.dense.len();
        flow.par_chunks_mut(chunk)
            .zip(grads.par_iter_mut())
            .enumerate()
            .for_each(|(wk, (fpart, gw))| {
                let m = fpart.len();
                let exs = &trace.examples[wk * chunk..wk * chunk + m];
                let mut d: Vec<f64> = dlogits[wk * chunk..wk * chunk + m].concat();
                for k in (0..n_dense).rev() {
                    let off = layout.dense[k];
                    if k + 1 < n_dense {
                        for (e, drow) in exs.iter().zip(d.chunks_mut(off.outputs)) {
                            let (mask, pre) = (&e.masks[k], &e.dense_pre[k]);
                            for (i, dv) in drow.iter_mut().enumerate() {
                                if !mask.is_empty() {
                                    *dv *= mask[i];
                                }
                                if pre[i] <= 0.0 {
                                    *dv = 0.0;
                                }
                            }
                        }
                    }
                    let x: Vec<f64> = exs.iter().flat_map(|e| e.dense_inputs[k].iter().copied()).collect();
                    let mut dx = vec![0.0; m * off.inputs];
                    let (wpart, rest) = gw.split_at_mut(off.bias);
                    dense_batch_backward(
                        &x,
                        m,
                        &values[off.weights..off.weights + off.inputs * off.outputs],
                        &d,
                        &mut wpart[off.weights..off.weights + off.inputs * off.outputs],
                        &mut rest[..off.outputs],
                        &mut dx,
                    );
                    d = dx;
                }
                let width = layout.dense[0].inputs;
                for (fl, drow) in fpart.iter_mut().zip(d.chunks(width)) {
                    *fl = drow.to_vec();
                }
            });

        for l in (0..self.plan.stages.len()).rev() {
            let st = &self.plan.stages[l];
            let g = st.geom;
            let off = layout.conv[l];
            let plane = g.ho() * g.wo();
            let (_, var) = &trace.bn_stats[l];
            let gamma = &values[off.gamma..off.gamma + g.cout];
            let beta = &values[off.beta..off.beta + g.cout];

            // Route the output gradient back through pooling and ReLU to dy
            // (gradient w.r.t. the batch-norm output).
            flow.par_chunks_mut(chunk).enumerate().for_each(|(wk, fpart)| {
                for (j, fl) in fpart.iter_mut().enumerate() {
                    let e = &trace.examples[wk * chunk + j];
                    let cache = &e.conv[l];
                    let mut dy = vec![0.0; g.out_len()];
                    match st.pooled {
                        Some((ph, pw)) => {
                            for f in 0..g.cout {
                                for k in 0..ph * pw {
                                    let src = cache.pool_idx[f * ph * pw + k];
                                    dy[f * plane + src] += fl[f * ph * pw + k];
                                }
                            }
                        }
                        None => {
                            for f in 0..g.cout {
                                dy[f * plane + cache.pool_idx[f]] += fl[f];
                            }
                        }
                    }
                    for f in 0..g.cout {
                        let xs = &cache.xhat[f * plane..(f + 1) * plane];
                        for (dv, &xh) in dy[f * plane..(f + 1) * plane].iter_mut().zip(xs) {
                            if gamma[f] * xh + beta[f] <= 0.0 {
                                *dv = 0.0;
                            }
                        }
                    }
                    *fl = dy;
                }
            });

            // dγ and dβ partials per worker, stored in the worker buffers.
            flow.par_chunks(chunk)
                .zip(grads.par_iter_mut())
                .enumerate()
                .for_each(|(wk, (fpart, gw))| {
                    for (j, dy) in fpart.iter().enumerate() {
                        let xh = &trace.examples[wk * chunk + j].conv[l].xhat;
                        for f in 0..g.cout {
                            let r = f * plane..(f + 1) * plane;
                            gw[off.gamma + f] += super::ops::dot(&dy[r.clone()], &xh[r.clone()]);
                            gw[off.beta + f] += dy[r].iter().sum::<f64>();
                        }
                    }
                });
            let mut dgamma = vec![0.0; g.cout];
            let mut dbeta = vec![0.0; g.cout];
            for gw in &grads {
                for f in 0..g.cout {
                    dgamma[f] += gw[off.gamma + f];
                    dbeta[f] += gw[off.beta + f];
                }
            }
            let count = (trace.examples.len() * plane) as f64;
            let mode = trace.mode;

            let wts = &values[off.weights..off.weights + g.weight_len()];
            flow.par_chunks_mut(chunk)
                .zip(grads.par_iter_mut())
                .enumerate()
                .for_each(|(wk, (fpart, gw))| {
                    for (j, fl) in fpart.iter_mut().enumerate() {
                        let cache = &trace.examples[wk * chunk + j].conv[l];
                        let mut dz = std::mem::take(fl);
                        for f in 0..g.cout {
                            let inv = 1.0 / (var[f] + BN_EPS).sqrt();
                            let xs = &cache.xhat[f * plane..(f + 1) * plane];
                            let ds = &mut dz[f * plane..(f + 1) * plane];
                            match mode {
                                Mode::Train => {
                                    let k = gamma[f] * inv / count;
                                    for (dv, &xh) in ds.iter_mut().zip(xs) {
                                        *dv = k * (count * *dv - dbeta[f] - xh * dgamma[f]);
                                    }
                                }
                                Mode::Infer => {
                                    let k = gamma[f] * inv;
                                    for dv in ds.iter_mut() {
                                        *dv *= k;
                                    }
                                }
                            }
                        }
                        let (head, tail) = gw.split_at_mut(off.bias);
                        let mut dinput = if l > 0 { vec![0.0; g.in_len()] } else { Vec::new() };
                        conv_multi_backward(
                            &g,
                            &cache.input,
                            wts,
                            &dz,
                            &mut head[off.weights..],
                            &mut tail[..g.cout],
                            if l > 0 { Some(&mut dinput) } else { None },
                        );
                        *fl = dinput;
                    }
                });
        }

        // Fixed ascending-worker reduction.
        let mut total = Gradient::zeros(self.values.len());
        for gw in &grads {
            for (t, v) in total.0.iter_mut().zip(gw) {
                *t += v;
            }
        }
        Ok(total)
    }
}

fn reduce_workers<F>(ex: &[ExampleTrace], chunk: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(&ExampleTrace, &mut [f64]) + Sync,
{
    let partials: Vec<Vec<f64>> = ex
        .par_chunks(chunk)
        .map(|part| {
            let mut acc = vec![0.0; width];
            for e in part {
                f(e, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; width];
    for p in &partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardOptions {
    pub mode: Mode,
    pub dropout: f64,
    /// Dropout masks are drawn from stream `n` of this seed for example `n`.
    pub seed: u64,
    pub workers: usize,
}

impl ForwardOptions {
    pub fn infer() -> Self {
        Self {
            mode: Mode::Infer,
            dropout: 0.0,
            seed: 0,
            workers: 1,
        }
    }

    pub fn train(dropout: f64, seed: u64) -> Self {
        Self {
            mode: Mode::Train,
            dropout,
            seed,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

#[derive(Debug, Clone, Default)]
struct ConvCache {
    input: Vec<f64>,
    /// Standardized pre-activation (before γ/β).
    xhat: Vec<f64>,
    pool_idx: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
struct ExampleTrace {
    cur: Vec<f64>,
    conv: Vec<ConvCache>,
    dense_inputs: Vec<Vec<f64>>,
    dense_pre: Vec<Vec<f64>>,
    masks: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

/// Cached intermediates of a batched forward pass.
#[derive(Debug, Clone)]
pub struct BatchTrace {
    mode: Mode,
    workers: usize,
    chunk: usize,
    params_len: usize,
    arch: Architecture,
    examples: Vec<ExampleTrace>,
    bn_stats: Vec<(Vec<f64>, Vec<f64>)>,
}

impl BatchTrace {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn probs(&self, n: usize) -> ProbVector {
        ProbVector::new_unchecked(self.examples[n].probs.clone())
    }

    pub fn logits(&self, n: usize) -> &[f64] {
        &self.examples[n].cur
    }

    /// Batch statistics `(mean, var)` used by each conv layer.
    pub fn bn_stats(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.bn_stats
    }
}

/// Single-input forward pass returning class probabilities.
pub fn model_forward(x: &Grid2D, params: &ModelParams, mode: Mode) -> Result<ProbVector> {
    match mode {
        Mode::Infer => params.predict(x),
        Mode::Train => Ok(params
            .forward_batch(&[x], &ForwardOptions::train(0.0, 0))?
            .probs(0)),
    }
}

/// Single-trace reverse pass; `dlogits` holds one gradient per traced input.
pub fn model_backward(
    trace: &BatchTrace,
    params: &ModelParams,
    dlogits: &[Vec<f64>],
) -> Result<Gradient> {
    params.backward_batch(trace, dlogits)
}
