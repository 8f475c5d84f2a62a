//! Central finite-difference probes for every differentiable piece of the
//! model. Each check returns the norm-wise relative error
//! `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)`.

#![allow(dead_code)]

use painmeter::nn::{
    batchnorm_backward, batchnorm_forward, conv_backward, conv_forward, dense_backward,
    dense_forward, softmax, Activation, Architecture, ConvFilter, ForwardOptions, Grid2D,
    ModelParams, Mode, RunningStats,
};
use painmeter::ordinal::{ordinal_loss_gradient, ordinal_weight, weighted_ce, OrdinalTarget};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;

pub fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    assert_eq!(a.len(), n.len());
    let diff = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nn = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = na.max(nn);
    if denom == 0.0 {
        0.0
    } else {
        diff / denom
    }
}

/// Central differences of `f` with respect to every entry of `x`.
pub fn numeric(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + H;
            let up = f(&probe);
            probe[i] = orig - H;
            let dn = f(&probe);
            probe[i] = orig;
            (up - dn) / (2.0 * H)
        })
        .collect()
}

fn randn(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn grid(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Grid2D {
    Grid2D::from_vec(r, c, randn(rng, r * c)).unwrap()
}

fn weighted_sum(a: &Grid2D, w: &Grid2D) -> f64 {
    a.as_slice().iter().zip(w.as_slice()).map(|(x, y)| x * y).sum()
}

pub fn check_conv(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = grid(&mut rng, 5, 30);
    let w = grid(&mut rng, 3, 7);
    let b = rng.gen_range(-0.2..0.2);
    let dout = grid(&mut rng, 3, 24);
    let filter = ConvFilter::new(w.clone(), b).unwrap();
    let (dw, db, dx) = conv_backward(&x, &filter, &dout).unwrap();

    let loss = |x: &Grid2D, w: &Grid2D, b: f64| {
        weighted_sum(&conv_forward(x, &ConvFilter::new(w.clone(), b).unwrap()).unwrap(), &dout)
    };
    let nw = numeric(w.as_slice(), |v| loss(&x, &Grid2D::from_vec(3, 7, v.to_vec()).unwrap(), b));
    let nb = numeric(&[b], |v| loss(&x, &w, v[0]));
    let nx = numeric(x.as_slice(), |v| loss(&Grid2D::from_vec(5, 30, v.to_vec()).unwrap(), &w, b));

    let mut a = dw.into_vec();
    a.push(db);
    a.extend(dx.into_vec());
    let mut n = nw;
    n.extend(nb);
    n.extend(nx);
    rel_err(&a, &n)
}

pub fn check_dense(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ni, no) = (12, 7);
    let v = randn(&mut rng, ni);
    let w = grid(&mut rng, no, ni);
    let b = randn(&mut rng, no);
    let dout = randn(&mut rng, no);
    let loss = |v: &[f64], w: &Grid2D, b: &[f64]| -> f64 {
        dense_forward(v, w, b, Activation::Relu)
            .unwrap()
            .iter()
            .zip(&dout)
            .map(|(x, y)| x * y)
            .sum()
    };
    let (dw, db, dv) = dense_backward(&v, &w, &b, Activation::Relu, &dout).unwrap();
    let nw = numeric(w.as_slice(), |x| loss(&v, &Grid2D::from_vec(no, ni, x.to_vec()).unwrap(), &b));
    let nb = numeric(&b, |x| loss(&v, &w, x));
    let nv = numeric(&v, |x| loss(x, &w, &b));
    let a: Vec<f64> = dw.into_vec().into_iter().chain(db).chain(dv).collect();
    let n: Vec<f64> = nw.into_iter().chain(nb).chain(nv).collect();
    rel_err(&a, &n)
}

pub fn check_batchnorm(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (batch, f, cols) = (4, 3, 6);
    let xs: Vec<Grid2D> = (0..batch).map(|_| grid(&mut rng, f, cols)).collect();
    let gamma: Vec<f64> = (0..f).map(|_| rng.gen_range(0.5..1.5)).collect();
    let beta = randn(&mut rng, f);
    let dout: Vec<Grid2D> = (0..batch).map(|_| grid(&mut rng, f, cols)).collect();

    let loss = |xs: &[Grid2D], gamma: &[f64], beta: &[f64]| -> f64 {
        let mut rs = RunningStats::new(f);
        let o = batchnorm_forward(xs, gamma, beta, Mode::Train, &mut rs).unwrap();
        o.out.iter().zip(&dout).map(|(a, d)| weighted_sum(a, d)).sum()
    };
    let mut rs = RunningStats::new(f);
    let fw = batchnorm_forward(&xs, &gamma, &beta, Mode::Train, &mut rs).unwrap();
    let (dg, db, dx) = batchnorm_backward(&fw.xhat, &fw.var, &gamma, &dout).unwrap();

    let flat: Vec<f64> = xs.iter().flat_map(|g| g.as_slice().to_vec()).collect();
    let unflat = |v: &[f64]| -> Vec<Grid2D> {
        v.chunks(f * cols)
            .map(|c| Grid2D::from_vec(f, cols, c.to_vec()).unwrap())
            .collect()
    };
    let nx = numeric(&flat, |v| loss(&unflat(v), &gamma, &beta));
    let ng = numeric(&gamma, |v| loss(&xs, v, &beta));
    let nb = numeric(&beta, |v| loss(&xs, &gamma, v));

    let a: Vec<f64> = dg
        .into_iter()
        .chain(db)
        .chain(dx.into_iter().flat_map(Grid2D::into_vec))
        .collect();
    let n: Vec<f64> = ng.into_iter().chain(nb).chain(nx).collect();
    rel_err(&a, &n)
}

/// Softmax followed by the ordinal loss, weight frozen at the reference
/// logits.
pub fn check_softmax_ordinal(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = rng.gen_range(2..=7);
    let z: Vec<f64> = (0..c).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let t = OrdinalTarget::new(rng.gen_range(0..c), c).unwrap();
    let p = softmax(&z);
    let w = ordinal_weight(&p, &t).unwrap();
    let a = ordinal_loss_gradient(&p, &t).unwrap();
    let n = numeric(&z, |v| weighted_ce(&softmax(v), &t, w));
    rel_err(&a, &n)
}

fn model_check(arch: Architecture, seed: u64, batch: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let params = ModelParams::init(arch.clone(), seed).unwrap();
    let xs: Vec<Grid2D> = (0..batch)
        .map(|_| grid(&mut rng, arch.input_channels, arch.seq_len))
        .collect();
    let refs: Vec<&Grid2D> = xs.iter().collect();
    let c = arch.num_categories;
    let targets: Vec<OrdinalTarget> = (0..batch)
        .map(|_| OrdinalTarget::new(rng.gen_range(0..c), c).unwrap())
        .collect();
    let opts = ForwardOptions::train(0.0, seed);

    let trace = params.forward_batch(&refs, &opts).unwrap();
    let weights: Vec<f64> = (0..batch)
        .map(|n| ordinal_weight(&trace.probs(n), &targets[n]).unwrap())
        .collect();
    let dlogits: Vec<Vec<f64>> = (0..batch)
        .map(|n| {
            ordinal_loss_gradient(&trace.probs(n), &targets[n])
                .unwrap()
                .into_iter()
                .map(|g| g / batch as f64)
                .collect()
        })
        .collect();
    let analytic = params.backward_batch(&trace, &dlogits).unwrap();

    let mut probe = params.clone();
    let numeric = numeric(&params.values, |v| {
        probe.values.copy_from_slice(v);
        let tr = probe.forward_batch(&refs, &opts).unwrap();
        (0..batch)
            .map(|n| weighted_ce(&tr.probs(n), &targets[n], weights[n]))
            .sum::<f64>()
            / batch as f64
    });
    rel_err(analytic.as_slice(), &numeric)
}

/// Two conv layers with train-mode batch norm, pooling, one hidden layer.
pub fn check_cnn(seed: u64) -> f64 {
    let mut arch = Architecture::cnn_with(4, 48, 3, 2, 3, (2, 5), 3);
    arch.pool = (1, 2);
    arch.hidden = vec![6];
    model_check(arch, seed, 3)
}

pub fn check_mlp(seed: u64) -> f64 {
    let mut arch = Architecture::mlp(3, 10, 4);
    arch.hidden = vec![12, 8, 6];
    model_check(arch, seed, 3)
}

pub const CHECKS: [(&str, fn(u64) -> f64); 6] = [
    ("conv", check_conv),
    ("dense", check_dense),
    ("batchnorm", check_batchnorm),
    ("softmax+ordinal", check_softmax_ordinal),
    ("cnn", check_cnn),
    ("mlp", check_mlp),
];
