//! Multinomial logistic regression fitted by gradient descent with an
//! Armijo backtracking step. Two categories use the sigmoid form
//! `P(Y=1|x) = 1 / (1 + e^{−(w0 + w·x)})`.

use crate::error::{Error, Result};
use crate::nn::ops::{dot, softmax_raw};
use crate::nn::{Grid2D, ProbVector};

/// Per-feature z-scoring fitted on training features.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::usage("cannot standardize zero rows"));
        };
        let d = first.len();
        check_rows(rows, d)?;
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.iter().map(|s| (s / n).sqrt().max(1e-8)).collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

fn check_rows(rows: &[Vec<f64>], d: usize) -> Result<()> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(Error::shape(format!("feature row {i} has length {}, expected {d}", r.len())));
        }
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data {
                row: i,
                col: j,
                msg: "non-finite feature".into(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogisticParams {
    /// `weights` is `C × d`.
    Multinomial { weights: Grid2D, intercepts: Vec<f64> },
    Binary { w0: f64, w: Vec<f64> },
}

impl LogisticParams {
    pub fn num_categories(&self) -> usize {
        match self {
            LogisticParams::Multinomial { intercepts, .. } => intercepts.len(),
            LogisticParams::Binary { .. } => 2,
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> ProbVector {
        match self {
            LogisticParams::Multinomial {
                weights,
                intercepts,
            } => {
                let z: Vec<f64> = (0..intercepts.len())
                    .map(|c| intercepts[c] + dot(weights.row(c), x))
                    .collect();
                ProbVector::new_unchecked(softmax_raw(&z))
            }
            LogisticParams::Binary { w0, w } => {
                let p1 = sigmoid(w0 + dot(w, x));
                ProbVector::new_unchecked(vec![1.0 - p1, p1])
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        self.predict_proba(x).argmax()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Coefficient of `(λ/2)·Σ‖w_c‖²` in the multinomial objective.
    pub l2: f64,
    pub max_iter: usize,
    /// Stop once the gradient's Euclidean norm falls below this.
    pub tol: f64,
}

impl FitOptions {
    pub fn new(l2: f64) -> Self {
        Self {
            l2,
            max_iter: 5000,
            tol: 1e-6,
        }
    }
}

/// Fits with default options; two categories take the sigmoid path.
pub fn logistic_train(
    features: &[Vec<f64>],
    labels: &[usize],
    num_categories: usize,
    l2: f64,
) -> Result<LogisticParams> {
    logistic_train_with(features, labels, num_categories, FitOptions::new(l2))
}

pub fn logistic_train_with(
    features: &[Vec<f64>],
    labels: &[usize],
    num_categories: usize,
    opts: FitOptions,
) -> Result<LogisticParams> {
    if num_categories == 2 {
        binary_train(features, labels, opts)
    } else {
        logistic_train_multinomial(features, labels, num_categories, opts)
    }
}

fn check_inputs(features: &[Vec<f64>], labels: &[usize], c: usize) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::usage("logistic regression on zero examples"));
    }
    if features.len() != labels.len() {
        return Err(Error::usage("feature and label counts differ"));
    }
    if c < 2 {
        return Err(Error::usage("need at least two categories"));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::usage(format!("label {l} outside 0..{c}")));
    }
    let d = features[0].len();
    check_rows(features, d)?;
    Ok(d)
}

/// Plain gradient descent with backtracking on a smooth objective over a
/// flat parameter vector.
fn descend(
    mut x: Vec<f64>,
    opts: FitOptions,
    eval: impl Fn(&[f64], Option<&mut [f64]>) -> f64,
) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut f = eval(&x, Some(&mut g));
    let mut step = 1.0;
    let mut trial = vec![0.0; x.len()];
    for _ in 0..opts.max_iter {
        let gn2: f64 = g.iter().map(|v| v * v).sum();
        if gn2.sqrt() < opts.tol {
            break;
        }
        loop {
            for ((t, xi), gi) in trial.iter_mut().zip(&x).zip(&g) {
                *t = xi - step * gi;
            }
            let ft = eval(&trial, None);
            if ft <= f - 0.5 * step * gn2 || step < 1e-20 {
                break;
            }
            step *= 0.5;
        }
        std::mem::swap(&mut x, &mut trial);
        f = eval(&x, Some(&mut g));
        step *= 2.0;
    }
    x
}

/// Softmax regression on all `C` weight rows.
pub fn logistic_train_multinomial(
    features: &[Vec<f64>],
    labels: &[usize],
    num_categories: usize,
    opts: FitOptions,
) -> Result<LogisticParams> {
    let d = check_inputs(features, labels, num_categories)?;
    let c = num_categories;
    let n = features.len() as f64;
    // Layout: W (c × d) then b (c).
    let eval = |x: &[f64], grad: Option<&mut [f64]>| -> f64 {
        let (w, b) = x.split_at(c * d);
        let mut loss = 0.0;
        let mut gbuf = grad;
        if let Some(g) = gbuf.as_deref_mut() {
            g.fill(0.0);
        }
        for (row, &y) in features.iter().zip(labels) {
            let z: Vec<f64> = (0..c).map(|k| b[k] + dot(&w[k * d..(k + 1) * d], row)).collect();
            let p = softmax_raw(&z);
            loss -= p[y].max(1e-300).ln();
            if let Some(g) = gbuf.as_deref_mut() {
                let (gw, gb) = g.split_at_mut(c * d);
                for k in 0..c {
                    let r = p[k] - if k == y { 1.0 } else { 0.0 };
                    gb[k] += r / n;
                    for (gi, xi) in gw[k * d..(k + 1) * d].iter_mut().zip(row) {
                        *gi += r * xi / n;
                    }
                }
            }
        }
        let reg: f64 = w.iter().map(|v| v * v).sum();
        if let Some(g) = gbuf {
            for (gi, wi) in g[..c * d].iter_mut().zip(w) {
                *gi += opts.l2 * wi;
            }
        }
        loss / n + 0.5 * opts.l2 * reg
    };
    let x = descend(vec![0.0; c * d + c], opts, eval);
    let (w, b) = x.split_at(c * d);
    Ok(LogisticParams::Multinomial {
        weights: Grid2D::from_vec(c, d, w.to_vec())?,
        intercepts: b.to_vec(),
    })
}

/// Sigmoid regression; the penalty `(λ/4)‖w‖²` makes its optimum coincide
/// with the two-row multinomial fit at the same `λ`.
fn binary_train(features: &[Vec<f64>], labels: &[usize], opts: FitOptions) -> Result<LogisticParams> {
    let d = check_inputs(features, labels, 2)?;
    let n = features.len() as f64;
    // Layout: w (d) then w0.
    let eval = |x: &[f64], grad: Option<&mut [f64]>| -> f64 {
        let (w, w0) = (&x[..d], x[d]);
        let mut loss = 0.0;
        let mut gbuf = grad;
        if let Some(g) = gbuf.as_deref_mut() {
            g.fill(0.0);
        }
        for (row, &y) in features.iter().zip(labels) {
            let z = w0 + dot(w, row);
            // −log σ(z) for y=1, −log σ(−z) for y=0, computed stably.
            let s = if y == 1 { z } else { -z };
            loss += if s >= 0.0 {
                (-s).exp().ln_1p()
            } else {
                -s + s.exp().ln_1p()
            };
            if let Some(g) = gbuf.as_deref_mut() {
                let r = sigmoid(z) - y as f64;
                for (gi, xi) in g[..d].iter_mut().zip(row) {
                    *gi += r * xi / n;
                }
                g[d] += r / n;
            }
        }
        let reg: f64 = w.iter().map(|v| v * v).sum();
        if let Some(g) = gbuf {
            for (gi, wi) in g[..d].iter_mut().zip(w) {
                *gi += 0.5 * opts.l2 * wi;
            }
        }
        loss / n + 0.25 * opts.l2 * reg
    };
    let x = descend(vec![0.0; d + 1], opts, eval);
    Ok(LogisticParams::Binary {
        w0: x[d],
        w: x[..d].to_vec(),
    })
}
