use super::model::{Gradient, ModelParams};
use crate::error::{Error, Result};

/// Bias-corrected Adam moments for one [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
        }
    }

    pub fn for_params(params: &ModelParams, lr: f64) -> Self {
        Self::new(params.num_params(), lr)
    }
}

/// One Adam update of `params` in place.
pub fn adam_step(params: &mut ModelParams, grads: &Gradient, state: &mut AdamState) -> Result<()> {
    let n = params.values.len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::usage(format!(
            "adam shapes differ: params {n}, grads {}, moments {}",
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - state.beta1.powf(t);
    let c2 = 1.0 - state.beta2.powf(t);
    let (b1, b2) = (state.beta1, state.beta2);
    for (((p, &g), m), v) in params
        .values
        .iter_mut()
        .zip(grads.as_slice())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let mhat = *m / c1;
        let vhat = *v / c2;
        *p -= state.lr * mhat / (vhat.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::Architecture;

    fn small() -> ModelParams {
        ModelParams::init(Architecture::mlp(2, 5, 3), 4).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = small();
        let before = p.values.clone();
        let mut st = AdamState::for_params(&p, 1e-3);
        let g = Gradient::zeros(p.num_params());
        adam_step(&mut p, &g, &mut st).unwrap();
        assert_eq!(p.values, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = small();
        let before = p.values.clone();
        let g = Gradient(
            (0..p.num_params())
                .map(|i| if i % 3 == 0 { 0.0 } else if i % 2 == 0 { 0.7 } else { -2.5 })
                .collect(),
        );
        let lr = 0.01;
        let mut st = AdamState::for_params(&p, lr);
        adam_step(&mut p, &g, &mut st).unwrap();
        for ((a, b), gi) in p.values.iter().zip(&before).zip(g.as_slice()) {
            let expected = -lr * gi.signum() * if *gi == 0.0 { 0.0 } else { 1.0 };
            assert!((a - b - expected).abs() < 1e-9 * lr.max(1.0), "{a} {b} {gi}");
        }
    }

    #[test]
    fn shape_mismatch_is_usage_error() {
        let mut p = small();
        let mut st = AdamState::for_params(&p, 1e-3);
        let r = adam_step(&mut p, &Gradient::zeros(3), &mut st);
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut p = small();
            let mut st = AdamState::for_params(&p, 0.05);
            for k in 0..20 {
                let g = Gradient(p.values.iter().map(|v| (v * 3.0 + k as f64).sin()).collect());
                adam_step(&mut p, &g, &mut st).unwrap();
            }
            p.values
        };
        assert_eq!(run(), run());
    }
}
