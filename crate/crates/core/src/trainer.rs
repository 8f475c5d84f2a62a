//! Mini-batch Adam training with validation-based early stopping, and the
//! worker-count-invariant gradient step.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::SliceTensor;
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamState, ForwardOptions, Gradient, Grid2D, ModelParams, ProbVector};
use crate::ordinal::{ordinal_loss, ordinal_loss_gradient, OrdinalTarget};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Hard cap on optimizer steps; 0 means no cap.
    pub max_steps: usize,
    pub dropout_rate: f64,
    pub seq_length_s: f64,
    pub learning_rate: f64,
    pub patience_validations: usize,
    pub validation_every_steps: usize,
    /// Fraction of training minute samples held out for validation.
    pub val_fraction: f64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 24,
            max_epochs: 2000,
            max_steps: 0,
            dropout_rate: 0.5,
            seq_length_s: 15.0,
            learning_rate: 1e-3,
            patience_validations: 100,
            validation_every_steps: 10,
            val_fraction: 0.1,
            seed: 0,
            workers: 1,
        }
    }
}

const KEYS: [&str; 11] = [
    "batch_size",
    "max_epochs",
    "max_steps",
    "dropout_rate",
    "seq_length_s",
    "learning_rate",
    "patience_validations",
    "validation_every_steps",
    "val_fraction",
    "seed",
    "workers",
];

impl TrainConfig {
    /// The published hyper-parameters, including learning rate 0.5.
    pub fn paper() -> Self {
        Self {
            learning_rate: 0.5,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default()),
            "paper" => Ok(Self::paper()),
            other => Err(Error::usage(format!("unknown config preset `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::usage(m));
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.workers == 0 || self.batch_size % self.workers != 0 {
            return fail(format!(
                "batch_size {} is not divisible by {} workers",
                self.batch_size, self.workers
            ));
        }
        if self.patience_validations == 0 || self.validation_every_steps == 0 {
            return fail("patience and validation cadence must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return fail(format!("learning_rate {} is invalid", self.learning_rate));
        }
        if !(self.seq_length_s.is_finite() && self.seq_length_s > 0.0) {
            return fail(format!("seq_length_s {} is invalid", self.seq_length_s));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return fail(format!("val_fraction {} outside [0, 1)", self.val_fraction));
        }
        Ok(())
    }

    /// Sets one field from its textual key and value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::usage(format!("bad value `{v}` for `{key}`")))
        }
        match key.trim() {
            "batch_size" => self.batch_size = num(key, value)?,
            "max_epochs" => self.max_epochs = num(key, value)?,
            "max_steps" => self.max_steps = num(key, value)?,
            "dropout_rate" => self.dropout_rate = num(key, value)?,
            "seq_length_s" => self.seq_length_s = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "patience_validations" => self.patience_validations = num(key, value)?,
            "validation_every_steps" => self.validation_every_steps = num(key, value)?,
            "val_fraction" => self.val_fraction = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            other => return Err(Error::usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "batch_size" => self.batch_size.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "max_steps" => self.max_steps.to_string(),
            "dropout_rate" => self.dropout_rate.to_string(),
            "seq_length_s" => self.seq_length_s.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "patience_validations" => self.patience_validations.to_string(),
            "validation_every_steps" => self.validation_every_steps.to_string(),
            "val_fraction" => self.val_fraction.to_string(),
            "seed" => self.seed.to_string(),
            "workers" => self.workers.to_string(),
            _ => return None,
        })
    }

    /// Parses `key=value` lines over `self`; `#` starts a comment.
    pub fn merge_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected key=value, found `{line}`"),
            })?;
            self.set(k, v).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.merge_text(&text, path)?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            writeln!(s, "{k}={}", self.get(k).expect("known key")).expect("string write");
        }
        s
    }
}

/// Output of one gradient step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Mean gradient over the batch.
    pub gradient: Gradient,
    /// Mean ordinal loss over the batch.
    pub loss: f64,
    /// Per-conv-layer batch statistics `(mean, var)`.
    pub bn_stats: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Train-mode forward and backward over `batch`, split into `workers`
/// contiguous sub-batches. The result does not depend on `workers` beyond
/// floating-point summation order.
pub fn parallel_gradient_step(
    params: &ModelParams,
    batch: &[(&Grid2D, usize)],
    workers: usize,
    dropout: f64,
    seed: u64,
) -> Result<StepOutput> {
    if batch.is_empty() {
        return Err(Error::usage("empty batch"));
    }
    if workers == 0 || batch.len() % workers != 0 {
        return Err(Error::usage(format!(
            "batch of {} cannot be split evenly across {workers} workers",
            batch.len()
        )));
    }
    let c = params.num_categories();
    let xs: Vec<&Grid2D> = batch.iter().map(|(x, _)| *x).collect();
    let opts = ForwardOptions::train(dropout, seed).with_workers(workers);
    let trace = params.forward_batch(&xs, &opts)?;
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut dlogits = Vec::with_capacity(batch.len());
    for (n, &(_, label)) in batch.iter().enumerate() {
        let target = OrdinalTarget::new(label, c)?;
        let p = trace.probs(n);
        loss += ordinal_loss(&p, &target)?;
        let mut g = ordinal_loss_gradient(&p, &target)?;
        for v in &mut g {
            *v *= scale;
        }
        dlogits.push(g);
    }
    let gradient = params.backward_batch(&trace, &dlogits)?;
    Ok(StepOutput {
        gradient,
        loss: loss * scale,
        bn_stats: trace.bn_stats().to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    EarlyStop,
    MaxEpochs,
    StepBudget,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::EarlyStop => "early_stop",
            StopReason::MaxEpochs => "max_epochs",
            StopReason::StepBudget => "step_budget",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationPoint {
    pub index: usize,
    pub step: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// `(step, mean batch loss)` for every step, starting at step 1.
    pub loss_curve: Vec<(usize, f64)>,
    pub validation_curve: Vec<ValidationPoint>,
    pub stop_step: usize,
    pub stop_reason: StopReason,
    /// Index into `validation_curve` of the returned parameters.
    pub best_validation: usize,
}

impl TrainReport {
    pub fn best_accuracy(&self) -> f64 {
        self.validation_curve[self.best_validation].accuracy
    }

    pub fn summary_text(&self) -> String {
        let best = &self.validation_curve[self.best_validation];
        format!(
            "stop_step={}\nstop_reason={}\nvalidations={}\nbest_validation={}\nbest_step={}\nbest_accuracy={}\n",
            self.stop_step,
            self.stop_reason.as_str(),
            self.validation_curve.len(),
            self.best_validation,
            best.step,
            best.accuracy
        )
    }

    pub fn loss_curve_text(&self) -> String {
        let mut s = String::from("step\tloss\n");
        for (step, loss) in &self.loss_curve {
            writeln!(s, "{step}\t{loss}").expect("string write");
        }
        s
    }

    pub fn validation_curve_text(&self) -> String {
        let mut s = String::from("validation\tstep\taccuracy\n");
        for v in &self.validation_curve {
            writeln!(s, "{}\t{}\t{}", v.index, v.step, v.accuracy).expect("string write");
        }
        s
    }
}

/// Per-slice predictions in inference mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<usize>,
    pub probabilities: Vec<ProbVector>,
    pub accuracy: f64,
}

pub fn evaluate(params: &ModelParams, slices: &[SliceTensor]) -> Result<Evaluation> {
    if slices.is_empty() {
        return Err(Error::usage("nothing to evaluate"));
    }
    let xs: Vec<&Grid2D> = slices.iter().map(|s| &s.values).collect();
    let probabilities = params.predict_many(&xs)?;
    let predictions: Vec<usize> = probabilities.iter().map(ProbVector::argmax).collect();
    let correct = predictions
        .iter()
        .zip(slices)
        .filter(|(p, s)| **p == s.label)
        .count();
    Ok(Evaluation {
        predictions,
        probabilities,
        accuracy: correct as f64 / slices.len() as f64,
    })
}

/// Trains `params` and returns the parameters with the best validation
/// accuracy. Validation runs every `validation_every_steps` steps and once
/// more at the end if the last step was not a validation step.
pub fn train(
    params: ModelParams,
    train_set: &[SliceTensor],
    val_set: &[SliceTensor],
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainReport)> {
    train_with_progress(params, train_set, val_set, cfg, |_| {})
}

pub fn train_with_progress(
    mut params: ModelParams,
    train_set: &[SliceTensor],
    val_set: &[SliceTensor],
    cfg: &TrainConfig,
    mut on_validation: impl FnMut(&ValidationPoint),
) -> Result<(ModelParams, TrainReport)> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::usage("training and validation sets must be nonempty"));
    }
    let c = params.num_categories();
    if let Some(s) = train_set.iter().chain(val_set).find(|s| s.label >= c) {
        return Err(Error::usage(format!(
            "label {} outside the model's {c} categories",
            s.label
        )));
    }
    let batch = cfg.batch_size.min(train_set.len());
    let workers = if batch % cfg.workers == 0 { cfg.workers } else { 1 };
    let mut adam = AdamState::for_params(&params, cfg.learning_rate);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);

    let mut loss_curve = Vec::new();
    let mut validation_curve: Vec<ValidationPoint> = Vec::new();
    let mut best: Option<(usize, ModelParams)> = None;
    let mut stale = 0;
    let mut step = 0;
    let mut reason = StopReason::MaxEpochs;

    let mut validate = |params: &ModelParams,
                        step: usize,
                        curve: &mut Vec<ValidationPoint>,
                        best: &mut Option<(usize, ModelParams)>,
                        stale: &mut usize|
     -> Result<()> {
        let acc = evaluate(params, val_set)?.accuracy;
        let point = ValidationPoint {
            index: curve.len(),
            step,
            accuracy: acc,
        };
        on_validation(&point);
        let improved = best
            .as_ref()
            .map_or(true, |(i, _)| acc > curve[*i].accuracy);
        if improved {
            *best = Some((point.index, params.clone()));
            *stale = 0;
        } else {
            *stale += 1;
        }
        curve.push(point);
        Ok(())
    };

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    'epochs: for _epoch in 0..cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks_exact(batch) {
            if cfg.max_steps > 0 && step >= cfg.max_steps {
                reason = StopReason::StepBudget;
                break 'epochs;
            }
            step += 1;
            let items: Vec<(&Grid2D, usize)> = chunk
                .iter()
                .map(|&i| (&train_set[i].values, train_set[i].label))
                .collect();
            let step_seed = cfg.seed ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let out = parallel_gradient_step(&params, &items, workers, cfg.dropout_rate, step_seed)?;
            if !out.loss.is_finite() || out.gradient.as_slice().iter().any(|g| !g.is_finite()) {
                return Err(Error::Training {
                    step,
                    msg: format!("non-finite loss {}", out.loss),
                });
            }
            loss_curve.push((step, out.loss));
            params.absorb_stats(&out.bn_stats);
            adam_step(&mut params, &out.gradient, &mut adam)?;
            if step % cfg.validation_every_steps == 0 {
                validate(&params, step, &mut validation_curve, &mut best, &mut stale)?;
                if stale >= cfg.patience_validations {
                    reason = StopReason::EarlyStop;
                    break 'epochs;
                }
            }
        }
    }
    if validation_curve.last().map_or(true, |v| v.step != step) {
        validate(&params, step, &mut validation_curve, &mut best, &mut stale)?;
    }
    let (best_validation, best_params) = best.expect("at least one validation ran");
    Ok((
        best_params,
        TrainReport {
            loss_curve,
            validation_curve,
            stop_step: step,
            stop_reason: reason,
            best_validation,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;

    fn toy(n: usize, seed: u64) -> Vec<SliceTensor> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = i % 2;
                let shift = if label == 1 { 1.0 } else { -1.0 };
                let data = (0..2 * 40).map(|_| shift + rng.gen_range(-0.5..0.5)).collect();
                SliceTensor {
                    values: Grid2D::from_vec(2, 40, data).unwrap(),
                    recording_id: "toy".into(),
                    minute: 0,
                    offset: i,
                    label,
                }
            })
            .collect()
    }

    fn small_cnn() -> ModelParams {
        let mut a = Architecture::cnn_with(2, 40, 2, 2, 4, (2, 5), 3);
        a.pool = (1, 2);
        a.hidden = vec![8];
        ModelParams::init(a, 3).unwrap()
    }

    #[test]
    fn config_text_round_trip_and_errors() {
        let mut c = TrainConfig::paper();
        c.seed = 77;
        c.workers = 4;
        let mut d = TrainConfig::default();
        d.merge_text(&c.to_text(), Path::new("cfg")).unwrap();
        assert_eq!(c, d);
        assert_eq!(TrainConfig::paper().learning_rate, 0.5);
        assert!(d.merge_text("bogus=1", Path::new("cfg")).is_err());
        assert!(d.merge_text("no equals", Path::new("cfg")).is_err());
        let bad = TrainConfig {
            workers: 5,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn separable_toy_reaches_full_validation_accuracy() {
        let train_set = toy(48, 1);
        let val = toy(16, 2);
        let cfg = TrainConfig {
            max_steps: 200,
            patience_validations: 1000,
            dropout_rate: 0.0,
            ..TrainConfig::default()
        };
        let (p, rep) = train(small_cnn(), &train_set, &val, &cfg).unwrap();
        assert_eq!(rep.best_accuracy(), 1.0);
        assert_eq!(evaluate(&p, &val).unwrap().accuracy, 1.0);
    }

    #[test]
    fn zero_learning_rate_with_patience_one_stops_after_two_validations() {
        let cfg = TrainConfig {
            learning_rate: 0.0,
            patience_validations: 1,
            validation_every_steps: 1,
            ..TrainConfig::default()
        };
        let (_, rep) = train(small_cnn(), &toy(48, 1), &toy(8, 2), &cfg).unwrap();
        assert_eq!(rep.validation_curve.len(), 2);
        assert_eq!(rep.stop_reason, StopReason::EarlyStop);
        assert_eq!(rep.stop_step, 2);
    }

    #[test]
    fn same_seed_same_report() {
        let cfg = TrainConfig {
            max_steps: 20,
            ..TrainConfig::default()
        };
        let a = train(small_cnn(), &toy(48, 1), &toy(8, 2), &cfg).unwrap();
        let b = train(small_cnn(), &toy(48, 1), &toy(8, 2), &cfg).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn indivisible_batch_is_usage_error() {
        let p = small_cnn();
        let data = toy(24, 1);
        let batch: Vec<(&Grid2D, usize)> = data.iter().map(|s| (&s.values, s.label)).collect();
        assert!(matches!(
            parallel_gradient_step(&p, &batch, 5, 0.0, 0),
            Err(Error::Usage(_))
        ));
        assert!(parallel_gradient_step(&p, &batch, 3, 0.0, 0).is_ok());
    }

    #[test]
    fn evaluate_accuracy_matches_recount() {
        let p = small_cnn();
        let data = toy(30, 4);
        let ev = evaluate(&p, &data).unwrap();
        let recount = ev
            .predictions
            .iter()
            .zip(&data)
            .filter(|(a, s)| **a == s.label)
            .count();
        assert_eq!(ev.accuracy, recount as f64 / 30.0);
    }
}
