//! Cross-validated experiments, metrics, per-sensor ablation, the slice
//! length sweep and run directories.

pub mod metrics;
pub mod rundir;

use std::fmt::Write as _;

use crate::baselines::{extract_features, logistic_train, mlp_build, Standardizer, DEFAULT_BINS};
use crate::consensus::{curve_from_votes, plurality, slice_votes, unit_seed, Granularity, VoteTally};
use crate::dataset::{
    materialize_fold, slice_timesteps, split_minutes, tiled_slices, FoldPlan, MinuteSample,
    Normalizer, SliceTensor,
};
use crate::error::{Error, Result};
use crate::nn::{Architecture, Grid2D, ModelParams, ProbVector};
use crate::signal_store::Recording;
use crate::trainer::{evaluate, train, TrainConfig, TrainReport};

pub use metrics::{
    ape_histogram, confusion, errors_within, expected_score, expected_score_r2, r_squared,
    ConfusionMatrix, ExpectedScores,
};
pub use rundir::RunDir;

/// Convolutional stack of a CNN run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CnnShape {
    pub layers: usize,
    pub filters: usize,
    pub first_window: (usize, usize),
    pub deep_width: usize,
}

impl Default for CnnShape {
    fn default() -> Self {
        Self {
            layers: 3,
            filters: 16,
            first_window: (3, 25),
            deep_width: 9,
        }
    }
}

impl CnnShape {
    pub fn architecture(&self, channels: usize, seq_len: usize, categories: usize) -> Architecture {
        Architecture::cnn_with(
            channels,
            seq_len,
            categories,
            self.layers,
            self.filters,
            self.first_window,
            self.deep_width,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Cnn(CnnShape),
    Mlp,
    /// Feature-based logistic regression; the L2 strength is picked from
    /// the grid by validation accuracy.
    Logistic { l2_grid: Vec<f64> },
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Cnn(_) => "cnn",
            Model::Mlp => "mlp",
            Model::Logistic { .. } => "logistic",
        }
    }

    pub fn logistic_default() -> Self {
        Model::Logistic {
            l2_grid: vec![1e-3, 1e-2, 1e-1, 1.0],
        }
    }
}

/// Slice-vote settings for test units.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusSpec {
    /// Votes drawn per unit; prefixes give smaller `k`.
    pub max_k: usize,
    pub granularity: Granularity,
    pub seed: u64,
}

/// One consensus unit's ordered slice votes.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVotes {
    pub recording_id: String,
    /// `None` for whole-recording units.
    pub minute: Option<usize>,
    pub truth: usize,
    pub votes: Vec<usize>,
}

impl UnitVotes {
    pub fn tally(&self, k: usize, num_categories: usize) -> VoteTally {
        let mut t = VoteTally::new(num_categories);
        for &v in &self.votes[..k.min(self.votes.len())] {
            t.add(v);
        }
        t
    }
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub slice_predictions: Vec<usize>,
    pub slice_truths: Vec<usize>,
    pub slice_probabilities: Vec<ProbVector>,
    pub units: Vec<UnitVotes>,
    /// Absent for logistic regression.
    pub report: Option<TrainReport>,
    pub params: Option<ModelParams>,
    /// Fitted on the fold's training minutes.
    pub normalizer: Option<Normalizer>,
}

impl FoldResult {
    pub fn slice_accuracy(&self) -> f64 {
        accuracy(&self.slice_predictions, &self.slice_truths)
    }
}

fn accuracy(p: &[usize], t: &[usize]) -> f64 {
    if p.is_empty() {
        return 0.0;
    }
    p.iter().zip(t).filter(|(a, b)| a == b).count() as f64 / p.len() as f64
}

/// Training seed of `fold` under a run seed.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    unit_seed(seed, 1000 + fold)
}

/// Splits every recording into minute samples.
pub fn minute_samples(recordings: &[Recording], categories: &[u8]) -> Result<Vec<MinuteSample>> {
    let mut out = Vec::with_capacity(recordings.len() * 10);
    for r in recordings {
        out.extend(split_minutes(r, categories)?);
    }
    Ok(out)
}

/// Consensus units of a fold's normalized test minutes.
fn test_units(test: &[MinuteSample], granularity: Granularity) -> Result<Vec<(UnitVotes, Grid2D)>> {
    match granularity {
        Granularity::Minute => Ok(test
            .iter()
            .map(|s| {
                (
                    UnitVotes {
                        recording_id: s.recording_id.clone(),
                        minute: Some(s.index),
                        truth: s.label,
                        votes: Vec::new(),
                    },
                    s.values.clone(),
                )
            })
            .collect()),
        Granularity::Recording => {
            // Minutes of one recording, concatenated in minute order.
            let mut ids: Vec<&str> = test.iter().map(|s| s.recording_id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            ids.into_iter()
                .map(|id| {
                    let mut parts: Vec<&MinuteSample> =
                        test.iter().filter(|s| s.recording_id == id).collect();
                    parts.sort_by_key(|s| s.index);
                    let rows = parts[0].values.rows();
                    let cols: usize = parts.iter().map(|s| s.values.cols()).sum();
                    let mut g = Grid2D::zeros(rows, cols);
                    let mut at = 0;
                    for p in &parts {
                        for r in 0..rows {
                            g.row_mut(r)[at..at + p.values.cols()].copy_from_slice(p.values.row(r));
                        }
                        at += p.values.cols();
                    }
                    Ok((
                        UnitVotes {
                            recording_id: id.to_string(),
                            minute: None,
                            truth: parts[0].label,
                            votes: Vec::new(),
                        },
                        g,
                    ))
                })
                .collect()
        }
    }
}

/// Trains and tests one fold.
pub fn run_fold(
    samples: &[MinuteSample],
    plan: &FoldPlan,
    fold: usize,
    cfg: &TrainConfig,
    model: &Model,
    consensus: Option<&ConsensusSpec>,
    num_categories: usize,
) -> Result<FoldResult> {
    let seed = fold_seed(cfg.seed, fold);
    let data = materialize_fold(samples, plan, fold, cfg.val_fraction, cfg.seq_length_s, seed)?;
    if data.train.is_empty() || data.test.is_empty() {
        return Err(Error::usage(format!("fold {fold} has an empty train or test part")));
    }
    let train_slices = tiled_slices(&data.train, cfg.seq_length_s)?;
    let val_slices = tiled_slices(&data.validation, cfg.seq_length_s)?;
    let test_slices = tiled_slices(&data.test, cfg.seq_length_s)?;
    let truths: Vec<usize> = test_slices.iter().map(|s| s.label).collect();
    let channels = samples[0].values.rows();
    let ls = slice_timesteps(cfg.seq_length_s)?;

    if let Model::Logistic { l2_grid } = model {
        let (preds, probs) = logistic_fold(&train_slices, &val_slices, &test_slices, l2_grid, num_categories)?;
        return Ok(FoldResult {
            fold,
            slice_predictions: preds,
            slice_truths: truths,
            slice_probabilities: probs,
            units: Vec::new(),
            report: None,
            params: None,
            normalizer: Some(data.normalizer),
        });
    }

    let params = match model {
        Model::Cnn(shape) => ModelParams::init(shape.architecture(channels, ls, num_categories), seed)?,
        Model::Mlp => mlp_build(channels, ls, num_categories, seed)?,
        Model::Logistic { .. } => unreachable!("handled above"),
    };
    let mut fold_cfg = cfg.clone();
    fold_cfg.seed = seed;
    let (params, report) = train(params, &train_slices, &val_slices, &fold_cfg)?;
    let eval = evaluate(&params, &test_slices)?;

    let units = match consensus {
        Some(spec) => votes_for(&params, &data.test, spec, seed)?,
        None => Vec::new(),
    };
    Ok(FoldResult {
        fold,
        slice_predictions: eval.predictions,
        slice_truths: truths,
        slice_probabilities: eval.probabilities,
        units,
        report: Some(report),
        params: Some(params),
        normalizer: Some(data.normalizer),
    })
}

fn votes_for(
    params: &ModelParams,
    test: &[MinuteSample],
    spec: &ConsensusSpec,
    seed: u64,
) -> Result<Vec<UnitVotes>> {
    let ls = params.architecture().seq_len;
    test_units(test, spec.granularity)?
        .into_iter()
        .enumerate()
        .map(|(i, (mut u, grid))| {
            u.votes = slice_votes(params, &grid, spec.max_k, ls, unit_seed(spec.seed ^ seed, i))?;
            Ok(u)
        })
        .collect()
}

/// Consensus votes of a trained model on already normalized minutes.
pub fn consensus_units(
    params: &ModelParams,
    samples: &[MinuteSample],
    spec: &ConsensusSpec,
) -> Result<Vec<UnitVotes>> {
    votes_for(params, samples, spec, 0)
}

type Predictions = (Vec<usize>, Vec<ProbVector>);

fn logistic_fold(
    train: &[SliceTensor],
    val: &[SliceTensor],
    test: &[SliceTensor],
    l2_grid: &[f64],
    c: usize,
) -> Result<Predictions> {
    if l2_grid.is_empty() {
        return Err(Error::usage("empty L2 grid"));
    }
    let feats = |s: &[SliceTensor]| -> Result<Vec<Vec<f64>>> {
        s.iter()
            .map(|t| Ok(extract_features(&t.values, DEFAULT_BINS)?.to_vec()))
            .collect()
    };
    let (xtr, xva, xte) = (feats(train)?, feats(val)?, feats(test)?);
    let std = Standardizer::fit(&xtr)?;
    let z = |x: &[Vec<f64>]| -> Vec<Vec<f64>> { x.iter().map(|r| std.apply(r)).collect() };
    let (ztr, zva, zte) = (z(&xtr), z(&xva), z(&xte));
    let ytr: Vec<usize> = train.iter().map(|s| s.label).collect();
    let yva: Vec<usize> = val.iter().map(|s| s.label).collect();
    let mut best = None;
    for &l2 in l2_grid {
        let m = logistic_train(&ztr, &ytr, c, l2)?;
        let preds: Vec<usize> = zva.iter().map(|x| m.predict(x)).collect();
        let acc = accuracy(&preds, &yva);
        if best.as_ref().is_none_or(|(a, _)| acc > *a) {
            best = Some((acc, m));
        }
    }
    let (_, m) = best.expect("grid is non-empty");
    let probs: Vec<ProbVector> = zte.iter().map(|x| m.predict_proba(x)).collect();
    Ok((probs.iter().map(ProbVector::argmax).collect(), probs))
}

/// Results of every fold of one experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: Model,
    pub category_values: Vec<u8>,
    pub folds: Vec<FoldResult>,
}

pub fn run_experiment(
    samples: &[MinuteSample],
    plan: &FoldPlan,
    folds: &[usize],
    cfg: &TrainConfig,
    model: &Model,
    consensus: Option<&ConsensusSpec>,
    category_values: &[u8],
) -> Result<Experiment> {
    let c = category_values.len();
    let folds = folds
        .iter()
        .map(|&f| run_fold(samples, plan, f, cfg, model, consensus, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(Experiment {
        model: model.clone(),
        category_values: category_values.to_vec(),
        folds,
    })
}

impl Experiment {
    pub fn num_categories(&self) -> usize {
        self.category_values.len()
    }

    pub fn slice_predictions(&self) -> (Vec<usize>, Vec<usize>) {
        let p = self.folds.iter().flat_map(|f| f.slice_predictions.iter().copied()).collect();
        let t = self.folds.iter().flat_map(|f| f.slice_truths.iter().copied()).collect();
        (p, t)
    }

    /// Accuracy over all test slices of all folds.
    pub fn slice_accuracy(&self) -> f64 {
        let (p, t) = self.slice_predictions();
        accuracy(&p, &t)
    }

    pub fn mean_fold_accuracy(&self) -> f64 {
        self.folds.iter().map(FoldResult::slice_accuracy).sum::<f64>() / self.folds.len() as f64
    }

    pub fn confusion(&self) -> Result<ConfusionMatrix> {
        let (p, t) = self.slice_predictions();
        confusion(&p, &t, self.num_categories())
    }

    pub fn units(&self) -> impl Iterator<Item = &UnitVotes> {
        self.folds.iter().flat_map(|f| f.units.iter())
    }

    pub fn consensus_curve(&self, k_values: &[usize]) -> Vec<(usize, f64)> {
        let votes: Vec<Vec<usize>> = self.units().map(|u| u.votes.clone()).collect();
        if votes.is_empty() {
            return Vec::new();
        }
        curve_from_votes(&votes, self.units().map(|u| u.truth), self.num_categories(), k_values)
    }

    /// Expected scores from the vote shares of the first `k` votes per unit.
    pub fn consensus_expected_scores(&self, k: usize) -> Result<ExpectedScores> {
        let c = self.num_categories();
        let probs: Vec<ProbVector> = self
            .units()
            .map(|u| ProbVector::new(u.tally(k, c).shares()))
            .collect::<Result<_>>()?;
        let truths: Vec<u8> = self.units().map(|u| self.category_values[u.truth]).collect();
        expected_score_r2(&probs, &truths, &self.category_values)
    }

    pub fn consensus_predictions(&self, k: usize) -> (Vec<usize>, Vec<usize>) {
        let c = self.num_categories();
        self.units()
            .map(|u| (plurality(u.tally(k, c).counts()), u.truth))
            .unzip()
    }

    pub fn metrics(&self, k: Option<usize>) -> Result<MetricsReport> {
        let conf = self.confusion()?;
        let (p, t) = self.slice_predictions();
        let ape = ape_histogram(&p, &t, self.num_categories())?;
        let (consensus_accuracy, expected) = match k {
            Some(k) if self.units().next().is_some() => {
                let (cp, ct) = self.consensus_predictions(k);
                (Some((k, accuracy(&cp, &ct))), self.consensus_expected_scores(k)?)
            }
            _ => {
                let probs: Vec<ProbVector> = self
                    .folds
                    .iter()
                    .flat_map(|f| f.slice_probabilities.iter().cloned())
                    .collect();
                let truths: Vec<u8> = t.iter().map(|&i| self.category_values[i]).collect();
                (None, expected_score_r2(&probs, &truths, &self.category_values)?)
            }
        };
        Ok(MetricsReport {
            model: self.model.name().to_string(),
            slice_accuracy: conf.accuracy(),
            fold_accuracies: self.folds.iter().map(FoldResult::slice_accuracy).collect(),
            consensus_accuracy,
            confusion: conf,
            ape,
            expected,
            category_values: self.category_values.clone(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub model: String,
    pub slice_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    /// `(k, accuracy)` when consensus votes were collected.
    pub consensus_accuracy: Option<(usize, f64)>,
    pub confusion: ConfusionMatrix,
    pub ape: Vec<usize>,
    /// From consensus vote shares when available, else slice probabilities.
    pub expected: ExpectedScores,
    pub category_values: Vec<u8>,
}

impl MetricsReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model\t{}", self.model);
        let _ = writeln!(s, "slice_accuracy\t{}", self.slice_accuracy);
        for (i, a) in self.fold_accuracies.iter().enumerate() {
            let _ = writeln!(s, "fold_{i}_accuracy\t{a}");
        }
        if let Some((k, a)) = self.consensus_accuracy {
            let _ = writeln!(s, "consensus_k\t{k}\nconsensus_accuracy\t{a}");
        }
        match self.expected.r2 {
            Some(r) => {
                let _ = writeln!(s, "expected_score_r2\t{r}");
            }
            None => s.push_str("expected_score_r2\tundefined (truths have zero variance)\n"),
        }
        s.push_str("\nconfusion\n");
        s.push_str(&self.confusion.to_text(&self.category_values));
        s.push_str("\nabs_error\tcount\n");
        for (d, n) in self.ape.iter().enumerate() {
            let _ = writeln!(s, "{d}\t{n}");
        }
        s
    }

    pub fn expected_scores_text(&self) -> String {
        let mut s = String::from("expected\ttrue\n");
        for (e, t) in &self.expected.pairs {
            let _ = writeln!(s, "{e:.1}\t{t}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub channel: usize,
    pub name: String,
    pub kind: String,
    pub accuracy: f64,
}

/// Retrains a single-channel model per channel and reports its mean fold
/// accuracy, sorted descending (ties keep channel order).
pub fn sensor_ablation(
    samples: &[MinuteSample],
    channels: &[crate::signal_store::ChannelSpec],
    plan: &FoldPlan,
    folds: &[usize],
    cfg: &TrainConfig,
    model: &Model,
    category_values: &[u8],
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(channels.len());
    for (ci, ch) in channels.iter().enumerate() {
        let view = samples
            .iter()
            .map(|s| {
                Ok(MinuteSample {
                    values: s.values.select_rows(&[ci])?,
                    ..s.clone_header()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let e = run_experiment(&view, plan, folds, cfg, model, None, category_values)?;
        rows.push(AblationRow {
            channel: ci,
            name: ch.name.clone(),
            kind: ch.kind.as_str().to_string(),
            accuracy: e.mean_fold_accuracy(),
        });
    }
    rows.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then(a.channel.cmp(&b.channel)));
    Ok(rows)
}

pub fn ablation_text(rows: &[AblationRow]) -> String {
    let mut s = String::from("channel\tname\tkind\taccuracy\n");
    for r in rows {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", r.channel, r.name, r.kind, r.accuracy);
    }
    s
}

/// Full cross-validated run per slice length, all with the same seeds.
pub fn seqlen_sweep(
    samples: &[MinuteSample],
    plan: &FoldPlan,
    folds: &[usize],
    cfg: &TrainConfig,
    model: &Model,
    category_values: &[u8],
    lengths_s: &[f64],
) -> Result<Vec<(f64, f64)>> {
    lengths_s
        .iter()
        .map(|&len| {
            let mut c = cfg.clone();
            c.seq_length_s = len;
            let e = run_experiment(samples, plan, folds, &c, model, None, category_values)?;
            Ok((len, e.slice_accuracy()))
        })
        .collect()
}

pub fn sweep_text(rows: &[(f64, f64)]) -> String {
    let mut s = String::from("seq_length_s\taccuracy\n");
    for (l, a) in rows {
        let _ = writeln!(s, "{l}\t{a}");
    }
    s
}

impl MinuteSample {
    /// Copy of everything but the values.
    fn clone_header(&self) -> MinuteSample {
        MinuteSample {
            recording_id: self.recording_id.clone(),
            subject_id: self.subject_id.clone(),
            index: self.index,
            values: Grid2D::zeros(0, 0),
            pain_score: self.pain_score,
            label: self.label,
        }
    }
}
