use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use painmeter::consensus::{curve_text, Granularity};
use painmeter::dataset::{make_folds, FoldPlan, MinuteSample, Normalizer, Protocol};
use painmeter::eval::{
    ablation_text, minute_samples, run_experiment, run_fold, sensor_ablation, seqlen_sweep,
    sweep_text, CnnShape, ConsensusSpec, Experiment, FoldResult, Model, RunDir,
};
use painmeter::nn::checkpoint;
use painmeter::signal_store::{load_manifest, validate_manifest, DatasetManifest, Recording};
use painmeter::synthgen::{self, MANIFEST_FILE};
use painmeter::trainer::TrainConfig;
use painmeter::{Error, Result};

#[derive(Parser)]
#[command(name = "painmeter", version, about = "Ordinal pain-score classification from multichannel physiological recordings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Train one model per fold and save checkpoints and training reports.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Consensus accuracy as a function of the number of voting slices.
    Consensus(ConsensusArgs),
    /// Per-channel ablation: retrain a single-channel model for every channel.
    Ablate(AblateArgs),
    /// Cross-validated accuracy for several slice lengths.
    SweepSeqlen(SweepArgs),
    /// Cross-validated comparison of the CNN and the baselines.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// dataset1 or dataset2
    #[arg(long, default_value = "dataset1")]
    preset: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    recordings: Option<usize>,
    #[arg(long)]
    subjects: Option<usize>,
    /// Heart-rate increase per pain unit (bpm).
    #[arg(long)]
    hr_slope: Option<f64>,
    /// Motion bursts per minute per pain unit.
    #[arg(long)]
    burst_slope: Option<f64>,
    #[arg(long)]
    burst_amplitude: Option<f64>,
    /// Skin conductance responses per minute per pain unit.
    #[arg(long)]
    gsr_slope: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset directory (containing manifest.txt) or manifest file.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args, Clone)]
struct TrainOpts {
    /// Trainer config file of key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config preset: default or paper.
    #[arg(long, default_value = "default")]
    preset: String,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Convolution layers of the CNN.
    #[arg(long, default_value_t = 3)]
    conv_layers: usize,
    #[arg(long, default_value_t = 16)]
    filters: usize,
}

#[derive(Args, Clone)]
struct FoldOpts {
    /// fivefold or loro
    #[arg(long, default_value = "fivefold")]
    folds: String,
    /// Run only this fold (zero-based); all folds by default.
    #[arg(long)]
    fold: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainOpts,
    #[command(flatten)]
    folds: FoldOpts,
    /// cnn or mlp
    #[arg(long, default_value = "cnn")]
    model: String,
    #[arg(long, default_value = "runs/train")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct CheckpointArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Normalizer statistics; defaults to normalizer.csv beside the checkpoint.
    #[arg(long)]
    normalizer: Option<PathBuf>,
    /// Fold plan written by `train`; with --fold, only that fold's test minutes are used.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    fold: Option<usize>,
    /// minute or recording
    #[arg(long, default_value = "minute")]
    granularity: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    ckpt: CheckpointArgs,
    /// Votes per unit for consensus prediction; 0 disables it.
    #[arg(long, default_value_t = 0)]
    consensus: usize,
    #[arg(long, default_value = "runs/eval")]
    out: PathBuf,
}

#[derive(Args)]
struct ConsensusArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    ckpt: CheckpointArgs,
    /// Comma-separated slice counts.
    #[arg(long, default_value = "1,5,10,25,50,100")]
    k: String,
    #[arg(long, default_value = "runs/consensus")]
    out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainOpts,
    #[command(flatten)]
    folds: FoldOpts,
    #[arg(long, default_value = "runs/ablate")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainOpts,
    #[command(flatten)]
    folds: FoldOpts,
    /// Comma-separated slice lengths in seconds.
    #[arg(long, default_value = "5,15,30,60")]
    lengths: String,
    #[arg(long, default_value = "cnn")]
    model: String,
    #[arg(long, default_value = "runs/sweep")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainOpts,
    #[command(flatten)]
    folds: FoldOpts,
    /// Comma-separated models among cnn, mlp, logistic.
    #[arg(long, default_value = "cnn,mlp,logistic")]
    models: String,
    /// Votes per unit for network consensus; 0 disables it.
    #[arg(long, default_value_t = 100)]
    consensus: usize,
    #[arg(long, default_value = "minute")]
    granularity: String,
    #[arg(long, default_value = "runs/report")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Consensus(a) => consensus(a),
        Command::Ablate(a) => ablate(a),
        Command::SweepSeqlen(a) => sweep(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn log(msg: &str) {
    eprintln!("{msg}");
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Usage(format!("bad {what} `{v}`")))
        })
        .collect()
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut spec = synthgen::preset(&a.preset)?;
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    if let Some(v) = a.recordings {
        spec.num_recordings = v;
    }
    if let Some(v) = a.subjects {
        spec.num_subjects = v;
    }
    if let Some(v) = a.hr_slope {
        spec.hr_slope = v;
    }
    if let Some(v) = a.burst_slope {
        spec.burst_slope = v;
    }
    if let Some(v) = a.burst_amplitude {
        spec.burst_amplitude = v;
    }
    if let Some(v) = a.gsr_slope {
        spec.gsr_slope = v;
    }
    if let Some(v) = a.noise {
        spec.noise_sigma = v;
    }
    log(&format!("synth spec: {spec:?}"));
    let ds = synthgen::generate(&spec)?;
    let path = ds.write(&a.out)?;
    println!(
        "wrote {} recordings, manifest {}",
        ds.recordings.len(),
        path.display()
    );
    Ok(())
}

fn load_data(d: &DataArgs) -> Result<(DatasetManifest, Vec<Recording>)> {
    let path = if d.data.is_dir() {
        d.data.join(MANIFEST_FILE)
    } else {
        d.data.clone()
    };
    let m = load_manifest(&path)?;
    let issues = validate_manifest(&m);
    if !issues.is_empty() {
        for i in &issues {
            log(&format!("manifest issue: {i}"));
        }
        return Err(Error::Manifest(format!(
            "{} problem(s) in {}",
            issues.len(),
            path.display()
        )));
    }
    let recs = m.load_recordings()?;
    log(&format!(
        "data: {} ({} recordings, categories {:?})",
        path.display(),
        recs.len(),
        m.category_values
    ));
    Ok((m, recs))
}

fn train_config(o: &TrainOpts) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::preset(&o.preset)?;
    if let Some(p) = &o.config {
        let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?;
        cfg.merge_text(&text, p)?;
    }
    for kv in &o.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn model_of(name: &str, o: &TrainOpts) -> Result<Model> {
    match name {
        "cnn" => Ok(Model::Cnn(CnnShape {
            layers: o.conv_layers,
            filters: o.filters,
            ..CnnShape::default()
        })),
        "mlp" => Ok(Model::Mlp),
        "logistic" => Ok(Model::logistic_default()),
        other => Err(Error::Usage(format!("unknown model `{other}`"))),
    }
}

/// Minute samples, the fold plan and the folds to run.
fn folds_for(
    m: &DatasetManifest,
    recs: &[Recording],
    f: &FoldOpts,
) -> Result<(Vec<MinuteSample>, FoldPlan, Vec<usize>)> {
    let protocol: Protocol = f.folds.parse()?;
    let ids: Vec<&str> = recs.iter().map(|r| r.id.as_str()).collect();
    let plan = make_folds(&ids, protocol)?;
    let samples = minute_samples(recs, &m.category_values)?;
    let folds = match f.fold {
        Some(i) if i >= plan.num_folds => {
            return Err(Error::Usage(format!("fold {i} out of {} folds", plan.num_folds)))
        }
        Some(i) => vec![i],
        None => (0..plan.num_folds).collect(),
    };
    Ok((samples, plan, folds))
}

fn log_run(run: &mut RunDir, cfg: &TrainConfig, extra: &str) -> Result<()> {
    let text = format!("{}{extra}", cfg.to_text());
    for line in text.lines() {
        log(&format!("config: {line}"));
    }
    run.write("config.txt", &text)?;
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = train_config(&a.train)?;
    let model = model_of(&a.model, &a.train)?;
    if matches!(model, Model::Logistic { .. }) {
        return Err(Error::Usage("train supports cnn and mlp; use report for logistic".into()));
    }
    let (m, recs) = load_data(&a.data)?;
    let (samples, plan, folds) = folds_for(&m, &recs, &a.folds)?;
    drop(recs);
    let mut run = RunDir::create(&a.out)?;
    log_run(&mut run, &cfg, &format!("model={}\nfolds={}\n", a.model, a.folds.folds))?;
    plan.save(&run.register("folds.csv"))?;
    for f in folds {
        let r = run_fold(&samples, &plan, f, &cfg, &model, None, m.num_categories())?;
        save_fold(&mut run, &r)?;
        println!("fold {f}: test slice accuracy {:.4}", r.slice_accuracy());
    }
    run.finish()?;
    Ok(())
}

fn save_fold(
    run: &mut RunDir,
    r: &FoldResult,
) -> Result<()> {
    let dir = format!("fold{}", r.fold);
    if let Some(n) = &r.normalizer {
        run.write(&format!("{dir}/normalizer.csv"), &n.to_text())?;
    }
    if let Some(p) = &r.params {
        checkpoint::save(p, &run.register(&format!("{dir}/model.ckpt")))?;
    }
    if let Some(rep) = &r.report {
        run.write(&format!("{dir}/train_report.txt"), &rep.summary_text())?;
        run.write(&format!("{dir}/loss_curve.tsv"), &rep.loss_curve_text())?;
        run.write(&format!("{dir}/validation_curve.tsv"), &rep.validation_curve_text())?;
    }
    Ok(())
}

/// Normalized minute samples selected by the checkpoint arguments.
fn eval_units(
    c: &CheckpointArgs,
    m: &DatasetManifest,
    recs: &[Recording],
) -> Result<Vec<MinuteSample>> {
    let norm_path = match &c.normalizer {
        Some(p) => p.clone(),
        None => c
            .checkpoint
            .parent()
            .unwrap_or(Path::new("."))
            .join("normalizer.csv"),
    };
    let norm = Normalizer::load(&norm_path)?;
    let mut samples = minute_samples(recs, &m.category_values)?;
    if let Some(p) = &c.plan {
        let plan = FoldPlan::load(p)?;
        let fold = c
            .fold
            .ok_or_else(|| Error::Usage("--plan needs --fold".into()))?;
        samples.retain(|s| plan.is_test(fold, &s.recording_id, s.index));
    }
    if samples.is_empty() {
        return Err(Error::Usage("no minute samples selected".into()));
    }
    for s in &mut samples {
        norm.apply_in_place(&mut s.values)?;
    }
    Ok(samples)
}

/// Wraps a checkpoint's predictions on `samples` as a one-fold experiment.
fn checkpoint_experiment(
    c: &CheckpointArgs,
    m: &DatasetManifest,
    samples: &[MinuteSample],
    max_k: usize,
) -> Result<Experiment> {
    let params = checkpoint::load(&c.checkpoint)?;
    let arch = params.architecture().clone();
    if arch.num_categories != m.num_categories() {
        return Err(Error::Usage(format!(
            "checkpoint has {} categories, dataset {}",
            arch.num_categories,
            m.num_categories()
        )));
    }
    let seconds = arch.seq_len as f64 * painmeter::signal_store::CANONICAL_PERIOD_MS / 1000.0;
    let slices = painmeter::dataset::tiled_slices(samples, seconds)?;
    let ev = painmeter::trainer::evaluate(&params, &slices)?;
    let granularity: Granularity = c.granularity.parse()?;
    let mut units = Vec::new();
    if max_k > 0 {
        let spec = ConsensusSpec {
            max_k,
            granularity,
            seed: c.seed,
        };
        units = painmeter::eval::consensus_units(&params, samples, &spec)?;
    }
    let model = if arch.is_mlp() {
        Model::Mlp
    } else {
        Model::Cnn(CnnShape::default())
    };
    Ok(Experiment {
        model,
        category_values: m.category_values.clone(),
        folds: vec![FoldResult {
            fold: c.fold.unwrap_or(0),
            slice_predictions: ev.predictions,
            slice_truths: slices.iter().map(|s| s.label).collect(),
            slice_probabilities: ev.probabilities,
            units,
            report: None,
            params: None,
            normalizer: None,
        }],
    })
}

fn eval(a: EvalArgs) -> Result<()> {
    log(&format!(
        "eval: checkpoint {} consensus {} granularity {} seed {}",
        a.ckpt.checkpoint.display(),
        a.consensus,
        a.ckpt.granularity,
        a.ckpt.seed
    ));
    let (m, recs) = load_data(&a.data)?;
    let samples = eval_units(&a.ckpt, &m, &recs)?;
    drop(recs);
    let e = checkpoint_experiment(&a.ckpt, &m, &samples, a.consensus)?;
    let report = e.metrics((a.consensus > 0).then_some(a.consensus))?;
    let mut run = RunDir::create(&a.out)?;
    run.write("metrics.txt", &report.to_text())?;
    run.write("expected_scores.tsv", &report.expected_scores_text())?;
    run.finish()?;
    print!("{}", report.to_text());
    Ok(())
}

fn consensus(a: ConsensusArgs) -> Result<()> {
    let ks: Vec<usize> = parse_list(&a.k, "slice count")?;
    if ks.is_empty() || ks.contains(&0) || ks.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Usage("--k must be positive and ascending".into()));
    }
    log(&format!(
        "consensus: checkpoint {} k {:?} granularity {} seed {}",
        a.ckpt.checkpoint.display(),
        ks,
        a.ckpt.granularity,
        a.ckpt.seed
    ));
    let (m, recs) = load_data(&a.data)?;
    let samples = eval_units(&a.ckpt, &m, &recs)?;
    drop(recs);
    let e = checkpoint_experiment(&a.ckpt, &m, &samples, *ks.last().expect("nonempty"))?;
    let curve = e.consensus_curve(&ks);
    let mut run = RunDir::create(&a.out)?;
    run.write("consensus_curve.tsv", &curve_text(&curve))?;
    run.finish()?;
    print!("{}", curve_text(&curve));
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let cfg = train_config(&a.train)?;
    let model = model_of("cnn", &a.train)?;
    let (m, recs) = load_data(&a.data)?;
    let channels = recs[0].channels.clone();
    let (samples, plan, folds) = folds_for(&m, &recs, &a.folds)?;
    drop(recs);
    let mut run = RunDir::create(&a.out)?;
    log_run(&mut run, &cfg, &format!("folds={}\n", a.folds.folds))?;
    let rows = sensor_ablation(&samples, &channels, &plan, &folds, &cfg, &model, &m.category_values)?;
    run.write("ablation.tsv", &ablation_text(&rows))?;
    run.finish()?;
    print!("{}", ablation_text(&rows));
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let cfg = train_config(&a.train)?;
    let model = model_of(&a.model, &a.train)?;
    let lengths: Vec<f64> = parse_list(&a.lengths, "length")?;
    let (m, recs) = load_data(&a.data)?;
    let (samples, plan, folds) = folds_for(&m, &recs, &a.folds)?;
    drop(recs);
    let mut run = RunDir::create(&a.out)?;
    log_run(&mut run, &cfg, &format!("model={}\nlengths={}\n", a.model, a.lengths))?;
    let rows = seqlen_sweep(&samples, &plan, &folds, &cfg, &model, &m.category_values, &lengths)?;
    run.write("seqlen_sweep.tsv", &sweep_text(&rows))?;
    run.finish()?;
    print!("{}", sweep_text(&rows));
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let cfg = train_config(&a.train)?;
    let names: Vec<String> = parse_list(&a.models, "model")?;
    let models = names
        .iter()
        .map(|n| model_of(n, &a.train))
        .collect::<Result<Vec<_>>>()?;
    let granularity: Granularity = a.granularity.parse()?;
    let (m, recs) = load_data(&a.data)?;
    let (samples, plan, folds) = folds_for(&m, &recs, &a.folds)?;
    drop(recs);
    let mut run = RunDir::create(&a.out)?;
    log_run(
        &mut run,
        &cfg,
        &format!("models={}\nfolds={}\nconsensus={}\n", a.models, a.folds.folds, a.consensus),
    )?;
    plan.save(&run.register("folds.csv"))?;
    let mut summary = String::from("model\tslice_accuracy\tconsensus_accuracy\n");
    for model in &models {
        let cons = (a.consensus > 0 && !matches!(model, Model::Logistic { .. })).then(|| ConsensusSpec {
            max_k: a.consensus,
            granularity,
            seed: cfg.seed,
        });
        let e = run_experiment(&samples, &plan, &folds, &cfg, model, cons.as_ref(), &m.category_values)?;
        let k = cons.as_ref().map(|c| c.max_k);
        let r = e.metrics(k)?;
        let name = model.name();
        run.write(&format!("{name}/metrics.txt"), &r.to_text())?;
        run.write(&format!("{name}/expected_scores.tsv"), &r.expected_scores_text())?;
        if cons.is_some() {
            let ks: Vec<usize> = [1, 5, 10, 25, 50, 100, 200, 500]
                .into_iter()
                .filter(|&k| k <= a.consensus)
                .chain(std::iter::once(a.consensus))
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            run.write(&format!("{name}/consensus_curve.tsv"), &curve_text(&e.consensus_curve(&ks)))?;
        }
        let ca = r
            .consensus_accuracy
            .map_or("-".to_string(), |(_, acc)| acc.to_string());
        summary.push_str(&format!("{name}\t{}\t{ca}\n", r.slice_accuracy));
        println!("{name}: slice accuracy {:.4}, consensus {ca}", r.slice_accuracy);
    }
    run.write("summary.tsv", &summary)?;
    run.finish()?;
    Ok(())
}
