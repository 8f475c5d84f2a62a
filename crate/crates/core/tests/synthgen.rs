use std::f64::consts::PI;

use painmeter::dataset::{make_folds, Protocol, MINUTE_TIMESTEPS};
use painmeter::eval::{minute_samples, run_experiment, CnnShape, Model};
use painmeter::signal_store::{load_manifest, validate_manifest, ChannelKind, Recording};
use painmeter::synthgen::{dataset1_preset, dataset2_preset, generate, Layout, SynthSpec, MANIFEST_FILE};
use painmeter::trainer::TrainConfig;

const DT: f64 = 0.015;

/// Frequency in `[lo, hi]` Hz with the largest DTFT magnitude, scanned on a
/// `step` grid directly from the definition.
fn dominant_frequency(x: &[f64], lo: f64, hi: f64, step: f64) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut best = (0.0, lo);
    let mut f = lo;
    while f <= hi {
        let w = 2.0 * PI * f * DT;
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in x.iter().enumerate() {
            let a = w * t as f64;
            re += (v - mean) * a.cos();
            im -= (v - mean) * a.sin();
        }
        let mag = re * re + im * im;
        if mag > best.0 {
            best = (mag, f);
        }
        f += step;
    }
    best.1
}

fn first_pulse_minute(r: &Recording) -> &[f64] {
    let ch = r.channels.iter().position(|c| c.kind == ChannelKind::Pulse).unwrap();
    &r.values.row(ch)[..MINUTE_TIMESTEPS]
}

fn quiet(layout: Layout, recordings: usize, categories: Vec<u8>) -> SynthSpec {
    let n = categories.len();
    SynthSpec {
        layout,
        num_subjects: recordings.min(8),
        num_recordings: recordings,
        category_values: categories,
        category_weights: vec![1.0; n],
        burst_slope: 0.0,
        gsr_slope: 0.0,
        subject_hr_sigma: 0.0,
        recording_hr_sigma: 0.0,
        minute_hr_sigma: 0.0,
        ..dataset1_preset()
    }
}

#[test]
fn pulse_peak_moves_by_the_slope() {
    let spec = quiet(Layout::Dataset1, 6, vec![1, 2]);
    let ds = generate(&spec).unwrap();
    let mut by_label = [Vec::new(), Vec::new()];
    for r in &ds.recordings {
        let f = dominant_frequency(first_pulse_minute(r), 0.6, 1.9, 0.001);
        let planted = (60.0 + 5.0 * r.pain_score as f64) / 60.0;
        assert!((f - planted).abs() < 0.01, "{}: peak {f} Hz, planted {planted} Hz", r.id);
        by_label[r.pain_score as usize - 1].push(f);
    }
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let gap = mean(&by_label[1]) - mean(&by_label[0]);
    assert!((gap - 5.0 / 60.0).abs() < 0.01, "gap {gap} Hz");
}

#[test]
fn dominant_frequency_increases_with_label() {
    let spec = SynthSpec {
        layout: Layout::Dataset1,
        num_subjects: 8,
        num_recordings: 32,
        category_values: vec![0, 2, 4, 6],
        category_weights: vec![1.0; 4],
        burst_slope: 0.0,
        ..dataset2_preset()
    };
    let ds = generate(&spec).unwrap();
    let mut sums = [(0.0, 0usize); 4];
    for r in &ds.recordings {
        let f = dominant_frequency(first_pulse_minute(r), 0.6, 1.9, 0.005);
        let i = (r.pain_score / 2) as usize;
        sums[i].0 += f;
        sums[i].1 += 1;
    }
    let means: Vec<f64> = sums.iter().map(|(s, n)| s / *n as f64).collect();
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
}

#[test]
fn presets_have_the_published_shapes() {
    let d1 = generate(&dataset1_preset()).unwrap();
    assert_eq!(d1.recordings.len(), 4);
    assert!(d1.recordings.iter().all(|r| r.channels.len() == 15));
    let ones = d1.recordings.iter().filter(|r| r.pain_score == 1).count();
    assert_eq!(ones, 2);

    let d2 = dataset2_preset();
    assert_eq!((d2.num_recordings, d2.num_subjects), (62, 20));
    assert_eq!(d2.layout.channels().len(), 25);
    assert_eq!(d2.category_values, (0..=6).collect::<Vec<u8>>());
    let heaviest = d2
        .category_weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert_eq!(d2.category_values[heaviest], 2);
}

#[test]
fn written_dataset_round_trips() {
    let mut spec = dataset2_preset();
    spec.num_recordings = 3;
    spec.num_subjects = 2;
    let ds = generate(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = ds.write(dir.path()).unwrap();
    assert_eq!(path, dir.path().join(MANIFEST_FILE));
    let m = load_manifest(&path).unwrap();
    assert!(validate_manifest(&m).is_empty());
    let back = m.load_recordings().unwrap();
    assert_eq!(back.len(), 3);
    for (a, b) in back.iter().zip(&ds.recordings) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.pain_score, b.pain_score);
        assert_eq!(a.channels, b.channels);
        let worst = a
            .values
            .as_slice()
            .iter()
            .zip(b.values.as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "{}: {worst}", a.id);
    }
}

#[test]
fn same_seed_same_bytes() {
    let spec = dataset1_preset();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate(&spec).unwrap().write(a.path()).unwrap();
    generate(&spec).unwrap().write(b.path()).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 6);
    for n in names {
        assert_eq!(
            std::fs::read(a.path().join(&n)).unwrap(),
            std::fs::read(b.path().join(&n)).unwrap(),
            "{n:?}"
        );
    }
}

#[test]
fn temperature_alone_is_chance_for_logistic_regression() {
    let spec = dataset1_preset();
    let ds = generate(&spec).unwrap();
    let temps: Vec<usize> = (0..ds.recordings[0].channels.len())
        .filter(|&i| ds.recordings[0].channels[i].kind == ChannelKind::Temperature)
        .collect();
    let recs: Vec<Recording> = ds.recordings.iter().map(|r| r.select_channels(&temps).unwrap()).collect();
    let samples = minute_samples(&recs, &spec.category_values).unwrap();
    let ids: Vec<&str> = recs.iter().map(|r| r.id.as_str()).collect();
    let plan = make_folds(&ids, Protocol::Fivefold).unwrap();
    let e = run_experiment(
        &samples,
        &plan,
        &[0, 1, 2, 3, 4],
        &TrainConfig::default(),
        &Model::logistic_default(),
        None,
        &spec.category_values,
    )
    .unwrap();
    let acc = e.slice_accuracy();
    assert!((acc - 0.5).abs() <= 0.1, "accuracy {acc}");
}

#[test]
fn no_planted_signal_means_chance_cnn() {
    let spec = SynthSpec {
        hr_slope: 0.0,
        burst_slope: 0.0,
        gsr_slope: 0.0,
        // Recording-level heart-rate offsets would let a model recognise a
        // recording across folds.
        subject_hr_sigma: 0.0,
        recording_hr_sigma: 0.0,
        ..dataset1_preset()
    };
    let ds = generate(&spec).unwrap();
    let samples = minute_samples(&ds.recordings, &spec.category_values).unwrap();
    let ids: Vec<String> = ds.recordings.iter().map(|r| r.id.clone()).collect();
    drop(ds);
    let plan = make_folds(&ids, Protocol::Fivefold).unwrap();
    let cfg = TrainConfig {
        max_steps: 40,
        ..TrainConfig::default()
    };
    let e = run_experiment(
        &samples,
        &plan,
        &[0, 1, 2, 3, 4],
        &cfg,
        &Model::Cnn(CnnShape::default()),
        None,
        &spec.category_values,
    )
    .unwrap();
    let acc = e.slice_accuracy();
    assert!((acc - 0.5).abs() <= 0.1, "accuracy {acc}");
}
