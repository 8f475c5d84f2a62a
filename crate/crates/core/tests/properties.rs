use painmeter::baselines::{fft_in_place, pearson_pairs};
use painmeter::consensus::{plurality, VoteTally};
use painmeter::dataset::{
    make_folds, materialize_fold, FoldPlan, MinuteSample, Protocol, UnitId, MINUTE_TIMESTEPS,
};
use painmeter::nn::{Architecture, Grid2D, ModelParams, ProbVector};
use painmeter::ordinal::{ordinal_loss, ordinal_weight, OrdinalTarget};
use painmeter::trainer::parallel_gradient_step;
use proptest::prelude::*;

fn prob_vector(raw: &[f64]) -> ProbVector {
    let s: f64 = raw.iter().sum();
    ProbVector::new(raw.iter().map(|v| v / s).collect()).unwrap()
}

/// Probabilities with `p[y] = py` and the rest of the mass placed so that
/// the argmax is `top`; `None` when `py` makes that impossible.
fn with_argmax(c: usize, y: usize, py: f64, top: usize) -> Option<ProbVector> {
    let rest = 1.0 - py;
    let mut p = vec![0.0; c];
    p[y] = py;
    if top == y {
        let each = rest / (c - 1) as f64;
        if each >= py {
            return None;
        }
        for (i, v) in p.iter_mut().enumerate() {
            if i != y {
                *v = each;
            }
        }
    } else {
        let big = if c == 2 { rest } else { 0.9 * rest };
        if big <= py {
            return None;
        }
        let small = if c > 2 { 0.1 * rest / (c - 2) as f64 } else { 0.0 };
        for (i, v) in p.iter_mut().enumerate() {
            if i == top {
                *v = big;
            } else if i != y {
                *v = small;
            }
        }
    }
    ProbVector::new(p).ok()
}

proptest! {
    #[test]
    fn ordinal_loss_grows_with_distance(c in 2usize..8, y_raw in 0usize..8, py in 0.01f64..0.3, a in 0usize..8, b in 0usize..8) {
        let y = y_raw % c;
        let (a, b) = (a % c, b % c);
        let t = OrdinalTarget::new(y, c).unwrap();
        if let (Some(pa), Some(pb)) = (with_argmax(c, y, py, a), with_argmax(c, y, py, b)) {
            prop_assert_eq!(pa.argmax(), a);
            prop_assert_eq!(pb.argmax(), b);
            let (la, lb) = (ordinal_loss(&pa, &t).unwrap(), ordinal_loss(&pb, &t).unwrap());
            if a.abs_diff(y) <= b.abs_diff(y) {
                prop_assert!(la <= lb + 1e-12, "{la} > {lb}");
            }
        }
    }

    #[test]
    fn ordinal_weight_in_range(raw in prop::collection::vec(0.001f64..1.0, 2..9), y in 0usize..9) {
        let p = prob_vector(&raw);
        let t = OrdinalTarget::new(y % raw.len(), raw.len()).unwrap();
        let w = ordinal_weight(&p, &t).unwrap();
        prop_assert!((1.0..=2.0).contains(&w));
    }

    #[test]
    fn plurality_matches_recount(counts in prop::collection::vec(0usize..6, 1..9)) {
        let best = *counts.iter().max().unwrap();
        let expect = counts.iter().position(|&n| n == best).unwrap();
        prop_assert_eq!(plurality(&counts), expect);
        let mut tally = VoteTally::new(counts.len());
        for (i, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                tally.add(i);
            }
        }
        prop_assert_eq!(tally.plurality(), expect);
        prop_assert_eq!(tally.total(), counts.iter().sum::<usize>());
    }

    #[test]
    fn fft_parseval_and_linearity(
        x in prop::collection::vec(-10.0f64..10.0, 64),
        y in prop::collection::vec(-10.0f64..10.0, 64),
        a in -3.0f64..3.0,
    ) {
        let n = x.len();
        let spectrum = |v: &[f64]| {
            let mut re = v.to_vec();
            let mut im = vec![0.0; n];
            fft_in_place(&mut re, &mut im).unwrap();
            (re, im)
        };
        let (xr, xi) = spectrum(&x);
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = xr.iter().zip(&xi).map(|(r, i)| r * r + i * i).sum::<f64>() / n as f64;
        prop_assert!((time - freq).abs() <= 1e-9 * time.max(1.0));

        let (yr, yi) = spectrum(&y);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + v).collect();
        let (mr, mi) = spectrum(&mix);
        for k in 0..n {
            prop_assert!((mr[k] - (a * xr[k] + yr[k])).abs() < 1e-8);
            prop_assert!((mi[k] - (a * xi[k] + yi[k])).abs() < 1e-8);
        }
    }

    #[test]
    fn pearson_is_affine_invariant(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 32), 3),
        scale in prop_oneof![-4.0f64..-0.25, 0.25f64..4.0],
        shift in -10.0f64..10.0,
    ) {
        let g = Grid2D::from_rows(&rows).unwrap();
        let mut moved = rows.clone();
        for v in &mut moved[0] {
            *v = scale * *v + shift;
        }
        let h = Grid2D::from_rows(&moved).unwrap();
        let (p, q) = (pearson_pairs(&g), pearson_pairs(&h));
        // Pairs (0,1) and (0,2) flip with the sign of the scale; (1,2) is untouched.
        let sign = scale.signum();
        prop_assert!((q.values[0] - sign * p.values[0]).abs() < 1e-9);
        prop_assert!((q.values[1] - sign * p.values[1]).abs() < 1e-9);
        prop_assert!((q.values[2] - p.values[2]).abs() < 1e-12);
    }

    #[test]
    fn fold_plans_partition_the_minutes(n in 2usize..12, loro in any::<bool>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("r{i}")).collect();
        let protocol = if loro { Protocol::LeaveOneRecordingOut } else { Protocol::Fivefold };
        let plan = make_folds(&ids, protocol).unwrap();
        let units: Vec<UnitId> = ids
            .iter()
            .flat_map(|r| (0..10).map(move |m| UnitId { recording: r.clone(), minute: m }))
            .collect();
        plan.check_partition(&units).unwrap();
        for u in &units {
            let hits = (0..plan.num_folds).filter(|&f| plan.is_test(f, &u.recording, u.minute)).count();
            prop_assert_eq!(hits, 1);
        }
        prop_assert_eq!(plan.num_folds, if loro { n } else { 5 });
    }
}

fn toy_samples(recordings: usize, seed: u64) -> Vec<MinuteSample> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for r in 0..recordings {
        for m in 0..10 {
            let data = (0..2 * MINUTE_TIMESTEPS).map(|_| rng.gen_range(-1.0..1.0) + r as f64).collect();
            out.push(MinuteSample {
                recording_id: format!("r{r}"),
                subject_id: "s".into(),
                index: m,
                values: Grid2D::from_vec(2, MINUTE_TIMESTEPS, data).unwrap(),
                pain_score: (r % 2) as u8,
                label: r % 2,
            });
        }
    }
    out
}

fn assert_normalizer_ignores_test_units(plan: &FoldPlan, samples: &[MinuteSample]) {
    for fold in 0..plan.num_folds {
        let base = materialize_fold(samples, plan, fold, 0.1, 15.0, 3).unwrap();
        let mut poked = samples.to_vec();
        for s in poked.iter_mut().filter(|s| plan.is_test(fold, &s.recording_id, s.index)) {
            for v in s.values.as_mut_slice() {
                *v = *v * 1e3 + 77.0;
            }
        }
        let again = materialize_fold(&poked, plan, fold, 0.1, 15.0, 3).unwrap();
        assert_eq!(base.normalizer, again.normalizer, "fold {fold}");
        assert_eq!(base.train, again.train);
        assert_eq!(base.validation, again.validation);
    }
}

#[test]
fn normalizer_statistics_ignore_test_units() {
    let samples = toy_samples(3, 11);
    let ids = ["r0", "r1", "r2"];
    for protocol in [Protocol::Fivefold, Protocol::LeaveOneRecordingOut] {
        let plan = make_folds(&ids, protocol).unwrap();
        assert_normalizer_ignores_test_units(&plan, &samples);
    }
}

#[test]
fn gradient_step_is_worker_invariant() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let arch = Architecture::cnn(3, 200, 3);
    let params = ModelParams::init(arch, 9).unwrap();
    let xs: Vec<Grid2D> = (0..24)
        .map(|_| Grid2D::from_vec(3, 200, (0..600).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
        .collect();
    let batch: Vec<(&Grid2D, usize)> = xs.iter().enumerate().map(|(i, x)| (x, i % 3)).collect();
    let base = parallel_gradient_step(&params, &batch, 1, 0.5, 17).unwrap();
    let scale = base.gradient.max_abs();
    for p in [2, 3, 4, 8] {
        let out = parallel_gradient_step(&params, &batch, p, 0.5, 17).unwrap();
        let worst = base
            .gradient
            .as_slice()
            .iter()
            .zip(out.gradient.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-10 * scale, "P={p}: {worst:e}");
        assert!((out.loss - base.loss).abs() <= 1e-10 * base.loss.abs());
    }
}
