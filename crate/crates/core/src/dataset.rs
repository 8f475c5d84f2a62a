//! Minute samples, slices, per-channel normalization and the two
//! cross-validation protocols.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::Grid2D;
use crate::signal_store::{Recording, CANONICAL_PERIOD_MS};

pub const MINUTES_PER_RECORDING: usize = 10;
pub const MINUTE_TIMESTEPS: usize = 4000;
pub const RECORDING_TIMESTEPS: usize = MINUTES_PER_RECORDING * MINUTE_TIMESTEPS;
pub const STD_FLOOR: f64 = 1e-8;

/// One of the ten non-overlapping one-minute divisions of a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct MinuteSample {
    pub recording_id: String,
    pub subject_id: String,
    pub index: usize,
    pub values: Grid2D,
    pub pain_score: u8,
    /// Position of `pain_score` in the dataset's category list.
    pub label: usize,
}

/// Maps pain scores to category indices.
pub fn category_index(categories: &[u8], score: u8) -> Result<usize> {
    categories.iter().position(|&c| c == score).ok_or_else(|| {
        Error::Manifest(format!("pain score {score} not among categories {categories:?}"))
    })
}

/// Cuts the first ten minutes of `rec` into ten samples; extra timesteps are
/// dropped.
pub fn split_minutes(rec: &Recording, categories: &[u8]) -> Result<Vec<MinuteSample>> {
    if rec.sample_period_ms != CANONICAL_PERIOD_MS {
        return Err(Error::usage(format!(
            "recording {} is sampled every {} ms, expected {CANONICAL_PERIOD_MS}",
            rec.id, rec.sample_period_ms
        )));
    }
    let t = rec.num_timesteps();
    if t < RECORDING_TIMESTEPS {
        return Err(Error::Length(format!(
            "recording {} has {t} timesteps, {} short of ten minutes",
            rec.id,
            RECORDING_TIMESTEPS - t
        )));
    }
    let label = category_index(categories, rec.pain_score)?;
    (0..MINUTES_PER_RECORDING)
        .map(|m| {
            Ok(MinuteSample {
                recording_id: rec.id.clone(),
                subject_id: rec.subject_id.clone(),
                index: m,
                values: rec.values.column_window(m * MINUTE_TIMESTEPS, MINUTE_TIMESTEPS)?,
                pain_score: rec.pain_score,
                label,
            })
        })
        .collect()
}

/// Slice length in timesteps for a duration in seconds at the canonical
/// sampling period.
pub fn slice_timesteps(seq_length_s: f64) -> Result<usize> {
    if !(seq_length_s.is_finite() && seq_length_s > 0.0) {
        return Err(Error::usage(format!("seq_length {seq_length_s} s must be positive")));
    }
    let ls = (seq_length_s * 1000.0 / CANONICAL_PERIOD_MS).round() as usize;
    if ls == 0 {
        return Err(Error::Length(format!("seq_length {seq_length_s} s is under one sample")));
    }
    Ok(ls)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceTensor {
    pub values: Grid2D,
    pub recording_id: String,
    pub minute: usize,
    pub offset: usize,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceMode {
    /// `floor(T / Ls)` non-overlapping slices from offset 0.
    Tiled,
    /// `k` slices at uniform random offsets (with replacement).
    Random { k: usize, seed: u64 },
}

/// Start offsets for slices of length `ls` inside `t` timesteps.
pub fn slice_offsets(t: usize, ls: usize, mode: SliceMode) -> Result<Vec<usize>> {
    if ls > t {
        return Err(Error::Length(format!(
            "slice of {ls} timesteps does not fit {t} timesteps"
        )));
    }
    Ok(match mode {
        SliceMode::Tiled => (0..t / ls).map(|i| i * ls).collect(),
        SliceMode::Random { k, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..k).map(|_| rng.gen_range(0..=t - ls)).collect()
        }
    })
}

pub fn extract_slices(
    sample: &MinuteSample,
    seq_length_s: f64,
    mode: SliceMode,
) -> Result<Vec<SliceTensor>> {
    let ls = slice_timesteps(seq_length_s)?;
    slice_offsets(sample.values.cols(), ls, mode)?
        .into_iter()
        .map(|offset| {
            Ok(SliceTensor {
                values: sample.values.column_window(offset, ls)?,
                recording_id: sample.recording_id.clone(),
                minute: sample.index,
                offset,
                label: sample.label,
            })
        })
        .collect()
}

/// Per-channel z-score statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Fits channel means and (population) standard deviations over every
    /// timestep of every grid; σ is floored at [`STD_FLOOR`].
    pub fn fit<'a>(grids: impl IntoIterator<Item = &'a Grid2D>) -> Result<Self> {
        let grids: Vec<&Grid2D> = grids.into_iter().collect();
        let Some(first) = grids.first() else {
            return Err(Error::usage("cannot fit a normalizer on an empty set"));
        };
        let n = first.rows();
        if grids.iter().any(|g| g.rows() != n) {
            return Err(Error::shape("grids disagree on channel count"));
        }
        let count: usize = grids.iter().map(|g| g.cols()).sum();
        if count == 0 {
            return Err(Error::usage("cannot fit a normalizer on zero timesteps"));
        }
        let mut mean = vec![0.0; n];
        let mut std = vec![0.0; n];
        for c in 0..n {
            let s: f64 = grids.iter().map(|g| g.row(c).iter().sum::<f64>()).sum();
            let m = s / count as f64;
            let q: f64 = grids
                .iter()
                .map(|g| g.row(c).iter().map(|v| (v - m) * (v - m)).sum::<f64>())
                .sum();
            mean[c] = m;
            std[c] = (q / count as f64).sqrt().max(STD_FLOOR);
        }
        Ok(Self { mean, std })
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_in_place(&self, g: &mut Grid2D) -> Result<()> {
        if g.rows() != self.mean.len() {
            return Err(Error::shape(format!(
                "normalizer has {} channels, grid has {}",
                self.mean.len(),
                g.rows()
            )));
        }
        for c in 0..g.rows() {
            let (m, s) = (self.mean[c], self.std[c]);
            for v in g.row_mut(c) {
                *v = (*v - m) / s;
            }
        }
        Ok(())
    }

    pub fn apply(&self, g: &Grid2D) -> Result<Grid2D> {
        let mut out = g.clone();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }

    /// `channel,mean,std` lines after a header.
    pub fn to_text(&self) -> String {
        let mut s = String::from("channel,mean,std\n");
        for (i, (m, d)) in self.mean.iter().zip(&self.std).enumerate() {
            s.push_str(&format!("{i},{m},{d}\n"));
        }
        s
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Format {
            path: path.to_path_buf(),
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "channel,mean,std")) => {}
            _ => return Err(bad(1, "expected header `channel,mean,std`")),
        }
        let (mut mean, mut std) = (Vec::new(), Vec::new());
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 || f[0].parse::<usize>().ok() != Some(mean.len()) {
                return Err(bad(i + 1, "expected `<channel index>,<mean>,<std>` in channel order"));
            }
            let m: f64 = f[1].parse().map_err(|_| bad(i + 1, "mean is not a number"))?;
            let d: f64 = f[2].parse().map_err(|_| bad(i + 1, "std is not a number"))?;
            if !m.is_finite() || !(d >= STD_FLOOR) || !d.is_finite() {
                return Err(bad(i + 1, "statistics must be finite with std at least the floor"));
            }
            mean.push(m);
            std.push(d);
        }
        if mean.is_empty() {
            return Err(bad(1, "no channels"));
        }
        Ok(Self { mean, std })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    /// Fold `i` (zero-based) tests minutes `[2i, 2i + 2)` of every recording.
    Fivefold,
    /// Each recording is the test set of exactly one fold.
    LeaveOneRecordingOut,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Fivefold => "fivefold",
            Protocol::LeaveOneRecordingOut => "loro",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fivefold" | "5fold" => Ok(Protocol::Fivefold),
            "loro" | "leave-one-recording-out" => Ok(Protocol::LeaveOneRecordingOut),
            other => Err(Error::usage(format!("unknown fold protocol `{other}`"))),
        }
    }
}

/// A minute sample, identified by recording id and minute index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnitId {
    pub recording: String,
    pub minute: usize,
}

/// Assignment of every minute sample to exactly one test fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub protocol: Protocol,
    pub num_folds: usize,
    assignments: BTreeMap<UnitId, usize>,
}

impl FoldPlan {
    /// Test fold of a minute sample.
    pub fn fold_of(&self, recording: &str, minute: usize) -> Option<usize> {
        self.assignments
            .get(&UnitId {
                recording: recording.to_string(),
                minute,
            })
            .copied()
    }

    pub fn is_test(&self, fold: usize, recording: &str, minute: usize) -> bool {
        self.fold_of(recording, minute) == Some(fold)
    }

    pub fn assignments(&self) -> impl Iterator<Item = (&UnitId, usize)> {
        self.assignments.iter().map(|(u, &f)| (u, f))
    }

    pub fn test_units(&self, fold: usize) -> Vec<&UnitId> {
        self.assignments
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(u, _)| u)
            .collect()
    }

    /// For LORO plans, the recording tested in `fold`.
    pub fn test_recordings(&self, fold: usize) -> BTreeSet<&str> {
        self.test_units(fold)
            .into_iter()
            .map(|u| u.recording.as_str())
            .collect()
    }

    /// Checks that the test sets are disjoint, cover exactly `units` and use
    /// every fold.
    pub fn check_partition<'a>(&self, units: impl IntoIterator<Item = &'a UnitId>) -> Result<()> {
        let expected: BTreeSet<&UnitId> = units.into_iter().collect();
        let planned: BTreeSet<&UnitId> = self.assignments.keys().collect();
        if expected != planned {
            let missing = expected.difference(&planned).count();
            let extra = planned.difference(&expected).count();
            return Err(Error::usage(format!(
                "fold plan covers the wrong units ({missing} missing, {extra} unknown)"
            )));
        }
        let mut used = vec![false; self.num_folds];
        for &f in self.assignments.values() {
            match used.get_mut(f) {
                Some(u) => *u = true,
                None => return Err(Error::usage(format!("fold id {f} out of range"))),
            }
        }
        if let Some(f) = used.iter().position(|u| !u) {
            return Err(Error::usage(format!("fold {f} has no test units")));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("protocol={}\nfolds={}\n", self.protocol, self.num_folds);
        for (u, f) in &self.assignments {
            s.push_str(&format!("{}/{},{}\n", u.recording, u.minute, f));
        }
        s
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::Format {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        let mut header = |key: &str| -> Result<String> {
            let (i, l) = lines
                .next()
                .ok_or_else(|| Error::Manifest(format!("{}: missing `{key}`", path.display())))?;
            l.strip_prefix(&format!("{key}="))
                .map(str::to_string)
                .ok_or_else(|| bad(i + 1, format!("expected `{key}=`")))
        };
        let protocol: Protocol = header("protocol")?.parse()?;
        let num_folds: usize = header("folds")?
            .parse()
            .map_err(|_| bad(2, "fold count is not an integer".into()))?;
        let mut assignments = BTreeMap::new();
        for (i, l) in lines {
            if l.trim().is_empty() {
                continue;
            }
            let parse = || -> Option<(UnitId, usize)> {
                let (unit, fold) = l.rsplit_once(',')?;
                let (rec, minute) = unit.rsplit_once('/')?;
                Some((
                    UnitId {
                        recording: rec.to_string(),
                        minute: minute.parse().ok()?,
                    },
                    fold.trim().parse().ok()?,
                ))
            };
            let (u, f) = parse().ok_or_else(|| bad(i + 1, format!("bad assignment `{l}`")))?;
            if assignments.insert(u, f).is_some() {
                return Err(bad(i + 1, "unit assigned twice".into()));
            }
        }
        Ok(Self {
            protocol,
            num_folds,
            assignments,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

/// Builds the fold plan for recordings listed in manifest order.
pub fn make_folds<S: AsRef<str>>(recording_ids: &[S], protocol: Protocol) -> Result<FoldPlan> {
    let mut seen = BTreeSet::new();
    for id in recording_ids {
        if !seen.insert(id.as_ref()) {
            return Err(Error::usage(format!("duplicate recording id `{}`", id.as_ref())));
        }
    }
    let mut assignments = BTreeMap::new();
    let num_folds = match protocol {
        Protocol::Fivefold => {
            if recording_ids.is_empty() {
                return Err(Error::usage("fivefold split of zero recordings"));
            }
            for id in recording_ids {
                for m in 0..MINUTES_PER_RECORDING {
                    assignments.insert(
                        UnitId {
                            recording: id.as_ref().to_string(),
                            minute: m,
                        },
                        m / 2,
                    );
                }
            }
            5
        }
        Protocol::LeaveOneRecordingOut => {
            if recording_ids.len() < 2 {
                return Err(Error::usage(
                    "leave-one-recording-out needs at least two recordings",
                ));
            }
            for (f, id) in recording_ids.iter().enumerate() {
                for m in 0..MINUTES_PER_RECORDING {
                    assignments.insert(
                        UnitId {
                            recording: id.as_ref().to_string(),
                            minute: m,
                        },
                        f,
                    );
                }
            }
            recording_ids.len()
        }
    };
    Ok(FoldPlan {
        protocol,
        num_folds,
        assignments,
    })
}

/// The material for one fold: normalized train/validation/test minute samples
/// with the normalizer fitted on the training minutes only.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub fold: usize,
    pub normalizer: Normalizer,
    pub train: Vec<MinuteSample>,
    pub validation: Vec<MinuteSample>,
    pub test: Vec<MinuteSample>,
}

/// Splits `samples` for `fold`: test units per the plan, then a seeded
/// `val_fraction` of the remaining minutes held out for validation (at least
/// one when there are two or more training minutes). The normalizer is fitted
/// on the tiled training slices and applied to all three parts.
pub fn materialize_fold(
    samples: &[MinuteSample],
    plan: &FoldPlan,
    fold: usize,
    val_fraction: f64,
    seq_length_s: f64,
    seed: u64,
) -> Result<FoldData> {
    if fold >= plan.num_folds {
        return Err(Error::usage(format!("fold {fold} out of range")));
    }
    let mut test = Vec::new();
    let mut rest = Vec::new();
    for s in samples {
        match plan.fold_of(&s.recording_id, s.index) {
            Some(f) if f == fold => test.push(s),
            Some(_) => rest.push(s),
            None => {
                return Err(Error::usage(format!(
                    "minute {} of `{}` is not in the fold plan",
                    s.index, s.recording_id
                )))
            }
        }
    }
    let mut order: Vec<usize> = (0..rest.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fold as u64);
    order.shuffle(&mut rng);
    let n_val = if rest.len() >= 2 {
        ((rest.len() as f64 * val_fraction).round() as usize).clamp(1, rest.len() - 1)
    } else {
        0
    };
    let mut is_val = vec![false; rest.len()];
    for &i in &order[..n_val] {
        is_val[i] = true;
    }
    let train_raw: Vec<&MinuteSample> = rest
        .iter()
        .zip(&is_val)
        .filter(|(_, &v)| !v)
        .map(|(s, _)| *s)
        .collect();
    let ls = slice_timesteps(seq_length_s)?;
    let fit_windows = train_raw
        .iter()
        .map(|s| {
            let n = s.values.cols() / ls;
            s.values.column_window(0, n * ls)
        })
        .collect::<Result<Vec<_>>>()?;
    let normalizer = Normalizer::fit(&fit_windows)?;
    let norm = |s: &MinuteSample| -> Result<MinuteSample> {
        let mut out = s.clone();
        normalizer.apply_in_place(&mut out.values)?;
        Ok(out)
    };
    let train = train_raw.iter().map(|s| norm(s)).collect::<Result<Vec<_>>>()?;
    let validation = rest
        .iter()
        .zip(&is_val)
        .filter(|(_, &v)| v)
        .map(|(s, _)| norm(s))
        .collect::<Result<Vec<_>>>()?;
    let test = test.into_iter().map(norm).collect::<Result<Vec<_>>>()?;
    Ok(FoldData {
        fold,
        normalizer,
        train,
        validation,
        test,
    })
}

/// Tiled slices of every sample, in sample order.
pub fn tiled_slices(samples: &[MinuteSample], seq_length_s: f64) -> Result<Vec<SliceTensor>> {
    let mut out = Vec::new();
    for s in samples {
        out.extend(extract_slices(s, seq_length_s, SliceMode::Tiled)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_store::{ChannelKind, ChannelSpec};

    fn recording(id: &str, t: usize, score: u8) -> Recording {
        let data = (0..2 * t).map(|i| i as f64).collect();
        Recording::new(
            id,
            "s",
            score,
            15.0,
            vec![
                ChannelSpec::new(ChannelKind::Pulse, "a", "p"),
                ChannelSpec::new(ChannelKind::Temperature, "a", "t"),
            ],
            Grid2D::from_vec(2, t, data).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn ten_minute_split() {
        let r = recording("r", 40_123, 1);
        let ms = split_minutes(&r, &[1, 2]).unwrap();
        assert_eq!(ms.len(), 10);
        let mut joined = Vec::new();
        for m in &ms {
            assert_eq!(m.values.cols(), 4000);
            joined.extend_from_slice(m.values.row(0));
        }
        assert_eq!(joined, r.values.row(0)[..40_000].to_vec());
        assert_eq!(ms[3].label, 0);
    }

    #[test]
    fn short_recording_is_length_error() {
        let e = split_minutes(&recording("r", 39_999, 1), &[1]).unwrap_err();
        assert!(matches!(e, Error::Length(ref m) if m.contains("1 short")), "{e}");
    }

    #[test]
    fn tiled_and_random_slices() {
        let ms = split_minutes(&recording("r", 40_000, 2), &[1, 2]).unwrap();
        let tiled = extract_slices(&ms[0], 15.0, SliceMode::Tiled).unwrap();
        let offs: Vec<usize> = tiled.iter().map(|s| s.offset).collect();
        assert_eq!(offs, vec![0, 1000, 2000, 3000]);
        assert_eq!(tiled[0].values.shape(), (2, 1000));
        assert_eq!(extract_slices(&ms[0], 60.0, SliceMode::Tiled).unwrap().len(), 1);
        let a = extract_slices(&ms[0], 15.0, SliceMode::Random { k: 100, seed: 3 }).unwrap();
        let b = extract_slices(&ms[0], 15.0, SliceMode::Random { k: 100, seed: 3 }).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| s.offset <= 3000));
        assert!(matches!(
            extract_slices(&ms[0], 61.0, SliceMode::Tiled),
            Err(Error::Length(_))
        ));
        assert_eq!(slice_timesteps(5.0).unwrap(), 333);
        assert_eq!(4000 / slice_timesteps(5.0).unwrap(), 12);
    }

    #[test]
    fn normalizer_basics() {
        let constant = Grid2D::filled(1, 50, 3.5);
        let n = Normalizer::fit([&constant]).unwrap();
        assert_eq!((n.mean[0], n.std[0]), (3.5, STD_FLOOR));
        assert!(matches!(
            Normalizer::fit(std::iter::empty::<&Grid2D>()),
            Err(Error::Usage(_))
        ));

        let g = Grid2D::from_vec(2, 7, (0..14).map(|i| (i * i) as f64).collect()).unwrap();
        let n = Normalizer::fit([&g]).unwrap();
        let z = n.apply(&g).unwrap();
        for c in 0..2 {
            assert!(z.row(c).iter().sum::<f64>().abs() / 7.0 < 1e-6);
        }
    }

    #[test]
    fn fold_plans() {
        let ids = ["a", "b", "c", "d"];
        let p = make_folds(&ids, Protocol::Fivefold).unwrap();
        assert_eq!(p.num_folds, 5);
        let t0: Vec<(&str, usize)> = p
            .test_units(0)
            .iter()
            .map(|u| (u.recording.as_str(), u.minute))
            .collect();
        assert_eq!(t0.len(), 8);
        assert!(t0.iter().all(|&(_, m)| m < 2));
        let units: Vec<UnitId> = ids
            .iter()
            .flat_map(|r| {
                (0..10).map(|m| UnitId {
                    recording: r.to_string(),
                    minute: m,
                })
            })
            .collect();
        p.check_partition(&units).unwrap();
        assert!(p.check_partition(&units[1..]).is_err());

        let l = make_folds(&ids, Protocol::LeaveOneRecordingOut).unwrap();
        assert_eq!(l.num_folds, 4);
        assert_eq!(l.test_recordings(2).into_iter().collect::<Vec<_>>(), vec!["c"]);
        assert!(matches!(
            make_folds(&["x"], Protocol::LeaveOneRecordingOut),
            Err(Error::Usage(_))
        ));

        let back = FoldPlan::from_text(&p.to_text(), Path::new("p")).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn fold_materialization_respects_plan() {
        let recs: Vec<Recording> = ["a", "b"].iter().map(|id| recording(id, 40_000, 1)).collect();
        let samples: Vec<MinuteSample> = recs
            .iter()
            .flat_map(|r| split_minutes(r, &[1]).unwrap())
            .collect();
        let plan = make_folds(&["a", "b"], Protocol::Fivefold).unwrap();
        let fd = materialize_fold(&samples, &plan, 2, 0.1, 15.0, 9).unwrap();
        assert_eq!(fd.test.len(), 4);
        assert!(fd.test.iter().all(|s| s.index == 4 || s.index == 5));
        assert_eq!(fd.validation.len(), 2);
        assert_eq!(fd.train.len(), 14);
    }
}
