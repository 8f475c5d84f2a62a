//! Synthetic datasets with planted, label-dependent structure.
//!
//! Pulse channels carry a PPG-like wave whose rate rises with the pain
//! score. Motion bursts arrive as a Poisson process; their rate and
//! amplitude are both proportional to the score, and they add short
//! high-frequency transients to the channels closest to the moving body
//! part. GSR carries skin
//! conductance responses at a score-proportional rate. Temperature is
//! label-independent drift.
//!
//! Every random draw comes from a ChaCha stream named after what it drives,
//! so one master seed reproduces a dataset bit for bit.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, UnitSphere};
use rayon::prelude::*;

use crate::dataset::{MINUTES_PER_RECORDING, MINUTE_TIMESTEPS, RECORDING_TIMESTEPS};
use crate::error::{Error, Result};
use crate::nn::Grid2D;
use crate::signal_store::{
    save_manifest, save_recording, ChannelKind, ChannelSpec, DatasetManifest, ManifestEntry,
    Recording, CANONICAL_PERIOD_MS, MAX_PAIN_SCORE,
};

const DT: f64 = CANONICAL_PERIOD_MS / 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// 15 channels: 7 pulse, 7 temperature, 1 GSR.
    Dataset1,
    /// 25 channels: pulse, temperature, accelerometer, gyroscope, force, GSR.
    Dataset2,
}

impl Layout {
    pub fn as_str(self) -> &'static str {
        match self {
            Layout::Dataset1 => "dataset1",
            Layout::Dataset2 => "dataset2",
        }
    }

    pub fn channels(self) -> Vec<ChannelSpec> {
        use ChannelKind::*;
        let c = ChannelSpec::new;
        match self {
            Layout::Dataset1 => {
                let sites = [
                    ("left temple", "temple_l"),
                    ("right temple", "temple_r"),
                    ("left carotid", "neck_l"),
                    ("right carotid", "neck_r"),
                    ("back of neck", "neck_back"),
                    ("fingertip", "finger"),
                    ("palm near wrist", "palm"),
                ];
                let mut v: Vec<ChannelSpec> = sites
                    .iter()
                    .map(|(p, n)| c(Pulse, p, &format!("pulse_{n}")))
                    .collect();
                v.extend(sites.iter().map(|(p, n)| c(Temperature, p, &format!("temp_{n}"))));
                v.push(c(Gsr, "hand block", "gsr_hand"));
                v
            }
            Layout::Dataset2 => {
                let mut v = vec![
                    c(Pulse, "left temple", "pulse_temple_l"),
                    c(Pulse, "right temple", "pulse_temple_r"),
                    c(Pulse, "left neck", "pulse_neck_l"),
                    c(Pulse, "right neck", "pulse_neck_r"),
                    c(Pulse, "fingertip", "pulse_finger"),
                    c(Temperature, "neck", "temp_neck"),
                    c(Temperature, "fingertip", "temp_finger"),
                ];
                for (site, tag) in [("head", "head"), ("wrist", "wrist")] {
                    for axis in ["x", "y", "z"] {
                        v.push(c(Accel, site, &format!("accel_{tag}_{axis}")));
                    }
                }
                for (site, tag) in [("head", "head"), ("wrist", "wrist")] {
                    for axis in ["x", "y", "z"] {
                        v.push(c(Gyro, site, &format!("gyro_{tag}_{axis}")));
                    }
                }
                v.extend([
                    c(Force, "forehead", "force_forehead"),
                    c(Force, "back of neck", "force_neck_back"),
                    c(Force, "side of neck", "force_neck_side"),
                    c(Force, "wrist", "force_wrist"),
                    c(Gsr, "fingers", "gsr_fingers"),
                    c(Gsr, "palm", "gsr_palm"),
                ]);
                v
            }
        }
    }
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dataset1" => Ok(Layout::Dataset1),
            "dataset2" => Ok(Layout::Dataset2),
            other => Err(Error::usage(format!("unknown layout `{other}`"))),
        }
    }
}

/// Which moving body part a burst comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Hand,
    Head,
}

fn burst_source(ch: &ChannelSpec) -> Option<Source> {
    let p = ch.placement.as_str();
    let hand = matches!(p, "fingertip" | "palm near wrist" | "wrist");
    let head = matches!(p, "left temple" | "right temple" | "head" | "forehead");
    match ch.kind {
        ChannelKind::Pulse | ChannelKind::Accel | ChannelKind::Gyro | ChannelKind::Force => {
            if hand {
                Some(Source::Hand)
            } else if head {
                Some(Source::Head)
            } else {
                None
            }
        }
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub dataset_name: String,
    pub layout: Layout,
    pub num_subjects: usize,
    /// Recordings are dealt to subjects round-robin.
    pub num_recordings: usize,
    pub category_values: Vec<u8>,
    /// Relative share of recordings per category.
    pub category_weights: Vec<f64>,
    /// Heart-rate increase per pain unit, bpm.
    pub hr_slope: f64,
    /// Motion bursts per minute per pain unit.
    pub burst_slope: f64,
    pub burst_amplitude: f64,
    /// Log-normal spread of a per-recording factor on burst amplitude.
    pub burst_vigor_sigma: f64,
    /// Skin conductance responses per minute per pain unit.
    pub gsr_slope: f64,
    /// Additive white noise on pulse channels.
    pub noise_sigma: f64,
    pub subject_hr_sigma: f64,
    pub recording_hr_sigma: f64,
    /// Heart rate is redrawn around the recording rate each minute.
    pub minute_hr_sigma: f64,
    /// Per-recording sensor offsets (accelerometer orientation, GSR and
    /// force baselines). Off for the single-subject layout.
    pub recording_fingerprints: bool,
    pub seed: u64,
}

pub fn dataset1_preset() -> SynthSpec {
    SynthSpec {
        dataset_name: "synthetic-dataset1".into(),
        layout: Layout::Dataset1,
        num_subjects: 1,
        num_recordings: 4,
        category_values: vec![1, 2],
        category_weights: vec![1.0, 1.0],
        hr_slope: 5.0,
        burst_slope: 60.0,
        burst_amplitude: 1.0,
        burst_vigor_sigma: 0.0,
        gsr_slope: 1.0,
        noise_sigma: 0.3,
        subject_hr_sigma: 5.0,
        recording_hr_sigma: 2.0,
        minute_hr_sigma: 6.0,
        recording_fingerprints: false,
        seed: 1,
    }
}

pub fn dataset2_preset() -> SynthSpec {
    SynthSpec {
        dataset_name: "synthetic-dataset2".into(),
        layout: Layout::Dataset2,
        num_subjects: 20,
        num_recordings: 62,
        category_values: vec![0, 1, 2, 3, 4, 5, 6],
        category_weights: vec![5.0, 10.0, 17.0, 10.0, 8.0, 7.0, 5.0],
        hr_slope: 5.0,
        burst_slope: 20.0,
        burst_amplitude: 1.0,
        burst_vigor_sigma: 0.2,
        gsr_slope: 1.0,
        noise_sigma: 0.3,
        subject_hr_sigma: 5.0,
        recording_hr_sigma: 2.0,
        minute_hr_sigma: 3.0,
        recording_fingerprints: true,
        seed: 2,
    }
}

pub fn preset(name: &str) -> Result<SynthSpec> {
    match name {
        "dataset1" => Ok(dataset1_preset()),
        "dataset2" => Ok(dataset2_preset()),
        other => Err(Error::usage(format!("unknown preset `{other}`"))),
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::usage(m.to_string()));
        if self.num_subjects == 0 || self.num_recordings < self.num_subjects {
            return bad("need at least one subject and one recording per subject");
        }
        if self.category_values.is_empty()
            || self.category_values.len() != self.category_weights.len()
        {
            return bad("category values and weights must be non-empty and aligned");
        }
        if self.category_values.iter().any(|&v| v > MAX_PAIN_SCORE)
            || self.category_values.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("category values must be strictly increasing scores in 0..=10");
        }
        if self.category_weights.iter().any(|w| !w.is_finite() || *w < 0.0)
            || self.category_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("category weights must be non-negative with a positive sum");
        }
        let effects = [
            self.hr_slope,
            self.burst_slope,
            self.burst_amplitude,
            self.burst_vigor_sigma,
            self.gsr_slope,
            self.noise_sigma,
            self.subject_hr_sigma,
            self.recording_hr_sigma,
            self.minute_hr_sigma,
        ];
        if effects.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("effect sizes and noise levels must be finite and non-negative");
        }
        if self.dataset_name.is_empty() || self.dataset_name.contains(['\n', '\r']) {
            return bad("dataset name must be a non-empty single line");
        }
        Ok(())
    }

    /// Pain score of each recording: counts by largest remainder over the
    /// weights, then shuffled.
    fn recording_scores(&self) -> Vec<u8> {
        let n = self.num_recordings;
        let total: f64 = self.category_weights.iter().sum();
        let quotas: Vec<f64> = self
            .category_weights
            .iter()
            .map(|w| w / total * n as f64)
            .collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let short = n - counts.iter().sum::<usize>();
        for &i in order.iter().take(short) {
            counts[i] += 1;
        }
        let mut scores: Vec<u8> = counts
            .iter()
            .zip(&self.category_values)
            .flat_map(|(&k, &v)| std::iter::repeat_n(v, k))
            .collect();
        scores.shuffle(&mut stream(self.seed, "labels"));
        scores
    }
}

/// FNV-1a, used only to turn stream names into ChaCha stream ids.
fn stream_id(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn stream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(name));
    rng
}

/// Planted parameters of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingTruth {
    pub recording_id: String,
    pub subject_id: String,
    pub pain_score: u8,
    pub subject_hr_offset: f64,
    pub base_hr: f64,
    pub minute_hr: Vec<f64>,
    /// Burst onset timesteps.
    pub burst_times: Vec<usize>,
    /// Recording factor on burst amplitude.
    pub burst_vigor: f64,
    pub gsr_event_times: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthLog {
    pub recordings: Vec<RecordingTruth>,
}

impl GroundTruthLog {
    /// One comma-separated row per recording; list fields are `;`-joined.
    pub fn to_text(&self) -> String {
        let mut s = String::from(
            "recording,subject,pain_score,subject_hr_offset,base_hr,minute_hr,burst_times,burst_vigor,gsr_event_times\n",
        );
        let join = |v: Vec<String>| v.join(";");
        for r in &self.recordings {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.recording_id,
                r.subject_id,
                r.pain_score,
                r.subject_hr_offset,
                r.base_hr,
                join(r.minute_hr.iter().map(f64::to_string).collect()),
                join(r.burst_times.iter().map(usize::to_string).collect()),
                r.burst_vigor,
                join(r.gsr_event_times.iter().map(usize::to_string).collect()),
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub spec: SynthSpec,
    /// Entries are `<recording id>.csv`, relative to wherever the dataset is written.
    pub manifest: DatasetManifest,
    pub recordings: Vec<Recording>,
    pub truth: GroundTruthLog,
}

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const TRUTH_FILE: &str = "ground_truth.csv";

impl SynthDataset {
    /// Writes recordings, the manifest and the ground-truth log into `dir`
    /// and returns the manifest path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.recordings
            .par_iter()
            .zip(&self.manifest.recording_entries)
            .try_for_each(|(r, e)| save_recording(r, &dir.join(&e.path)))?;
        let mut m = self.manifest.clone();
        m.base_dir = dir.to_path_buf();
        let path = dir.join(MANIFEST_FILE);
        save_manifest(&m, &path)?;
        let tp = dir.join(TRUTH_FILE);
        std::fs::write(&tp, self.truth.to_text()).map_err(|e| Error::io(&tp, e))?;
        Ok(path)
    }
}

pub fn generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let scores = spec.recording_scores();
    let offset_dist = Normal::new(0.0, spec.subject_hr_sigma).map_err(dist_err)?;
    let subject_offsets: Vec<f64> = (0..spec.num_subjects)
        .map(|s| offset_dist.sample(&mut stream(spec.seed, &format!("subject/{s}"))))
        .collect();
    let channels = spec.layout.channels();
    let width = spec.num_recordings.to_string().len().max(2);
    let built = (0..spec.num_recordings)
        .into_par_iter()
        .map(|i| {
            let subject = i % spec.num_subjects;
            let id = format!("rec{i:0width$}");
            let sid = format!("subj{subject:02}");
            synth_recording(
                spec,
                &channels,
                &id,
                &sid,
                scores[i],
                subject_offsets[subject],
                stream(spec.seed, &format!("recording/{i}")),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let (recordings, truths): (Vec<_>, Vec<_>) = built.into_iter().unzip();
    let manifest = DatasetManifest {
        dataset_name: spec.dataset_name.clone(),
        category_values: spec.category_values.clone(),
        recording_entries: recordings
            .iter()
            .map(|r: &Recording| ManifestEntry {
                path: PathBuf::from(format!("{}.csv", r.id)),
                recording_id: Some(r.id.clone()),
            })
            .collect(),
        base_dir: PathBuf::new(),
    };
    Ok(SynthDataset {
        spec: spec.clone(),
        manifest,
        recordings,
        truth: GroundTruthLog { recordings: truths },
    })
}

fn dist_err<E: std::fmt::Display>(e: E) -> Error {
    Error::usage(format!("invalid distribution parameter: {e}"))
}

/// Onset times of a Poisson process with `per_minute` events per minute.
fn poisson_times(rng: &mut ChaCha8Rng, per_minute: f64) -> Result<Vec<usize>> {
    let mean = per_minute * MINUTES_PER_RECORDING as f64;
    if mean <= 0.0 {
        return Ok(Vec::new());
    }
    let n = Poisson::new(mean).map_err(dist_err)?.sample(rng) as usize;
    let mut t: Vec<usize> = (0..n).map(|_| rng.gen_range(0..RECORDING_TIMESTEPS)).collect();
    t.sort_unstable();
    Ok(t)
}

/// Circular Gaussian bump on the unit phase interval.
fn bump(u: f64, center: f64, width: f64) -> f64 {
    let d = (u - center + 0.5).rem_euclid(1.0) - 0.5;
    (-d * d / (2.0 * width * width)).exp()
}

/// Systolic peak plus a smaller dicrotic wave.
fn pulse_shape(u: f64) -> f64 {
    bump(u, 0.15, 0.05) + 0.45 * bump(u, 0.45, 0.07)
}

/// Skin conductance response, peaking at one after `rise` seconds.
fn scr_shape(t_s: f64, rise: f64) -> f64 {
    if t_s <= 0.0 {
        0.0
    } else {
        let x = t_s / rise;
        x * (1.0 - x).exp()
    }
}

/// Ornstein–Uhlenbeck path with time constant `tau` seconds and
/// stationary standard deviation `sd`.
fn ou_path(rng: &mut ChaCha8Rng, len: usize, tau: f64, sd: f64) -> Vec<f64> {
    let a = (-DT / tau).exp();
    let step = sd * (1.0 - a * a).sqrt();
    let mut x = sd * gauss(rng);
    (0..len)
        .map(|_| {
            x = a * x + step * gauss(rng);
            x
        })
        .collect()
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(rand_distr::StandardNormal)
}

fn synth_recording(
    spec: &SynthSpec,
    channels: &[ChannelSpec],
    id: &str,
    subject_id: &str,
    score: u8,
    subject_offset: f64,
    mut rng: ChaCha8Rng,
) -> Result<(Recording, RecordingTruth)> {
    let t_len = RECORDING_TIMESTEPS;
    let s = score as f64;
    let base_hr = 60.0 + spec.hr_slope * s + subject_offset + spec.recording_hr_sigma * gauss(&mut rng);
    let minute_hr: Vec<f64> = (0..MINUTES_PER_RECORDING)
        .map(|_| (base_hr + spec.minute_hr_sigma * gauss(&mut rng)).clamp(30.0, 200.0))
        .collect();
    // Cardiac phase in cycles.
    let mut phase = Vec::with_capacity(t_len);
    let mut ph = rng.gen::<f64>();
    for t in 0..t_len {
        phase.push(ph);
        ph += minute_hr[t / MINUTE_TIMESTEPS] / 60.0 * DT;
    }
    let bursts = poisson_times(&mut rng, spec.burst_slope * s)?;
    let burst_src: Vec<Source> = bursts
        .iter()
        .map(|_| {
            if spec.layout == Layout::Dataset1 || rng.gen_bool(0.5) {
                Source::Hand
            } else {
                Source::Head
            }
        })
        .collect();
    let vigor = (spec.burst_vigor_sigma * gauss(&mut stream(spec.seed, &format!("{id}/vigor")))).exp();
    let gsr_events = poisson_times(&mut rng, spec.gsr_slope * s)?;
    let gsr_amps: Vec<f64> = gsr_events.iter().map(|_| rng.gen_range(0.5..1.5)).collect();

    let fp = spec.recording_fingerprints;
    let head_g: [f64; 3] = if fp { UnitSphere.sample(&mut rng) } else { [0.0, 0.0, 1.0] };
    let wrist_g: [f64; 3] = if fp { UnitSphere.sample(&mut rng) } else { [1.0, 0.0, 0.0] };
    let gsr_base = if fp { rng.gen_range(1.0..6.0) } else { 3.0 };

    let mut values = Grid2D::zeros(channels.len(), t_len);
    for (ci, ch) in channels.iter().enumerate() {
        let mut crng = stream(spec.seed, &format!("{id}/{}", ch.name));
        let row = values.row_mut(ci);
        match ch.kind {
            ChannelKind::Pulse => {
                // Each sensor sees the wave with its own per-minute transit
                // delay and gain.
                let delays: Vec<f64> = (0..MINUTES_PER_RECORDING).map(|_| crng.gen()).collect();
                let gains: Vec<f64> = (0..MINUTES_PER_RECORDING)
                    .map(|_| (0.2 * gauss(&mut crng)).exp())
                    .collect();
                for (t, v) in row.iter_mut().enumerate() {
                    let m = t / MINUTE_TIMESTEPS;
                    *v = gains[m] * pulse_shape((phase[t] - delays[m]).rem_euclid(1.0))
                        + spec.noise_sigma * gauss(&mut crng);
                }
            }
            ChannelKind::Temperature => {
                let base = 34.0;
                let drift = ou_path(&mut crng, t_len, 5.0, 0.05);
                for (v, d) in row.iter_mut().zip(drift) {
                    *v = base + d + 0.01 * gauss(&mut crng);
                }
            }
            ChannelKind::Gsr => {
                let drift = ou_path(&mut crng, t_len, 5.0, 0.05);
                for (v, d) in row.iter_mut().zip(drift) {
                    *v = gsr_base + d + 0.02 * gauss(&mut crng);
                }
                for (&t0, &a) in gsr_events.iter().zip(&gsr_amps) {
                    let end = (t0 + (20.0 / DT) as usize).min(t_len);
                    for (t, v) in row.iter_mut().enumerate().take(end).skip(t0) {
                        *v += a * scr_shape((t - t0) as f64 * DT, 1.5);
                    }
                }
            }
            ChannelKind::Accel => {
                let axis = axis_index(&ch.name);
                let g = if ch.placement == "head" { head_g } else { wrist_g };
                let wobble = ou_path(&mut crng, t_len, 2.0, 0.01);
                for (v, w) in row.iter_mut().zip(wobble) {
                    *v = g[axis] + w + 0.02 * gauss(&mut crng);
                }
            }
            ChannelKind::Gyro => {
                for v in row.iter_mut() {
                    *v = 0.05 * gauss(&mut crng);
                }
            }
            ChannelKind::Force => {
                let base = if fp { crng.gen_range(0.5..1.5) } else { 1.0 };
                let coupling = if ch.placement.contains("neck") { 0.05 } else { 0.0 };
                for (t, v) in row.iter_mut().enumerate() {
                    *v = base + coupling * pulse_shape(phase[t].rem_euclid(1.0))
                        + 0.02 * gauss(&mut crng);
                }
            }
        }
        if let Some(src) = burst_source(ch) {
            add_bursts(row, &bursts, &burst_src, src, spec.burst_amplitude * vigor * s, &mut crng);
        }
    }
    let rec = Recording::new(id, subject_id, score, CANONICAL_PERIOD_MS, channels.to_vec(), values)?;
    let truth = RecordingTruth {
        recording_id: id.to_string(),
        subject_id: subject_id.to_string(),
        pain_score: score,
        subject_hr_offset: subject_offset,
        base_hr,
        minute_hr,
        burst_times: bursts,
        burst_vigor: vigor,
        gsr_event_times: gsr_events,
    };
    Ok((rec, truth))
}

fn axis_index(name: &str) -> usize {
    match name.as_bytes().last() {
        Some(b'x') => 0,
        Some(b'y') => 1,
        _ => 2,
    }
}

/// Hann-windowed 18–26 Hz oscillations, 16–24 samples long, drawn
/// independently per channel so bursts add no cross-channel correlation.
/// `amplitude` already includes the score.
fn add_bursts(
    row: &mut [f64],
    times: &[usize],
    sources: &[Source],
    src: Source,
    amplitude: f64,
    rng: &mut ChaCha8Rng,
) {
    for (&t0, &s) in times.iter().zip(sources) {
        if s != src {
            continue;
        }
        let len = rng.gen_range(16..=24usize);
        let freq = rng.gen_range(18.0..26.0);
        let phase = rng.gen_range(0.0..2.0 * PI);
        let amp = amplitude * rng.gen_range(0.7..1.3);
        let w = 2.0 * PI * freq * DT;
        for j in 0..len.min(row.len().saturating_sub(t0)) {
            let hann = 0.5 - 0.5 * (2.0 * PI * (j as f64 + 0.5) / len as f64).cos();
            row[t0 + j] += amp * hann * (w * j as f64 + phase).sin();
        }
    }
}
