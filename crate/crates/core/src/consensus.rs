//! Consensus Prediction: plurality vote over the predictions of many
//! randomly placed slices of one unit (a minute sample or a recording).
//!
//! Ties go to the lowest category index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{Grid2D, ModelParams};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteTally {
    counts: Vec<usize>,
    total: usize,
}

impl VoteTally {
    pub fn new(num_categories: usize) -> Self {
        Self {
            counts: vec![0; num_categories],
            total: 0,
        }
    }

    pub fn from_counts(counts: Vec<usize>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn add(&mut self, category: usize) {
        self.counts[category] += 1;
        self.total += 1;
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Category with the most votes, lowest index on ties.
    pub fn plurality(&self) -> usize {
        plurality(&self.counts)
    }

    /// Vote shares; the uniform distribution for an empty tally.
    pub fn shares(&self) -> Vec<f64> {
        if self.total == 0 {
            let c = self.counts.len() as f64;
            return vec![1.0 / c; self.counts.len()];
        }
        self.counts
            .iter()
            .map(|&n| n as f64 / self.total as f64)
            .collect()
    }
}

/// Index of the first maximal count.
pub fn plurality(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Whether to vote per minute sample or per whole recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Minute,
    Recording,
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minute" => Ok(Granularity::Minute),
            "recording" => Ok(Granularity::Recording),
            other => Err(Error::usage(format!("unknown granularity `{other}`"))),
        }
    }
}

/// Seed for unit number `unit` under a shared base seed.
pub fn unit_seed(base: u64, unit: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(unit as u64);
    rng.gen()
}

/// Classifies `k` slices of length `seq_len` taken at uniformly random
/// offsets (with replacement) from `unit`, returning the predicted category
/// of each slice in draw order.
pub fn slice_votes(
    params: &ModelParams,
    unit: &Grid2D,
    k: usize,
    seq_len: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::usage("consensus needs at least one slice"));
    }
    if seq_len > unit.cols() {
        return Err(Error::Length(format!(
            "unit of {} timesteps is shorter than the {seq_len}-timestep slice",
            unit.cols()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<usize> = (0..k)
        .map(|_| rng.gen_range(0..=unit.cols() - seq_len))
        .collect();
    offsets
        .par_iter()
        .map(|&o| Ok(params.predict(&unit.column_window(o, seq_len)?)?.argmax()))
        .collect()
}

pub fn consensus_predict(
    params: &ModelParams,
    unit: &Grid2D,
    k: usize,
    seq_len: usize,
    seed: u64,
) -> Result<(usize, VoteTally)> {
    let mut tally = VoteTally::new(params.num_categories());
    for v in slice_votes(params, unit, k, seq_len, seed)? {
        tally.add(v);
    }
    Ok((tally.plurality(), tally))
}

/// Consensus accuracy at each `k`. Unit `i` draws `max(k)` slices once with
/// [`unit_seed`]`(base_seed, i)`; the vote at `k` uses the first `k` draws.
pub fn consensus_curve(
    params: &ModelParams,
    units: &[(&Grid2D, usize)],
    k_values: &[usize],
    seq_len: usize,
    base_seed: u64,
) -> Result<Vec<(usize, f64)>> {
    if units.is_empty() {
        return Err(Error::usage("consensus curve over zero units"));
    }
    if k_values.is_empty() || k_values.windows(2).any(|w| w[0] > w[1]) || k_values[0] == 0 {
        return Err(Error::usage("k values must be positive and ascending"));
    }
    let kmax = *k_values.last().expect("nonempty");
    let votes = units
        .iter()
        .enumerate()
        .map(|(i, (g, _))| slice_votes(params, g, kmax, seq_len, unit_seed(base_seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(curve_from_votes(&votes, units.iter().map(|u| u.1), params.num_categories(), k_values))
}

/// Consensus accuracy per prefix length given every unit's ordered votes.
pub fn curve_from_votes(
    votes: &[Vec<usize>],
    truths: impl IntoIterator<Item = usize>,
    num_categories: usize,
    k_values: &[usize],
) -> Vec<(usize, f64)> {
    let truths: Vec<usize> = truths.into_iter().collect();
    k_values
        .iter()
        .map(|&k| {
            let correct = votes
                .iter()
                .zip(&truths)
                .filter(|(v, &t)| {
                    let mut tally = VoteTally::new(num_categories);
                    for &x in &v[..k.min(v.len())] {
                        tally.add(x);
                    }
                    tally.plurality() == t
                })
                .count();
            (k, correct as f64 / votes.len() as f64)
        })
        .collect()
}

pub fn curve_text(curve: &[(usize, f64)]) -> String {
    let mut s = String::from("k\taccuracy\n");
    for (k, a) in curve {
        s.push_str(&format!("{k}\t{a}\n"));
    }
    s
}

/// Probability that a plurality of `k` independent binary votes, each
/// correct with probability `q`, is correct (ties count as correct when the
/// true class is index 0, matching the lowest-index rule).
pub fn binary_majority_accuracy(q: f64, k: usize, truth_is_lowest: bool) -> f64 {
    // P(X = j) for X ~ Binomial(k, q) via a log-space recurrence.
    let mut total = 0.0;
    let mut log_c = 0.0f64;
    for j in 0..=k {
        if j > 0 {
            log_c += ((k - j + 1) as f64).ln() - (j as f64).ln();
        }
        let p = (log_c + j as f64 * q.ln() + (k - j) as f64 * (1.0 - q).ln()).exp();
        let wins = 2 * j > k || (2 * j == k && truth_is_lowest);
        if wins {
            total += p;
        }
    }
    total
}
