//! Confusion matrices, absolute-error histograms and expected-score R².

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::nn::ProbVector;

/// Rows are true categories, columns predicted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    c: usize,
    counts: Vec<usize>,
}

fn check_pairs(preds: &[usize], truths: &[usize], c: usize) -> Result<()> {
    if preds.len() != truths.len() {
        return Err(Error::usage(format!(
            "{} predictions for {} truths",
            preds.len(),
            truths.len()
        )));
    }
    if let Some(v) = preds.iter().chain(truths).find(|&&v| v >= c) {
        return Err(Error::usage(format!("category {v} outside 0..{c}")));
    }
    Ok(())
}

pub fn confusion(preds: &[usize], truths: &[usize], c: usize) -> Result<ConfusionMatrix> {
    check_pairs(preds, truths, c)?;
    let mut counts = vec![0; c * c];
    for (&p, &t) in preds.iter().zip(truths) {
        counts[t * c + p] += 1;
    }
    Ok(ConfusionMatrix { c, counts })
}

impl ConfusionMatrix {
    pub fn num_categories(&self) -> usize {
        self.c
    }

    pub fn get(&self, truth: usize, pred: usize) -> usize {
        self.counts[truth * self.c + pred]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.c).map(|i| self.get(i, i)).sum()
    }

    /// trace / total; zero for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.trace() as f64 / n as f64,
        }
    }

    pub fn row_sums(&self) -> Vec<usize> {
        (0..self.c)
            .map(|t| (0..self.c).map(|p| self.get(t, p)).sum())
            .collect()
    }

    /// Mass at each distance |truth − pred|.
    pub fn distance_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.c];
        for t in 0..self.c {
            for p in 0..self.c {
                h[t.abs_diff(p)] += self.get(t, p);
            }
        }
        h
    }

    /// Tab-separated grid with category values as headers.
    pub fn to_text(&self, category_values: &[u8]) -> String {
        let mut s = String::from("true\\pred");
        for v in category_values {
            let _ = write!(s, "\t{v}");
        }
        s.push('\n');
        for t in 0..self.c {
            let _ = write!(s, "{}", category_values[t]);
            for p in 0..self.c {
                let _ = write!(s, "\t{}", self.get(t, p));
            }
            s.push('\n');
        }
        s
    }
}

/// Counts of |pred − truth| for distances 0..c.
pub fn ape_histogram(preds: &[usize], truths: &[usize], c: usize) -> Result<Vec<usize>> {
    check_pairs(preds, truths, c)?;
    let mut h = vec![0; c];
    for (&p, &t) in preds.iter().zip(truths) {
        h[p.abs_diff(t)] += 1;
    }
    Ok(h)
}

/// Share of errors with distance at most `d`; `None` without errors.
pub fn errors_within(hist: &[usize], d: usize) -> Option<f64> {
    let errors: usize = hist.iter().skip(1).sum();
    if errors == 0 {
        return None;
    }
    let near: usize = hist.iter().take(d + 1).skip(1).sum();
    Some(near as f64 / errors as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedScores {
    /// (expected score rounded to one decimal, true score).
    pub pairs: Vec<(f64, f64)>,
    /// `None` when the true scores have zero variance.
    pub r2: Option<f64>,
}

pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

pub fn expected_score(p: &ProbVector, category_values: &[u8]) -> f64 {
    p.as_slice()
        .iter()
        .zip(category_values)
        .map(|(pi, &v)| pi * v as f64)
        .sum()
}

pub fn expected_score_r2(
    probs: &[ProbVector],
    truths: &[u8],
    category_values: &[u8],
) -> Result<ExpectedScores> {
    if probs.len() != truths.len() {
        return Err(Error::usage("probability and truth counts differ"));
    }
    if let Some(p) = probs.iter().find(|p| p.len() != category_values.len()) {
        return Err(Error::shape(format!(
            "probability vector of length {} for {} categories",
            p.len(),
            category_values.len()
        )));
    }
    let pairs: Vec<(f64, f64)> = probs
        .iter()
        .zip(truths)
        .map(|(p, &t)| (round1(expected_score(p, category_values)), t as f64))
        .collect();
    Ok(ExpectedScores {
        r2: r_squared(&pairs),
        pairs,
    })
}

/// 1 − SS_res/SS_tot of `(predicted, observed)` pairs.
pub fn r_squared(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let mean = pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len() as f64;
    let ss_tot: f64 = pairs.iter().map(|p| (p.1 - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return None;
    }
    let ss_res: f64 = pairs.iter().map(|p| (p.1 - p.0).powi(2)).sum();
    Some(1.0 - ss_res / ss_tot)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_confusion() {
        let m = confusion(&[0, 1, 1], &[0, 1, 0], 2).unwrap();
        assert_eq!((m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1)), (1, 1, 0, 1));
        assert!((m.accuracy() - 2.0 / 3.0).abs() < 1e-15);
        assert!(confusion(&[2], &[0], 2).is_err());
    }

    #[test]
    fn ape_hand_count() {
        assert_eq!(ape_histogram(&[3, 6], &[3, 3], 7).unwrap(), vec![1, 0, 0, 1, 0, 0, 0]);
        assert_eq!(errors_within(&[5, 3, 1], 1), Some(0.75));
        assert_eq!(errors_within(&[5, 0, 0], 1), None);
    }

    #[test]
    fn uniform_probs_give_midpoint() {
        let p = ProbVector::uniform(7);
        let v: Vec<u8> = (0..7).collect();
        assert!((expected_score(&p, &v) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn r2_matches_direct_formula() {
        let v = [0u8, 1, 2];
        let probs = vec![
            ProbVector::new(vec![0.8, 0.2, 0.0]).unwrap(),
            ProbVector::new(vec![0.1, 0.8, 0.1]).unwrap(),
            ProbVector::new(vec![0.0, 0.5, 0.5]).unwrap(),
            ProbVector::new(vec![0.0, 0.0, 1.0]).unwrap(),
        ];
        let truths = [0u8, 1, 2, 2];
        let r = expected_score_r2(&probs, &truths, &v).unwrap();
        // expected scores 0.2, 1.0, 1.5, 2.0; mean truth 1.25
        let ss_res = 0.04 + 0.0 + 0.25 + 0.0;
        let ss_tot = 1.5625 + 0.0625 + 0.5625 + 0.5625;
        assert!((r.r2.unwrap() - (1.0 - ss_res / ss_tot)).abs() < 1e-12);
        assert_eq!(
            expected_score_r2(&probs[..1], &[1], &v).unwrap().r2,
            None
        );
    }
}
