use crate::error::Result;
use crate::nn::Grid2D;

use super::fft::fft_magnitudes;

/// Default number of spectral bins per channel: 0 to about 4.2 Hz at 15 ms
/// sampling with a 1024-point transform.
pub const DEFAULT_BINS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct PearsonPairs {
    /// Upper-triangle order: (0,1), (0,2), …, (1,2), …
    pub values: Vec<f64>,
    /// Pairs involving a zero-variance channel; their value is 0.
    pub degenerate: Vec<(usize, usize)>,
}

pub fn pearson_pairs(slice: &Grid2D) -> PearsonPairs {
    let n = slice.rows();
    let l = slice.cols() as f64;
    let centered: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let row = slice.row(c);
            let m = row.iter().sum::<f64>() / l;
            row.iter().map(|v| v - m).collect()
        })
        .collect();
    let norms: Vec<f64> = centered
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let mut degenerate = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if norms[i] == 0.0 || norms[j] == 0.0 {
                values.push(0.0);
                degenerate.push((i, j));
                continue;
            }
            let cov: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            values.push((cov / (norms[i] * norms[j])).clamp(-1.0, 1.0));
        }
    }
    PearsonPairs { values, degenerate }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    /// Bins `1..=K` for channel 0, then channel 1, …
    pub fft_block: Vec<f64>,
    pub corr_block: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.fft_block.len() + self.corr_block.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.fft_block.clone();
        v.extend_from_slice(&self.corr_block);
        v
    }
}

pub fn extract_features(slice: &Grid2D, bins: usize) -> Result<FeatureVector> {
    let mut fft_block = Vec::with_capacity(bins * slice.rows());
    for c in 0..slice.rows() {
        fft_block.extend(fft_magnitudes(slice.row(c), bins)?);
    }
    Ok(FeatureVector {
        fft_block,
        corr_block: pearson_pairs(slice).values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_and_negated_pairs() {
        let a: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        let g = Grid2D::from_rows(&[a.clone(), a, neg, vec![1.0; 50]]).unwrap();
        let p = pearson_pairs(&g);
        assert!((p.values[0] - 1.0).abs() < 1e-12);
        assert!((p.values[1] + 1.0).abs() < 1e-12);
        assert_eq!(p.values.len(), 6);
        assert_eq!(p.degenerate, vec![(0, 3), (1, 3), (2, 3)]);
    }

    #[test]
    fn feature_length() {
        let g = Grid2D::filled(5, 1000, 1.0);
        let f = extract_features(&g, 64).unwrap();
        assert_eq!(f.len(), 5 * 64 + 10);
    }
}
