use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Forward DFT in place, `X_k = Σ_n x_n e^{−2πikn/L}`, on split real and
/// imaginary parts. `re.len()` must be a power of two.
pub fn fft_in_place(re: &mut [f64], im: &mut [f64]) -> Result<()> {
    let n = re.len();
    if im.len() != n {
        return Err(Error::shape("real and imaginary parts differ in length"));
    }
    if !n.is_power_of_two() {
        return Err(Error::usage(format!("FFT length {n} is not a power of two")));
    }
    let mut buf: Vec<Complex<f64>> = re.iter().zip(im.iter()).map(|(&r, &i)| Complex::new(r, i)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.into_iter().enumerate() {
        re[k] = c.re;
        im[k] = c.im;
    }
    Ok(())
}

/// Magnitudes of DFT bins `1..=k` of `x`, zero-padded to the next power of
/// two. Requires `k < x.len() / 2`.
pub fn fft_magnitudes(x: &[f64], k: usize) -> Result<Vec<f64>> {
    if 2 * k >= x.len() {
        return Err(Error::usage(format!(
            "{k} bins need a signal longer than {} samples",
            2 * k
        )));
    }
    let n = x.len().next_power_of_two();
    let mut re = x.to_vec();
    re.resize(n, 0.0);
    let mut im = vec![0.0; n];
    fft_in_place(&mut re, &mut im)?;
    Ok((1..=k).map(|b| re[b].hypot(im[b])).collect())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn sinusoid_lands_in_its_bin() {
        let n = 1024;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * 7.0 * i as f64 / n as f64).cos())
            .collect();
        let m = fft_magnitudes(&x, 64).unwrap();
        assert!((m[6] - 512.0).abs() < 1e-9);
        for (b, v) in m.iter().enumerate() {
            if b != 6 {
                assert!(*v < 1e-9, "bin {} = {v}", b + 1);
            }
        }
    }

    #[test]
    fn constant_has_no_ac_energy() {
        let m = fft_magnitudes(&[3.0; 1024], 64).unwrap();
        assert!(m.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn too_many_bins() {
        assert!(matches!(fft_magnitudes(&[0.0; 10], 5), Err(Error::Usage(_))));
        assert!(fft_magnitudes(&[0.0; 10], 4).is_ok());
    }
}
