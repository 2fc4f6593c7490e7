//! Radix-2 FFT and the power spectrum used by the MFE frontend.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Power spectrum of one analysis frame.
///
/// The input length must be a power of two (the frame is expected to be
/// zero-padded to `fft_size` by the caller). Returns `N/2 + 1` values
/// `|X[k]|^2` for k = 0 ..= N/2 where X is the unnormalized DFT of the
/// real input.
pub fn fft_power_spectrum(frame: &[f64]) -> Result<Vec<f64>> {
    let n = frame.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::invalid(format!(
            "fft length must be a power of two >= 2, got {n}"
        )));
    }
    let mut re = frame.to_vec();
    let mut im = vec![0.0; n];
    fft_in_place(&mut re, &mut im);
    Ok((0..=n / 2).map(|k| re[k] * re[k] + im[k] * im[k]).collect())
}

/// In-place iterative radix-2 Cooley-Tukey, decimation in time.
/// Length must be a power of two.
pub(crate) fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    debug_assert!(n.is_power_of_two() && im.len() == n);

    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        // Twiddles for this stage, computed directly for accuracy.
        let step = -2.0 * PI / len as f64;
        let twiddles: Vec<(f64, f64)> = (0..half)
            .map(|k| {
                let angle = step * k as f64;
                (angle.cos(), angle.sin())
            })
            .collect();

        let mut start = 0;
        while start < n {
            for (k, &(wr, wi)) in twiddles.iter().enumerate() {
                let i = start + k;
                let j = i + half;
                let tr = re[j] * wr - im[j] * wi;
                let ti = re[j] * wi + im[j] * wr;
                re[j] = re[i] - tr;
                im[j] = im[i] - ti;
                re[i] += tr;
                im[i] += ti;
            }
            start += len;
        }
        len *= 2;
    }
}
