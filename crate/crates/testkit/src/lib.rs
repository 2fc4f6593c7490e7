//! Reference oracles for the test suites.
//!
//! Everything in this crate is written directly from the defining formulas,
//! with no dependency on the production crate. The implementations favour
//! obviousness over speed: naive O(N^2) transforms, bit-at-a-time CRC,
//! nested-`Vec` tensors. Test code converts production types into plain
//! slices/vecs before calling in here.

use std::f64::consts::PI;

/// Naive DFT of a real signal: X[k] = sum_n x[n] * exp(-2*pi*i*k*n/N).
/// Returns all N complex bins as (re, im) pairs.
pub fn naive_dft(signal: &[f64]) -> Vec<(f64, f64)> {
    let n = signal.len();
    let mut bins = Vec::with_capacity(n);
    for k in 0..n {
        let mut re = 0.0;
        let mut im = 0.0;
        for (idx, &x) in signal.iter().enumerate() {
            let angle = -2.0 * PI * (k as f64) * (idx as f64) / (n as f64);
            re += x * angle.cos();
            im += x * angle.sin();
        }
        bins.push((re, im));
    }
    bins
}

/// Naive power spectrum |X[k]|^2 for the non-negative frequency bins
/// (k = 0 ..= N/2) of a real signal.
pub fn naive_power_spectrum(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    naive_dft(signal)
        .into_iter()
        .take(n / 2 + 1)
        .map(|(re, im)| re * re + im * im)
        .collect()
}

/// CRC-16/CCITT-FALSE computed one bit at a time through a shift register.
/// Polynomial 0x1021, initial value 0xFFFF, no reflection, no final xor.
pub fn crc16_ccitt_false_bitwise(data: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &byte in data {
        for bit in 0..8 {
            let in_bit = (byte >> (7 - bit)) & 1 == 1;
            let top = (crc & 0x8000) != 0;
            crc <<= 1;
            if top != in_bit {
                crc ^= 0x1021;
            }
        }
    }
    crc
}

/// Central finite-difference gradient of `f` at `params`.
/// g[i] = (f(x + h*e_i) - f(x - h*e_i)) / (2h).
pub fn central_difference_gradient<F>(mut f: F, params: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut work = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let original = work[i];
        work[i] = original + step;
        let plus = f(&work);
        work[i] = original - step;
        let minus = f(&work);
        work[i] = original;
        grad.push((plus - minus) / (2.0 * step));
    }
    grad
}

/// Relative error with a guarded denominator: |a-b| / max(eps, |a|+|b|).
pub fn relative_error(a: f64, b: f64, eps: f64) -> f64 {
    (a - b).abs() / eps.max(a.abs() + b.abs())
}

/// Exhaustive max-energy window scan.
///
/// Considers every start offset `k * hop` with `k*hop + win <= len(samples)`,
/// sums squared samples over the window, and returns the sample offset of the
/// best window. Ties resolve to the earliest offset (strict `>` while
/// scanning forward).
pub fn max_energy_offset(samples: &[f64], win: usize, hop: usize) -> usize {
    assert!(win <= samples.len());
    assert!(hop > 0);
    let mut best_offset = 0;
    let mut best_energy = f64::NEG_INFINITY;
    let mut k = 0;
    loop {
        let start = k * hop;
        if start + win > samples.len() {
            break;
        }
        let mut energy = 0.0;
        for &s in &samples[start..start + win] {
            energy += s * s;
        }
        if energy > best_energy {
            best_energy = energy;
            best_offset = start;
        }
        k += 1;
    }
    best_offset
}

/// 3-d array as nested vecs, indexed [channel][row][col].
pub type Grid3 = Vec<Vec<Vec<f64>>>;

/// Reference valid-mode 2-d convolution, stride 1, no padding.
/// `kernel[oc][ic][kh][kw]`, `bias[oc]`.
pub fn ref_conv2d(input: &Grid3, kernel: &[Grid3], bias: &[f64]) -> Grid3 {
    let in_c = input.len();
    let in_h = input[0].len();
    let in_w = input[0][0].len();
    let out_c = kernel.len();
    let k_h = kernel[0][0].len();
    let k_w = kernel[0][0][0].len();
    let out_h = in_h - k_h + 1;
    let out_w = in_w - k_w + 1;

    let mut out = vec![vec![vec![0.0; out_w]; out_h]; out_c];
    for oc in 0..out_c {
        for oh in 0..out_h {
            for ow in 0..out_w {
                let mut acc = bias[oc];
                for ic in 0..in_c {
                    for kh in 0..k_h {
                        for kw in 0..k_w {
                            acc += input[ic][oh + kh][ow + kw] * kernel[oc][ic][kh][kw];
                        }
                    }
                }
                out[oc][oh][ow] = acc;
            }
        }
    }
    out
}

/// Reference ReLU over a 3-d grid.
pub fn ref_relu(input: &Grid3) -> Grid3 {
    input
        .iter()
        .map(|ch| {
            ch.iter()
                .map(|row| row.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect())
                .collect()
        })
        .collect()
}

/// Reference non-overlapping max pooling; trailing remainder rows/cols dropped.
pub fn ref_maxpool(input: &Grid3, pool_h: usize, pool_w: usize) -> Grid3 {
    let channels = input.len();
    let out_h = input[0].len() / pool_h;
    let out_w = input[0][0].len() / pool_w;
    let mut out = vec![vec![vec![0.0; out_w]; out_h]; channels];
    for c in 0..channels {
        for oh in 0..out_h {
            for ow in 0..out_w {
                let mut best = f64::NEG_INFINITY;
                for ph in 0..pool_h {
                    for pw in 0..pool_w {
                        let v = input[c][oh * pool_h + ph][ow * pool_w + pw];
                        if v > best {
                            best = v;
                        }
                    }
                }
                out[c][oh][ow] = best;
            }
        }
    }
    out
}

/// Flatten a 3-d grid in [channel][row][col] order.
pub fn ref_flatten(input: &Grid3) -> Vec<f64> {
    let mut out = Vec::new();
    for ch in input {
        for row in ch {
            out.extend_from_slice(row);
        }
    }
    out
}

/// Reference dense layer: out[j] = bias[j] + sum_i weight[j][i] * x[i].
pub fn ref_dense(input: &[f64], weight: &[Vec<f64>], bias: &[f64]) -> Vec<f64> {
    weight
        .iter()
        .zip(bias.iter())
        .map(|(row, &b)| b + row.iter().zip(input.iter()).map(|(&w, &x)| w * x).sum::<f64>())
        .collect()
}

/// Reference softmax with max subtraction.
pub fn ref_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
