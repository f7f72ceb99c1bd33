//! Radix-2 decimation-in-time FFT.
//!
//! Forward transforms are unnormalised with kernel `e^{-2πi jk/n}`; inverse
//! transforms carry the `1/n` factor.  Multi-dimensional arrays are stored
//! with axis 0 varying fastest: `flat = j₀ + n·j₁ + n²·j₂ + …`.

use alloc::vec::Vec;

use crate::math::{self, C64};
use crate::{Error, Result};

fn check_len(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    Ok(())
}

fn bit_reverse_permute(x: &mut [C64]) {
    let n = x.len();
    let bits = n.trailing_zeros();
    if bits == 0 {
        return;
    }
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            x.swap(i, j);
        }
    }
}

/// In-place transform with kernel `e^{sign·2πi jk/n}`, no scaling.
fn transform_in_place(x: &mut [C64], sign: f64) {
    let n = x.len();
    bit_reverse_permute(x);
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = sign * math::TAU / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                // Twiddles are recomputed rather than chained so rounding
                // error stays at one ulp per factor.
                let w = math::cis(step * k as f64);
                let a = x[start + k];
                let b = x[start + k + half] * w;
                x[start + k] = a + b;
                x[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Forward unnormalised DFT.
pub fn fft(x: &[C64]) -> Result<Vec<C64>> {
    check_len(x.len())?;
    let mut out = x.to_vec();
    transform_in_place(&mut out, -1.0);
    Ok(out)
}

/// Inverse DFT including the `1/n` factor.
pub fn ifft(x: &[C64]) -> Result<Vec<C64>> {
    check_len(x.len())?;
    let mut out = x.to_vec();
    transform_in_place(&mut out, 1.0);
    let s = 1.0 / x.len() as f64;
    for v in &mut out {
        *v *= s;
    }
    Ok(out)
}

fn transform_nd(x: &[C64], n: usize, d: usize, sign: f64) -> Result<Vec<C64>> {
    check_len(n)?;
    let total = n
        .checked_pow(d as u32)
        .ok_or_else(|| Error::InvalidInput("grid too large".into()))?;
    if x.len() != total {
        return Err(Error::GridMismatch(alloc::format!(
            "expected {total} values for n={n}, d={d}, found {}",
            x.len()
        )));
    }
    let mut out = x.to_vec();
    let mut line = alloc::vec![C64::new(0.0, 0.0); n];
    let mut stride = 1;
    for _axis in 0..d {
        for base in 0..total {
            // `base` must have a zero digit on the current axis.
            if (base / stride) % n != 0 {
                continue;
            }
            for (k, slot) in line.iter_mut().enumerate() {
                *slot = out[base + k * stride];
            }
            transform_in_place(&mut line, sign);
            for (k, v) in line.iter().enumerate() {
                out[base + k * stride] = *v;
            }
        }
        stride *= n;
    }
    Ok(out)
}

/// Forward unnormalised DFT applied along each of the `d` axes of an
/// `n^d` array.
pub fn fft_nd(x: &[C64], n: usize, d: usize) -> Result<Vec<C64>> {
    transform_nd(x, n, d, -1.0)
}

/// Inverse of [`fft_nd`], carrying `1/n^d`.
pub fn ifft_nd(x: &[C64], n: usize, d: usize) -> Result<Vec<C64>> {
    let mut out = transform_nd(x, n, d, 1.0)?;
    let s = 1.0 / out.len() as f64;
    for v in &mut out {
        *v *= s;
    }
    Ok(out)
}
