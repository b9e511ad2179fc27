//! In-place radix-2 FFT for power-of-two lengths.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FftError {
    #[error("transform length {0} is not a power of two")]
    Length(usize),
}

/// Precomputed twiddles and bit-reversal table for one length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    // per stage of half-length h, exp(-iπk/h) for k < h, stored back to back
    // starting at offset h - 1; each evaluated directly
    twiddles: Vec<Complex64>,
    inverse_twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl Fft {
    pub fn new(n: usize) -> Result<Self, FftError> {
        if n == 0 || !n.is_power_of_two() || n > u32::MAX as usize {
            return Err(FftError::Length(n));
        }
        let mut twiddles = Vec::with_capacity(n.saturating_sub(1));
        let mut half = 1;
        while half < n {
            twiddles.extend((0..half).map(|k| {
                let a = -PI * k as f64 / half as f64;
                Complex64::new(a.cos(), a.sin())
            }));
            half *= 2;
        }
        let inverse_twiddles = twiddles.iter().map(|w| w.conj()).collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        Ok(Self {
            n,
            twiddles,
            inverse_twiddles,
            bitrev,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `X_k = Σ_j x_j e^{-2πi jk/n}`, unnormalised.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// `x_j = (1/n) Σ_k X_k e^{+2πi jk/n}`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let scale = 1.0 / self.n as f64;
        data.iter_mut().for_each(|x| *x *= scale);
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.n, "buffer length does not match the plan");
        for (i, &j) in self.bitrev.iter().enumerate() {
            let j = j as usize;
            if i < j {
                data.swap(i, j);
            }
        }
        let table = if inverse { &self.inverse_twiddles } else { &self.twiddles };
        let mut half = 1;
        while half < self.n {
            let w = &table[half - 1..2 * half - 1];
            for block in data.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(w) {
                    let t = *b * w;
                    *b = *a - t;
                    *a += t;
                }
            }
            half *= 2;
        }
    }

    /// Angular wavenumbers of the FFT bins for grid spacing `dz`, in the
    /// usual order `0, 1, …, n/2-1, -n/2, …, -1` times `2π/(n dz)`.
    pub fn wavenumbers(&self, dz: f64) -> Vec<f64> {
        let n = self.n as isize;
        let base = 2.0 * PI / (self.n as f64 * dz);
        (0..n)
            .map(|j| if j < n / 2 { j } else { j - n })
            .map(|j| j as f64 * base)
            .collect()
    }
}
