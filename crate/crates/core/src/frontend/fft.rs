//! Iterative radix-2 decimation-in-time FFT.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A precomputed FFT plan for one power-of-two size.
#[derive(Debug, Clone)]
pub struct Fft {
    size: usize,
    twiddles: Vec<Complex64>,
    bit_reverse: Vec<usize>,
}

impl Fft {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 || !size.is_power_of_two() {
            return Err(Error::FftSizeNotPowerOfTwo(size));
        }
        let bits = size.trailing_zeros();
        let bit_reverse = (0..size)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..size / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / size as f64))
            .collect();
        Ok(Fft {
            size,
            twiddles,
            bit_reverse,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Forward transform in place: X_k = sum_n x_n e^{-2 pi i k n / N}.
    pub fn process(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.size, "buffer length must equal FFT size");
        for (i, &j) in self.bit_reverse.iter().enumerate() {
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.size {
            let half = len / 2;
            let stride = self.size / len;
            for block in buf.chunks_exact_mut(len) {
                let (lo, hi) = block.split_at_mut(half);
                for (k, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let t = self.twiddles[k * stride] * *b;
                    *b = *a - t;
                    *a += t;
                }
            }
            len <<= 1;
        }
    }

    /// |DFT_k|^2 of `frame` zero-padded to the plan size, for k in 0..=N/2.
    pub fn power_spectrum(&self, frame: &[f64]) -> Result<Vec<f64>> {
        if frame.len() > self.size {
            return Err(Error::FrameTooLong {
                frame: frame.len(),
                fft_size: self.size,
            });
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.size];
        for (slot, &x) in buf.iter_mut().zip(frame) {
            slot.re = x;
        }
        self.process(&mut buf);
        Ok(buf[..=self.size / 2].iter().map(|c| c.norm_sqr()).collect())
    }
}

/// One-shot power spectrum; builds a plan for `fft_size`.
pub fn power_spectrum(frame: &[f64], fft_size: usize) -> Result<Vec<f64>> {
    Fft::new(fft_size)?.power_spectrum(frame)
}
