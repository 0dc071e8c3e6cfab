//! Fractional Gaussian noise by circulant embedding (Davies–Harte).

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Autocovariance of unit-step fractional Gaussian noise,
/// `γ(k) = ½(|k+1|^{2H} + |k-1|^{2H} - 2|k|^{2H})`.
pub fn fgn_covariance(h: f64, lag: i64) -> Result<f64> {
    if !(h > 0.5 && h < 1.0) {
        return Err(Error::param(format!("Hurst parameter must lie in (1/2, 1), got {h}")));
    }
    Ok(fgn_autocov(h, lag.unsigned_abs()))
}

/// Same as [`fgn_covariance`] without the range check; valid for any `h` in `(0, 1]`.
pub(crate) fn fgn_autocov(h: f64, lag: u64) -> f64 {
    if lag == 0 {
        return 1.0;
    }
    let k = lag as f64;
    let e = 2.0 * h;
    0.5 * ((k + 1.0).powf(e) + (k - 1.0).powf(e) - 2.0 * k.powf(e))
}

/// Precomputed circulant embedding for fGn samples of a fixed length.
///
/// The embedding has size `2L` with `L` the next power of two at or above the
/// requested length; the first `len` entries of each draw are returned.
pub struct FgnGenerator {
    hurst: f64,
    len: usize,
    half: usize,
    /// `sqrt(λ_k / (2L))`, with the `1/2` split for the paired modes applied at draw time.
    scale: Vec<f64>,
    clipped_modes: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FgnGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FgnGenerator")
            .field("hurst", &self.hurst)
            .field("len", &self.len)
            .field("embedding", &(2 * self.half))
            .field("clipped_modes", &self.clipped_modes)
            .finish()
    }
}

impl FgnGenerator {
    /// Builds the embedding for `len` samples of fGn with Hurst index `hurst ∈ (0, 1)`.
    pub fn new(hurst: f64, len: usize) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::param(format!("fGn Hurst index must lie in (0, 1), got {hurst}")));
        }
        if len == 0 {
            return Err(Error::param("fGn length must be at least 1"));
        }
        let half = len.next_power_of_two().max(2);
        let size = 2 * half;
        let mut row: Vec<Complex64> = (0..size)
            .map(|j| {
                let lag = if j <= half { j } else { size - j };
                Complex64::new(fgn_autocov(hurst, lag as u64), 0.0)
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(size);
        fft.process(&mut row);

        let mut clipped_modes = 0;
        let norm = size as f64;
        let scale = row
            .iter()
            .take(half + 1)
            .map(|c| {
                let mut lambda = c.re;
                // round-off can push exact zeros slightly negative
                if lambda < 0.0 {
                    if lambda < -1e-10 {
                        clipped_modes += 1;
                    }
                    lambda = 0.0;
                }
                (lambda / norm).sqrt()
            })
            .collect();
        if clipped_modes > 0 {
            log::warn!(
                "circulant embedding for H = {hurst}, n = {len} had {clipped_modes} negative \
                 eigenvalues; clipped to zero"
            );
        }
        Ok(Self { hurst, len, half, scale, clipped_modes, fft })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of embedding eigenvalues that were materially negative and clipped.
    /// Nonzero means the draws only approximate the target covariance.
    pub fn clipped_modes(&self) -> usize {
        self.clipped_modes
    }

    /// Draws one unit-variance fGn sample of length `len`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let half = self.half;
        let size = 2 * half;
        let mut buf = vec![Complex64::new(0.0, 0.0); size];
        let z0: f64 = rng.sample(StandardNormal);
        buf[0] = Complex64::new(self.scale[0] * z0, 0.0);
        for k in 1..half {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let s = self.scale[k] * std::f64::consts::FRAC_1_SQRT_2;
            let w = Complex64::new(s * re, s * im);
            buf[k] = w;
            buf[size - k] = w.conj();
        }
        let zh: f64 = rng.sample(StandardNormal);
        buf[half] = Complex64::new(self.scale[half] * zh, 0.0);
        self.fft.process(&mut buf);
        buf.iter().take(self.len).map(|c| c.re).collect()
    }
}
