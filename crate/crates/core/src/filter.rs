//! Zero-phase bandpass filtering and analytic-signal envelopes.
//!
//! The bandpass is a linear-phase FIR (ideal band impulse response under a
//! Kaiser window) applied by zero-padded FFT convolution and re-centred, so it
//! introduces no phase shift. Each band edge rolls off over one octave
//! outside the band: the pass band itself is flat to within the design
//! ripple. Samples more than [`Bandpass::half_width`] from either end are
//! free of edge effects.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Result, StressError};

/// Stop-band attenuation of the FIR design, in dB.
pub const ATTENUATION_DB: f64 = 180.0;

pub const MIN_FILTER_LEN: usize = 64;

/// Modified Bessel function of the first kind, order zero.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// A designed bandpass kernel for the band `[lo, hi]` (cycles per sample).
#[derive(Debug, Clone, PartialEq)]
pub struct Bandpass {
    pub lo: f64,
    pub hi: f64,
    taps: Vec<f64>,
}

impl Bandpass {
    pub fn design(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 0.5) {
            return Err(StressError::InvalidParameter(format!(
                "band requires 0 <= lo < hi <= 0.5, got [{lo}, {hi}]"
            )));
        }
        // one octave outside each edge, capped at 0 and Nyquist
        let upper_width = if hi < 0.5 { hi.min(0.5 - hi) } else { 0.0 };
        let lower_width = lo / 2.0;
        let narrowest = [upper_width, lower_width]
            .into_iter()
            .filter(|w| *w > 0.0)
            .fold(f64::INFINITY, f64::min);
        if !narrowest.is_finite() {
            return Ok(Self {
                lo,
                hi,
                taps: vec![1.0],
            });
        }
        let upper_cut = if upper_width > 0.0 { hi + upper_width / 2.0 } else { 0.5 };
        let lower_cut = if lower_width > 0.0 { lo - lower_width / 2.0 } else { 0.0 };

        let beta = 0.1102 * (ATTENUATION_DB - 8.7);
        let len = ((ATTENUATION_DB - 7.95) / (2.285 * 2.0 * PI * narrowest)).ceil() as usize + 1;
        let half = len / 2;
        let norm = bessel_i0(beta);
        let taps = (0..=2 * half)
            .map(|i| {
                let n = i as f64 - half as f64;
                let ideal = 2.0 * upper_cut * sinc(2.0 * upper_cut * n)
                    - 2.0 * lower_cut * sinc(2.0 * lower_cut * n);
                let ratio = n / half as f64;
                ideal * bessel_i0(beta * (1.0 - ratio * ratio).max(0.0).sqrt()) / norm
            })
            .collect();
        Ok(Self { lo, hi, taps })
    }

    /// Samples on each side of the kernel centre.
    pub fn half_width(&self) -> usize {
        self.taps.len() / 2
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Zero-phase filtering; output has the input's length.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() < MIN_FILTER_LEN {
            return Err(StressError::TooShort {
                needed: MIN_FILTER_LEN,
                available: x.len(),
            });
        }
        let n = x.len();
        let has_bin = (0..=n / 2).any(|k| {
            let f = k as f64 / n as f64;
            self.lo <= f && f <= self.hi
        });
        if !has_bin {
            return Err(StressError::EmptyBand {
                lo: self.lo,
                hi: self.hi,
                len: n,
            });
        }
        if self.taps.len() == 1 {
            return Ok(x.iter().map(|v| v * self.taps[0]).collect());
        }
        let size = (n + self.taps.len() - 1).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);

        let mut signal: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        signal.resize(size, Complex64::new(0.0, 0.0));
        let mut kernel: Vec<Complex64> = self.taps.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        kernel.resize(size, Complex64::new(0.0, 0.0));
        forward.process(&mut signal);
        forward.process(&mut kernel);
        for (s, k) in signal.iter_mut().zip(&kernel) {
            *s *= k;
        }
        inverse.process(&mut signal);
        let scale = 1.0 / size as f64;
        let half = self.half_width();
        Ok(signal[half..half + n].iter().map(|c| c.re * scale).collect())
    }
}

/// Bandpass `z` into `[lo, hi]` cycles per sample.
pub fn bandpass(z: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
    Bandpass::design(lo, hi)?.apply(z)
}

/// Magnitude of the analytic signal, built in the frequency domain by
/// doubling positive frequencies and zeroing negative ones.
pub fn instantaneous_amplitude(b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    if n < MIN_FILTER_LEN {
        return Err(StressError::TooShort {
            needed: MIN_FILTER_LEN,
            available: n,
        });
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let positive_end = n.div_ceil(2);
    for c in buf.iter_mut().take(positive_end).skip(1) {
        *c *= 2.0;
    }
    for c in buf.iter_mut().skip(n / 2 + 1) {
        *c = Complex64::new(0.0, 0.0);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(buf.iter().map(|c| (c * scale).norm()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn i0_reference_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        // I0(1) and I0(5) from Abramowitz & Stegun table 9.8
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008).abs() < 1e-14);
        assert!((bessel_i0(5.0) - 27.239_871_823_604_45).abs() < 1e-11);
    }

    #[test]
    fn kernel_is_symmetric_with_unit_passband_gain() {
        let bp = Bandpass::design(0.0, 1.0 / 240.0).unwrap();
        let t = bp.taps();
        assert_eq!(t.len() % 2, 1);
        for i in 0..t.len() / 2 {
            assert_eq!(t[i], t[t.len() - 1 - i]);
        }
        // DC gain of a low-pass kernel
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn full_band_is_identity() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64).sqrt()).collect();
        assert_eq!(bandpass(&x, 0.0, 0.5).unwrap(), x);
    }

    #[test]
    fn rejects_bad_bands() {
        let x = vec![0.0; 128];
        assert!(bandpass(&x, 0.2, 0.1).is_err());
        assert!(bandpass(&x, 0.0, 0.6).is_err());
        assert!(bandpass(&x[..10], 0.0, 0.1).is_err());
        // narrower than one bin at this length
        assert!(matches!(
            bandpass(&x, 0.1001, 0.1002),
            Err(StressError::EmptyBand { .. })
        ));
    }

    #[test]
    fn zero_envelope() {
        assert_eq!(instantaneous_amplitude(&[0.0; 64]).unwrap(), vec![0.0; 64]);
        assert!(instantaneous_amplitude(&[0.0; 10]).is_err());
    }

    #[test]
    fn bin_centred_tone_envelope_is_flat() {
        let n = 256;
        let x: Vec<f64> = (0..n)
            .map(|t| 2.0 * (2.0 * PI * 8.0 * t as f64 / n as f64).cos())
            .collect();
        for v in instantaneous_amplitude(&x).unwrap() {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }
}
