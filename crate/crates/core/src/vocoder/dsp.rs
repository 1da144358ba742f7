//! FFT plumbing, analysis windows and minimum-phase spectra shared by the
//! estimators and the synthesizer.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct RealFft {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl RealFft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// Spectrum of `x` zero-padded (or truncated) to the transform size.
    pub fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.fwd.process(&mut buf);
        buf
    }

    pub fn forward_complex(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
    }

    /// Inverse transform scaled by 1/n; returns the real part.
    pub fn inverse_real(&self, spec: &[Complex64]) -> Vec<f64> {
        let mut buf = spec.to_vec();
        self.inv.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    /// Power spectrum |X_k|^2 for k in 0..=n/2.
    pub fn power(&self, x: &[f64]) -> Vec<f64> {
        let spec = self.forward(x);
        spec[..=self.n / 2].iter().map(|c| c.norm_sqr()).collect()
    }

    /// Real cepstrum-style inverse of a real, even half spectrum (bins 0..=n/2).
    pub fn inverse_even(&self, half: &[f64]) -> Vec<f64> {
        let spec = mirror(half, self.n);
        self.inverse_real(&spec)
    }

    /// Forward transform of a real, even sequence given by its first n/2+1
    /// samples; the result is real and returned for bins 0..=n/2.
    pub fn forward_even(&self, half: &[f64]) -> Vec<f64> {
        let mut buf = mirror(half, self.n);
        self.fwd.process(&mut buf);
        buf[..=self.n / 2].iter().map(|c| c.re).collect()
    }
}

fn mirror(half: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..=n / 2 {
        buf[k].re = half[k];
    }
    for k in n / 2 + 1..n {
        buf[k].re = half[n - k];
    }
    buf
}

/// Symmetric Hann window of odd length `2 * half + 1`, nonzero at both ends.
pub(crate) fn hann(half: usize) -> Vec<f64> {
    let h = half as f64 + 1.0;
    (0..=2 * half)
        .map(|i| {
            let j = i as f64 - half as f64;
            0.5 + 0.5 * (std::f64::consts::PI * j / h).cos()
        })
        .collect()
}

/// Windowed segment of `x` centred on `center`; samples outside the clip are zero.
pub(crate) fn windowed(x: &[f64], center: usize, window: &[f64]) -> Vec<f64> {
    let half = (window.len() - 1) / 2;
    let start = center as isize - half as isize;
    window
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let idx = start + i as isize;
            if idx >= 0 && (idx as usize) < x.len() {
                x[idx as usize] * w
            } else {
                0.0
            }
        })
        .collect()
}

/// Evaluates the band-limited autocorrelation sum `sum_k w_k P_k cos(2 pi k tau / n)`
/// over bins `lo..hi` at a fractional lag, doubling every bin except DC and Nyquist.
pub(crate) fn acf_at(power: &[f64], lo: usize, hi: usize, n: usize, tau: f64) -> f64 {
    let theta = 2.0 * std::f64::consts::PI * tau / n as f64;
    let step = Complex64::from_polar(1.0, theta);
    let mut phasor = Complex64::from_polar(1.0, theta * lo as f64);
    let mut acc = 0.0;
    let nyq = n / 2;
    for (k, p) in power.iter().enumerate().take(hi).skip(lo) {
        let weight = if k == 0 || k == nyq { 1.0 } else { 2.0 };
        acc += weight * p * phasor.re;
        phasor *= step;
        // Renormalize occasionally to keep the recursion on the unit circle.
        if k % 128 == 127 {
            phasor /= phasor.norm();
        }
    }
    acc
}

/// Complex minimum-phase spectrum whose magnitude is `exp(log_mag)`.
///
/// `log_mag` holds natural-log magnitudes for bins 0..=n/2; the cepstrum is
/// folded onto positive quefrencies before exponentiating.
pub(crate) fn min_phase(fft: &RealFft, log_mag: &[f64]) -> Vec<Complex64> {
    let n = fft.len();
    let cep = fft.inverse_even(log_mag);
    let mut folded = vec![Complex64::new(0.0, 0.0); n];
    folded[0].re = cep[0];
    for q in 1..n / 2 {
        folded[q].re = 2.0 * cep[q];
    }
    folded[n / 2].re = cep[n / 2];
    fft.forward_complex(&mut folded);
    folded.iter().map(|c| c.exp()).collect()
}
