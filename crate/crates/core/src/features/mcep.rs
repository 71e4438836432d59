//! Mel-cepstral envelope analysis on an all-pass warped frequency axis.
//!
//! A frame's mel-cepstrum is the truncated cosine transform of its log
//! amplitude spectrum resampled onto the warped axis. Truncation to
//! `order + 1` coefficients is the envelope smoothing. The same warp
//! tables evaluate the inverse (cepstrum back to a linear-frequency
//! envelope) for the vocoder.

use ndarray::Array2;
use rustfft::{num_complex::Complex, FftPlanner};

use super::{frame_signal, AnalysisConfig, Waveform};
use crate::Result;

/// Precomputed warp tables for one (fft_size, alpha, order) triple.
pub struct MelWarp {
    half: usize,
    order: usize,
    /// cos(pi*m*j/half) for the analysis-side cosine transform.
    analysis_cos: Vec<Vec<f64>>,
    /// cos(m * warp(omega_k)) for envelope reconstruction on linear bins.
    synth_cos: Vec<Vec<f64>>,
    /// Fractional linear-bin position backing each warped bin.
    inv_pos: Vec<f64>,
}

impl MelWarp {
    pub fn new(fft_size: usize, alpha: f64, order: usize) -> Self {
        let half = fft_size / 2;
        let warp = |omega: f64| -> f64 {
            omega + 2.0 * (alpha * omega.sin()).atan2(1.0 - alpha * omega.cos())
        };
        // The warp is monotone on [0, pi]; invert by bisection.
        let inv_warp = |target: f64| -> f64 {
            let (mut lo, mut hi) = (0.0f64, std::f64::consts::PI);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if warp(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let mut inv_pos = vec![0.0; half + 1];
        for (j, p) in inv_pos.iter_mut().enumerate() {
            let target = std::f64::consts::PI * j as f64 / half as f64;
            *p = inv_warp(target) * half as f64 / std::f64::consts::PI;
        }
        inv_pos[0] = 0.0;
        inv_pos[half] = half as f64;

        let mut analysis_cos = Vec::with_capacity(order + 1);
        let mut synth_cos = Vec::with_capacity(order + 1);
        for m in 0..=order {
            let row_a = (0..=half)
                .map(|j| (std::f64::consts::PI * m as f64 * j as f64 / half as f64).cos())
                .collect();
            let row_s = (0..=half)
                .map(|k| {
                    let omega = std::f64::consts::PI * k as f64 / half as f64;
                    (m as f64 * warp(omega)).cos()
                })
                .collect();
            analysis_cos.push(row_a);
            synth_cos.push(row_s);
        }
        MelWarp {
            half,
            order,
            analysis_cos,
            synth_cos,
            inv_pos,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bins(&self) -> usize {
        self.half + 1
    }

    /// Resample a linear-bin log spectrum onto the warped axis.
    pub fn warp_log_spectrum(&self, log_amp: &[f64]) -> Vec<f64> {
        assert_eq!(log_amp.len(), self.half + 1, "log spectrum bin count");
        self.inv_pos
            .iter()
            .map(|&p| cubic_interp(log_amp, p))
            .collect()
    }

    /// Cepstrum of a log amplitude spectrum given on `fft_size/2 + 1`
    /// linear-frequency bins.
    pub fn mcep_from_log_spectrum(&self, log_amp: &[f64]) -> Vec<f64> {
        let warped = self.warp_log_spectrum(log_amp);
        let half = self.half;
        // Cosine transform of the even extension, truncated at `order`.
        let n = (2 * half) as f64;
        let mut mcep = vec![0.0; self.order + 1];
        for (m, c) in mcep.iter_mut().enumerate() {
            let cos_row = &self.analysis_cos[m];
            let mut acc = warped[0] + if m % 2 == 0 { warped[half] } else { -warped[half] };
            for j in 1..half {
                acc += 2.0 * warped[j] * cos_row[j];
            }
            *c = acc / n;
        }
        mcep
    }

    /// The truncated-series envelope on the warped grid itself; the gap to
    /// `warp_log_spectrum` is exactly the truncation residual.
    pub fn warped_envelope_from_mcep(&self, mcep: &[f64]) -> Vec<f64> {
        assert!(mcep.len() <= self.order + 1, "cepstrum longer than tables");
        let mut env = vec![mcep[0]; self.half + 1];
        for (m, &c) in mcep.iter().enumerate().skip(1) {
            let cos_row = &self.analysis_cos[m];
            for (j, e) in env.iter_mut().enumerate() {
                *e += 2.0 * c * cos_row[j];
            }
        }
        env
    }

    /// Log amplitude envelope on linear-frequency bins from a cepstrum row.
    pub fn log_spectrum_from_mcep(&self, mcep: &[f64]) -> Vec<f64> {
        assert!(mcep.len() <= self.order + 1, "cepstrum longer than tables");
        let mut log_amp = vec![mcep[0]; self.half + 1];
        for (m, &c) in mcep.iter().enumerate().skip(1) {
            let cos_row = &self.synth_cos[m];
            for (k, l) in log_amp.iter_mut().enumerate() {
                *l += 2.0 * c * cos_row[k];
            }
        }
        log_amp
    }
}

/// Smoothing bandwidth used for frames without a pitch estimate, full
/// width in Hz.
const UNVOICED_SMOOTH_HZ: f64 = 300.0;

/// Windowed frame -> floored log amplitude envelope on linear bins.
/// One shared path for analysis, tests, and round-trip oracles.
///
/// Voiced frames are smoothed over exactly one harmonic spacing (a
/// rectangular integral of that width sees a flat comb, so the measured
/// envelope is nearly invariant under resynthesis); unvoiced frames use a
/// fixed bandwidth.
pub struct FrameSpectrum {
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    fft_size: usize,
    sample_rate: f64,
    floor: f64,
}

impl FrameSpectrum {
    pub fn new(cfg: &AnalysisConfig) -> Self {
        FrameSpectrum {
            fft: FftPlanner::new().plan_fft_forward(cfg.fft_size),
            fft_size: cfg.fft_size,
            sample_rate: cfg.sample_rate as f64,
            floor: cfg.spectral_floor,
        }
    }

    /// Log amplitude of the smoothed power spectrum, `fft_size/2 + 1`
    /// bins. `f0` selects the pitch-adaptive smoothing width.
    pub fn log_amplitude(&self, frame: &[f64], f0: Option<f64>) -> Vec<f64> {
        assert!(frame.len() <= self.fft_size, "frame longer than fft");
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_size];
        for (i, &s) in frame.iter().enumerate() {
            buf[i] = Complex::new(s, 0.0);
        }
        self.fft.process(&mut buf);
        let half = self.fft_size / 2;
        let power: Vec<f64> = (0..=half).map(|k| buf[k].norm_sqr()).collect();
        let width_hz = f0.unwrap_or(UNVOICED_SMOOTH_HZ);
        let half_bins = 0.5 * width_hz * self.fft_size as f64 / self.sample_rate;
        // Two rectangular passes: a triangular kernel that still averages
        // exactly one spacing per pass.
        let smooth = rect_smooth(&rect_smooth(&power, half_bins), half_bins);
        smooth
            .iter()
            .map(|&p| p.sqrt().max(self.floor).ln())
            .collect()
    }
}

/// Moving average with a fractional half-width, evaluated through the
/// trapezoidal cumulative integral with edge clamping; exact on constants.
fn rect_smooth(power: &[f64], half_width_bins: f64) -> Vec<f64> {
    let n = power.len();
    if half_width_bins <= 0.0 || n < 2 {
        return power.to_vec();
    }
    // cum[i] = integral of the piecewise-linear power from 0 to i.
    let mut cum = vec![0.0; n];
    for i in 1..n {
        cum[i] = cum[i - 1] + 0.5 * (power[i - 1] + power[i]);
    }
    let integral = |x: f64| -> f64 {
        let x = x.clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).min(n - 2);
        let frac = x - i as f64;
        // Integral over [i, i+frac] of the linear segment.
        cum[i] + frac * power[i] + 0.5 * frac * frac * (power[i + 1] - power[i])
    };
    (0..n)
        .map(|k| {
            let lo = (k as f64 - half_width_bins).max(0.0);
            let hi = (k as f64 + half_width_bins).min((n - 1) as f64);
            (integral(hi) - integral(lo)) / (hi - lo)
        })
        .collect()
}

/// Catmull-Rom interpolation with edge clamping.
fn cubic_interp(y: &[f64], pos: f64) -> f64 {
    let n = y.len();
    let pos = pos.clamp(0.0, (n - 1) as f64);
    let i = pos.floor() as usize;
    let t = pos - i as f64;
    if t == 0.0 {
        return y[i];
    }
    let at = |idx: isize| -> f64 { y[idx.clamp(0, (n - 1) as isize) as usize] };
    let (y0, y1, y2, y3) = (
        at(i as isize - 1),
        at(i as isize),
        at(i as isize + 1),
        at(i as isize + 2),
    );
    y1 + 0.5
        * t
        * (y2 - y0 + t * (2.0 * y0 - 5.0 * y1 + 4.0 * y2 - y3 + t * (3.0 * (y1 - y2) + y3 - y0)))
}

/// Per-frame mel-cepstra for a whole waveform. Runs its own pitch pass to
/// drive the pitch-adaptive envelope smoothing.
pub fn extract_mcep(wave: &Waveform, cfg: &AnalysisConfig) -> Result<Array2<f64>> {
    let frames = frame_signal(wave, cfg)?;
    let (f0, vuv) = super::estimate_f0(wave, cfg)?;
    let warp = MelWarp::new(cfg.fft_size, cfg.warp_alpha, cfg.mcep_order);
    let spectrum = FrameSpectrum::new(cfg);
    let mut mcep = Array2::zeros((frames.len(), cfg.mcep_order + 1));
    for (t, frame) in frames.iter().enumerate() {
        let pitch = if vuv[t] { Some(f0[t]) } else { None };
        let log_amp = spectrum.log_amplitude(frame, pitch);
        let row = warp.mcep_from_log_spectrum(&log_amp);
        for (d, &c) in row.iter().enumerate() {
            mcep[[t, d]] = c;
        }
    }
    Ok(mcep)
}
